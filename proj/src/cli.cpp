#include "nhdp/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nhdp/corpus.hpp"
#include "nhdp/error.hpp"
#include "nhdp/eval.hpp"
#include "nhdp/gibbs_crf.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "nhdp/randdist.hpp"
#include "nhdp/state.hpp"
#include "nhdp/synth.hpp"

namespace nhdp {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Typed view over the merged configuration of one verb.
class Settings {
 public:
  explicit Settings(ConfigMap values) : values_(std::move(values)) {}

  const std::string& str(const std::string& key) const { return values_.at(key); }
  bool has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  double num(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, key + ": expected a number, got '" + v + "'");
  }

  std::uint64_t count(const std::string& key) const { return parse_count(key, str(key)); }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key, key + ": expected true or false, got '" + v + "'");
  }

  std::vector<double> nums(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(str(key))) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError(key, key + ": expected a comma-separated list of numbers, got '" + str(key) + "'");
      }
    }
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(str(key))) out.push_back(parse_count(key, item));
    return out;
  }

 private:
  static std::uint64_t parse_count(const std::string& key, const std::string& v) {
    if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos) {
      try {
        return std::stoull(v);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError(key, key + ": expected a nonnegative integer, got '" + v + "'");
  }

  ConfigMap values_;
};

struct Verb {
  std::string name;
  std::string help;
  ConfigMap defaults;
  std::string seed_key;  // overridden by NHDP_SEED
};

const std::vector<Verb>& verbs() {
  static const std::vector<Verb> table = {
      {"train",
       "run a Gibbs sampler and write checkpoints plus metrics.csv into `out`",
       {{"corpus", ""},
        {"format", "jsonl"},
        {"vocab", ""},
        {"scheme", "direct"},
        {"L", "1"},
        {"regime", "auto"},
        {"seeds", "1"},
        {"sweeps", "1000"},
        {"burn_in", "500"},
        {"thinning", "10"},
        {"eta", "0.1"},
        {"alpha", "1"},
        {"gamma", "1"},
        {"alpha_prior", "1,1"},
        {"gamma_prior", "1,1"},
        {"epsilon_bias", "0.1"},
        {"checkpoint_every", "100"},
        {"out", "run"},
        {"split", "1"},
        {"split_seed", ""},
        {"p_g", "0"},
        {"p_l", "0"},
        {"hide", ""},
        {"resample_hyper", "true"},
        {"truncation", ""},
        {"resume", ""},
        {"save_samples", "true"}},
       "seeds"},
      {"eval",
       "score checkpoints: held-out perplexity or hidden-entity NMI",
       {{"checkpoints", ""},
        {"mode", "perplexity"},
        {"test", ""},
        {"vocab", ""},
        {"authors", ""},
        {"doc_ids", ""},
        {"gold", ""},
        {"hidden", ""},
        {"fold_sweeps", "20"},
        {"seed", "1"},
        {"out", "-"}},
       "seed"},
      {"bench",
       "time the direct sampler against the table-based two-level sampler",
       {{"corpus", ""},
        {"format", "jsonl"},
        {"vocab", ""},
        {"docs", "100"},
        {"doc_length", "50"},
        {"sweeps", "20"},
        {"seed", "1"},
        {"eta", "0.1"},
        {"alpha", "1"},
        {"gamma", "1"},
        {"out", "-"}},
       "seed"},
      {"synth",
       "generate a synthetic multi-author corpus with gold labels",
       {{"entities", "5"},
        {"topics", "8"},
        {"vocab", "50"},
        {"docs", "100"},
        {"doc_length", "50"},
        {"max_authors", "2"},
        {"topic_eta", "0.05"},
        {"gamma0", "8"},
        {"alpha0", "1"},
        {"doc_alpha", "1"},
        {"seed", "1"},
        {"out", "synth"}},
       "seed"},
  };
  return table;
}

// -- shared helpers --------------------------------------------------------------

std::vector<double> per_level(const Settings& s, const std::string& key, int levels) {
  auto v = s.nums(key);
  if (v.size() == 1) v.assign(static_cast<std::size_t>(levels), v.front());
  if (v.size() != static_cast<std::size_t>(levels))
    throw ConfigError(key, key + ": give one value or one per level (" + std::to_string(levels) + ")");
  return v;
}

std::vector<GammaPrior> priors(const Settings& s, const std::string& key, int levels) {
  const auto v = s.nums(key);
  std::vector<GammaPrior> out;
  if (v.size() == 2) {
    out.assign(static_cast<std::size_t>(levels), GammaPrior{v[0], v[1]});
  } else if (v.size() == 2 * static_cast<std::size_t>(levels)) {
    for (std::size_t l = 0; l < v.size(); l += 2) out.push_back(GammaPrior{v[l], v[l + 1]});
  } else {
    throw ConfigError(key, key + ": expected shape,rate (once, or once per level)");
  }
  return out;
}

Hyper make_hyper(const Settings& s, int depth) {
  const int levels = depth + 1;
  Hyper h = Hyper::with_depth(depth);
  h.eta = s.num("eta");
  h.alpha = per_level(s, "alpha", levels);
  h.gamma = per_level(s, "gamma", levels);
  if (s.has("alpha_prior")) h.alpha_prior = priors(s, "alpha_prior", levels);
  if (s.has("gamma_prior")) h.gamma_prior = priors(s, "gamma_prior", levels);
  if (s.has("epsilon_bias")) h.epsilon_bias = s.num("epsilon_bias");
  h.check();
  return h;
}

std::pair<Corpus, AuthorLabels> load_corpus(const Settings& s) {
  if (!s.has("corpus")) throw ConfigError("corpus", "corpus: path required");
  const std::string& format = s.str("format");
  if (format == "jsonl") return load_jsonl_corpus(s.str("corpus"));
  if (format == "bow") {
    if (!s.has("vocab")) throw ConfigError("vocab", "vocab: required for format bow");
    Corpus c = load_bow_corpus(s.str("corpus"), s.str("vocab"));
    AuthorLabels labels = AuthorLabels::unlabeled(c.num_docs());
    return {std::move(c), std::move(labels)};
  }
  throw ConfigError("format", "format: expected jsonl or bow, got '" + format + "'");
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const fs::path& path) { return load_vocab(path); }

void write_records(const std::string& out, const std::vector<MetricRecord>& records) {
  if (out == "-")
    std::cout << metrics_csv(records);
  else
    write_metrics_csv(out, records);
}

std::string chain_file(const fs::path& dir, std::size_t chain, const std::string& suffix) {
  return (dir / ("chain" + std::to_string(chain) + suffix)).string();
}

// -- train -----------------------------------------------------------------------

struct TrainJob {
  Corpus corpus;
  AuthorLabels labels;
  Hyper hyper;
  StateOptions options;
  std::string scheme;
  fs::path out;
  std::uint64_t sweeps = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thinning = 1;
  std::uint64_t checkpoint_every = 0;
  bool resample_hyper = true;
  bool save_samples = true;
  std::string resume;
};

struct ChainResult {
  std::vector<MetricRecord> records;
  std::exception_ptr error;
};

constexpr std::uint64_t kChainStream = 0;
constexpr std::uint64_t kConvertStream = 0x434f4e56;

std::string sample_name(std::uint64_t sweep) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), ".sample%06llu.ckpt", static_cast<unsigned long long>(sweep));
  return buf;
}

bool keep_sample(const TrainJob& job, std::uint64_t done) {
  return job.save_samples && done > job.burn_in && (done - job.burn_in) % job.thinning == 0;
}

bool checkpoint_due(const TrainJob& job, std::uint64_t done) {
  return job.checkpoint_every > 0 && done % job.checkpoint_every == 0;
}

void run_direct_chain(const TrainJob& job, std::size_t chain, std::uint64_t seed, ChainResult& result) {
  const std::string regime(to_string(job.options.regime));
  Rng rng(seed, kChainStream);
  ModelState state;
  if (!job.resume.empty()) {
    Checkpoint ck = load_checkpoint(job.resume);
    if (ck.state.vocab_size() != job.corpus.vocab_size() || ck.state.num_tokens() != job.corpus.num_tokens() ||
        ck.state.num_docs() != job.corpus.num_docs())
      throw ArgumentError("resume: checkpoint " + job.resume + " was trained on a different corpus");
    if (ck.state.regime() != job.options.regime)
      throw ArgumentError("resume: checkpoint regime " + std::string(to_string(ck.state.regime())) +
                          " differs from the configured " + regime);
    state = std::move(ck.state);
    rng = ck.rng;
  } else {
    state = new_state(job.corpus, job.labels, job.hyper, rng, job.options);
    save_checkpoint(state, rng, chain_file(job.out, chain, ".ckpt"));
  }

  SweepOptions opts;
  opts.resample_concentrations = job.resample_hyper;
  ModelState last_valid = state;
  Rng last_rng = rng;
  while (state.sweeps_done() < job.sweeps) {
    SweepStats stats;
    try {
      stats = sweep(state, job.labels, rng, opts);
      if (const auto report = validate(state); !report)
        throw InvariantError(report.invariant + ": " + report.detail);
    } catch (const InvariantError& e) {
      const std::string path = chain_file(job.out, chain, ".failed.ckpt");
      save_checkpoint(last_valid, last_rng, path);
      throw InvariantError(std::string(e.what()) + " (chain " + std::to_string(chain) + " at sweep " +
                           std::to_string(last_valid.sweeps_done() + 1) + "; last valid state in " + path + ")");
    }
    last_valid = state;
    last_rng = rng;

    const auto done = static_cast<std::int64_t>(state.sweeps_done());
    auto add = [&](std::string name, double value) {
      result.records.push_back(MetricRecord{std::move(name), value, seed, regime, done, stats.wall_ms});
    };
    add("train.log_likelihood", stats.log_likelihood);
    add("train.log_prior", stats.log_prior);
    for (std::size_t l = 0; l < stats.dishes.size(); ++l) {
      add("train.K" + std::to_string(l), static_cast<double>(stats.dishes[l]));
      add("train.alpha" + std::to_string(l), state.hyper().alpha[l]);
      add("train.gamma" + std::to_string(l), state.hyper().gamma[l]);
    }
    if (checkpoint_due(job, state.sweeps_done())) save_checkpoint(state, rng, chain_file(job.out, chain, ".ckpt"));
    if (keep_sample(job, state.sweeps_done()))
      save_checkpoint(state, rng, chain_file(job.out, chain, sample_name(state.sweeps_done())));
  }
  save_checkpoint(state, rng, chain_file(job.out, chain, ".ckpt"));
}

// Table-based schemes checkpoint an equivalent direct-assignment state; the
// seating itself is not persisted, so these runs cannot be resumed.
template <class Crf, class Convert, class Check>
void run_crf_chain(const TrainJob& job, std::size_t chain, std::uint64_t seed, Crf crf, Rng& rng, Convert convert,
                   Check check, ChainResult& result) {
  const std::string regime(to_string(Regime::kNone));
  auto save = [&](const std::string& path, std::uint64_t done) {
    Rng conv = rng.substream(kConvertStream + done);
    ModelState s = convert(crf, conv);
    s.set_sweeps_done(done);
    save_checkpoint(s, rng, path);
  };
  save(chain_file(job.out, chain, ".ckpt"), 0);
  for (std::uint64_t done = 1; done <= job.sweeps; ++done) {
    const CrfStats stats = crf_sweep(crf, rng);
    if (const std::string problem = check(crf); !problem.empty())
      throw InvariantError("chain " + std::to_string(chain) + " at sweep " + std::to_string(done) + ": " + problem);
    const auto d = static_cast<std::int64_t>(done);
    auto add = [&](std::string name, double value) {
      result.records.push_back(MetricRecord{std::move(name), value, seed, regime, d, stats.wall_ms});
    };
    add("train.K0", static_cast<double>(stats.dishes));
    add("train.tables", static_cast<double>(stats.tables));
    if (stats.entities > 0) add("train.K1", static_cast<double>(stats.entities));
    if (checkpoint_due(job, done)) save(chain_file(job.out, chain, ".ckpt"), done);
    if (keep_sample(job, done)) save(chain_file(job.out, chain, sample_name(done)), done);
  }
  save(chain_file(job.out, chain, ".ckpt"), job.sweeps);
}

void run_chain(const TrainJob& job, std::size_t chain, std::uint64_t seed, ChainResult& result) {
  try {
    if (job.scheme == "direct") {
      run_direct_chain(job, chain, seed, result);
    } else if (job.scheme == "crf-hdp") {
      Rng rng(seed, kChainStream);
      const Hyper& h = job.hyper;
      HdpCrfState crf = hdp_crf_init(job.corpus, h.alpha[0], h.gamma[0], h.eta, rng);
      run_crf_chain(
          job, chain, seed, std::move(crf), rng,
          [&](const HdpCrfState& c, Rng& r) { return to_model_state(c, job.corpus, h, r); },
          [](const HdpCrfState& c) { return crf_check(c); }, result);
    } else {
      Rng rng(seed, kChainStream);
      const Hyper& h = job.hyper;
      const Corpus pooled = job.corpus.flattened();
      U2CrfState crf = u2_crf_init(pooled, h.alpha[0], h.gamma[0], h.gamma[1], h.eta, rng);
      run_crf_chain(
          job, chain, seed, std::move(crf), rng,
          [&](const U2CrfState& c, Rng& r) {
            std::vector<std::vector<std::int32_t>> z(2, std::vector<std::int32_t>(c.words.size()));
            for (std::size_t i = 0; i < c.words.size(); ++i) {
              const auto e = static_cast<std::size_t>(c.entity_of[i]);
              z[1][i] = c.entity_of[i];
              z[0][i] = c.tables[e][static_cast<std::size_t>(c.table_of[i])].dish;
            }
            return state_from_assignments(pooled, h, z, r);
          },
          [](const U2CrfState& c) { return crf_check(c); }, result);
    }
  } catch (...) {
    result.error = std::current_exception();
  }
}

int cmd_train(const Settings& s) {
  const std::string scheme = s.str("scheme");
  if (scheme != "direct" && scheme != "crf-hdp" && scheme != "ncrf-u2")
    throw ConfigError("scheme", "scheme: expected direct, crf-hdp or ncrf-u2, got '" + scheme + "'");
  const auto depth_value = s.count("L");
  if (depth_value > 16) throw ConfigError("L", "L: at most 16 levels above the topics");
  const int depth = static_cast<int>(depth_value);
  if (scheme == "crf-hdp" && depth != 0) throw ConfigError("L", "L: scheme crf-hdp is the single-level HDP (L=0)");
  if (scheme == "ncrf-u2" && depth != 1) throw ConfigError("L", "L: scheme ncrf-u2 needs L=1");

  TrainJob job;
  job.scheme = scheme;
  job.hyper = make_hyper(s, depth);
  job.sweeps = s.count("sweeps");
  job.burn_in = s.count("burn_in");
  job.thinning = s.count("thinning");
  if (job.thinning == 0) throw ConfigError("thinning", "thinning: must be >= 1");
  job.checkpoint_every = s.count("checkpoint_every");
  job.resample_hyper = s.flag("resample_hyper");
  job.save_samples = s.flag("save_samples");
  job.resume = s.str("resume");
  job.out = s.str("out");
  const auto seeds = s.counts("seeds");
  if (seeds.empty()) throw ConfigError("seeds", "seeds: at least one seed required");
  if (!job.resume.empty() && scheme != "direct")
    throw ConfigError("resume", "resume: only scheme direct checkpoints its full sampler state");
  if (!job.resume.empty() && seeds.size() != 1) throw ConfigError("resume", "resume: continues a single chain");

  if (s.has("truncation")) {
    auto t = s.counts("truncation");
    if (t.size() == 1) t.assign(static_cast<std::size_t>(depth + 1), t.front());
    if (t.size() != static_cast<std::size_t>(depth + 1))
      throw ConfigError("truncation", "truncation: give one value or one per level");
    if (std::any_of(t.begin(), t.end(), [](auto k) { return k > 0; })) {
      if (scheme != "direct") throw ConfigError("truncation", "truncation: only scheme direct supports it");
      job.options.truncation.assign(t.begin(), t.end());
    }
  }

  auto [corpus, labels] = load_corpus(s);
  corpus.check();
  if (corpus.doc_ids.empty())
    for (std::size_t j = 0; j < corpus.num_docs(); ++j) corpus.doc_ids.push_back("d" + std::to_string(j));
  const std::uint64_t split_seed = s.has("split_seed") ? s.count("split_seed") : seeds.front();

  Split split;
  const double p_train = s.num("split");
  if (p_train < 1.0) {
    split = author_vote_split(corpus, labels, p_train, split_seed);
  } else {
    for (std::size_t j = 0; j < corpus.num_docs(); ++j) split.train.push_back(j);
  }
  if (split.train.empty()) throw ArgumentError("split: no training documents left");

  AuthorLabels masked = labels;
  if (s.has("hide")) {
    std::vector<AuthorId> hidden;
    for (const auto& name : split_list(s.str("hide"))) {
      const auto it = std::find(labels.names.begin(), labels.names.end(), name);
      if (it == labels.names.end()) throw ConfigError("hide", "hide: unknown author '" + name + "'");
      hidden.push_back(static_cast<AuthorId>(it - labels.names.begin()));
    }
    masked = hide_authors(masked, hidden);
  }
  const double p_g = s.num("p_g");
  const double p_l = s.num("p_l");
  if (p_g > 0.0 || p_l > 0.0) masked = mask_authors(masked, p_g, p_l, split_seed);

  Regime regime = masked.regime;
  if (s.str("regime") != "auto") {
    try {
      regime = parse_regime(s.str("regime"));
    } catch (const std::exception&) {
      throw ConfigError("regime", "regime: expected auto, none, partial or complete, got '" + s.str("regime") + "'");
    }
  }
  if (scheme != "direct" && regime != Regime::kNone) {
    if (s.str("regime") != "auto") throw ConfigError("regime", "regime: table-based schemes ignore entities");
    regime = Regime::kNone;
  }
  if (regime != Regime::kNone && masked.names.empty())
    throw ArgumentError("regime " + std::string(to_string(regime)) + ": the corpus carries no author labels");

  job.corpus = corpus.subset(split.train);
  job.labels = masked.subset(split.train);
  job.labels.regime = regime;
  if (regime == Regime::kNone) job.labels = AuthorLabels::unlabeled(job.corpus.num_docs());
  if (regime == Regime::kComplete)
    for (std::size_t j = 0; j < job.labels.known.size(); ++j)
      if (job.labels.known[j].empty())
        throw ArgumentError("regime complete: training document " + job.corpus.doc_ids[j] + " has no known author");
  job.options.regime = regime;

  fs::create_directories(job.out);
  write_vocab(job.out / "vocab.txt", corpus.vocab);
  write_lines(job.out / "authors.txt", labels.names);
  std::vector<std::string> hidden_names;
  for (AuthorId a : masked.global_hidden) hidden_names.push_back(labels.names.at(static_cast<std::size_t>(a)));
  write_lines(job.out / "hidden.txt", hidden_names);
  write_lines(job.out / "doc_ids.txt", job.corpus.doc_ids);
  write_jsonl_corpus(job.out / "train.jsonl", job.corpus, job.labels);
  {
    AuthorLabels test_labels = masked.subset(split.test);
    if (regime == Regime::kNone) test_labels = AuthorLabels::unlabeled(split.test.size());
    write_jsonl_corpus(job.out / "test.jsonl", corpus.subset(split.test), test_labels);
  }

  std::vector<ChainResult> results(seeds.size());
  if (seeds.size() == 1) {
    run_chain(job, 0, seeds[0], results[0]);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t c = 0; c < seeds.size(); ++c)
      workers.emplace_back([&, c] { run_chain(job, c, seeds[c], results[c]); });
    for (auto& w : workers) w.join();
  }
  for (auto& r : results)
    if (r.error) std::rethrow_exception(r.error);

  std::vector<MetricRecord> records;
  for (auto& r : results) records.insert(records.end(), r.records.begin(), r.records.end());
  write_metrics_csv(job.out / "metrics.csv", records);
  return kExitOk;
}

// -- eval ------------------------------------------------------------------------

std::vector<PosteriorSample> load_samples(const Settings& s) {
  const auto paths = split_list(s.str("checkpoints"));
  if (paths.empty()) throw ConfigError("checkpoints", "checkpoints: at least one checkpoint required");
  std::vector<PosteriorSample> samples;
  for (const auto& p : paths) {
    Checkpoint ck = load_checkpoint(p);
    if (!samples.empty()) {
      const auto& first = samples.front().state;
      if (ck.state.vocab_size() != first.vocab_size())
        throw ArgumentError("vocabulary size mismatch: " + paths.front() + " has " +
                            std::to_string(first.vocab_size()) + " words, " + p + " has " +
                            std::to_string(ck.state.vocab_size()));
      if (ck.state.depth() != first.depth() || ck.state.regime() != first.regime())
        throw ArgumentError("checkpoints disagree on depth or regime: " + paths.front() + " vs " + p);
    }
    const auto sweep = ck.state.sweeps_done();
    samples.push_back(PosteriorSample{std::move(ck.state), sweep});
  }
  return samples;
}

int eval_perplexity(const Settings& s, const std::vector<PosteriorSample>& samples) {
  if (!s.has("test")) throw ConfigError("test", "test: held-out corpus required for mode perplexity");
  if (!s.has("vocab")) throw ConfigError("vocab", "vocab: training vocabulary required for mode perplexity");
  const auto vocab = load_vocab(s.str("vocab"));
  const ModelState& first = samples.front().state;
  if (vocab.size() != first.vocab_size())
    throw ArgumentError("vocabulary size mismatch: checkpoint has " + std::to_string(first.vocab_size()) +
                        " words, " + s.str("vocab") + " has " + std::to_string(vocab.size()));

  auto [test, test_labels] = load_jsonl_corpus(s.str("test"), vocab);
  AuthorLabels labels = AuthorLabels::unlabeled(test.num_docs());
  if (s.has("authors") && test_labels.regime != Regime::kNone && first.regime() != Regime::kNone) {
    labels.names = read_lines(s.str("authors"));
    for (std::size_t j = 0; j < test.num_docs(); ++j) {
      for (AuthorId a : test_labels.known[j]) {
        const auto& name = test_labels.names.at(static_cast<std::size_t>(a));
        const auto it = std::find(labels.names.begin(), labels.names.end(), name);
        if (it != labels.names.end()) labels.known[j].push_back(static_cast<AuthorId>(it - labels.names.begin()));
      }
      std::sort(labels.known[j].begin(), labels.known[j].end());
    }
    labels.regime = labels.infer_regime();
    if (labels.regime == Regime::kComplete && first.regime() == Regime::kPartial) labels.regime = Regime::kPartial;
  }

  const std::uint64_t seed = s.count("seed");
  const PerplexityResult r = perplexity(samples, test, labels, s.count("fold_sweeps"), seed);
  const std::string regime(to_string(first.regime()));
  std::int64_t sweep = 0;
  for (const auto& p : samples) sweep = std::max(sweep, static_cast<std::int64_t>(p.sweep));
  std::vector<MetricRecord> records = {
      {"perplexity", r.perplexity, seed, regime, sweep, 0.0},
      {"heldout_log_likelihood", r.log_likelihood, seed, regime, sweep, 0.0},
      {"heldout_tokens", static_cast<double>(r.heldout_tokens), seed, regime, sweep, 0.0},
      {"oov_tokens", static_cast<double>(r.oov_tokens), seed, regime, sweep, 0.0},
  };
  write_records(s.str("out"), records);
  return kExitOk;
}

int eval_nmi(const Settings& s, const std::vector<PosteriorSample>& samples) {
  if (!s.has("gold")) throw ConfigError("gold", "gold: nmi mode needs gold contribution vectors");
  if (!s.has("hidden")) throw ConfigError("hidden", "hidden: name the hidden authors to score");
  const GoldContributions gold = load_gold_contributions(s.str("gold"));
  const ModelState& first = samples.front().state;
  if (first.depth() < 1) throw ArgumentError("nmi: checkpoints need at least one level above the topics");

  // Column of the gold vectors for every training document.
  std::vector<std::size_t> columns;
  if (s.has("doc_ids")) {
    if (gold.doc_ids.empty()) throw ArgumentError("nmi: gold file has no doc_ids to align " + s.str("doc_ids"));
    for (const auto& id : read_lines(s.str("doc_ids"))) {
      const auto it = std::find(gold.doc_ids.begin(), gold.doc_ids.end(), id);
      if (it == gold.doc_ids.end()) throw ArgumentError("nmi: document " + id + " missing from the gold file");
      columns.push_back(static_cast<std::size_t>(it - gold.doc_ids.begin()));
    }
  } else {
    for (std::size_t j = 0; j < first.num_docs(); ++j) columns.push_back(j);
  }
  if (columns.size() != first.num_docs())
    throw ArgumentError("nmi: checkpoint has " + std::to_string(first.num_docs()) + " documents, alignment gives " +
                        std::to_string(columns.size()));

  std::vector<std::vector<double>> truth;
  for (const auto& name : split_list(s.str("hidden"))) {
    const auto it = std::find(gold.authors.begin(), gold.authors.end(), name);
    if (it == gold.authors.end()) throw ConfigError("hidden", "hidden: author '" + name + "' not in the gold file");
    const auto& row = gold.vectors[static_cast<std::size_t>(it - gold.authors.begin())];
    std::vector<double> v;
    for (std::size_t c : columns) {
      if (c >= row.size()) throw ArgumentError("nmi: gold vector for " + name + " is too short");
      v.push_back(row[c]);
    }
    truth.push_back(std::move(v));
  }

  const std::uint64_t seed = s.count("seed");
  const std::string regime(to_string(first.regime()));
  std::vector<MetricRecord> records;
  double total = 0.0;
  for (const auto& sample : samples) {
    std::vector<std::vector<double>> discovered;
    const auto contrib = extract_contributions(sample);
    for (std::size_t k = 0; k < contrib.size(); ++k) {
      if (sample.state.pinned(k)) continue;
      if (std::all_of(contrib[k].begin(), contrib[k].end(), [](double v) { return v == 0.0; })) continue;
      discovered.push_back(contrib[k]);
    }
    // Nothing discovered beyond the labeled entities explains nothing.
    const double nmi = discovered.empty() ? 0.0 : nmi_hidden_authors(truth, discovered);
    total += nmi;
    records.push_back({"nmi", nmi, seed, regime, static_cast<std::int64_t>(sample.sweep), 0.0});
  }
  if (samples.size() > 1)
    records.push_back({"nmi.mean", total / static_cast<double>(samples.size()), seed, regime, -1, 0.0});
  write_records(s.str("out"), records);
  return kExitOk;
}

int cmd_eval(const Settings& s) {
  const std::string& mode = s.str("mode");
  if (mode != "perplexity" && mode != "nmi")
    throw ConfigError("mode", "mode: expected perplexity or nmi, got '" + mode + "'");
  if (mode == "nmi" && !s.has("gold")) throw ConfigError("gold", "gold: nmi mode needs gold contribution vectors");
  const auto samples = load_samples(s);
  return mode == "perplexity" ? eval_perplexity(s, samples) : eval_nmi(s, samples);
}

// -- bench / synth ----------------------------------------------------------------

int cmd_bench(const Settings& s) {
  Corpus corpus;
  if (s.has("corpus")) {
    corpus = load_corpus(s).first;
  } else {
    SynthConfig cfg;
    cfg.docs = s.count("docs");
    cfg.doc_length = s.count("doc_length");
    cfg.seed = s.count("seed");
    corpus = synthesize(cfg).corpus;
  }
  const Hyper hyper = make_hyper(s, 1);
  write_records(s.str("out"), benchmark_schemes(corpus, hyper, s.count("sweeps"), s.count("seed")));
  return kExitOk;
}

int cmd_synth(const Settings& s) {
  SynthConfig cfg;
  cfg.entities = s.count("entities");
  cfg.topics = s.count("topics");
  cfg.vocab = s.count("vocab");
  cfg.docs = s.count("docs");
  cfg.doc_length = s.count("doc_length");
  cfg.max_authors = s.count("max_authors");
  cfg.topic_eta = s.num("topic_eta");
  cfg.gamma0 = s.num("gamma0");
  cfg.alpha0 = s.num("alpha0");
  cfg.doc_alpha = s.num("doc_alpha");
  cfg.seed = s.count("seed");
  const SynthData data = synthesize(cfg);
  const fs::path out = s.str("out");
  fs::create_directories(out);
  write_jsonl_corpus(out / "corpus.jsonl", data.corpus, data.labels);
  write_vocab(out / "vocab.txt", data.corpus.vocab);
  write_gold_json(out / "gold.json", data);
  return kExitOk;
}

void print_usage(std::ostream& out) {
  out << "usage: nhdp <verb> [--config FILE] [--key VALUE ...]\n\nverbs:\n";
  for (const auto& v : verbs()) out << "  " << v.name << "  " << v.help << '\n';
  out << "\nnhdp <verb> --help lists the keys of a verb. NHDP_SEED overrides the seed.\n";
}

}  // namespace

ConfigMap read_config(const std::filesystem::path& path, const std::set<std::string>& known) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  ConfigMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string(), lineno, "expected key = value");
    const std::string key = normalize_key(trim(line.substr(0, eq)));
    if (!known.count(key)) throw ConfigError(key, "unknown config key '" + key + "' in " + path.string());
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

int run_cli(int argc, const char* const* argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  const std::string verb_name = argv[1];
  if (verb_name == "-h" || verb_name == "--help") {
    print_usage(std::cout);
    return kExitOk;
  }
  const auto& table = verbs();
  const auto verb = std::find_if(table.begin(), table.end(), [&](const Verb& v) { return v.name == verb_name; });
  if (verb == table.end()) {
    std::cerr << "nhdp: unknown verb '" << verb_name << "'\n";
    print_usage(std::cerr);
    return kExitUsage;
  }

  CLI::App app{verb->help, "nhdp " + verb->name};
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value file; flags override it");
  std::map<std::string, std::string> flags;
  std::vector<std::string> checkpoints;
  std::set<std::string> known;
  for (const auto& [key, def] : verb->defaults) {
    known.insert(key);
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    if (key == "checkpoints") {
      app.add_option("--checkpoint,--checkpoints", checkpoints, "checkpoint file (repeatable)");
      continue;
    }
    app.add_option(names, flags[key], def.empty() ? std::string() : "default: " + def)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ConfigMap merged = verb->defaults;
    if (!config_path.empty())
      for (auto& [k, v] : read_config(config_path, known)) merged[k] = v;
    for (const auto& [key, value] : flags)
      if (app.count("--" + key) > 0) merged[key] = value;
    if (!checkpoints.empty()) {
      std::string joined;
      for (const auto& c : checkpoints) joined += (joined.empty() ? "" : ",") + c;
      merged["checkpoints"] = joined;
    }
    if (const char* env = std::getenv("NHDP_SEED"); env != nullptr && *env != '\0') merged[verb->seed_key] = env;

    const Settings settings(std::move(merged));
    if (verb->name == "train") return cmd_train(settings);
    if (verb->name == "eval") return cmd_eval(settings);
    if (verb->name == "bench") return cmd_bench(settings);
    return cmd_synth(settings);
  } catch (const ConfigError& e) {
    std::cerr << "nhdp: config key '" << e.key() << "': " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "nhdp: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "nhdp: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvariantError& e) {
    std::cerr << "nhdp: invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "nhdp: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace nhdp

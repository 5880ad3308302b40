#include "nhdp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nhdp/emission.hpp"
#include "nhdp/error.hpp"
#include "nhdp/gibbs_crf.hpp"
#include "nhdp/gibbs_direct.hpp"

namespace nhdp {

namespace {

struct Prepared {
  const ModelState* state = nullptr;
  EmissionTable top;           // rows: top-level dishes, then the new-dish row
  std::vector<double> prior;   // alpha * beta_k, alpha * beta_new last
};

Prepared prepare(const ModelState& s, bool parallel) {
  Prepared p;
  p.state = &s;
  const int L = s.depth();
  p.top = parallel ? emission_table(s, L) : emission_table_serial(s, L);
  const double a = s.hyper().alpha[L];
  for (std::size_t k = 0; k < s.num_dishes(L); ++k) p.prior.push_back(a * s.beta(L, k));
  p.prior.push_back(a * s.beta_new(L));
  return p;
}

// Which top-level rows a test document may use, and the additive bias of each.
void document_support(const ModelState& s, std::span<const AuthorId> known, Regime regime, std::vector<char>& allowed,
                      std::vector<double>& bias) {
  const std::size_t K = s.num_dishes(s.depth());
  allowed.assign(K + 1, 1);
  bias.assign(K + 1, 0.0);
  if (s.regime() == Regime::kNone || regime == Regime::kNone || known.empty()) return;
  auto is_known = [&](std::size_t k) {
    const AuthorId a = s.dish_author(k);
    return a != kNoAuthor && std::binary_search(known.begin(), known.end(), a);
  };
  if (regime == Regime::kPartial) {
    for (std::size_t k = 0; k < K; ++k)
      if (is_known(k)) bias[k] = s.hyper().epsilon_bias;
    return;
  }
  bool any = false;
  for (std::size_t k = 0; k < K; ++k) {
    allowed[k] = is_known(k) ? 1 : 0;
    any = any || allowed[k];
  }
  // Authors never seen in training have no dish yet; they can only be a new one.
  bool unseen = false;
  for (AuthorId a : known) unseen = unseen || s.dish_for_author(a) == kNewDish;
  allowed[K] = unseen ? 1 : 0;
  if (!any && !unseen) std::fill(allowed.begin(), allowed.end(), 1);
}

// Fold in the even tokens of one document, then write p(w) of every odd token to `out`.
void complete_document(const Prepared& p, const std::vector<WordId>& doc, std::span<const AuthorId> known,
                       Regime regime, std::size_t fold_sweeps, Rng rng, double* out, std::size_t* oov) {
  const ModelState& s = *p.state;
  const std::size_t V = s.vocab_size();
  const std::size_t rows = p.prior.size();
  std::vector<char> allowed;
  std::vector<double> bias;
  document_support(s, known, regime, allowed, bias);

  std::vector<WordId> fold;
  for (std::size_t i = 0; i < doc.size(); i += 2)
    if (doc[i] < V) fold.push_back(doc[i]);
  std::vector<std::uint32_t> count(rows, 0);
  std::vector<std::size_t> z(fold.size(), 0);
  std::vector<double> cum(rows);

  auto draw = [&](WordId w) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      if (allowed[k]) acc += (count[k] + p.prior[k]) * p.top(k, w) + bias[k];
      cum[k] = acc;
    }
    const double u = rng.uniform() * acc;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    k = std::min(k, rows - 1);
    while (!allowed[k]) --k;  // only reachable through rounding at the very top
    return k;
  };

  for (std::size_t i = 0; i < fold.size(); ++i) {
    z[i] = draw(fold[i]);
    ++count[z[i]];
  }
  for (std::size_t sweep = 0; sweep < fold_sweeps; ++sweep) {
    for (std::size_t i = 0; i < fold.size(); ++i) {
      --count[z[i]];
      z[i] = draw(fold[i]);
      ++count[z[i]];
    }
  }

  double denom = 0.0;
  for (std::size_t k = 0; k < rows; ++k)
    if (allowed[k]) denom += count[k] + p.prior[k] + bias[k];
  std::size_t h = 0;
  for (std::size_t i = 1; i < doc.size(); i += 2, ++h) {
    const WordId w = doc[i];
    if (w >= V) {
      out[h] = 1.0 / static_cast<double>(V);
      ++*oov;
      continue;
    }
    double num = 0.0;
    for (std::size_t k = 0; k < rows; ++k)
      if (allowed[k]) num += (count[k] + p.prior[k] + bias[k]) * p.top(k, w);
    out[h] = num / denom;
  }
}

PerplexityResult perplexity_impl(std::span<const PosteriorSample> samples, const Corpus& test,
                                 const AuthorLabels& labels, std::size_t fold_sweeps, std::uint64_t seed,
                                 bool parallel) {
  if (samples.empty()) throw ArgumentError("perplexity: no posterior samples");
  const std::size_t M = test.num_docs();
  std::vector<std::size_t> offset(M + 1, 0);
  for (std::size_t j = 0; j < M; ++j) offset[j + 1] = offset[j] + test.docs[j].size() / 2;
  const std::size_t H = offset[M];
  if (H == 0) throw ArgumentError("perplexity: the test corpus has no held-out tokens");
  for (const auto& s : samples)
    if (s.state.vocab_size() != samples.front().state.vocab_size())
      throw ArgumentError("perplexity: samples disagree on the vocabulary size");

  std::vector<Prepared> prepared;
  for (const auto& s : samples) prepared.push_back(prepare(s.state, parallel));

  const std::size_t S = samples.size();
  std::vector<double> prob(S * H, 0.0);
  std::vector<std::size_t> oov(S * M, 0);
  const auto jobs = static_cast<long long>(S * M);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long long job = 0; job < jobs; ++job) {
    const auto s = static_cast<std::size_t>(job) / M;
    const auto j = static_cast<std::size_t>(job) % M;
    Rng rng(seed, (static_cast<std::uint64_t>(s) << 32) | j);
    complete_document(prepared[s], test.docs[j], known_authors(labels, j), labels.regime, fold_sweeps, rng,
                      prob.data() + s * H + offset[j], &oov[s * M + j]);
  }

  PerplexityResult res;
  res.heldout_tokens = H;
  for (std::size_t j = 0; j < M; ++j) res.oov_tokens += oov[j];
  for (std::size_t h = 0; h < H; ++h) {
    double mean = 0.0;
    for (std::size_t s = 0; s < S; ++s) mean += prob[s * H + h];
    res.log_likelihood += std::log(mean / static_cast<double>(S));
  }
  res.perplexity = std::exp(-res.log_likelihood / static_cast<double>(H));
  return res;
}

std::vector<double> unit(const std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) {
    if (x < 0.0 || !std::isfinite(x)) throw ArgumentError("nmi: contribution vectors must be finite and nonnegative");
    norm += x * x;
  }
  if (norm == 0.0) throw ArgumentError("nmi: all-zero contribution vector");
  norm = std::sqrt(norm);
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = v[i] / norm;
  return u;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PerplexityResult perplexity(std::span<const PosteriorSample> samples, const Corpus& test, const AuthorLabels& labels,
                            std::size_t fold_sweeps, std::uint64_t seed) {
  return perplexity_impl(samples, test, labels, fold_sweeps, seed, true);
}

PerplexityResult perplexity_serial(std::span<const PosteriorSample> samples, const Corpus& test,
                                   const AuthorLabels& labels, std::size_t fold_sweeps, std::uint64_t seed) {
  return perplexity_impl(samples, test, labels, fold_sweeps, seed, false);
}

std::vector<std::vector<double>> extract_contributions(const PosteriorSample& sample) {
  const ModelState& s = sample.state;
  if (s.depth() < 1) throw ArgumentError("extract_contributions: needs a level above the topics");
  const int L = s.depth();
  std::vector<std::vector<double>> c(s.num_dishes(L), std::vector<double>(s.num_docs(), 0.0));
  for (std::size_t j = 0; j < s.num_docs(); ++j)
    for (std::size_t k = 0; k < s.num_dishes(L); ++k) c[k][j] = s.count(L, j, k);
  return c;
}

double nmi_from_similarity(const std::vector<std::vector<double>>& sim) {
  if (sim.empty() || sim.front().empty()) throw ArgumentError("nmi: empty similarity matrix");
  const std::size_t H = sim.size();
  const std::size_t N = sim.front().size();
  double z = 0.0;
  for (const auto& row : sim) {
    if (row.size() != N) throw ArgumentError("nmi: ragged similarity matrix");
    for (double v : row) {
      if (v < 0.0 || !std::isfinite(v)) throw ArgumentError("nmi: similarities must be finite and nonnegative");
      z += v;
    }
  }
  if (z == 0.0) throw ArgumentError("nmi: similarity matrix is all zero");
  std::vector<double> ph(H, 0.0);
  std::vector<double> pn(N, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t n = 0; n < N; ++n) {
      ph[h] += sim[h][n] / z;
      pn[n] += sim[h][n] / z;
    }
  double mi = 0.0;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t n = 0; n < N; ++n) {
      const double p = sim[h][n] / z;
      if (p > 0.0) mi += p * std::log(p / (ph[h] * pn[n]));
    }
  auto entropy = [](const std::vector<double>& p) {
    double e = 0.0;
    for (double x : p)
      if (x > 0.0) e -= x * std::log(x);
    return e;
  };
  const double denom = 0.5 * (entropy(ph) + entropy(pn));
  // One true and one discovered vector: no uncertainty on either side to explain.
  if (denom <= 0.0) return 0.0;
  const double nmi = mi / denom;
  if (nmi < -1e-9 || nmi > 1.0 + 1e-9) throw InvariantError("nmi: value outside [0, 1]: " + format_double(nmi));
  return std::clamp(nmi, 0.0, 1.0);
}

double nmi_hidden_authors(const std::vector<std::vector<double>>& truth,
                          const std::vector<std::vector<double>>& discovered) {
  if (truth.empty() || discovered.empty()) throw ArgumentError("nmi: need at least one vector on each side");
  const std::size_t M = truth.front().size();
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> b;
  for (const auto& v : truth) {
    if (v.size() != M) throw ArgumentError("nmi: vectors must share one length");
    a.push_back(unit(v));
  }
  for (const auto& v : discovered) {
    if (v.size() != M) throw ArgumentError("nmi: vectors must share one length");
    b.push_back(unit(v));
  }
  std::vector<std::vector<double>> sim(a.size(), std::vector<double>(b.size(), 0.0));
  for (std::size_t h = 0; h < a.size(); ++h)
    for (std::size_t n = 0; n < b.size(); ++n) {
      double dot = 0.0;
      for (std::size_t j = 0; j < M; ++j) dot += a[h][j] * b[n][j];
      sim[h][n] = std::max(dot, 0.0);
    }
  return nmi_from_similarity(sim);
}

std::string metrics_csv(std::span<const MetricRecord> records) {
  std::ostringstream out;
  out << "name,value,seed,regime,sweep,wall_ms\n";
  for (const auto& r : records)
    out << r.name << ',' << format_double(r.value) << ',' << r.seed << ',' << r.regime << ',' << r.sweep << ','
        << format_double(r.wall_ms) << '\n';
  return out.str();
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << metrics_csv(records);
}

std::vector<MetricRecord> benchmark_schemes(const Corpus& corpus, const Hyper& hyper, std::size_t sweeps,
                                            std::uint64_t seed) {
  if (hyper.depth != 1) throw ArgumentError("benchmark_schemes: compares two-level models (depth 1)");
  std::vector<MetricRecord> out;
  if (sweeps == 0) return out;
  const Corpus pooled = corpus.flattened();
  const std::string regime(to_string(Regime::kNone));
  auto record = [&](std::string name, double value, std::int64_t sweep, double ms) {
    out.push_back(MetricRecord{std::move(name), value, seed, regime, sweep, ms});
  };

  double direct_total = 0.0;
  {
    Rng rng(seed, 0x4449);
    ModelState s = new_state(pooled, AuthorLabels::unlabeled(pooled.num_docs()), hyper, rng);
    SweepOptions opt;
    opt.resample_concentrations = false;
    const AuthorLabels none = AuthorLabels::unlabeled(pooled.num_docs());
    for (std::size_t i = 0; i < sweeps; ++i) {
      const auto st = sweep(s, none, rng, opt);
      direct_total += st.wall_ms;
      const auto k = static_cast<std::int64_t>(i);
      record("direct.sweep_ms", st.wall_ms, k, st.wall_ms);
      record("direct.cumulative_ms", direct_total, k, st.wall_ms);
      record("direct.K0", static_cast<double>(st.dishes[0]), k, st.wall_ms);
      record("direct.K1", static_cast<double>(st.dishes[1]), k, st.wall_ms);
    }
  }
  double ncrf_total = 0.0;
  {
    Rng rng(seed, 0x4e43);
    U2CrfState crf = u2_crf_init(pooled, hyper.alpha[0], hyper.gamma[0], hyper.gamma[1], hyper.eta, rng);
    for (std::size_t i = 0; i < sweeps; ++i) {
      const auto st = crf_sweep(crf, rng);
      ncrf_total += st.wall_ms;
      const auto k = static_cast<std::int64_t>(i);
      record("ncrf.sweep_ms", st.wall_ms, k, st.wall_ms);
      record("ncrf.cumulative_ms", ncrf_total, k, st.wall_ms);
      record("ncrf.K0", static_cast<double>(st.dishes), k, st.wall_ms);
      record("ncrf.K1", static_cast<double>(st.entities), k, st.wall_ms);
    }
  }
  const double n = static_cast<double>(sweeps);
  record("direct.mean_sweep_ms", direct_total / n, -1, direct_total);
  record("ncrf.mean_sweep_ms", ncrf_total / n, -1, ncrf_total);
  record("ncrf_over_direct", direct_total > 0.0 ? ncrf_total / direct_total : 0.0, -1, 0.0);
  return out;
}

}  // namespace nhdp

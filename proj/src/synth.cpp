#include "nhdp/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "nhdp/error.hpp"
#include "nhdp/randdist.hpp"

namespace nhdp {

namespace {

std::size_t draw(const std::vector<double>& p, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (u < p[k]) return k;
    u -= p[k];
  }
  // Rounding left a sliver; take the last index with mass.
  for (std::size_t k = p.size(); k-- > 0;)
    if (p[k] > 0.0) return k;
  return 0;
}

std::string pad(const char* prefix, std::size_t i, std::size_t width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, static_cast<int>(width), i);
  return buf;
}

std::size_t digits(std::size_t n) {
  std::size_t d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace

void SynthConfig::check() const {
  if (entities == 0 || topics == 0 || vocab == 0) throw ArgumentError("synth: entities, topics and vocab must be >= 1");
  if (max_authors == 0) throw ArgumentError("synth: max_authors must be >= 1");
  if (!(topic_eta > 0.0) || !(gamma0 > 0.0) || !(alpha0 > 0.0) || !(doc_alpha > 0.0))
    throw ArgumentError("synth: concentrations must be > 0");
}

SynthData synthesize(const SynthConfig& cfg) {
  cfg.check();
  Rng rng(cfg.seed, 0x53594e);
  SynthData out;

  const std::vector<double> global =
      sample_dirichlet(std::vector<double>(cfg.topics, cfg.gamma0 / static_cast<double>(cfg.topics)), rng);
  for (std::size_t k = 0; k < cfg.topics; ++k)
    out.topic_word.push_back(sample_dirichlet(std::vector<double>(cfg.vocab, cfg.topic_eta), rng));
  for (std::size_t e = 0; e < cfg.entities; ++e) {
    std::vector<double> a(cfg.topics);
    for (std::size_t k = 0; k < cfg.topics; ++k) a[k] = std::max(cfg.alpha0 * global[k], 1e-300);
    out.entity_topic.push_back(sample_dirichlet(a, rng));
  }

  Corpus& c = out.corpus;
  AuthorLabels& lab = out.labels;
  for (std::size_t w = 0; w < cfg.vocab; ++w) c.vocab.push_back(pad("w", w, digits(cfg.vocab - 1)));
  for (std::size_t e = 0; e < cfg.entities; ++e) lab.names.push_back(pad("author", e, digits(cfg.entities - 1)));
  lab.regime = Regime::kComplete;
  out.contributions.assign(cfg.entities, std::vector<double>(cfg.docs, 0.0));

  const std::size_t max_authors = std::min(cfg.max_authors, cfg.entities);
  for (std::size_t j = 0; j < cfg.docs; ++j) {
    c.doc_ids.push_back(pad("doc", j, digits(cfg.docs - 1)));
    const std::size_t n_auth = 1 + rng.uniform_index(max_authors);
    std::vector<AuthorId> pool(cfg.entities);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < n_auth; ++i) std::swap(pool[i], pool[i + rng.uniform_index(cfg.entities - i)]);
    std::vector<AuthorId> authors(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_auth));
    std::sort(authors.begin(), authors.end());
    const auto mix = sample_dirichlet(std::vector<double>(n_auth, cfg.doc_alpha), rng);

    std::vector<WordId> doc;
    std::vector<AuthorId> who;
    std::vector<std::uint32_t> what;
    for (std::size_t i = 0; i < cfg.doc_length; ++i) {
      const AuthorId a = authors[draw(mix, rng)];
      const std::size_t k = draw(out.entity_topic[a], rng);
      doc.push_back(static_cast<WordId>(draw(out.topic_word[k], rng)));
      who.push_back(a);
      what.push_back(static_cast<std::uint32_t>(k));
      out.contributions[a][j] += 1.0;
    }
    c.docs.push_back(std::move(doc));
    lab.known.push_back(std::move(authors));
    out.token_author.push_back(std::move(who));
    out.token_topic.push_back(std::move(what));
  }
  return out;
}

void write_gold_json(const std::filesystem::path& path, const SynthData& data) {
  nlohmann::json j;
  j["authors"] = data.labels.names;
  j["doc_ids"] = data.corpus.doc_ids;
  j["contributions"] = data.contributions;
  j["topic_word"] = data.topic_word;
  j["entity_topic"] = data.entity_topic;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

GoldContributions load_gold_contributions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open gold file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (!j.contains("authors") || !j.contains("contributions"))
    throw ParseError(path.string(), 0, "gold file needs \"authors\" and \"contributions\"");
  GoldContributions gold;
  try {
    gold.authors = j["authors"].get<std::vector<std::string>>();
    gold.vectors = j["contributions"].get<std::vector<std::vector<double>>>();
    if (j.contains("doc_ids")) gold.doc_ids = j["doc_ids"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (gold.authors.size() != gold.vectors.size())
    throw ParseError(path.string(), 0, "one contribution vector per author expected");
  for (const auto& v : gold.vectors)
    if (!gold.doc_ids.empty() && v.size() != gold.doc_ids.size())
      throw ParseError(path.string(), 0, "contribution vector length differs from doc_ids");
  return gold;
}

}  // namespace nhdp

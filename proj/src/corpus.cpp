#include "nhdp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "nhdp/error.hpp"
#include "nhdp/randdist.hpp"

namespace nhdp {

namespace {

constexpr std::uint64_t kSplitStream = 0x5350;  // "SP"
constexpr std::uint64_t kMaskStream = 0x4d41;   // "MA"

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

long long parse_integer(const std::string& text, const std::string& source, std::size_t line_no) {
  std::istringstream in(text);
  long long value = 0;
  std::string rest;
  if (!(in >> value) || (in >> rest)) throw ParseError(source, line_no, "expected an integer, got '" + text + "'");
  return value;
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::kNone:
      return "none";
    case Regime::kPartial:
      return "partial";
    case Regime::kComplete:
      return "complete";
  }
  return "none";
}

Regime parse_regime(std::string_view text) {
  if (text == "none") return Regime::kNone;
  if (text == "partial") return Regime::kPartial;
  if (text == "complete") return Regime::kComplete;
  throw ArgumentError("unknown regime '" + std::string(text) + "' (expected none, partial or complete)");
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

void Corpus::check() const {
  for (std::size_t j = 0; j < docs.size(); ++j)
    for (WordId w : docs[j])
      if (w >= vocab.size())
        throw ArgumentError("document " + std::to_string(j) + " has token id " + std::to_string(w) +
                            " >= vocabulary size " + std::to_string(vocab.size()));
}

Corpus Corpus::subset(const std::vector<std::size_t>& doc_indices) const {
  Corpus out;
  out.vocab = vocab;
  for (std::size_t j : doc_indices) {
    out.docs.push_back(docs.at(j));
    if (!doc_ids.empty()) out.doc_ids.push_back(doc_ids.at(j));
  }
  return out;
}

Corpus Corpus::flattened() const {
  Corpus out;
  out.vocab = vocab;
  out.docs.emplace_back();
  for (const auto& d : docs) out.docs.front().insert(out.docs.front().end(), d.begin(), d.end());
  return out;
}

AuthorLabels AuthorLabels::unlabeled(std::size_t num_docs) {
  AuthorLabels labels;
  labels.known.resize(num_docs);
  return labels;
}

AuthorLabels AuthorLabels::subset(const std::vector<std::size_t>& doc_indices) const {
  AuthorLabels out;
  out.names = names;
  out.global_hidden = global_hidden;
  out.regime = regime;
  for (std::size_t j : doc_indices) out.known.push_back(known.at(j));
  out.regime = out.infer_regime();
  if (regime == Regime::kPartial && out.regime == Regime::kComplete) out.regime = Regime::kPartial;
  return out;
}

Regime AuthorLabels::infer_regime() const {
  bool any = false;
  bool all = !known.empty();
  for (const auto& a : known) {
    any = any || !a.empty();
    all = all && !a.empty();
  }
  if (!any) return Regime::kNone;
  return all ? Regime::kComplete : Regime::kPartial;
}

Corpus load_bow_corpus(const std::filesystem::path& path, const std::filesystem::path& vocab_path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::string line;
  std::size_t line_no = 0;
  long long header[3] = {0, 0, 0};
  for (int h = 0; h < 3; ++h) {
    if (!std::getline(in, line)) throw ParseError(source, line_no + 1, "truncated header (expected D, W, NNZ)");
    ++line_no;
    header[h] = parse_integer(line, source, line_no);
    if (header[h] < 0) throw ParseError(source, line_no, "negative header value");
  }
  const auto num_docs = static_cast<std::size_t>(header[0]);
  const auto num_words = static_cast<std::size_t>(header[1]);
  const auto nnz = static_cast<std::size_t>(header[2]);

  std::vector<std::map<WordId, std::uint64_t>> counts(num_docs);
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::istringstream fields(line);
    long long doc = 0, word = 0, count = 0;
    std::string rest;
    if (!(fields >> doc >> word >> count) || (fields >> rest))
      throw ParseError(source, line_no, "expected 'docID wordID count'");
    if (doc < 1 || static_cast<std::size_t>(doc) > num_docs)
      throw ParseError(source, line_no, "doc id " + std::to_string(doc) + " out of range 1.." + std::to_string(num_docs));
    if (word < 1 || static_cast<std::size_t>(word) > num_words)
      throw ParseError(source, line_no, "word id " + std::to_string(word) + " out of range 1.." + std::to_string(num_words));
    if (count < 0) throw ParseError(source, line_no, "negative count");
    counts[doc - 1][static_cast<WordId>(word - 1)] += static_cast<std::uint64_t>(count);
    ++seen;
  }
  if (seen != nnz)
    throw ParseError(source, line_no, "header declares NNZ=" + std::to_string(nnz) + " but found " + std::to_string(seen) + " entries");

  Corpus corpus;
  corpus.vocab = load_vocab(vocab_path);
  if (corpus.vocab.size() < num_words)
    throw ParseError(vocab_path.string(), corpus.vocab.size(),
                     "vocabulary has " + std::to_string(corpus.vocab.size()) + " lines but W=" + std::to_string(num_words));
  corpus.vocab.resize(num_words);
  corpus.docs.resize(num_docs);
  for (std::size_t j = 0; j < num_docs; ++j)
    for (const auto& [w, c] : counts[j]) corpus.docs[j].insert(corpus.docs[j].end(), c, w);
  return corpus;
}

namespace {

std::pair<Corpus, AuthorLabels> load_jsonl_impl(const std::filesystem::path& path,
                                                const std::vector<std::string>* fixed_vocab,
                                                std::size_t* oov_tokens) {
  auto in = open_input(path);
  const std::string source = path.string();
  Corpus corpus;
  AuthorLabels labels;
  std::unordered_map<std::string, WordId> word_index;
  std::unordered_map<std::string, AuthorId> author_index;
  std::set<std::string> ids;
  std::size_t oov = 0;
  bool any_authors_field = false;

  if (fixed_vocab) {
    corpus.vocab = *fixed_vocab;
    for (std::size_t w = 0; w < fixed_vocab->size(); ++w) word_index.emplace((*fixed_vocab)[w], static_cast<WordId>(w));
  }

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(source, line_no, "record is not a JSON object");
    if (!record.contains("tokens") || !record["tokens"].is_array())
      throw ParseError(source, line_no, "missing 'tokens' array");

    std::vector<WordId> doc;
    for (const auto& tok : record["tokens"]) {
      if (!tok.is_string()) throw ParseError(source, line_no, "non-string token");
      const auto& text = tok.get_ref<const std::string&>();
      auto it = word_index.find(text);
      if (it != word_index.end()) {
        doc.push_back(it->second);
      } else if (fixed_vocab) {
        doc.push_back(static_cast<WordId>(fixed_vocab->size()));
        ++oov;
      } else {
        const auto id = static_cast<WordId>(corpus.vocab.size());
        word_index.emplace(text, id);
        corpus.vocab.push_back(text);
        doc.push_back(id);
      }
    }

    std::string id;
    if (record.contains("id")) {
      if (!record["id"].is_string()) throw ParseError(source, line_no, "'id' must be a string");
      id = record["id"].get<std::string>();
      if (!ids.insert(id).second) throw ParseError(source, line_no, "duplicate document id '" + id + "'");
    }

    std::vector<AuthorId> authors;
    if (record.contains("authors")) {
      any_authors_field = true;
      if (!record["authors"].is_array()) throw ParseError(source, line_no, "'authors' must be an array");
      for (const auto& a : record["authors"]) {
        if (!a.is_string()) throw ParseError(source, line_no, "non-string author");
        const auto& name = a.get_ref<const std::string&>();
        auto [it, inserted] = author_index.emplace(name, static_cast<AuthorId>(labels.names.size()));
        if (inserted) labels.names.push_back(name);
        authors.push_back(it->second);
      }
      std::sort(authors.begin(), authors.end());
      authors.erase(std::unique(authors.begin(), authors.end()), authors.end());
    }
    corpus.docs.push_back(std::move(doc));
    corpus.doc_ids.push_back(id);
    labels.known.push_back(std::move(authors));
  }
  if (std::all_of(corpus.doc_ids.begin(), corpus.doc_ids.end(), [](const auto& s) { return s.empty(); }))
    corpus.doc_ids.clear();
  labels.regime = any_authors_field ? labels.infer_regime() : Regime::kNone;
  if (oov_tokens) *oov_tokens = oov;
  return {std::move(corpus), std::move(labels)};
}

}  // namespace

std::pair<Corpus, AuthorLabels> load_jsonl_corpus(const std::filesystem::path& path) {
  return load_jsonl_impl(path, nullptr, nullptr);
}

std::pair<Corpus, AuthorLabels> load_jsonl_corpus(const std::filesystem::path& path,
                                                   const std::vector<std::string>& vocab,
                                                   std::size_t* oov_tokens) {
  return load_jsonl_impl(path, &vocab, oov_tokens);
}

void write_jsonl_corpus(const std::filesystem::path& path, const Corpus& corpus, const AuthorLabels& labels) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  for (std::size_t j = 0; j < corpus.num_docs(); ++j) {
    nlohmann::ordered_json record;
    record["id"] = corpus.doc_ids.empty() ? "d" + std::to_string(j) : corpus.doc_ids[j];
    auto& tokens = record["tokens"] = nlohmann::ordered_json::array();
    for (WordId w : corpus.docs[j]) tokens.push_back(w < corpus.vocab.size() ? corpus.vocab[w] : std::string("<oov>"));
    if (j < labels.known.size() && labels.regime != Regime::kNone) {
      auto& authors = record["authors"] = nlohmann::ordered_json::array();
      for (AuthorId a : labels.known[j]) authors.push_back(labels.names.at(a));
    }
    out << record.dump() << '\n';
  }
}

std::vector<std::string> load_vocab(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return vocab;
}

void write_vocab(const std::filesystem::path& path, const std::vector<std::string>& vocab) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  for (const auto& w : vocab) out << w << '\n';
}

Split author_vote_split(const Corpus& corpus, const AuthorLabels& labels, double p_train, std::uint64_t seed) {
  if (!(p_train >= 0.0 && p_train <= 1.0)) throw ArgumentError("author_vote_split: p_train must be in [0, 1]");
  if (labels.known.size() != corpus.num_docs()) throw ArgumentError("author_vote_split: labels/corpus size mismatch");
  Rng rng(seed, kSplitStream);
  Split split;
  for (std::size_t j = 0; j < corpus.num_docs(); ++j) {
    const auto& authors = labels.known[j];
    if (authors.empty())
      throw ArgumentError("author_vote_split: document " + std::to_string(j) + " has no known author; use a random split");
    std::size_t train_votes = 0;
    for (std::size_t a = 0; a < authors.size(); ++a) train_votes += rng.bernoulli(p_train) ? 1 : 0;
    if (2 * train_votes >= authors.size())
      split.train.push_back(j);
    else
      split.test.push_back(j);
  }
  return split;
}

AuthorLabels mask_authors(const AuthorLabels& labels, double p_global, double p_local, std::uint64_t seed) {
  if (labels.regime == Regime::kNone) throw ArgumentError("mask_authors: labels carry no authors (regime none)");
  if (!(p_global >= 0.0 && p_global <= 1.0) || !(p_local >= 0.0 && p_local <= 1.0))
    throw ArgumentError("mask_authors: probabilities must be in [0, 1]");
  Rng rng(seed, kMaskStream);
  AuthorLabels out = labels;
  std::set<AuthorId> hidden(labels.global_hidden.begin(), labels.global_hidden.end());
  for (std::size_t a = 0; a < labels.names.size(); ++a)
    if (rng.bernoulli(p_global)) hidden.insert(static_cast<AuthorId>(a));
  for (auto& authors : out.known) {
    std::vector<AuthorId> kept;
    for (AuthorId a : authors) {
      if (hidden.count(a)) continue;
      if (rng.bernoulli(p_local)) continue;
      kept.push_back(a);
    }
    authors = std::move(kept);
  }
  out.global_hidden.assign(hidden.begin(), hidden.end());
  const Regime implied = out.infer_regime();
  if (implied == Regime::kNone)
    out.regime = Regime::kNone;
  else if (p_global == 0.0 && p_local == 0.0)
    out.regime = labels.regime;
  else
    out.regime = Regime::kPartial;
  return out;
}

AuthorLabels hide_authors(const AuthorLabels& labels, const std::vector<AuthorId>& hidden) {
  AuthorLabels out = labels;
  std::set<AuthorId> h(labels.global_hidden.begin(), labels.global_hidden.end());
  h.insert(hidden.begin(), hidden.end());
  for (auto& authors : out.known)
    authors.erase(std::remove_if(authors.begin(), authors.end(), [&](AuthorId a) { return h.count(a) > 0; }),
                  authors.end());
  out.global_hidden.assign(h.begin(), h.end());
  const Regime implied = out.infer_regime();
  out.regime = implied == Regime::kNone ? Regime::kNone : (h.empty() ? labels.regime : Regime::kPartial);
  return out;
}

}  // namespace nhdp

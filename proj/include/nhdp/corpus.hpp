#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nhdp {

using WordId = std::uint32_t;
using AuthorId = std::int32_t;

inline constexpr AuthorId kNoAuthor = -1;

/// How much of each document's entity set is observed.
enum class Regime : std::uint8_t { kNone = 0, kPartial = 1, kComplete = 2 };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);

struct Corpus {
  std::vector<std::vector<WordId>> docs;
  std::vector<std::string> vocab;
  std::vector<std::string> doc_ids;  // may be empty

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t num_docs() const { return docs.size(); }
  std::size_t num_tokens() const;

  /// Throws ArgumentError when a token id is outside the vocabulary.
  void check() const;

  Corpus subset(const std::vector<std::size_t>& doc_indices) const;
  /// All tokens as a single document (ungrouped view).
  Corpus flattened() const;
};

struct AuthorLabels {
  std::vector<std::vector<AuthorId>> known;  // per document, sorted, unique
  std::vector<std::string> names;            // label universe; AuthorId indexes it
  std::vector<AuthorId> global_hidden;       // sorted
  Regime regime = Regime::kNone;

  static AuthorLabels unlabeled(std::size_t num_docs);
  AuthorLabels subset(const std::vector<std::size_t>& doc_indices) const;
  /// Regime implied by the current known sets: none when every set is empty.
  Regime infer_regime() const;
};

/// Sparse bag-of-words: header lines D, W, NNZ then "doc word count" triples (1-based).
Corpus load_bow_corpus(const std::filesystem::path& path, const std::filesystem::path& vocab_path);

/// JSON-lines corpus: {"id": ..., "tokens": [...], "authors": [...]} per line.
std::pair<Corpus, AuthorLabels> load_jsonl_corpus(const std::filesystem::path& path);

/// Same, but tokens are encoded with a fixed vocabulary. Unknown tokens get ids
/// >= vocab.size() (out-of-vocabulary) and are counted in `oov_tokens`.
std::pair<Corpus, AuthorLabels> load_jsonl_corpus(const std::filesystem::path& path,
                                                   const std::vector<std::string>& vocab,
                                                   std::size_t* oov_tokens = nullptr);

void write_jsonl_corpus(const std::filesystem::path& path, const Corpus& corpus,
                        const AuthorLabels& labels);

std::vector<std::string> load_vocab(const std::filesystem::path& path);
void write_vocab(const std::filesystem::path& path, const std::vector<std::string>& vocab);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Each author of a document votes "train" with probability p_train; strict
/// majority decides, ties go to train.
Split author_vote_split(const Corpus& corpus, const AuthorLabels& labels, double p_train,
                        std::uint64_t seed);

/// Global pass (each author hidden corpus-wide with p_global) then local pass
/// (each surviving (doc, author) pair dropped with p_local).
AuthorLabels mask_authors(const AuthorLabels& labels, double p_global, double p_local,
                          std::uint64_t seed);

/// Hide an explicit set of authors corpus-wide.
AuthorLabels hide_authors(const AuthorLabels& labels, const std::vector<AuthorId>& hidden);

}  // namespace nhdp

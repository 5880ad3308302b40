#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nhdp/corpus.hpp"

namespace nhdp {

/// Finite two-level generator: topics shared by all entities, each entity a
/// mixture over topics, each document a mixture over its own entities.
struct SynthConfig {
  std::size_t entities = 5;
  std::size_t topics = 8;
  std::size_t vocab = 50;
  std::size_t docs = 100;
  std::size_t doc_length = 50;
  std::size_t max_authors = 2;  // each document draws 1..max_authors distinct entities
  double topic_eta = 0.05;      // topic-word Dirichlet
  double gamma0 = 8.0;          // global topic weights ~ Dir(gamma0 / topics)
  double alpha0 = 1.0;          // entity topic weights ~ Dir(alpha0 * global)
  double doc_alpha = 1.0;       // document weights over its entities ~ Dir(doc_alpha)
  std::uint64_t seed = 1;

  void check() const;
};

struct SynthData {
  Corpus corpus;
  AuthorLabels labels;                            // regime complete
  std::vector<std::vector<double>> topic_word;    // [topic][word]
  std::vector<std::vector<double>> entity_topic;  // [entity][topic]
  std::vector<std::vector<double>> contributions; // [entity][doc] tokens written by the entity
  std::vector<std::vector<AuthorId>> token_author;
  std::vector<std::vector<std::uint32_t>> token_topic;
};

SynthData synthesize(const SynthConfig& config);

/// Gold file: entity names, per-entity per-document word counts and the topic-word table.
void write_gold_json(const std::filesystem::path& path, const SynthData& data);
struct GoldContributions {
  std::vector<std::string> authors;
  std::vector<std::string> doc_ids;  // empty when the file has none
  std::vector<std::vector<double>> vectors;  // [author][doc]
};

GoldContributions load_gold_contributions(const std::filesystem::path& path);

}  // namespace nhdp

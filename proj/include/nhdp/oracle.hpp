#pragma once

// Exact answers for tiny models, used as ground truth in sampler tests.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/randdist.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

struct TruncSpec {
  Hyper hyper;
  /// Dishes per level. 0 means the K -> infinity limit (the nonparametric model).
  std::vector<std::size_t> K;
  /// Tables per restaurant at each level, for theorem2_sampler only. A level
  /// with a single entry uses it for every restaurant.
  std::vector<std::vector<std::size_t>> T;
  /// Top level is one DP over all tokens (concentration gamma[depth]) instead
  /// of one restaurant per document.
  bool ungrouped_top = false;

  void check() const;
};

/// Canonical form of a nested assignment: each level relabeled by first
/// appearance over tokens in corpus order. Two assignments that differ only by
/// dish labels share a key.
std::string canonical_key(const std::vector<std::vector<std::int32_t>>& z);

/// Exact posterior over nested partitions of the tokens (dish labels modded out).
class ExactPosterior {
 public:
  std::size_t size() const { return prob_.size(); }
  std::size_t num_tokens() const { return num_tokens_; }
  int num_levels() const { return static_cast<int>(partitions_.size()); }
  double log_evidence() const { return log_evidence_; }
  double prob(std::size_t config) const { return prob_[config]; }
  const std::vector<double>& probs() const { return prob_; }
  double log_joint(std::size_t config) const { return log_joint_[config]; }

  /// Canonical labels z[level][token] of a configuration.
  std::vector<std::vector<std::int32_t>> assignment(std::size_t config) const;
  std::string key(std::size_t config) const;
  /// Configuration index of an arbitrary labeling, or size() when it has zero mass
  /// (more dishes than the truncation allows).
  std::size_t find(const std::vector<std::vector<std::int32_t>>& z) const;

  /// P(tokens a and b share their level-`level` dish).
  double coincidence(int level, std::size_t a, std::size_t b) const;

 private:
  friend ExactPosterior enumerate_impl(const Corpus&, const TruncSpec&, bool);
  std::size_t num_tokens_ = 0;
  std::vector<std::vector<std::vector<std::uint8_t>>> partitions_;  // [level][index] -> block of each token
  std::vector<std::unordered_map<std::string, std::size_t>> lookup_;
  std::vector<double> prob_;
  std::vector<double> log_joint_;
  double log_evidence_ = 0.0;
};

inline constexpr std::uint64_t kMaxEnumeration = 10'000'000;

/// Number of nested configurations enumerate_posterior would visit.
std::uint64_t enumeration_size(const Corpus& corpus, const TruncSpec& trunc);

/// Exact joint posterior over every nested partition, topics and restaurant
/// weights integrated out. Configurations are scored across OpenMP threads.
/// Throws ArgumentError (with the size) above kMaxEnumeration configurations.
ExactPosterior enumerate_posterior(const Corpus& corpus, const TruncSpec& trunc);
/// Single-threaded reference; bit-identical to enumerate_posterior.
ExactPosterior enumerate_posterior_serial(const Corpus& corpus, const TruncSpec& trunc);

/// Joint log probability of one nested partition and the words.
double log_joint(const Corpus& corpus, const TruncSpec& trunc, const std::vector<std::vector<std::int32_t>>& z);

/// Probability that the next word of document j is each vocabulary entry.
std::vector<double> word_predictive(const Corpus& corpus, std::size_t j, const TruncSpec& trunc);

/// Log marginal probability of a seating at one HDP level: rows are
/// restaurants, columns dishes (labels modded out), restaurant weights and
/// sticks integrated. k == 0 selects the infinite-menu limit.
double level_log_marginal(const std::vector<std::vector<std::uint32_t>>& counts, double alpha, double gamma,
                          std::size_t k);

struct PredictiveQuery {
  std::size_t restaurant = 0;
  std::int32_t dish = kNewDish;  // kNewDish asks for a dish unused so far
};

/// Predictive probability of the next customer's dish at level 0 of `trunc`
/// given observed per-restaurant dish counts, under the finite symmetric
/// Dirichlet menu of size trunc.K[0] (0 gives the nonparametric answer).
double finite_predictive(const TruncSpec& trunc, const std::vector<std::vector<std::uint32_t>>& counts,
                         PredictiveQuery query);

/// Forward draw of the finite table-and-dish construction: sticks, restaurant
/// table weights and table dishes are instantiated lazily as tokens reach
/// them. Returns z[level][token] with labels in [0, K[level]).
std::vector<std::vector<std::int32_t>> theorem2_sampler(const TruncSpec& trunc, const Corpus& corpus, Rng& rng);

}  // namespace nhdp

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

/// Frozen copy of a trained state that evaluation reads from.
struct PosteriorSample {
  ModelState state;
  std::uint64_t sweep = 0;
};

struct PerplexityResult {
  double perplexity = 0.0;
  double log_likelihood = 0.0;  // sum over held-out tokens of log p
  std::size_t heldout_tokens = 0;
  std::size_t oov_tokens = 0;  // held-out tokens scored 1/V because the model never saw them
};

/// Document completion: per test document the even-position tokens are folded
/// in with `fold_sweeps` Gibbs sweeps over that document's own top-level
/// assignments (everything else frozen), then the odd-position tokens are
/// scored, averaging their probability over samples. Documents run in
/// parallel; each (sample, document) pair has its own RNG stream, so the
/// result does not depend on the thread count.
PerplexityResult perplexity(std::span<const PosteriorSample> samples, const Corpus& test, const AuthorLabels& labels,
                            std::size_t fold_sweeps, std::uint64_t seed);
/// Single-threaded reference for perplexity().
PerplexityResult perplexity_serial(std::span<const PosteriorSample> samples, const Corpus& test,
                                   const AuthorLabels& labels, std::size_t fold_sweeps, std::uint64_t seed);

/// Contribution of every top-level dish to every document (tokens it explains).
std::vector<std::vector<double>> extract_contributions(const PosteriorSample& sample);

/// NMI of the joint built from a nonnegative similarity matrix.
double nmi_from_similarity(const std::vector<std::vector<double>>& similarity);

/// Cosine similarity between every true and discovered contribution vector,
/// normalized into a joint distribution, then NMI. Throws on an all-zero vector.
double nmi_hidden_authors(const std::vector<std::vector<double>>& truth,
                          const std::vector<std::vector<double>>& discovered);

struct MetricRecord {
  std::string name;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string regime;
  std::int64_t sweep = -1;
  double wall_ms = 0.0;
};

std::string metrics_csv(std::span<const MetricRecord> records);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRecord> records);

/// Time the direct sampler and the ungrouped two-level table sampler on the
/// same pooled tokens with identical hyperparameters and seed. Records per-sweep
/// wall time and dish counts for each scheme plus the mean per-sweep times.
std::vector<MetricRecord> benchmark_schemes(const Corpus& corpus, const Hyper& hyper, std::size_t sweeps,
                                            std::uint64_t seed);

}  // namespace nhdp

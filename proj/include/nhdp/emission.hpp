#pragma once

#include <cstddef>
#include <vector>

#include "nhdp/state.hpp"

namespace nhdp {

/// Probability of each word under every dish of one level, with the lower
/// levels integrated out given the current sticks and counts. Row K (one past
/// the active dishes) is the emission of a dish that does not exist yet.
class EmissionTable {
 public:
  EmissionTable() = default;
  EmissionTable(std::size_t rows, std::size_t vocab) : rows_(rows), vocab_(vocab), values_(rows * vocab, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t vocab_size() const { return vocab_; }
  double operator()(std::size_t k, std::size_t w) const { return values_[k * vocab_ + w]; }
  double& operator()(std::size_t k, std::size_t w) { return values_[k * vocab_ + w]; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const EmissionTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> values_;
};

/// Emission table for dishes at `level`, built bottom-up across OpenMP threads.
EmissionTable emission_table(const ModelState& state, int level);
/// Single-threaded reference for emission_table; results are bit-identical.
EmissionTable emission_table_serial(const ModelState& state, int level);

/// Emission of one word at every level: result[l][k], k = num_dishes(l) is "new".
std::vector<std::vector<double>> word_emission(const ModelState& state, WordId w);

}  // namespace nhdp

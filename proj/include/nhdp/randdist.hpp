#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nhdp {

/// Seeded random source. A (seed, stream) pair fully determines the output
/// sequence; distinct streams are independent substreams of the same seed.
/// Not shareable between threads: every chain/worker owns its own instance.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Independent substream derived from this generator's seed (not its state).
  Rng substream(std::uint64_t stream) const { return Rng(seed_, stream); }

  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1)
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p);
  /// Gamma(shape, 1). Loses all precision for shape << 1; use log_gamma there.
  double gamma(double shape);
  /// log of a Gamma(shape, 1) variate, stable for arbitrarily small shapes.
  double log_gamma(double shape);
  double beta(double a, double b);
  /// Beta(a, b) draw as {x, 1 - x}, both computed without cancellation.
  std::pair<double, double> beta_split(double a, double b);

  /// Engine state as an opaque string (checkpointing).
  std::string save_state() const;
  void load_state(const std::string& state);

  bool operator==(const Rng& other) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Draw from Dirichlet(alpha). All alpha must be > 0.
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

/// CRP seating weights: existing tables then the "new table" slot.
std::vector<double> crp_predictive(std::span<const std::int64_t> counts, double alpha);

struct StickDraw {
  std::vector<double> weights;
  double remainder = 1.0;
};

/// First K GEM(gamma) weights plus the unbroken remainder.
StickDraw stick_breaking(double gamma, std::size_t k, Rng& rng);

/// Number of tables created when n customers are seated by a CRP with
/// concentration ab (simulated seat by seat).
std::uint32_t sample_table_count(double ab, std::uint32_t n, Rng& rng);

/// E[tables] for the same process: sum_{i=1..n} ab / (ab + i - 1).
double expected_table_count(double ab, std::uint32_t n);

/// Log probability of a CRP partition with the given block sizes.
double eppf_log_prob(std::span<const std::uint32_t> blocks, double alpha);

/// Index drawn proportional to exp(log_weights). -inf entries are never chosen.
std::size_t sample_categorical_log(std::span<const double> log_weights, Rng& rng);

double log_sum_exp(std::span<const double> values);

/// Normalized probabilities from log weights (max-subtracted).
std::vector<double> normalize_log(std::span<const double> log_weights);

}  // namespace nhdp

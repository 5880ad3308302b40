#include "nhdp/randdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nhdp/error.hpp"

namespace nhdp {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6e686470u};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ArgumentError("uniform_index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw ArgumentError("gamma: shape must be > 0");
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

double Rng::log_gamma(double shape) {
  if (!(shape > 0.0)) throw ArgumentError("log_gamma: shape must be > 0");
  if (shape >= 1.0) return std::log(gamma(shape));
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  const double g = gamma(shape + 1.0);
  return std::log(g) + std::log(uniform_open()) / shape;
}

double Rng::beta(double a, double b) { return beta_split(a, b).first; }

std::pair<double, double> Rng::beta_split(double a, double b) {
  const double x = log_gamma(a);
  const double y = log_gamma(b);
  const double m = std::max(x, y);
  const double ex = std::exp(x - m);
  const double ey = std::exp(y - m);
  return {ex / (ex + ey), ey / (ex + ey)};
}

std::string Rng::save_state() const {
  std::ostringstream out;
  out << seed_ << ' ' << stream_ << ' ' << engine_;
  return out.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream in(state);
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::mt19937_64 engine;
  in >> seed >> stream >> engine;
  if (in.fail()) throw ArgumentError("Rng::load_state: malformed engine state");
  seed_ = seed;
  stream_ = stream;
  engine_ = engine;
}

bool Rng::operator==(const Rng& other) const {
  return seed_ == other.seed_ && stream_ == other.stream_ && engine_ == other.engine_;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  if (alpha.empty()) throw ArgumentError("sample_dirichlet: empty parameter vector");
  std::vector<double> logs(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!(alpha[k] > 0.0) || !std::isfinite(alpha[k]))
      throw ArgumentError("sample_dirichlet: parameters must be finite and > 0");
    logs[k] = rng.log_gamma(alpha[k]);
  }
  return normalize_log(logs);
}

std::vector<double> crp_predictive(std::span<const std::int64_t> counts, double alpha) {
  if (!(alpha > 0.0)) throw ArgumentError("crp_predictive: alpha must be > 0");
  double n = 0.0;
  for (auto c : counts) {
    if (c < 0) throw ArgumentError("crp_predictive: negative table count");
    n += static_cast<double>(c);
  }
  std::vector<double> w;
  w.reserve(counts.size() + 1);
  for (auto c : counts) w.push_back(static_cast<double>(c) / (n + alpha));
  w.push_back(alpha / (n + alpha));
  return w;
}

StickDraw stick_breaking(double gamma, std::size_t k, Rng& rng) {
  if (!(gamma > 0.0)) throw ArgumentError("stick_breaking: gamma must be > 0");
  StickDraw out;
  out.weights.reserve(k);
  double rest = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto [w, keep] = rng.beta_split(1.0, gamma);
    out.weights.push_back(rest * w);
    rest *= keep;
  }
  out.remainder = rest;
  return out;
}

std::uint32_t sample_table_count(double ab, std::uint32_t n, Rng& rng) {
  if (!(ab > 0.0)) throw ArgumentError("sample_table_count: ab must be > 0");
  std::uint32_t tables = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (rng.uniform() * (ab + i) < ab) ++tables;
  }
  return tables;
}

double expected_table_count(double ab, std::uint32_t n) {
  if (!(ab > 0.0)) throw ArgumentError("expected_table_count: ab must be > 0");
  double sum = 0.0;
  for (std::uint32_t i = 1; i <= n; ++i) sum += ab / (ab + i - 1);
  return sum;
}

double eppf_log_prob(std::span<const std::uint32_t> blocks, double alpha) {
  if (!(alpha > 0.0)) throw ArgumentError("eppf_log_prob: alpha must be > 0");
  std::uint64_t n = 0;
  double lp = 0.0;
  for (auto b : blocks) {
    if (b == 0) throw ArgumentError("eppf_log_prob: empty block");
    n += b;
    lp += std::log(alpha) + std::lgamma(static_cast<double>(b));
  }
  if (blocks.empty()) return 0.0;
  lp -= std::lgamma(alpha + static_cast<double>(n)) - std::lgamma(alpha);
  return lp;
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> normalize_log(std::span<const double> log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw ArgumentError("normalize_log: no finite weight");
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(log_weights[k] - lse);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t sample_categorical_log(std::span<const double> log_weights, Rng& rng) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) {
    if (std::isnan(v)) throw ArgumentError("sample_categorical_log: NaN weight");
    m = std::max(m, v);
  }
  if (!std::isfinite(m)) throw ArgumentError("sample_categorical_log: all weights are -inf");
  double total = 0.0;
  for (double v : log_weights) total += std::exp(v - m);
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double w = std::exp(log_weights[k] - m);
    if (w <= 0.0) continue;
    last = k;
    if (u < w) return k;
    u -= w;
  }
  return last;
}

}  // namespace nhdp

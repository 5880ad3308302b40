#include "nhdp/emission.hpp"

#include "nhdp/error.hpp"

namespace nhdp {

namespace {

// Row k (k < K) is restaurant k's predictive over the level below; row K is an empty restaurant's.
std::vector<std::vector<double>> transition(const ModelState& s, int upper) {
  const std::size_t K = s.num_dishes(upper);
  std::vector<std::vector<double>> rows(K + 1);
  for (std::size_t k = 0; k < K; ++k) rows[k] = restaurant_predictive(s, upper - 1, static_cast<std::int32_t>(k));
  rows[K] = restaurant_predictive(s, upper - 1, kNewDish);
  return rows;
}

EmissionTable topic_table(const ModelState& s, bool parallel) {
  const std::size_t K = s.num_dishes(0);
  const std::size_t V = s.vocab_size();
  EmissionTable e(K + 1, V);
  const double eta = s.hyper().eta;
  const double veta = eta * static_cast<double>(V);
  const auto rows = static_cast<long>(K);
#pragma omp parallel for schedule(static) if (parallel)
  for (long p = 0; p < rows; ++p) {
    const double denom = s.topic_total(static_cast<std::size_t>(p)) + veta;
    for (std::size_t w = 0; w < V; ++w)
      e(static_cast<std::size_t>(p), w) = (s.topic_word(static_cast<std::size_t>(p), static_cast<WordId>(w)) + eta) / denom;
  }
  for (std::size_t w = 0; w < V; ++w) e(K, w) = 1.0 / static_cast<double>(V);
  return e;
}

EmissionTable lift(const ModelState& s, int upper, const EmissionTable& below, bool parallel) {
  const auto P = transition(s, upper);
  const std::size_t V = below.vocab_size();
  EmissionTable e(P.size(), V);
  const auto rows = static_cast<long>(P.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (long k = 0; k < rows; ++k) {
    const auto& pk = P[static_cast<std::size_t>(k)];
    for (std::size_t q = 0; q < pk.size(); ++q) {
      const double wq = pk[q];
      if (wq == 0.0) continue;
      for (std::size_t w = 0; w < V; ++w) e(static_cast<std::size_t>(k), w) += wq * below(q, w);
    }
  }
  return e;
}

EmissionTable build(const ModelState& s, int level, bool parallel) {
  if (level < 0 || level > s.depth()) throw ArgumentError("emission_table: level out of range");
  EmissionTable e = topic_table(s, parallel);
  for (int l = 1; l <= level; ++l) e = lift(s, l, e, parallel);
  return e;
}

}  // namespace

EmissionTable emission_table(const ModelState& s, int level) { return build(s, level, true); }

EmissionTable emission_table_serial(const ModelState& s, int level) { return build(s, level, false); }

std::vector<std::vector<double>> word_emission(const ModelState& s, WordId w) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(s.num_levels()));
  const std::size_t K0 = s.num_dishes(0);
  const double eta = s.hyper().eta;
  const double veta = eta * static_cast<double>(s.vocab_size());
  out[0].resize(K0 + 1);
  for (std::size_t p = 0; p < K0; ++p) out[0][p] = (s.topic_word(p, w) + eta) / (s.topic_total(p) + veta);
  out[0][K0] = 1.0 / static_cast<double>(s.vocab_size());
  for (int l = 1; l < s.num_levels(); ++l) {
    const auto P = transition(s, l);
    auto& cur = out[l];
    cur.assign(P.size(), 0.0);
    for (std::size_t k = 0; k < P.size(); ++k)
      for (std::size_t q = 0; q < P[k].size(); ++q) cur[k] += P[k][q] * out[l - 1][q];
  }
  return out;
}

}  // namespace nhdp

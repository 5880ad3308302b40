#include "nhdp/gibbs_direct.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "nhdp/error.hpp"

namespace nhdp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// log(exp(a) + exp(b))
double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double gamma_rate(Rng& rng, double shape, double rate) { return rng.gamma(shape) / rate; }

}  // namespace

std::vector<double> weights_z0(const ModelState& s, WordId w, std::int32_t r) {
  const auto prior = restaurant_predictive(s, 0, r);
  const std::size_t K = s.num_dishes(0);
  const double eta = s.hyper().eta;
  const double veta = eta * static_cast<double>(s.vocab_size());
  std::vector<double> lw(K + 1);
  for (std::size_t p = 0; p < K; ++p)
    lw[p] = safe_log(prior[p]) + std::log((s.topic_word(p, w) + eta) / (s.topic_total(p) + veta));
  lw[K] = safe_log(prior[K]) - std::log(static_cast<double>(s.vocab_size()));
  return lw;
}

std::vector<double> weights_zl(const ModelState& s, int level, std::int32_t r, std::int32_t q) {
  if (level < 1 || level > s.depth()) throw InvariantError("weights_zl: level out of range");
  if (q < 0 || static_cast<std::size_t>(q) >= s.num_dishes(level - 1))
    throw InvariantError("weights_zl: inactive lower dish " + std::to_string(q));
  const auto upper = restaurant_predictive(s, level, r);
  const std::size_t K = s.num_dishes(level);
  const double a = s.hyper().alpha[level - 1];
  const double bq = s.beta(level - 1, static_cast<std::size_t>(q));
  std::vector<double> lw(K + 1);
  for (std::size_t k = 0; k < K; ++k) {
    const double lower = (s.count(level - 1, k, static_cast<std::size_t>(q)) + a * bq) / (s.row_total(level - 1, k) + a);
    lw[k] = safe_log(upper[k]) + safe_log(lower);
  }
  lw[K] = safe_log(upper[K]) + safe_log(bq);
  return lw;
}

std::span<const AuthorId> known_authors(const AuthorLabels& labels, std::size_t j) {
  if (j >= labels.known.size()) return {};
  return labels.known[j];
}

void apply_entity_regime(std::span<double> lw, const ModelState& s, std::span<const AuthorId> known, Regime regime,
                         double epsilon) {
  if (regime == Regime::kNone) return;
  const std::size_t K = lw.size() - 1;
  auto is_known = [&](std::size_t k) {
    const AuthorId a = s.dish_author(k);
    return a != kNoAuthor && std::binary_search(known.begin(), known.end(), a);
  };
  if (regime == Regime::kComplete) {
    if (known.empty()) throw ArgumentError("regime complete requires every document to list its authors");
    for (std::size_t k = 0; k < K; ++k)
      if (!is_known(k)) lw[k] = kNegInf;
    lw[K] = kNegInf;
    return;
  }
  if (epsilon <= 0.0) return;
  const double le = std::log(epsilon);
  for (std::size_t k = 0; k < K; ++k)
    if (is_known(k)) lw[k] = log_add(lw[k], le);
}

void resample_token(ModelState& s, std::size_t t, std::span<const AuthorId> known, Rng& rng) {
  const int L = s.depth();
  const std::int32_t doc = s.restaurant_of(L, t);
  const auto old = s.path(t);
  s.detach_token(t);

  std::vector<std::int32_t> path(static_cast<std::size_t>(s.num_levels()), kNewDish);
  std::int32_t r = doc;
  for (int l = L; l >= 1; --l) {
    auto lw = weights_zl(s, l, r, old[l - 1]);
    if (l == L) apply_entity_regime(lw, s, known, s.regime(), s.hyper().epsilon_bias);
    const std::size_t idx = sample_categorical_log(lw, rng);
    path[l] = idx == s.num_dishes(l) ? kNewDish : static_cast<std::int32_t>(idx);
    r = path[l];
  }
  {
    auto lw = weights_z0(s, s.word(t), r);
    if (L == 0) apply_entity_regime(lw, s, known, s.regime(), s.hyper().epsilon_bias);
    const std::size_t idx = sample_categorical_log(lw, rng);
    path[0] = idx == s.num_dishes(0) ? kNewDish : static_cast<std::int32_t>(idx);
  }
  if (s.regime() == Regime::kComplete) {
    const std::int32_t top = path[L];
    if (top == kNewDish || !std::binary_search(known.begin(), known.end(), s.dish_author(top)))
      throw InvariantError("complete regime drew a top-level dish outside the document's authors");
  }
  s.attach_token(t, path, rng);
  s.prune_empty_dishes();
}

void resample_table_counts(ModelState& s, int level, Rng& rng) {
  const double a = s.hyper().alpha[level];
  for (std::size_t r = 0; r < s.num_restaurants(level); ++r) {
    for (std::size_t k = 0; k < s.num_dishes(level); ++k) {
      const std::uint32_t n = s.count(level, r, k);
      if (n == 0) {
        s.set_tables(level, r, k, 0);
        continue;
      }
      const double ab = std::max(a * s.beta(level, k), std::numeric_limits<double>::min());
      s.set_tables(level, r, k, sample_table_count(ab, n, rng));
    }
  }
}

void resample_sticks(ModelState& s, int level, Rng& rng) {
  const std::size_t K = s.num_dishes(level);
  const double g = s.hyper().gamma[level];
  if (s.truncated(level)) {
    std::vector<double> params(K);
    for (std::size_t k = 0; k < K; ++k)
      params[k] = g / static_cast<double>(K) + static_cast<double>(s.table_column_total(level, k));
    s.set_betas(level, sample_dirichlet(params, rng), 0.0);
    return;
  }
  std::vector<std::size_t> live;
  std::vector<double> params;
  for (std::size_t k = 0; k < K; ++k) {
    const auto m = s.table_column_total(level, k);
    if (m > 0) {
      live.push_back(k);
      params.push_back(static_cast<double>(m));
    }
  }
  params.push_back(g);
  const auto draw = sample_dirichlet(params, rng);
  std::vector<double> beta(K, 0.0);
  for (std::size_t i = 0; i < live.size(); ++i) beta[live[i]] = draw[i];
  // Tiny gamma can push the remainder below what a double holds; floor it so new dishes stay reachable.
  constexpr double tiny = std::numeric_limits<double>::min();
  double rest = std::max(draw.back(), tiny);
  // Dishes kept without tables (pinned author dishes) get a fresh piece of the remainder.
  for (std::size_t k = 0; k < K; ++k) {
    if (s.table_column_total(level, k) > 0) continue;
    const auto [b, keep] = rng.beta_split(1.0, g);
    beta[k] = std::max(rest * b, tiny);
    rest = std::max(rest * keep, tiny);
  }
  s.set_betas(level, std::move(beta), rest);
}

double sample_dp_concentration(double current, std::uint64_t k, std::uint64_t n, const GammaPrior& prior, Rng& rng) {
  if (n == 0 || k == 0) return gamma_rate(rng, prior.shape, prior.rate);
  const double eta = rng.beta(current + 1.0, static_cast<double>(n));
  const double rate = prior.rate - std::log(eta);
  const double odds = (prior.shape + static_cast<double>(k) - 1.0) / (static_cast<double>(n) * rate);
  const double shape = rng.uniform() < odds / (1.0 + odds) ? prior.shape + static_cast<double>(k)
                                                            : prior.shape + static_cast<double>(k) - 1.0;
  return gamma_rate(rng, shape, rate);
}

double sample_hdp_concentration(double current, std::span<const std::uint32_t> customers, std::uint64_t tables,
                                const GammaPrior& prior, Rng& rng, int iterations) {
  const bool empty = std::all_of(customers.begin(), customers.end(), [](auto n) { return n == 0; });
  if (empty) return gamma_rate(rng, prior.shape, prior.rate);
  double a = current;
  for (int it = 0; it < iterations; ++it) {
    double sum_log_w = 0.0;
    double sum_s = 0.0;
    for (auto n : customers) {
      if (n == 0) continue;
      const double nr = static_cast<double>(n);
      sum_log_w += std::log(rng.beta(a + 1.0, nr));
      if (rng.bernoulli(nr / (nr + a))) sum_s += 1.0;
    }
    a = gamma_rate(rng, prior.shape + static_cast<double>(tables) - sum_s, prior.rate - sum_log_w);
  }
  return a;
}

void resample_concentrations(ModelState& s, Rng& rng) {
  Hyper& h = s.hyper();
  for (int l = 0; l < s.num_levels(); ++l) {
    const std::uint64_t tables = s.table_total(l);
    std::vector<std::uint32_t> customers(s.num_restaurants(l));
    for (std::size_t r = 0; r < customers.size(); ++r) customers[r] = s.row_total(l, r);
    h.alpha[l] = sample_hdp_concentration(h.alpha[l], customers, tables, h.alpha_prior[l], rng);
    // A fixed menu has a finite symmetric prior, not a DP; its gamma stays put.
    if (s.truncated(l)) continue;
    std::uint64_t k = 0;
    for (std::size_t d = 0; d < s.num_dishes(l); ++d)
      if (s.table_column_total(l, d) > 0) ++k;
    h.gamma[l] = sample_dp_concentration(h.gamma[l], k, tables, h.gamma_prior[l], rng);
  }
}

double log_likelihood(const ModelState& s) {
  const double eta = s.hyper().eta;
  const double V = static_cast<double>(s.vocab_size());
  double ll = 0.0;
  for (std::size_t p = 0; p < s.num_dishes(0); ++p) {
    if (s.topic_total(p) == 0) continue;
    ll += std::lgamma(V * eta) - std::lgamma(V * eta + s.topic_total(p));
    for (std::size_t w = 0; w < s.vocab_size(); ++w) {
      const auto c = s.topic_word(p, static_cast<WordId>(w));
      if (c > 0) ll += std::lgamma(eta + c) - std::lgamma(eta);
    }
  }
  return ll;
}

double log_prior(const ModelState& s) {
  double lp = 0.0;
  for (int l = 0; l < s.num_levels(); ++l) {
    const double a = s.hyper().alpha[l];
    for (std::size_t r = 0; r < s.num_restaurants(l); ++r) {
      const auto n = s.row_total(l, r);
      if (n == 0) continue;
      lp += std::lgamma(a) - std::lgamma(a + n);
      for (std::size_t k = 0; k < s.num_dishes(l); ++k) {
        const auto c = s.count(l, r, k);
        if (c == 0) continue;
        const double ab = a * s.beta(l, k);
        lp += std::lgamma(ab + c) - std::lgamma(ab);
      }
    }
  }
  return lp;
}

SweepStats sweep(ModelState& s, const AuthorLabels& labels, Rng& rng, const SweepOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t j = 0; j < s.num_docs(); ++j) {
    const auto known = known_authors(labels, j);
    for (std::size_t i = 0; i < s.doc_length(j); ++i) resample_token(s, s.token_index(j, i), known, rng);
  }
  for (int l = 0; l < s.num_levels(); ++l) resample_table_counts(s, l, rng);
  for (int l = 0; l < s.num_levels(); ++l) resample_sticks(s, l, rng);
  if (options.resample_concentrations) resample_concentrations(s, rng);
  s.set_sweeps_done(s.sweeps_done() + 1);

  SweepStats st;
  for (int l = 0; l < s.num_levels(); ++l) st.dishes.push_back(s.num_dishes(l));
  st.log_likelihood = log_likelihood(s);
  st.log_prior = log_prior(s);
  st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return st;
}

}  // namespace nhdp

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "nhdp/emission.hpp"
#include "nhdp/error.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

namespace {

std::vector<double> log_product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double v = a[k] * b[k];
    out[k] = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

// Full path of a new token in document j drawn from its predictive given the
// tokens already seated, top-down with lower levels summed out.
std::vector<std::int32_t> draw_path(const ModelState& s, std::size_t j, WordId w, std::span<const AuthorId> known,
                                    Rng& rng) {
  const auto E = word_emission(s, w);
  std::vector<std::int32_t> path(static_cast<std::size_t>(s.num_levels()), kNewDish);
  std::int32_t r = static_cast<std::int32_t>(j);
  for (int l = s.depth(); l >= 0; --l) {
    auto lw = log_product(restaurant_predictive(s, l, r), E[l]);
    if (l == s.depth()) apply_entity_regime(lw, s, known, s.regime(), s.hyper().epsilon_bias);
    const std::size_t idx = sample_categorical_log(lw, rng);
    path[l] = idx == s.num_dishes(l) ? kNewDish : static_cast<std::int32_t>(idx);
    r = path[l];
  }
  return path;
}

void refresh_sticks(ModelState& s, Rng& rng) {
  for (int l = 0; l < s.num_levels(); ++l) resample_table_counts(s, l, rng);
  for (int l = 0; l < s.num_levels(); ++l) resample_sticks(s, l, rng);
}

}  // namespace

ModelState new_state(const Corpus& corpus, const AuthorLabels& labels, const Hyper& hyper, Rng& rng,
                     StateOptions options) {
  const Regime regime = labels.regime;
  if (regime != Regime::kNone) {
    if (hyper.depth < 1) throw ArgumentError("entity regimes need at least one level above the topics");
    if (labels.known.size() != corpus.num_docs())
      throw ArgumentError("author labels cover " + std::to_string(labels.known.size()) + " documents, corpus has " +
                          std::to_string(corpus.num_docs()));
  }
  if (regime == Regime::kComplete) {
    for (std::size_t j = 0; j < labels.known.size(); ++j)
      if (labels.known[j].empty())
        throw ArgumentError("regime complete but document " + std::to_string(j) + " has no authors");
  }
  options.regime = regime;
  ModelState s(corpus, hyper, options);

  if (regime != Regime::kNone) {
    std::set<AuthorId> authors;
    for (const auto& a : labels.known) authors.insert(a.begin(), a.end());
    for (AuthorId a : authors) s.spawn_dish(s.depth(), rng, a);
  }

  for (std::size_t j = 0; j < s.num_docs(); ++j) {
    const auto known = known_authors(labels, j);
    for (std::size_t i = 0; i < s.doc_length(j); ++i) {
      const std::size_t t = s.token_index(j, i);
      const auto path = draw_path(s, j, s.word(t), known, rng);
      s.attach_token(t, path, rng);
    }
  }
  refresh_sticks(s, rng);
  return s;
}

ModelState state_from_assignments(const Corpus& corpus, const Hyper& hyper,
                                  const std::vector<std::vector<std::int32_t>>& z, Rng& rng, StateOptions options) {
  ModelState s(corpus, hyper, options);
  if (z.size() != static_cast<std::size_t>(s.num_levels()))
    throw ArgumentError("state_from_assignments: need one assignment vector per level");
  for (const auto& zl : z)
    if (zl.size() != s.num_tokens()) throw ArgumentError("state_from_assignments: assignment length mismatch");

  for (int l = s.depth(); l >= 0; --l) {
    std::int32_t top = -1;
    for (auto k : z[l]) {
      if (k < 0) throw ArgumentError("state_from_assignments: negative dish label");
      top = std::max(top, k);
    }
    const auto need = static_cast<std::size_t>(top + 1);
    if (s.truncated(l)) {
      if (need > s.num_dishes(l)) throw ArgumentError("state_from_assignments: label beyond the fixed menu");
      continue;
    }
    while (s.num_dishes(l) < need) s.spawn_dish(l, rng);
  }
  std::vector<std::int32_t> path(static_cast<std::size_t>(s.num_levels()));
  for (std::size_t t = 0; t < s.num_tokens(); ++t) {
    for (int l = 0; l < s.num_levels(); ++l) path[l] = z[l][t];
    s.attach_token(t, path, rng);
  }
  s.prune_empty_dishes();
  for (int l = 0; l < s.num_levels(); ++l) resample_sticks(s, l, rng);
  return s;
}

}  // namespace nhdp

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/randdist.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

/// Log weights over active topics plus a trailing "new topic" entry for a
/// detached token with word w sitting in level-0 restaurant r (kNewDish for a
/// restaurant that does not exist yet).
std::vector<double> weights_z0(const ModelState& state, WordId w, std::int32_t r);

/// Log weights over active level-`level` dishes plus "new" for a detached
/// token whose restaurant at this level is r and whose level-(level-1) dish is
/// q. Requires level >= 1 and q active.
std::vector<double> weights_zl(const ModelState& state, int level, std::int32_t r, std::int32_t q);

/// Mask or bias top-level log weights (last entry is "new") by the document's
/// known authors. Throws ArgumentError for regime complete with no authors.
void apply_entity_regime(std::span<double> log_weights, const ModelState& state,
                         std::span<const AuthorId> known, Regime regime, double epsilon);

/// Known authors of document j, or an empty span when the labels carry none.
std::span<const AuthorId> known_authors(const AuthorLabels& labels, std::size_t j);

void resample_token(ModelState& state, std::size_t t, std::span<const AuthorId> known, Rng& rng);
void resample_table_counts(ModelState& state, int level, Rng& rng);
void resample_sticks(ModelState& state, int level, Rng& rng);
void resample_concentrations(ModelState& state, Rng& rng);

/// Draws from the posterior of a single DP concentration given the number of
/// represented components and total draws (tables). Prior draw when n == 0.
double sample_dp_concentration(double current, std::uint64_t k, std::uint64_t n, const GammaPrior& prior, Rng& rng);

/// Multi-restaurant version: `customers[r]` and total tables across restaurants.
double sample_hdp_concentration(double current, std::span<const std::uint32_t> customers, std::uint64_t tables,
                                const GammaPrior& prior, Rng& rng, int iterations = 5);

struct SweepOptions {
  bool resample_concentrations = true;
};

struct SweepStats {
  std::vector<std::size_t> dishes;  // K per level
  double log_likelihood = 0.0;      // words given level-0 topics, topics integrated out
  double log_prior = 0.0;           // assignments given sticks, restaurant weights integrated out
  double wall_ms = 0.0;
};

SweepStats sweep(ModelState& state, const AuthorLabels& labels, Rng& rng, const SweepOptions& options = {});

/// Collapsed log p(words | z^0).
double log_likelihood(const ModelState& state);
/// Sum over levels of log p(z^l | z^{l+1}, beta^l).
double log_prior(const ModelState& state);

}  // namespace nhdp

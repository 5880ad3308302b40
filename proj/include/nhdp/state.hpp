#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/randdist.hpp"

namespace nhdp {

/// Gamma(shape, rate) prior on a concentration parameter.
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  bool operator==(const GammaPrior&) const = default;
};

/// Hyperparameters of an (L+1)-level nested HDP. Level 0 holds topics; level
/// `depth` is the outermost level whose restaurants are documents. depth == 0
/// is the plain single-level HDP.
struct Hyper {
  int depth = 1;
  double eta = 0.1;
  std::vector<double> alpha;  // per level
  std::vector<double> gamma;  // per level
  std::vector<GammaPrior> alpha_prior;
  std::vector<GammaPrior> gamma_prior;
  double epsilon_bias = 0.1;

  static Hyper with_depth(int depth, double alpha = 1.0, double gamma = 1.0);
  int num_levels() const { return depth + 1; }
  void check() const;
  bool operator==(const Hyper&) const = default;
};

/// Marks a dish that does not exist yet ("new dish") in a path, or an empty
/// restaurant that has not been created.
inline constexpr std::int32_t kNewDish = -1;

struct StateOptions {
  Regime regime = Regime::kNone;
  /// Fixed number of dishes per level (weak-limit truncation). Empty means
  /// unbounded at every level.
  std::vector<std::size_t> truncation;
};

/// Sufficient statistics of the direct-assignment sampler.
///
/// Restaurants at level l are the dishes of level l+1 (documents at the top
/// level). n(l, r, k) counts tokens whose level-(l+1) dish is r and whose
/// level-l dish is k. Table counts m are kept within [1, n] for every nonzero
/// cell and are resampled properly once per sweep.
class ModelState {
 public:
  ModelState() = default;
  ModelState(const Corpus& corpus, Hyper hyper, StateOptions options = {});

  // -- shape -------------------------------------------------------------
  int depth() const { return hyper_.depth; }
  int num_levels() const { return hyper_.depth + 1; }
  const Hyper& hyper() const { return hyper_; }
  Hyper& hyper() { return hyper_; }
  Regime regime() const { return regime_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t num_docs() const { return doc_offset_.empty() ? 0 : doc_offset_.size() - 1; }
  std::size_t num_tokens() const { return words_.size(); }
  std::size_t doc_length(std::size_t j) const { return doc_offset_[j + 1] - doc_offset_[j]; }
  std::size_t token_index(std::size_t j, std::size_t i) const { return doc_offset_[j] + i; }
  std::size_t doc_begin(std::size_t j) const { return doc_offset_[j]; }
  WordId word(std::size_t t) const { return words_[t]; }
  bool truncated(int level) const { return truncation_[level] > 0; }
  std::size_t truncation(int level) const { return truncation_[level]; }

  std::size_t num_dishes(int level) const { return levels_[level].beta.size(); }
  std::size_t num_restaurants(int level) const { return levels_[level].n.size(); }

  // -- counts --------------------------------------------------------------
  std::uint32_t count(int level, std::size_t r, std::size_t k) const { return levels_[level].n[r][k]; }
  std::span<const std::uint32_t> count_row(int level, std::size_t r) const { return levels_[level].n[r]; }
  std::uint32_t row_total(int level, std::size_t r) const { return levels_[level].row_total[r]; }
  std::uint32_t dish_total(int level, std::size_t k) const { return levels_[level].dish_total[k]; }
  std::uint32_t tables(int level, std::size_t r, std::size_t k) const { return levels_[level].m[r][k]; }
  std::uint64_t table_column_total(int level, std::size_t k) const;
  std::uint64_t table_total(int level) const;
  std::uint32_t topic_word(std::size_t topic, WordId w) const { return topic_word_[topic][w]; }
  std::uint32_t topic_total(std::size_t topic) const { return topic_total_[topic]; }

  double beta(int level, std::size_t k) const { return levels_[level].beta[k]; }
  double beta_new(int level) const { return levels_[level].beta_new; }
  std::span<const double> betas(int level) const { return levels_[level].beta; }

  std::int32_t z(int level, std::size_t t) const { return z_[level][t]; }
  /// Dish at every level for token t, indexed by level.
  std::vector<std::int32_t> path(std::size_t t) const;
  /// Restaurant token t sits in at `level`: its level+1 dish, or its document at the top.
  std::int32_t restaurant_of(int level, std::size_t t) const;

  AuthorId dish_author(std::size_t k) const { return dish_author_[k]; }
  std::span<const AuthorId> dish_authors() const { return dish_author_; }
  /// Level-`depth` dish labeled with `author`, or kNewDish when none.
  std::int32_t dish_for_author(AuthorId author) const;
  bool pinned(std::size_t k) const;

  std::uint64_t sweeps_done() const { return sweeps_done_; }
  void set_sweeps_done(std::uint64_t s) { sweeps_done_ = s; }

  // -- mutation ------------------------------------------------------------
  /// Decrement every count on token t's path without pruning. The token keeps
  /// its old path values (readable through z()) until attached again.
  void detach_token(std::size_t t);
  /// Assign `path` (indexed by level; kNewDish spawns) and increment counts.
  void attach_token(std::size_t t, std::span<const std::int32_t> path, Rng& rng);
  bool detached(std::size_t t) const { return detached_[t] != 0; }

  void remove_token(std::size_t j, std::size_t i);
  void add_token(std::size_t j, std::size_t i, std::span<const std::int32_t> path, Rng& rng);

  /// Create a dish at `level`, carving its stick from beta_new. Returns its label.
  std::int32_t spawn_dish(int level, Rng& rng, AuthorId author = kNoAuthor);
  /// Remove dishes with no customers (pinned author dishes and truncated
  /// levels excepted), compacting labels by moving the last label into each
  /// freed slot. Their stick mass goes back to beta_new.
  void prune_empty_dishes();

  void set_tables(int level, std::size_t r, std::size_t k, std::uint32_t m) { levels_[level].m[r][k] = m; }
  void set_betas(int level, std::vector<double> beta, double beta_new);
  /// Testing hook: overwrite one count cell without touching anything else.
  void corrupt_count(int level, std::size_t r, std::size_t k, std::uint32_t value) { levels_[level].n[r][k] = value; }

  bool operator==(const ModelState&) const = default;

 private:
  struct Level {
    std::vector<std::vector<std::uint32_t>> n;  // [restaurant][dish]
    std::vector<std::uint32_t> row_total;       // [restaurant]
    std::vector<std::vector<std::uint32_t>> m;  // [restaurant][dish]
    std::vector<std::uint32_t> dish_total;      // [dish]
    std::vector<double> beta;
    double beta_new = 1.0;
    bool operator==(const Level&) const = default;
  };

  void increment(int level, std::size_t r, std::size_t k);
  void decrement(int level, std::size_t r, std::size_t k);
  void remove_dish(int level, std::size_t k);
  void push_restaurant(int level);

  Hyper hyper_;
  Regime regime_ = Regime::kNone;
  std::vector<std::size_t> truncation_;
  std::size_t vocab_size_ = 0;
  std::vector<WordId> words_;
  std::vector<std::size_t> doc_offset_;
  std::vector<std::vector<std::int32_t>> z_;  // [level][token]
  std::vector<Level> levels_;
  std::vector<std::vector<std::uint32_t>> topic_word_;
  std::vector<std::uint32_t> topic_total_;
  std::vector<AuthorId> dish_author_;
  std::vector<std::uint8_t> detached_;
  std::size_t num_detached_ = 0;
  std::uint64_t sweeps_done_ = 0;

  friend void save_checkpoint(const ModelState& state, const Rng& rng, const std::filesystem::path& path);
  friend struct CheckpointReader;
};

/// CRP-style seating weights in restaurant r at `level` given current sticks:
/// (n_rk + a b_k) / (n_r + a) for existing dishes, a b_new / (n_r + a) last.
/// r == kNewDish stands for an empty restaurant.
std::vector<double> restaurant_predictive(const ModelState& state, int level, std::int32_t r);

/// Sequential online initialization: each token's full path is drawn from its
/// predictive given the tokens initialized before it. In the complete and
/// partial regimes one pinned top-level dish is created per known author first.
ModelState new_state(const Corpus& corpus, const AuthorLabels& labels, const Hyper& hyper, Rng& rng,
                     StateOptions options = {});

/// Build a state from explicit per-token paths (z[level][token]). Table counts
/// are set to one per nonzero cell and sticks sampled from their posterior.
ModelState state_from_assignments(const Corpus& corpus, const Hyper& hyper,
                                  const std::vector<std::vector<std::int32_t>>& z, Rng& rng,
                                  StateOptions options = {});

struct ValidationReport {
  bool ok = true;
  std::string invariant;  // name of the first violated invariant
  std::string detail;
  explicit operator bool() const { return ok; }
};

/// Recompute every count from the assignments and check all state invariants.
ValidationReport validate(const ModelState& state);

// -- checkpoints ---------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelState state;
  Rng rng{0};
};

void save_checkpoint(const ModelState& state, const Rng& rng, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nhdp

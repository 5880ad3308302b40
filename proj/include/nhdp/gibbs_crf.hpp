#pragma once

// Table-based franchise samplers for the two shapes where the table-level
// conditionals stay tractable: a single-level HDP over grouped data, and the
// two-level model over ungrouped data (one DP over entities, each entity an
// HDP restaurant over shared topics).
//
// Deeper nestings are not offered. Resampling a table's dish at level l >= 1
// means summing over every way the table's customers could be seated in the
// new dish's lower restaurant, which grows exponentially with the table size.

#include <cstdint>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/randdist.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

struct CrfTable {
  std::uint32_t customers = 0;
  std::int32_t dish = kNewDish;
  bool operator==(const CrfTable&) const = default;
};

/// Topic side shared by both samplers: per-dish table counts and word counts.
struct CrfTopics {
  std::size_t vocab = 0;
  double eta = 0.1;
  std::vector<std::uint32_t> tables;  // m_k
  std::vector<std::vector<std::uint32_t>> word;  // [dish][word]
  std::vector<std::uint32_t> total;   // [dish]

  std::size_t size() const { return tables.size(); }
  std::uint64_t total_tables() const;
  double log_f(std::size_t k, WordId w) const;
  double log_f_new() const;
  /// log of the marginal of a block of words (sparse counts) under dish k, or a fresh dish for k == kNewDish.
  double log_block(std::int32_t k, const std::vector<std::pair<WordId, std::uint32_t>>& block) const;
  std::int32_t add_dish();
  bool operator==(const CrfTopics&) const = default;
};

struct CrfStats {
  std::size_t dishes = 0;
  std::size_t tables = 0;
  std::size_t entities = 0;
  std::uint64_t weight_evals = 0;
  double wall_ms = 0.0;
};

// -- single-level HDP ----------------------------------------------------------

struct HdpCrfState {
  double alpha = 1.0;
  double gamma = 1.0;
  CrfTopics topics;
  std::vector<WordId> words;
  std::vector<std::size_t> doc_offset;
  std::vector<std::vector<CrfTable>> tables;  // [doc][table], insertion order
  std::vector<std::int32_t> table_of;         // per token, kNewDish while detached

  std::size_t num_docs() const { return tables.size(); }
  std::size_t doc_of(std::size_t t) const;
  void detach_token(std::size_t t);
  bool operator==(const HdpCrfState&) const = default;
};

/// Empty franchise; call hdp_sample_table on each token to initialize.
HdpCrfState hdp_crf_state(const Corpus& corpus, double alpha, double gamma, double eta);
/// Sequential initialization: every token seated by hdp_sample_table in order.
HdpCrfState hdp_crf_init(const Corpus& corpus, double alpha, double gamma, double eta, Rng& rng);

/// Seat detached token t at an existing table or a new one (which then draws its dish).
void hdp_sample_table(HdpCrfState& crf, std::size_t t, Rng& rng);
/// Redraw the dish of table tb in document j, all its customers moving with it.
void hdp_sample_dish(HdpCrfState& crf, std::size_t j, std::size_t tb, Rng& rng);
CrfStats crf_sweep(HdpCrfState& crf, Rng& rng);

/// Dish of every token.
std::vector<std::int32_t> token_dishes(const HdpCrfState& crf);
/// Consistency of every count with the seating; empty string when fine.
std::string crf_check(const HdpCrfState& crf);

/// Equivalent direct-assignment state: same topic labels, table counts copied
/// from the seating, sticks drawn from their posterior.
ModelState to_model_state(const HdpCrfState& crf, const Corpus& corpus, const Hyper& hyper, Rng& rng);

// -- ungrouped two-level -------------------------------------------------------

struct U2CrfState {
  double alpha0 = 1.0;  // within-entity table concentration
  double gamma0 = 1.0;  // topic menu concentration
  double gamma1 = 1.0;  // entity concentration
  CrfTopics topics;
  std::vector<WordId> words;
  std::vector<std::int32_t> entity_of;             // kNewDish while detached
  std::vector<std::int32_t> table_of;              // within the entity's restaurant
  std::vector<std::vector<CrfTable>> tables;       // [entity][table]
  std::vector<std::uint32_t> entity_customers;     // m^1_r
  std::vector<std::vector<std::size_t>> members;   // tokens of each entity
  std::vector<std::size_t> member_pos;             // index of a token in its entity's member list
  std::uint64_t weight_evals = 0;                  // categorical weights evaluated so far
  std::uint64_t last_entity_evals = 0;             // weights in the latest entity update

  std::size_t num_entities() const { return tables.size(); }
  void detach_token(std::size_t i);
  bool operator==(const U2CrfState&) const = default;
};

/// All tokens of the corpus pooled into one group.
U2CrfState u2_crf_state(const Corpus& corpus, double alpha0, double gamma0, double gamma1, double eta);
U2CrfState u2_crf_init(const Corpus& corpus, double alpha0, double gamma0, double gamma1, double eta, Rng& rng);

/// Seat detached token i at a table of its (fixed) entity.
void u2_sample_table(U2CrfState& crf, std::size_t i, Rng& rng);
/// Draw the entity of a fully detached token, tables summed out, then its table.
void u2_sample_entity(U2CrfState& crf, std::size_t i, Rng& rng);
void u2_sample_dish(U2CrfState& crf, std::size_t r, std::size_t tb, Rng& rng);
CrfStats crf_sweep(U2CrfState& crf, Rng& rng);

/// Weights an entity update evaluates in the current state (token detached):
/// the new-table marginal over K^0 + 1 dishes, T_r + 1 per entity, one for a new entity.
std::uint64_t u2_entity_eval_count(const U2CrfState& crf);
std::string crf_check(const U2CrfState& crf);

}  // namespace nhdp

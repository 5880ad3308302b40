#include "nhdp/gibbs_crf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "nhdp/error.hpp"
#include "nhdp/gibbs_direct.hpp"

namespace nhdp {

namespace {

using Block = std::vector<std::pair<WordId, std::uint32_t>>;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// Remove dish k by moving the last dish into its slot; every table pointing at
// the last label is relabeled.
template <typename Groups>
void drop_dish(CrfTopics& topics, Groups& groups, std::size_t k) {
  const std::size_t last = topics.size() - 1;
  if (k != last) {
    topics.tables[k] = topics.tables[last];
    topics.word[k] = std::move(topics.word[last]);
    topics.total[k] = topics.total[last];
    for (auto& group : groups)
      for (auto& tb : group)
        if (tb.dish == static_cast<std::int32_t>(last)) tb.dish = static_cast<std::int32_t>(k);
  }
  topics.tables.pop_back();
  topics.word.pop_back();
  topics.total.pop_back();
}

Block make_block(const std::vector<WordId>& words, const std::vector<std::size_t>& tokens) {
  std::map<WordId, std::uint32_t> counts;
  for (auto t : tokens) ++counts[words[t]];
  return Block(counts.begin(), counts.end());
}

void add_block(CrfTopics& topics, std::size_t k, const Block& block, int sign) {
  for (const auto& [w, c] : block) {
    topics.word[k][w] = static_cast<std::uint32_t>(static_cast<std::int64_t>(topics.word[k][w]) + sign * static_cast<std::int64_t>(c));
    topics.total[k] = static_cast<std::uint32_t>(static_cast<std::int64_t>(topics.total[k]) + sign * static_cast<std::int64_t>(c));
  }
}

// Probability of word w at a table that does not exist yet: its dish is either
// an existing one (by table count) or a new one.
double new_table_prob(const CrfTopics& topics, WordId w, double gamma) {
  const double M = static_cast<double>(topics.total_tables());
  double p = gamma / (M + gamma) * std::exp(topics.log_f_new());
  for (std::size_t k = 0; k < topics.size(); ++k) p += topics.tables[k] / (M + gamma) * std::exp(topics.log_f(k, w));
  return p;
}

std::int32_t draw_dish_for_new_table(CrfTopics& topics, WordId w, double gamma, Rng& rng) {
  std::vector<double> lw(topics.size() + 1);
  for (std::size_t k = 0; k < topics.size(); ++k) lw[k] = std::log(static_cast<double>(topics.tables[k])) + topics.log_f(k, w);
  lw.back() = std::log(gamma) + topics.log_f_new();
  const std::size_t idx = sample_categorical_log(lw, rng);
  return idx == topics.size() ? topics.add_dish() : static_cast<std::int32_t>(idx);
}

// Redraw the dish of a table holding `block`; returns the chosen label.
template <typename Groups>
std::int32_t resample_table_dish(CrfTopics& topics, Groups& groups, CrfTable& table, const Block& block, double gamma,
                                 Rng& rng) {
  const auto old = static_cast<std::size_t>(table.dish);
  add_block(topics, old, block, -1);
  --topics.tables[old];
  table.dish = kNewDish;
  if (topics.tables[old] == 0) drop_dish(topics, groups, old);
  std::vector<double> lw(topics.size() + 1);
  for (std::size_t k = 0; k < topics.size(); ++k)
    lw[k] = std::log(static_cast<double>(topics.tables[k])) + topics.log_block(static_cast<std::int32_t>(k), block);
  lw.back() = std::log(gamma) + topics.log_block(kNewDish, block);
  const std::size_t idx = sample_categorical_log(lw, rng);
  const std::int32_t k = idx == topics.size() ? topics.add_dish() : static_cast<std::int32_t>(idx);
  table.dish = k;
  ++topics.tables[k];
  add_block(topics, static_cast<std::size_t>(k), block, +1);
  return k;
}

std::string check_topics(const CrfTopics& topics, const std::vector<std::uint32_t>& tables,
                         const std::vector<std::vector<std::uint32_t>>& word) {
  if (topics.tables != tables) return "dish table counts disagree with the seating";
  if (topics.word != word) return "topic-word counts disagree with the seating";
  for (std::size_t k = 0; k < topics.size(); ++k) {
    if (topics.tables[k] == 0) return "dish " + std::to_string(k) + " has no tables";
    std::uint32_t s = 0;
    for (auto c : topics.word[k]) s += c;
    if (s != topics.total[k]) return "topic total mismatch for dish " + std::to_string(k);
  }
  return {};
}

}  // namespace

// -- topics --------------------------------------------------------------------

std::uint64_t CrfTopics::total_tables() const {
  std::uint64_t s = 0;
  for (auto m : tables) s += m;
  return s;
}

double CrfTopics::log_f(std::size_t k, WordId w) const {
  return std::log((word[k][w] + eta) / (total[k] + eta * static_cast<double>(vocab)));
}

double CrfTopics::log_f_new() const { return -std::log(static_cast<double>(vocab)); }

double CrfTopics::log_block(std::int32_t k, const Block& block) const {
  const double veta = eta * static_cast<double>(vocab);
  const double n = k == kNewDish ? 0.0 : total[k];
  double b = 0.0;
  double lp = 0.0;
  for (const auto& [w, c] : block) {
    const double nw = k == kNewDish ? 0.0 : word[k][w];
    lp += std::lgamma(nw + c + eta) - std::lgamma(nw + eta);
    b += c;
  }
  return lp + std::lgamma(n + veta) - std::lgamma(n + b + veta);
}

std::int32_t CrfTopics::add_dish() {
  tables.push_back(0);
  word.emplace_back(vocab, 0u);
  total.push_back(0);
  return static_cast<std::int32_t>(tables.size() - 1);
}

// -- single-level HDP ----------------------------------------------------------

std::size_t HdpCrfState::doc_of(std::size_t t) const {
  auto it = std::upper_bound(doc_offset.begin(), doc_offset.end(), t);
  return static_cast<std::size_t>(std::distance(doc_offset.begin(), it) - 1);
}

void HdpCrfState::detach_token(std::size_t t) {
  if (table_of[t] == kNewDish) throw InvariantError("hdp crf: token " + std::to_string(t) + " is not seated");
  const std::size_t j = doc_of(t);
  const auto tb = static_cast<std::size_t>(table_of[t]);
  CrfTable& table = tables[j][tb];
  const auto dish = static_cast<std::size_t>(table.dish);
  --table.customers;
  --topics.word[dish][words[t]];
  --topics.total[dish];
  table_of[t] = kNewDish;
  if (table.customers > 0) return;
  tables[j].erase(tables[j].begin() + static_cast<std::ptrdiff_t>(tb));
  for (std::size_t u = doc_offset[j]; u < doc_offset[j + 1]; ++u)
    if (table_of[u] > static_cast<std::int32_t>(tb)) --table_of[u];
  if (--topics.tables[dish] == 0) drop_dish(topics, tables, dish);
}

HdpCrfState hdp_crf_state(const Corpus& corpus, double alpha, double gamma, double eta) {
  if (!(alpha > 0.0) || !(gamma > 0.0) || !(eta > 0.0)) throw ArgumentError("hdp crf: parameters must be > 0");
  corpus.check();
  HdpCrfState crf;
  crf.alpha = alpha;
  crf.gamma = gamma;
  crf.topics.vocab = corpus.vocab_size();
  crf.topics.eta = eta;
  crf.doc_offset.push_back(0);
  for (const auto& doc : corpus.docs) {
    crf.words.insert(crf.words.end(), doc.begin(), doc.end());
    crf.doc_offset.push_back(crf.words.size());
  }
  crf.tables.resize(corpus.num_docs());
  crf.table_of.assign(crf.words.size(), kNewDish);
  return crf;
}

HdpCrfState hdp_crf_init(const Corpus& corpus, double alpha, double gamma, double eta, Rng& rng) {
  auto crf = hdp_crf_state(corpus, alpha, gamma, eta);
  for (std::size_t t = 0; t < crf.words.size(); ++t) hdp_sample_table(crf, t, rng);
  return crf;
}

void hdp_sample_table(HdpCrfState& crf, std::size_t t, Rng& rng) {
  if (crf.table_of[t] != kNewDish) throw InvariantError("hdp_sample_table: token is seated");
  const std::size_t j = crf.doc_of(t);
  const WordId w = crf.words[t];
  auto& tables = crf.tables[j];
  std::vector<double> lw(tables.size() + 1);
  for (std::size_t tb = 0; tb < tables.size(); ++tb)
    lw[tb] = std::log(static_cast<double>(tables[tb].customers)) +
             crf.topics.log_f(static_cast<std::size_t>(tables[tb].dish), w);
  lw.back() = std::log(crf.alpha) + std::log(new_table_prob(crf.topics, w, crf.gamma));
  std::size_t idx = sample_categorical_log(lw, rng);
  if (idx == tables.size()) {
    const std::int32_t k = draw_dish_for_new_table(crf.topics, w, crf.gamma, rng);
    ++crf.topics.tables[k];
    tables.push_back(CrfTable{0, k});
  }
  CrfTable& table = tables[idx];
  ++table.customers;
  ++crf.topics.word[table.dish][w];
  ++crf.topics.total[table.dish];
  crf.table_of[t] = static_cast<std::int32_t>(idx);
}

void hdp_sample_dish(HdpCrfState& crf, std::size_t j, std::size_t tb, Rng& rng) {
  std::vector<std::size_t> tokens;
  for (std::size_t u = crf.doc_offset[j]; u < crf.doc_offset[j + 1]; ++u)
    if (crf.table_of[u] == static_cast<std::int32_t>(tb)) tokens.push_back(u);
  const Block block = make_block(crf.words, tokens);
  resample_table_dish(crf.topics, crf.tables, crf.tables[j][tb], block, crf.gamma, rng);
}

CrfStats crf_sweep(HdpCrfState& crf, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  CrfStats st;
  for (std::size_t t = 0; t < crf.words.size(); ++t) {
    crf.detach_token(t);
    st.weight_evals += crf.tables[crf.doc_of(t)].size() + 1 + crf.topics.size();
    hdp_sample_table(crf, t, rng);
  }
  for (std::size_t j = 0; j < crf.num_docs(); ++j)
    for (std::size_t tb = 0; tb < crf.tables[j].size(); ++tb) {
      st.weight_evals += crf.topics.size() + 1;
      hdp_sample_dish(crf, j, tb, rng);
    }
  st.dishes = crf.topics.size();
  for (const auto& doc : crf.tables) st.tables += doc.size();
  st.wall_ms = elapsed_ms(start);
  return st;
}

std::vector<std::int32_t> token_dishes(const HdpCrfState& crf) {
  std::vector<std::int32_t> z(crf.words.size(), kNewDish);
  for (std::size_t t = 0; t < z.size(); ++t)
    if (crf.table_of[t] != kNewDish) z[t] = crf.tables[crf.doc_of(t)][crf.table_of[t]].dish;
  return z;
}

std::string crf_check(const HdpCrfState& crf) {
  const std::size_t K = crf.topics.size();
  std::vector<std::uint32_t> m(K, 0);
  std::vector<std::vector<std::uint32_t>> word(K, std::vector<std::uint32_t>(crf.topics.vocab, 0));
  for (std::size_t j = 0; j < crf.num_docs(); ++j) {
    std::vector<std::uint32_t> customers(crf.tables[j].size(), 0);
    for (std::size_t t = crf.doc_offset[j]; t < crf.doc_offset[j + 1]; ++t) {
      const auto tb = crf.table_of[t];
      if (tb < 0 || static_cast<std::size_t>(tb) >= customers.size()) return "token " + std::to_string(t) + " unseated";
      ++customers[tb];
      const auto k = crf.tables[j][tb].dish;
      if (k < 0 || static_cast<std::size_t>(k) >= K) return "table without a live dish";
      ++word[k][crf.words[t]];
    }
    for (std::size_t tb = 0; tb < customers.size(); ++tb) {
      if (customers[tb] == 0) return "empty table left in document " + std::to_string(j);
      if (customers[tb] != crf.tables[j][tb].customers) return "table customer count mismatch";
      ++m[crf.tables[j][tb].dish];
    }
  }
  return check_topics(crf.topics, m, word);
}

ModelState to_model_state(const HdpCrfState& crf, const Corpus& corpus, const Hyper& hyper, Rng& rng) {
  if (hyper.depth != 0) throw ArgumentError("to_model_state: the table sampler is single-level");
  ModelState s = state_from_assignments(corpus, hyper, {token_dishes(crf)}, rng);
  if (s.num_dishes(0) != crf.topics.size()) throw InvariantError("to_model_state: dish labels were not preserved");
  for (std::size_t j = 0; j < crf.num_docs(); ++j) {
    std::vector<std::uint32_t> m(crf.topics.size(), 0);
    for (const auto& tb : crf.tables[j]) ++m[tb.dish];
    for (std::size_t k = 0; k < m.size(); ++k) s.set_tables(0, j, k, m[k]);
  }
  resample_sticks(s, 0, rng);
  return s;
}

// -- ungrouped two-level -------------------------------------------------------

void U2CrfState::detach_token(std::size_t i) {
  if (entity_of[i] == kNewDish || table_of[i] == kNewDish)
    throw InvariantError("u2 crf: token " + std::to_string(i) + " is not seated");
  const auto r = static_cast<std::size_t>(entity_of[i]);
  const auto tb = static_cast<std::size_t>(table_of[i]);
  CrfTable& table = tables[r][tb];
  const auto dish = static_cast<std::size_t>(table.dish);
  --table.customers;
  --topics.word[dish][words[i]];
  --topics.total[dish];
  --entity_customers[r];
  {
    const std::size_t pos = member_pos[i];
    const std::size_t moved = members[r].back();
    members[r][pos] = moved;
    member_pos[moved] = pos;
    members[r].pop_back();
  }
  entity_of[i] = kNewDish;
  table_of[i] = kNewDish;
  if (table.customers == 0) {
    tables[r].erase(tables[r].begin() + static_cast<std::ptrdiff_t>(tb));
    for (auto u : members[r])
      if (table_of[u] > static_cast<std::int32_t>(tb)) --table_of[u];
    if (--topics.tables[dish] == 0) drop_dish(topics, tables, dish);
  }
  if (entity_customers[r] == 0) {
    const std::size_t last = tables.size() - 1;
    if (r != last) {
      tables[r] = std::move(tables[last]);
      entity_customers[r] = entity_customers[last];
      members[r] = std::move(members[last]);
      for (auto u : members[r]) entity_of[u] = static_cast<std::int32_t>(r);
    }
    tables.pop_back();
    entity_customers.pop_back();
    members.pop_back();
  }
}

U2CrfState u2_crf_state(const Corpus& corpus, double alpha0, double gamma0, double gamma1, double eta) {
  if (!(alpha0 > 0.0) || !(gamma0 > 0.0) || !(gamma1 > 0.0) || !(eta > 0.0))
    throw ArgumentError("u2 crf: parameters must be > 0");
  corpus.check();
  U2CrfState crf;
  crf.alpha0 = alpha0;
  crf.gamma0 = gamma0;
  crf.gamma1 = gamma1;
  crf.topics.vocab = corpus.vocab_size();
  crf.topics.eta = eta;
  for (const auto& doc : corpus.docs) crf.words.insert(crf.words.end(), doc.begin(), doc.end());
  crf.entity_of.assign(crf.words.size(), kNewDish);
  crf.table_of.assign(crf.words.size(), kNewDish);
  crf.member_pos.assign(crf.words.size(), 0);
  return crf;
}

U2CrfState u2_crf_init(const Corpus& corpus, double alpha0, double gamma0, double gamma1, double eta, Rng& rng) {
  auto crf = u2_crf_state(corpus, alpha0, gamma0, gamma1, eta);
  for (std::size_t i = 0; i < crf.words.size(); ++i) u2_sample_entity(crf, i, rng);
  return crf;
}

void u2_sample_table(U2CrfState& crf, std::size_t i, Rng& rng) {
  if (crf.entity_of[i] == kNewDish || crf.table_of[i] != kNewDish)
    throw InvariantError("u2_sample_table: token needs an entity and no table");
  const auto r = static_cast<std::size_t>(crf.entity_of[i]);
  const WordId w = crf.words[i];
  auto& tables = crf.tables[r];
  std::vector<double> lw(tables.size() + 1);
  for (std::size_t tb = 0; tb < tables.size(); ++tb)
    lw[tb] = std::log(static_cast<double>(tables[tb].customers)) +
             crf.topics.log_f(static_cast<std::size_t>(tables[tb].dish), w);
  lw.back() = std::log(crf.alpha0) + std::log(new_table_prob(crf.topics, w, crf.gamma0));
  crf.weight_evals += lw.size();
  const std::size_t idx = sample_categorical_log(lw, rng);
  if (idx == tables.size()) {
    const std::int32_t k = draw_dish_for_new_table(crf.topics, w, crf.gamma0, rng);
    ++crf.topics.tables[k];
    tables.push_back(CrfTable{0, k});
  }
  CrfTable& table = tables[idx];
  ++table.customers;
  ++crf.topics.word[table.dish][w];
  ++crf.topics.total[table.dish];
  crf.table_of[i] = static_cast<std::int32_t>(idx);
  ++crf.entity_customers[r];
  crf.member_pos[i] = crf.members[r].size();
  crf.members[r].push_back(i);
}

void u2_sample_entity(U2CrfState& crf, std::size_t i, Rng& rng) {
  if (crf.entity_of[i] != kNewDish) throw InvariantError("u2_sample_entity: token is seated");
  const WordId w = crf.words[i];
  const std::size_t K = crf.topics.size();
  std::vector<double> f(K);
  for (std::size_t k = 0; k < K; ++k) f[k] = std::exp(crf.topics.log_f(k, w));
  const double fresh = new_table_prob(crf.topics, w, crf.gamma0);
  std::uint64_t evals = K + 1;

  const std::size_t R = crf.num_entities();
  std::vector<double> lw(R + 1);
  for (std::size_t r = 0; r < R; ++r) {
    const double n = crf.entity_customers[r];
    double p = crf.alpha0 * fresh;
    for (const auto& tb : crf.tables[r]) p += tb.customers * f[static_cast<std::size_t>(tb.dish)];
    evals += crf.tables[r].size() + 1;
    lw[r] = std::log(n) + std::log(p / (n + crf.alpha0));
  }
  lw.back() = std::log(crf.gamma1) + std::log(fresh);
  evals += 1;
  crf.last_entity_evals = evals;
  crf.weight_evals += evals;

  const std::size_t idx = sample_categorical_log(lw, rng);
  if (idx == R) {
    crf.tables.emplace_back();
    crf.entity_customers.push_back(0);
    crf.members.emplace_back();
  }
  crf.entity_of[i] = static_cast<std::int32_t>(idx);
  u2_sample_table(crf, i, rng);
}

void u2_sample_dish(U2CrfState& crf, std::size_t r, std::size_t tb, Rng& rng) {
  std::vector<std::size_t> tokens;
  for (auto u : crf.members[r])
    if (crf.table_of[u] == static_cast<std::int32_t>(tb)) tokens.push_back(u);
  std::sort(tokens.begin(), tokens.end());
  const Block block = make_block(crf.words, tokens);
  crf.weight_evals += crf.topics.size() + 1;
  resample_table_dish(crf.topics, crf.tables, crf.tables[r][tb], block, crf.gamma0, rng);
}

CrfStats crf_sweep(U2CrfState& crf, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t before = crf.weight_evals;
  for (std::size_t i = 0; i < crf.words.size(); ++i) {
    crf.detach_token(i);
    u2_sample_entity(crf, i, rng);
  }
  for (std::size_t r = 0; r < crf.num_entities(); ++r)
    for (std::size_t tb = 0; tb < crf.tables[r].size(); ++tb) u2_sample_dish(crf, r, tb, rng);
  CrfStats st;
  st.dishes = crf.topics.size();
  st.entities = crf.num_entities();
  for (const auto& e : crf.tables) st.tables += e.size();
  st.weight_evals = crf.weight_evals - before;
  st.wall_ms = elapsed_ms(start);
  return st;
}

std::uint64_t u2_entity_eval_count(const U2CrfState& crf) {
  std::uint64_t evals = crf.topics.size() + 1 + 1;
  for (const auto& e : crf.tables) evals += e.size() + 1;
  return evals;
}

std::string crf_check(const U2CrfState& crf) {
  const std::size_t K = crf.topics.size();
  const std::size_t R = crf.num_entities();
  std::vector<std::uint32_t> m(K, 0);
  std::vector<std::vector<std::uint32_t>> word(K, std::vector<std::uint32_t>(crf.topics.vocab, 0));
  std::vector<std::vector<std::uint32_t>> customers(R);
  std::vector<std::uint32_t> per_entity(R, 0);
  for (std::size_t r = 0; r < R; ++r) customers[r].assign(crf.tables[r].size(), 0);
  for (std::size_t i = 0; i < crf.words.size(); ++i) {
    const auto r = crf.entity_of[i];
    const auto tb = crf.table_of[i];
    if (r < 0 || static_cast<std::size_t>(r) >= R) return "token " + std::to_string(i) + " has no entity";
    if (tb < 0 || static_cast<std::size_t>(tb) >= customers[r].size()) return "token " + std::to_string(i) + " unseated";
    ++customers[r][tb];
    ++per_entity[r];
    const auto k = crf.tables[r][tb].dish;
    if (k < 0 || static_cast<std::size_t>(k) >= K) return "table without a live dish";
    ++word[k][crf.words[i]];
    if (crf.members[r][crf.member_pos[i]] != i) return "member list out of sync";
  }
  for (std::size_t r = 0; r < R; ++r) {
    if (per_entity[r] == 0) return "entity " + std::to_string(r) + " has no customers";
    if (per_entity[r] != crf.entity_customers[r] || crf.members[r].size() != per_entity[r])
      return "entity customer count mismatch";
    for (std::size_t tb = 0; tb < customers[r].size(); ++tb) {
      if (customers[r][tb] == 0) return "empty table left in entity " + std::to_string(r);
      if (customers[r][tb] != crf.tables[r][tb].customers) return "table customer count mismatch";
      ++m[crf.tables[r][tb].dish];
    }
  }
  return check_topics(crf.topics, m, word);
}

}  // namespace nhdp

#include "nhdp/state.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <sstream>

#include "nhdp/error.hpp"

namespace nhdp {

Hyper Hyper::with_depth(int depth, double alpha, double gamma) {
  Hyper h;
  h.depth = depth;
  const auto levels = static_cast<std::size_t>(depth + 1);
  h.alpha.assign(levels, alpha);
  h.gamma.assign(levels, gamma);
  h.alpha_prior.assign(levels, GammaPrior{});
  h.gamma_prior.assign(levels, GammaPrior{});
  return h;
}

void Hyper::check() const {
  if (depth < 0) throw ArgumentError("Hyper: depth must be >= 0");
  const auto levels = static_cast<std::size_t>(depth + 1);
  if (alpha.size() != levels || gamma.size() != levels || alpha_prior.size() != levels ||
      gamma_prior.size() != levels)
    throw ArgumentError("Hyper: per-level vectors must have depth + 1 entries");
  if (!(eta > 0.0)) throw ArgumentError("Hyper: eta must be > 0");
  if (!(epsilon_bias >= 0.0)) throw ArgumentError("Hyper: epsilon_bias must be >= 0");
  for (std::size_t l = 0; l < levels; ++l) {
    if (!(alpha[l] > 0.0) || !(gamma[l] > 0.0)) throw ArgumentError("Hyper: concentrations must be > 0");
    if (!(alpha_prior[l].shape > 0.0) || !(alpha_prior[l].rate > 0.0) || !(gamma_prior[l].shape > 0.0) ||
        !(gamma_prior[l].rate > 0.0))
      throw ArgumentError("Hyper: gamma hyperprior parameters must be > 0");
  }
}

ModelState::ModelState(const Corpus& corpus, Hyper hyper, StateOptions options)
    : hyper_(std::move(hyper)), regime_(options.regime) {
  hyper_.check();
  const auto levels = static_cast<std::size_t>(hyper_.num_levels());
  truncation_ = options.truncation;
  if (truncation_.empty()) truncation_.assign(levels, 0);
  if (truncation_.size() != levels) throw ArgumentError("StateOptions: truncation needs one entry per level");
  const bool any_trunc = std::any_of(truncation_.begin(), truncation_.end(), [](auto k) { return k > 0; });
  const bool all_trunc = std::all_of(truncation_.begin(), truncation_.end(), [](auto k) { return k > 0; });
  if (any_trunc && !all_trunc) throw ArgumentError("StateOptions: truncate every level or none");
  if (any_trunc && regime_ != Regime::kNone) throw ArgumentError("StateOptions: truncation requires regime none");

  vocab_size_ = corpus.vocab_size();
  doc_offset_.push_back(0);
  for (const auto& doc : corpus.docs) {
    for (WordId w : doc) {
      if (w >= vocab_size_) throw ArgumentError("ModelState: token id outside vocabulary");
      words_.push_back(w);
    }
    doc_offset_.push_back(words_.size());
  }
  z_.assign(levels, std::vector<std::int32_t>(words_.size(), kNewDish));
  detached_.assign(words_.size(), 1);
  num_detached_ = words_.size();

  levels_.resize(levels);
  for (auto& lv : levels_) lv.beta_new = 1.0;
  for (std::size_t j = 0; j < num_docs(); ++j) push_restaurant(depth());

  if (all_trunc) {
    Rng unused(0);
    for (int l = depth(); l >= 0; --l) {
      const std::size_t k = truncation_[l];
      // Temporarily lift the truncation so spawn_dish can build the fixed menu.
      truncation_[l] = 0;
      for (std::size_t d = 0; d < k; ++d) spawn_dish(l, unused);
      truncation_[l] = k;
      auto& lv = levels_[l];
      std::fill(lv.beta.begin(), lv.beta.end(), 1.0 / static_cast<double>(k));
      lv.beta_new = 0.0;
    }
  }
}

std::uint64_t ModelState::table_column_total(int level, std::size_t k) const {
  std::uint64_t s = 0;
  for (const auto& row : levels_[level].m) s += row[k];
  return s;
}

std::uint64_t ModelState::table_total(int level) const {
  std::uint64_t s = 0;
  for (const auto& row : levels_[level].m)
    for (auto v : row) s += v;
  return s;
}

std::vector<std::int32_t> ModelState::path(std::size_t t) const {
  std::vector<std::int32_t> p(static_cast<std::size_t>(num_levels()));
  for (int l = 0; l < num_levels(); ++l) p[l] = z_[l][t];
  return p;
}

std::int32_t ModelState::restaurant_of(int level, std::size_t t) const {
  if (level == depth()) {
    auto it = std::upper_bound(doc_offset_.begin(), doc_offset_.end(), t);
    return static_cast<std::int32_t>(std::distance(doc_offset_.begin(), it) - 1);
  }
  return z_[level + 1][t];
}

std::int32_t ModelState::dish_for_author(AuthorId author) const {
  for (std::size_t k = 0; k < dish_author_.size(); ++k)
    if (dish_author_[k] == author) return static_cast<std::int32_t>(k);
  return kNewDish;
}

bool ModelState::pinned(std::size_t k) const {
  return regime_ != Regime::kNone && dish_author_[k] != kNoAuthor;
}

void ModelState::increment(int level, std::size_t r, std::size_t k) {
  auto& lv = levels_[level];
  if (++lv.n[r][k] == 1) lv.m[r][k] = 1;
  ++lv.row_total[r];
  ++lv.dish_total[k];
}

void ModelState::decrement(int level, std::size_t r, std::size_t k) {
  auto& lv = levels_[level];
  if (lv.n[r][k] == 0)
    throw InvariantError("count underflow at level " + std::to_string(level) + " restaurant " + std::to_string(r) +
                         " dish " + std::to_string(k));
  const std::uint32_t n = --lv.n[r][k];
  lv.m[r][k] = std::min(lv.m[r][k], n);
  --lv.row_total[r];
  --lv.dish_total[k];
}

void ModelState::push_restaurant(int level) {
  auto& lv = levels_[level];
  lv.n.emplace_back(lv.beta.size(), 0u);
  lv.m.emplace_back(lv.beta.size(), 0u);
  lv.row_total.push_back(0);
}

void ModelState::detach_token(std::size_t t) {
  if (detached_[t]) throw InvariantError("detach_token: token " + std::to_string(t) + " is not assigned");
  for (int l = 0; l < num_levels(); ++l)
    decrement(l, static_cast<std::size_t>(restaurant_of(l, t)), static_cast<std::size_t>(z_[l][t]));
  const auto topic = static_cast<std::size_t>(z_[0][t]);
  if (topic_word_[topic][words_[t]] == 0) throw InvariantError("topic-word count underflow");
  --topic_word_[topic][words_[t]];
  --topic_total_[topic];
  for (int l = 0; l < num_levels(); ++l) z_[l][t] = kNewDish;
  detached_[t] = 1;
  ++num_detached_;
}

void ModelState::attach_token(std::size_t t, std::span<const std::int32_t> path, Rng& rng) {
  if (!detached_[t]) throw InvariantError("attach_token: token " + std::to_string(t) + " is already assigned");
  if (path.size() != static_cast<std::size_t>(num_levels())) throw ArgumentError("attach_token: path length");
  std::vector<std::int32_t> resolved(path.begin(), path.end());
  for (int l = depth(); l >= 0; --l) {
    if (resolved[l] == kNewDish) {
      resolved[l] = spawn_dish(l, rng);
    } else if (resolved[l] < 0 || static_cast<std::size_t>(resolved[l]) >= num_dishes(l)) {
      throw InvariantError("attach_token: inactive dish " + std::to_string(resolved[l]) + " at level " +
                           std::to_string(l));
    }
  }
  for (int l = 0; l < num_levels(); ++l) z_[l][t] = resolved[l];
  for (int l = 0; l < num_levels(); ++l)
    increment(l, static_cast<std::size_t>(restaurant_of(l, t)), static_cast<std::size_t>(resolved[l]));
  ++topic_word_[resolved[0]][words_[t]];
  ++topic_total_[resolved[0]];
  detached_[t] = 0;
  --num_detached_;
}

void ModelState::remove_token(std::size_t j, std::size_t i) {
  detach_token(token_index(j, i));
  prune_empty_dishes();
}

void ModelState::add_token(std::size_t j, std::size_t i, std::span<const std::int32_t> path, Rng& rng) {
  attach_token(token_index(j, i), path, rng);
}

std::int32_t ModelState::spawn_dish(int level, Rng& rng, AuthorId author) {
  if (truncated(level)) throw InvariantError("spawn_dish: level " + std::to_string(level) + " has a fixed menu");
  auto& lv = levels_[level];
  for (auto& row : lv.n) row.push_back(0);
  for (auto& row : lv.m) row.push_back(0);
  lv.dish_total.push_back(0);
  // Floors keep both pieces positive when the remainder is already tiny.
  const auto [b, keep] = rng.beta_split(1.0, hyper_.gamma[level]);
  constexpr double tiny = std::numeric_limits<double>::min();
  lv.beta.push_back(std::max(lv.beta_new * b, tiny));
  lv.beta_new = std::max(lv.beta_new * keep, tiny);
  if (level > 0) push_restaurant(level - 1);
  if (level == 0) {
    topic_word_.emplace_back(vocab_size_, 0u);
    topic_total_.push_back(0);
  }
  if (level == depth()) dish_author_.push_back(author);
  return static_cast<std::int32_t>(lv.beta.size() - 1);
}

void ModelState::remove_dish(int level, std::size_t k) {
  auto& lv = levels_[level];
  const std::size_t last = lv.beta.size() - 1;
  lv.beta_new += lv.beta[k];
  if (k != last) {
    for (auto& row : lv.n) row[k] = row[last];
    for (auto& row : lv.m) row[k] = row[last];
    lv.dish_total[k] = lv.dish_total[last];
    lv.beta[k] = lv.beta[last];
    if (level == depth()) dish_author_[k] = dish_author_[last];
    if (level == 0) {
      topic_word_[k] = std::move(topic_word_[last]);
      topic_total_[k] = topic_total_[last];
    }
    if (level > 0) {
      auto& below = levels_[level - 1];
      below.n[k] = std::move(below.n[last]);
      below.m[k] = std::move(below.m[last]);
      below.row_total[k] = below.row_total[last];
    }
    const auto from = static_cast<std::int32_t>(last);
    for (auto& zt : z_[level])
      if (zt == from) zt = static_cast<std::int32_t>(k);
  }
  for (auto& row : lv.n) row.pop_back();
  for (auto& row : lv.m) row.pop_back();
  lv.dish_total.pop_back();
  lv.beta.pop_back();
  if (level == depth()) dish_author_.pop_back();
  if (level == 0) {
    topic_word_.pop_back();
    topic_total_.pop_back();
  }
  if (level > 0) {
    auto& below = levels_[level - 1];
    below.n.pop_back();
    below.m.pop_back();
    below.row_total.pop_back();
  }
}

void ModelState::prune_empty_dishes() {
  for (int l = depth(); l >= 0; --l) {
    if (truncated(l)) continue;
    for (std::size_t k = num_dishes(l); k-- > 0;) {
      if (levels_[l].dish_total[k] != 0) continue;
      if (l == depth() && pinned(k)) continue;
      remove_dish(l, k);
    }
  }
}

void ModelState::set_betas(int level, std::vector<double> beta, double beta_new) {
  auto& lv = levels_[level];
  if (beta.size() != lv.beta.size()) throw ArgumentError("set_betas: size mismatch");
  for (double b : beta)
    if (!(b >= 0.0)) throw ArgumentError("set_betas: negative weight");
  if (!(beta_new >= 0.0)) throw ArgumentError("set_betas: negative remainder");
  lv.beta = std::move(beta);
  lv.beta_new = beta_new;
}

std::vector<double> restaurant_predictive(const ModelState& state, int level, std::int32_t r) {
  const double a = state.hyper().alpha[level];
  const std::size_t K = state.num_dishes(level);
  std::vector<double> w(K + 1);
  if (r == kNewDish) {
    for (std::size_t k = 0; k < K; ++k) w[k] = state.beta(level, k);
    w[K] = state.beta_new(level);
    return w;
  }
  if (r < 0 || static_cast<std::size_t>(r) >= state.num_restaurants(level))
    throw InvariantError("restaurant_predictive: inactive restaurant " + std::to_string(r) + " at level " +
                         std::to_string(level));
  const auto row = state.count_row(level, static_cast<std::size_t>(r));
  const double denom = state.row_total(level, static_cast<std::size_t>(r)) + a;
  for (std::size_t k = 0; k < K; ++k) w[k] = (row[k] + a * state.beta(level, k)) / denom;
  w[K] = a * state.beta_new(level) / denom;
  return w;
}

namespace {

ValidationReport fail(std::string invariant, std::string detail) {
  return ValidationReport{false, std::move(invariant), std::move(detail)};
}

}  // namespace

ValidationReport validate(const ModelState& s) {
  const int levels = s.num_levels();
  const std::size_t N = s.num_tokens();

  for (std::size_t t = 0; t < N; ++t) {
    if (s.detached(t)) return fail("Assignments", "token " + std::to_string(t) + " is detached");
    for (int l = 0; l < levels; ++l) {
      const auto k = s.z(l, t);
      if (k < 0 || static_cast<std::size_t>(k) >= s.num_dishes(l))
        return fail("Assignments", "token " + std::to_string(t) + " level " + std::to_string(l) + " dish " +
                                       std::to_string(k) + " is not active");
    }
  }

  for (int l = 0; l < levels; ++l) {
    const std::size_t R = l == s.depth() ? s.num_docs() : s.num_dishes(l + 1);
    const std::size_t K = s.num_dishes(l);
    if (s.num_restaurants(l) != R)
      return fail("LevelCounts", "level " + std::to_string(l) + " has " + std::to_string(s.num_restaurants(l)) +
                                     " restaurants, expected " + std::to_string(R));
    std::vector<std::vector<std::uint32_t>> n(R, std::vector<std::uint32_t>(K, 0));
    for (std::size_t t = 0; t < N; ++t) ++n[s.restaurant_of(l, t)][s.z(l, t)];
    std::vector<std::uint32_t> col(K, 0);
    for (std::size_t r = 0; r < R; ++r) {
      std::uint32_t row = 0;
      for (std::size_t k = 0; k < K; ++k) {
        if (s.count(l, r, k) != n[r][k])
          return fail("LevelCounts", "n[" + std::to_string(l) + "][" + std::to_string(r) + "][" + std::to_string(k) +
                                         "] = " + std::to_string(s.count(l, r, k)) + ", recomputed " +
                                         std::to_string(n[r][k]));
        row += n[r][k];
        col[k] += n[r][k];
        const auto m = s.tables(l, r, k);
        if (n[r][k] == 0 ? m != 0 : (m < 1 || m > n[r][k]))
          return fail("TableCounts", "m[" + std::to_string(l) + "][" + std::to_string(r) + "][" + std::to_string(k) +
                                         "] = " + std::to_string(m) + " with n = " + std::to_string(n[r][k]));
      }
      if (s.row_total(l, r) != row) return fail("LevelCounts", "row total mismatch at level " + std::to_string(l));
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (s.dish_total(l, k) != col[k]) return fail("LevelCounts", "dish total mismatch at level " + std::to_string(l));
      const bool keep = s.truncated(l) || (l == s.depth() && s.pinned(k));
      if (col[k] == 0 && !keep)
        return fail("ModelState", "dish " + std::to_string(k) + " at level " + std::to_string(l) + " has no customers");
    }

    double sum = s.beta_new(l);
    for (std::size_t k = 0; k < K; ++k) {
      const double b = s.beta(l, k);
      if (!(b >= 0.0) || !std::isfinite(b)) return fail("StickWeights", "invalid weight at level " + std::to_string(l));
      sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-10)
      return fail("StickWeights", "level " + std::to_string(l) + " weights sum to " + std::to_string(sum));
    if (!s.truncated(l) && !(s.beta_new(l) > 0.0))
      return fail("StickWeights", "level " + std::to_string(l) + " has no remaining stick mass");
  }

  if (s.dish_authors().size() != s.num_dishes(s.depth()))
    return fail("ModelState", "dish-author map size differs from the top-level menu");

  const std::size_t K0 = s.num_dishes(0);
  std::vector<std::vector<std::uint32_t>> nw(K0, std::vector<std::uint32_t>(s.vocab_size(), 0));
  for (std::size_t t = 0; t < N; ++t) ++nw[s.z(0, t)][s.word(t)];
  for (std::size_t k = 0; k < K0; ++k) {
    std::uint32_t total = 0;
    for (std::size_t w = 0; w < s.vocab_size(); ++w) {
      if (s.topic_word(k, static_cast<WordId>(w)) != nw[k][w])
        return fail("TopicWordCounts", "nw[" + std::to_string(k) + "][" + std::to_string(w) + "] mismatch");
      total += nw[k][w];
    }
    if (s.topic_total(k) != total) return fail("TopicWordCounts", "row sum mismatch for topic " + std::to_string(k));
  }
  return {};
}

}  // namespace nhdp

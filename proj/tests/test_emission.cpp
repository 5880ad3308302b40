#include <gtest/gtest.h>

#include <numeric>

#include "nhdp/emission.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "reference.hpp"

using namespace nhdp;

namespace {

ModelState trained(int depth, std::uint64_t seed) {
  Rng g(seed);
  std::vector<std::vector<WordId>> docs(6);
  for (auto& d : docs)
    for (int i = 0; i < 12; ++i) d.push_back(static_cast<WordId>(g.uniform_index(7)));
  const Corpus c = ref::make_corpus(docs, 7);
  Rng rng(seed + 1);
  const auto none = AuthorLabels::unlabeled(c.num_docs());
  ModelState s = new_state(c, none, Hyper::with_depth(depth), rng);
  for (int i = 0; i < 5; ++i) sweep(s, none, rng);
  return s;
}

// Straight from the counts: topic rows by smoothed frequency, then one
// restaurant predictive per level above.
std::vector<std::vector<double>> by_hand(const ModelState& s, int level) {
  const std::size_t V = s.vocab_size();
  const double eta = s.hyper().eta;
  std::vector<std::vector<double>> e;
  for (std::size_t k = 0; k < s.num_dishes(0); ++k) {
    e.emplace_back(V);
    for (std::size_t w = 0; w < V; ++w)
      e[k][w] = (s.topic_word(k, static_cast<WordId>(w)) + eta) / (s.topic_total(k) + V * eta);
  }
  e.emplace_back(V, 1.0 / V);
  for (int l = 1; l <= level; ++l) {
    const double a = s.hyper().alpha[l - 1];
    const std::size_t Kb = s.num_dishes(l - 1);
    std::vector<std::vector<double>> up;
    for (std::size_t k = 0; k <= s.num_dishes(l); ++k) {
      std::vector<double> weight(Kb + 1);
      if (k < s.num_dishes(l)) {
        const double n = s.row_total(l - 1, k);
        for (std::size_t q = 0; q < Kb; ++q) weight[q] = (s.count(l - 1, k, q) + a * s.beta(l - 1, q)) / (n + a);
        weight[Kb] = a * s.beta_new(l - 1) / (n + a);
      } else {
        for (std::size_t q = 0; q < Kb; ++q) weight[q] = s.beta(l - 1, q);
        weight[Kb] = s.beta_new(l - 1);
      }
      std::vector<double> row(V, 0.0);
      for (std::size_t q = 0; q <= Kb; ++q)
        for (std::size_t w = 0; w < V; ++w) row[w] += weight[q] * e[q][w];
      up.push_back(row);
    }
    e = std::move(up);
  }
  return e;
}

}  // namespace

TEST(Emission, MatchesCountsAtEveryLevel) {
  for (int depth : {0, 1, 2}) {
    const ModelState s = trained(depth, 10 + depth);
    for (int l = 0; l <= depth; ++l) {
      const auto t = emission_table(s, l);
      const auto want = by_hand(s, l);
      ASSERT_EQ(t.rows(), want.size());
      for (std::size_t k = 0; k < t.rows(); ++k)
        for (std::size_t w = 0; w < t.vocab_size(); ++w) EXPECT_NEAR(t(k, w), want[k][w], 1e-12);
    }
  }
}

TEST(Emission, RowsAreDistributions) {
  const ModelState s = trained(2, 20);
  for (int l = 0; l <= 2; ++l) {
    const auto t = emission_table(s, l);
    for (std::size_t k = 0; k < t.rows(); ++k) {
      double sum = 0.0;
      for (std::size_t w = 0; w < t.vocab_size(); ++w) sum += t(k, w);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Emission, SerialMatchesParallelExactly) {
  for (int depth : {0, 1, 2}) {
    const ModelState s = trained(depth, 30 + depth);
    for (int l = 0; l <= depth; ++l) EXPECT_EQ(emission_table(s, l), emission_table_serial(s, l));
  }
}

TEST(Emission, SingleWordMatchesTableColumn) {
  const ModelState s = trained(2, 40);
  for (WordId w = 0; w < s.vocab_size(); ++w) {
    const auto col = word_emission(s, w);
    for (int l = 0; l <= 2; ++l) {
      const auto t = emission_table(s, l);
      ASSERT_EQ(col[l].size(), t.rows());
      for (std::size_t k = 0; k < t.rows(); ++k) EXPECT_NEAR(col[l][k], t(k, w), 1e-14);
    }
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nhdp/error.hpp"
#include "nhdp/eval.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "nhdp/synth.hpp"
#include "reference.hpp"

using namespace nhdp;

namespace {

struct Trained {
  Corpus train, test;
  std::vector<PosteriorSample> samples;
};

Trained trained_fixture() {
  SynthConfig cfg;
  cfg.entities = 3;
  cfg.topics = 6;
  cfg.vocab = 40;
  cfg.docs = 40;
  cfg.doc_length = 30;
  cfg.seed = 3;
  const auto data = synthesize(cfg);
  std::vector<std::size_t> tr, te;
  for (std::size_t j = 0; j < data.corpus.num_docs(); ++j) (j % 4 == 0 ? te : tr).push_back(j);
  Trained t;
  t.train = data.corpus.subset(tr);
  t.test = data.corpus.subset(te);
  Hyper h = Hyper::with_depth(1);
  h.eta = 0.05;
  Rng rng(4);
  const auto none = AuthorLabels::unlabeled(t.train.num_docs());
  ModelState s = new_state(t.train, none, h, rng);
  SweepOptions opt;
  opt.resample_concentrations = false;
  for (int i = 0; i < 30; ++i) {
    sweep(s, none, rng, opt);
    if (i >= 27) t.samples.push_back({s, static_cast<std::uint64_t>(i + 1)});
  }
  return t;
}

const Trained& fixture() {
  static const Trained t = trained_fixture();
  return t;
}

double nmi_by_hand(const std::vector<std::vector<double>>& s) {
  double z = 0;
  for (auto& r : s)
    for (double v : r) z += v;
  std::vector<double> a(s.size(), 0), b(s[0].size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s[i].size(); ++j) {
      a[i] += s[i][j] / z;
      b[j] += s[i][j] / z;
    }
  double mi = 0, ha = 0, hb = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s[i].size(); ++j)
      if (s[i][j] > 0) mi += s[i][j] / z * std::log(s[i][j] / z / (a[i] * b[j]));
  for (double x : a)
    if (x > 0) ha -= x * std::log(x);
  for (double x : b)
    if (x > 0) hb -= x * std::log(x);
  return mi / ((ha + hb) / 2);
}

std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& m) {
  std::vector<std::vector<double>> t(m[0].size(), std::vector<double>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t[j][i] = m[i][j];
  return t;
}

}  // namespace

TEST(Perplexity, UniformModelGivesVocabularySize) {
  // No training tokens: every prediction falls to the new-dish emission 1/V.
  const Corpus empty = ref::make_corpus({{}}, 10);
  Rng g(1);
  std::vector<std::vector<WordId>> docs(5);
  for (auto& d : docs)
    for (int i = 0; i < 9; ++i) d.push_back(static_cast<WordId>(g.uniform_index(10)));
  const Corpus test = ref::make_corpus(docs, 10);
  for (int depth : {0, 1}) {
    Rng rng(2);
    const ModelState s = new_state(empty, AuthorLabels::unlabeled(1), Hyper::with_depth(depth), rng);
    const std::vector<PosteriorSample> samples{{s, 0}};
    const auto r = perplexity(samples, test, AuthorLabels::unlabeled(5), 5, 3);
    EXPECT_NEAR(r.perplexity, 10.0, 1e-9);
    EXPECT_EQ(r.heldout_tokens, 5u * 4u);
  }
}

TEST(Perplexity, AtLeastOneAndBelowUniform) {
  const auto& f = fixture();
  const auto r = perplexity(f.samples, f.test, AuthorLabels::unlabeled(f.test.num_docs()), 10, 5);
  EXPECT_GE(r.perplexity, 1.0);
  EXPECT_LT(r.perplexity, static_cast<double>(f.train.vocab_size()));
  EXPECT_EQ(r.oov_tokens, 0u);
}

TEST(Perplexity, SerialMatchesParallelExactly) {
  const auto& f = fixture();
  const auto none = AuthorLabels::unlabeled(f.test.num_docs());
  const auto a = perplexity(f.samples, f.test, none, 10, 6);
  const auto b = perplexity_serial(f.samples, f.test, none, 10, 6);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_EQ(a.perplexity, b.perplexity);
  const auto c = perplexity(f.samples, f.test, none, 10, 7);
  EXPECT_NE(a.log_likelihood, c.log_likelihood);
}

TEST(Perplexity, UnknownWordsScoreOneOverV) {
  const auto& f = fixture();
  const std::size_t V = f.train.vocab_size();
  Corpus test = ref::make_corpus({{0, static_cast<WordId>(V + 3)}}, V);
  const auto r = perplexity(f.samples, test, AuthorLabels::unlabeled(1), 5, 8);
  EXPECT_EQ(r.oov_tokens, 1u);
  EXPECT_NEAR(r.perplexity, static_cast<double>(V), 1e-9);
}

TEST(Perplexity, NothingHeldOutIsAnError) {
  const auto& f = fixture();
  const Corpus test = ref::make_corpus({{1}}, f.train.vocab_size());
  EXPECT_THROW(perplexity(f.samples, test, AuthorLabels::unlabeled(1), 5, 9), ArgumentError);
  EXPECT_THROW(perplexity({}, f.test, AuthorLabels::unlabeled(f.test.num_docs()), 5, 9), ArgumentError);
}

TEST(Perplexity, FlatterTopicsNeverHelp) {
  // Raising eta pulls every topic-word distribution toward uniform.
  const auto& f = fixture();
  const auto none = AuthorLabels::unlabeled(f.test.num_docs());
  double prev = 0.0;
  for (double eta : {0.05, 0.2, 1.0, 5.0, 50.0, 1e4}) {
    auto samples = f.samples;
    for (auto& s : samples) s.state.hyper().eta = eta;
    const double p = perplexity(samples, f.test, none, 10, 10).perplexity;
    EXPECT_GE(p, prev) << "eta " << eta;
    prev = p;
  }
  EXPECT_NEAR(prev, static_cast<double>(f.train.vocab_size()), 0.5);
}

TEST(Nmi, IdentityIsOne) {
  const std::vector<std::vector<double>> id{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_NEAR(nmi_from_similarity(id), 1.0, 1e-12);
  const std::vector<std::vector<double>> orth{{3, 0, 0, 0}, {0, 2, 2, 0}, {0, 0, 0, 7}};
  EXPECT_NEAR(nmi_hidden_authors(orth, orth), 1.0, 1e-12);
}

TEST(Nmi, UniformIsZero) {
  const std::vector<std::vector<double>> u{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  EXPECT_NEAR(nmi_from_similarity(u), 0.0, 1e-12);
  const std::vector<std::vector<double>> same{{1, 1, 0}, {2, 2, 0}};
  EXPECT_NEAR(nmi_hidden_authors(same, same), 0.0, 1e-12);
}

TEST(Nmi, TwoByTwoExample) {
  const std::vector<std::vector<double>> s{{2, 1}, {1, 2}};
  const double want = ((2.0 / 3) * std::log(4.0 / 3) + (1.0 / 3) * std::log(2.0 / 3)) / std::log(2.0);
  EXPECT_NEAR(nmi_from_similarity(s), want, 1e-12);
  EXPECT_NEAR(nmi_from_similarity(s), 0.0817, 5e-5);
}

TEST(Nmi, SymmetricAndInRange) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t H = 1 + rng.uniform_index(5), N = 1 + rng.uniform_index(5), M = 1 + rng.uniform_index(8);
    std::vector<std::vector<double>> a(H, std::vector<double>(M)), b(N, std::vector<double>(M));
    for (auto* side : {&a, &b})
      for (auto& v : *side) {
        for (auto& x : v) x = rng.uniform() < 0.4 ? 0.0 : rng.uniform();
        v[rng.uniform_index(M)] += 0.1;
      }
    const double ab = nmi_hidden_authors(a, b);
    EXPECT_NEAR(ab, nmi_hidden_authors(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    std::vector<std::vector<double>> sim(H, std::vector<double>(N));
    for (auto& r : sim)
      for (auto& x : r) x = rng.uniform();
    const double direct = nmi_from_similarity(sim);
    EXPECT_NEAR(direct, nmi_from_similarity(transpose(sim)), 1e-12);
    if (H > 1 || N > 1) EXPECT_NEAR(direct, std::clamp(nmi_by_hand(sim), 0.0, 1.0), 1e-12);
  }
}

TEST(Nmi, RejectsDegenerateInput) {
  EXPECT_THROW(nmi_hidden_authors({{0, 0}}, {{1, 0}}), ArgumentError);
  EXPECT_THROW(nmi_hidden_authors({{1, 0}}, {{1, 0, 0}}), ArgumentError);
  EXPECT_THROW(nmi_from_similarity({{0, 0}}), ArgumentError);
  EXPECT_THROW(nmi_from_similarity({{1, -1}}), ArgumentError);
  // One vector per side: nothing to explain, reported as 0.
  EXPECT_EQ(nmi_hidden_authors({{1, 2}}, {{2, 1}}), 0.0);
}

TEST(Contributions, CountsTokensPerDocument) {
  const Corpus c = ref::make_corpus({{0, 1, 1}, {2, 0}, {1}}, 3);
  Rng rng(12);
  // Level-1 dishes: doc 0 -> {0, 0, 1}, doc 1 -> {1, 1}, doc 2 -> {0}.
  const ModelState s = state_from_assignments(c, Hyper::with_depth(1), {{0, 1, 1, 2, 0, 1}, {0, 0, 1, 1, 1, 0}}, rng);
  const auto v = extract_contributions({s, 0});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (std::vector<double>{2, 0, 1}));
  EXPECT_EQ(v[1], (std::vector<double>{1, 2, 0}));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(v[0][j] + v[1][j], static_cast<double>(c.docs[j].size()));
}

TEST(Contributions, SingleDishGivesLengths) {
  const Corpus c = ref::make_corpus({{0, 1, 1}, {2, 0}}, 3);
  Rng rng(13);
  const ModelState s = state_from_assignments(c, Hyper::with_depth(1), {{0, 1, 1, 0, 0}, {0, 0, 0, 0, 0}}, rng);
  const auto v = extract_contributions({s, 0});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (std::vector<double>{3, 2}));
  const ModelState flat = state_from_assignments(c, Hyper::with_depth(0), {{0, 1, 1, 0, 0}}, rng);
  EXPECT_THROW(extract_contributions({flat, 0}), ArgumentError);
}

TEST(Benchmark, ZeroSweepsIsEmpty) {
  const Corpus c = ref::make_corpus({{0, 1}, {1}}, 2);
  EXPECT_TRUE(benchmark_schemes(c, Hyper::with_depth(1), 0, 1).empty());
  EXPECT_THROW(benchmark_schemes(c, Hyper::with_depth(0), 1, 1), ArgumentError);
}

TEST(Benchmark, SameSeedSameCounts) {
  SynthConfig cfg;
  cfg.docs = 10;
  cfg.doc_length = 15;
  cfg.seed = 14;
  const Corpus c = synthesize(cfg).corpus;
  const auto a = benchmark_schemes(c, Hyper::with_depth(1), 3, 15);
  const auto b = benchmark_schemes(c, Hyper::with_depth(1), 3, 15);
  ASSERT_EQ(a.size(), b.size());
  std::map<std::string, int> per_name;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].sweep, b[i].sweep);
    ++per_name[a[i].name];
    const auto& n = a[i].name;
    if (n.size() > 3 && (n.substr(n.size() - 3) == ".K0" || n.substr(n.size() - 3) == ".K1"))
      EXPECT_EQ(a[i].value, b[i].value) << n;
  }
  EXPECT_EQ(per_name["direct.sweep_ms"], 3);
  EXPECT_EQ(per_name["ncrf.sweep_ms"], 3);
  EXPECT_EQ(per_name["direct.mean_sweep_ms"], 1);
  EXPECT_EQ(per_name["ncrf.mean_sweep_ms"], 1);
}

TEST(MetricsCsv, HeaderAndRows) {
  const std::vector<MetricRecord> r{{"perplexity", 12.5, 3, "none", -1, 0.0}, {"nmi", 0.25, 4, "partial", 10, 1.5}};
  const std::string csv = metrics_csv(r);
  EXPECT_EQ(csv, "name,value,seed,regime,sweep,wall_ms\nperplexity,12.5,3,none,-1,0\nnmi,0.25,4,partial,10,1.5\n");
  const auto path = std::filesystem::temp_directory_path() / "nhdp_metrics_test.csv";
  write_metrics_csv(path, r);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), csv);
  std::filesystem::remove(path);
}

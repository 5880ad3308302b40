#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "nhdp/error.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "nhdp/state.hpp"
#include "reference.hpp"

using namespace nhdp;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nhdp_state_tests";
  fs::create_directories(dir);
  return dir / name;
}

Corpus random_corpus(Rng& rng, std::size_t docs, std::size_t max_len, std::size_t V) {
  std::vector<std::vector<WordId>> d(docs);
  for (auto& doc : d) {
    const std::size_t n = rng.uniform_index(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) doc.push_back(static_cast<WordId>(rng.uniform_index(V)));
  }
  return ref::make_corpus(d, V);
}

AuthorLabels random_labels(Rng& rng, std::size_t docs, std::size_t authors, bool allow_empty) {
  AuthorLabels l;
  for (std::size_t a = 0; a < authors; ++a) l.names.push_back("a" + std::to_string(a));
  l.known.resize(docs);
  for (auto& k : l.known) {
    for (std::size_t a = 0; a < authors; ++a)
      if (rng.bernoulli(0.4)) k.push_back(static_cast<AuthorId>(a));
    if (k.empty() && !allow_empty) k.push_back(static_cast<AuthorId>(rng.uniform_index(authors)));
  }
  l.regime = l.infer_regime();
  return l;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(NewState, EmptyDocuments) {
  Rng rng(1);
  const Corpus c = ref::make_corpus({{}, {}, {}}, 5);
  const ModelState s = new_state(c, AuthorLabels::unlabeled(3), Hyper::with_depth(2), rng);
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(s.num_dishes(l), 0u);
    EXPECT_EQ(s.beta_new(l), 1.0);
  }
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.row_total(2, j), 0u);
  EXPECT_TRUE(validate(s));
}

TEST(NewState, OneTokenOneDishPerLevel) {
  Rng rng(2);
  const Corpus c = ref::make_corpus({{3}}, 5);
  const ModelState s = new_state(c, AuthorLabels::unlabeled(1), Hyper::with_depth(2), rng);
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(s.num_dishes(l), 1u);
    EXPECT_EQ(s.dish_total(l, 0), 1u);
  }
  EXPECT_TRUE(validate(s));
}

TEST(NewState, SameSeedSameState) {
  Rng g(3);
  const Corpus c = random_corpus(g, 8, 10, 6);
  Rng a(9), b(9);
  EXPECT_EQ(new_state(c, AuthorLabels::unlabeled(8), Hyper::with_depth(1), a),
            new_state(c, AuthorLabels::unlabeled(8), Hyper::with_depth(1), b));
}

TEST(NewState, CompleteRegimeUsesOnlyKnownAuthors) {
  Rng g(4);
  const Corpus c = random_corpus(g, 10, 8, 5);
  const AuthorLabels l = random_labels(g, 10, 3, false);
  Rng rng(5);
  const ModelState s = new_state(c, l, Hyper::with_depth(1), rng, {Regime::kComplete, {}});
  ASSERT_TRUE(validate(s));
  for (std::size_t j = 0; j < c.num_docs(); ++j)
    for (std::size_t i = 0; i < c.docs[j].size(); ++i) {
      const AuthorId a = s.dish_author(static_cast<std::size_t>(s.z(1, s.token_index(j, i))));
      EXPECT_TRUE(std::binary_search(l.known[j].begin(), l.known[j].end(), a));
    }
}

TEST(NewState, CompleteRegimeRejectsUnlabeledDocument) {
  const Corpus c = ref::make_corpus({{0}, {1}}, 2);
  AuthorLabels l;
  l.names = {"x"};
  l.known = {{0}, {}};
  l.regime = Regime::kComplete;
  Rng rng(6);
  EXPECT_THROW(new_state(c, l, Hyper::with_depth(1), rng, {Regime::kComplete, {}}), ArgumentError);
}

TEST(AddRemove, AddThenRemoveRestoresState) {
  Rng g(7);
  const Corpus c = random_corpus(g, 5, 6, 4);
  Rng rng(8);
  ModelState s = new_state(c, AuthorLabels::unlabeled(5), Hyper::with_depth(1), rng);
  int checked = 0;
  for (std::size_t j = 0; j < c.num_docs(); ++j) {
    if (c.docs[j].empty()) continue;
    const auto path = s.path(s.token_index(j, 0));
    const auto dishes = std::make_pair(s.num_dishes(0), s.num_dishes(1));
    s.remove_token(j, 0);
    if (dishes != std::make_pair(s.num_dishes(0), s.num_dishes(1))) {
      // Its dishes were pruned; reattach somewhere fresh.
      s.add_token(j, 0, std::vector<std::int32_t>(2, kNewDish), rng);
      ASSERT_TRUE(validate(s));
      continue;
    }
    const ModelState before = s;
    s.add_token(j, 0, path, rng);
    ASSERT_TRUE(validate(s));
    s.remove_token(j, 0);
    EXPECT_EQ(s, before);
    s.add_token(j, 0, path, rng);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(AddRemove, RemovingLastTokenOfTopicPrunesIt) {
  const Corpus c = ref::make_corpus({{0, 1}}, 2);
  Rng rng(9);
  const ModelState base = state_from_assignments(c, Hyper::with_depth(1), {{0, 1}, {0, 0}}, rng);
  ASSERT_EQ(base.num_dishes(0), 2u);
  ModelState s = base;
  s.remove_token(0, 1);
  EXPECT_EQ(s.num_dishes(0), 1u);
  EXPECT_EQ(s.topic_total(0), 1u);
  // Detached tokens are reported until reattached.
  EXPECT_FALSE(validate(s));
  s.add_token(0, 1, std::vector<std::int32_t>{0, 0}, rng);
  EXPECT_TRUE(validate(s));
}

TEST(AddRemove, NewTopicAddsRow) {
  const Corpus c = ref::make_corpus({{0, 1}}, 2);
  Rng rng(10);
  ModelState s = state_from_assignments(c, Hyper::with_depth(1), {{0, 0}, {0, 0}}, rng);
  s.remove_token(0, 1);
  const std::size_t k0 = s.num_dishes(0);
  const std::vector<std::int32_t> path{kNewDish, 0};
  s.add_token(0, 1, path, rng);
  EXPECT_EQ(s.num_dishes(0), k0 + 1);
  EXPECT_EQ(s.topic_word(k0, 1), 1u);
  EXPECT_TRUE(validate(s));
}

TEST(Validate, CorruptedCountNamesLevelCounts) {
  const Corpus c = ref::make_corpus({{0, 1, 1}}, 2);
  Rng rng(11);
  ModelState s = new_state(c, AuthorLabels::unlabeled(1), Hyper::with_depth(1), rng);
  ASSERT_TRUE(validate(s));
  s.corrupt_count(1, 0, 0, s.count(1, 0, 0) + 1);
  const auto r = validate(s);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.invariant, "LevelCounts");
}

TEST(Validate, ConservationAcrossLevels) {
  Rng g(12);
  const Corpus c = random_corpus(g, 6, 9, 5);
  Rng rng(13);
  ModelState s = new_state(c, AuthorLabels::unlabeled(6), Hyper::with_depth(2), rng);
  for (int sw = 0; sw < 5; ++sw) sweep(s, AuthorLabels::unlabeled(6), rng);
  for (std::size_t j = 0; j < c.num_docs(); ++j) EXPECT_EQ(s.row_total(2, j), c.docs[j].size());
  for (int l = 1; l <= 2; ++l)
    for (std::size_t k = 0; k < s.num_dishes(l); ++k) EXPECT_EQ(s.dish_total(l, k), s.row_total(l - 1, k));
  for (int l = 0; l <= 2; ++l) {
    double b = s.beta_new(l);
    for (double x : s.betas(l)) b += x;
    EXPECT_NEAR(b, 1.0, 1e-10);
    for (std::size_t r = 0; r < s.num_restaurants(l); ++r)
      for (std::size_t k = 0; k < s.num_dishes(l); ++k) {
        if (s.count(l, r, k) == 0) {
          EXPECT_EQ(s.tables(l, r, k), 0u);
        } else {
          EXPECT_GE(s.tables(l, r, k), 1u);
          EXPECT_LE(s.tables(l, r, k), s.count(l, r, k));
        }
      }
  }
}

TEST(Validate, RandomAddRemovePairsStayValid) {
  Rng g(14);
  const Corpus c = random_corpus(g, 6, 7, 4);
  Rng rng(15);
  ModelState s = new_state(c, AuthorLabels::unlabeled(6), Hyper::with_depth(2), rng);
  for (int step = 0; step < 500; ++step) {
    const std::size_t j = g.uniform_index(c.num_docs());
    if (c.docs[j].empty()) continue;
    const std::size_t i = g.uniform_index(c.docs[j].size());
    s.remove_token(j, i);
    std::vector<std::int32_t> path(3);
    for (int l = 0; l < 3; ++l) {
      const auto K = s.num_dishes(l);
      const auto pick = g.uniform_index(K + 1);
      path[l] = pick == K ? kNewDish : static_cast<std::int32_t>(pick);
    }
    s.add_token(j, i, path, rng);
    const auto r = validate(s);
    ASSERT_TRUE(r.ok) << r.invariant << ": " << r.detail;
  }
}

TEST(Validate, FuzzSweepsAcrossRegimes) {
  Rng g(16);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t docs = 1 + g.uniform_index(6);
    const Corpus c = random_corpus(g, docs, 8, 1 + g.uniform_index(6));
    const int depth = static_cast<int>(g.uniform_index(3));
    Hyper h = Hyper::with_depth(depth, 0.2 + 2.0 * g.uniform(), 0.2 + 2.0 * g.uniform());
    Regime regime = Regime::kNone;
    AuthorLabels l = AuthorLabels::unlabeled(docs);
    if (depth >= 1 && trial % 3 != 0) {
      regime = trial % 3 == 1 ? Regime::kComplete : Regime::kPartial;
      l = random_labels(g, docs, 3, regime == Regime::kPartial);
      l.regime = regime;
    }
    Rng rng(100 + trial);
    ModelState s = new_state(c, l, h, rng, {regime, {}});
    for (int sw = 0; sw < 40; ++sw) {
      sweep(s, l, rng);
      const auto r = validate(s);
      ASSERT_TRUE(r.ok) << "trial " << trial << " sweep " << sw << ": " << r.invariant << ": " << r.detail;
    }
  }
}

TEST(Truncation, FixedMenuKeepsDishCount) {
  Rng g(17);
  const Corpus c = random_corpus(g, 4, 6, 4);
  Rng rng(18);
  ModelState s = new_state(c, AuthorLabels::unlabeled(4), Hyper::with_depth(1), rng, {Regime::kNone, {3, 2}});
  for (int sw = 0; sw < 30; ++sw) {
    sweep(s, AuthorLabels::unlabeled(4), rng);
    EXPECT_EQ(s.num_dishes(0), 3u);
    EXPECT_EQ(s.num_dishes(1), 2u);
    EXPECT_EQ(s.beta_new(0), 0.0);
    ASSERT_TRUE(validate(s));
  }
}

TEST(Truncation, MixedOrWithRegimeRejected) {
  const Corpus c = ref::make_corpus({{0}}, 1);
  EXPECT_THROW(ModelState(c, Hyper::with_depth(1), {Regime::kNone, {3, 0}}), ArgumentError);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng g(19);
  const Corpus c = random_corpus(g, 5, 8, 6);
  const AuthorLabels l = random_labels(g, 5, 3, true);
  Rng rng(20);
  ModelState s = new_state(c, l, Hyper::with_depth(2), rng, {Regime::kPartial, {}});
  for (int i = 0; i < 5; ++i) sweep(s, l, rng);
  const auto p = temp_path("roundtrip.ckpt");
  save_checkpoint(s, rng, p);
  const Checkpoint ck = load_checkpoint(p);
  EXPECT_TRUE(validate(ck.state));
  EXPECT_EQ(ck.state, s);
  EXPECT_TRUE(ck.rng == rng);
  // Saving the loaded state again reproduces the file byte for byte.
  const auto q = temp_path("roundtrip2.ckpt");
  save_checkpoint(ck.state, ck.rng, q);
  EXPECT_EQ(read_bytes(p), read_bytes(q));
}

TEST(Checkpoint, TruncatedFileRejected) {
  const Corpus c = ref::make_corpus({{0, 1, 2}}, 3);
  Rng rng(21);
  const ModelState s = new_state(c, AuthorLabels::unlabeled(1), Hyper::with_depth(1), rng);
  const auto p = temp_path("trunc.ckpt");
  save_checkpoint(s, rng, p);
  auto bytes = read_bytes(p);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    write_bytes(p, std::vector<char>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut)));
    EXPECT_THROW(load_checkpoint(p), CheckpointError) << "cut at " << cut;
  }
}

TEST(Checkpoint, FutureVersionRejectedByName) {
  const Corpus c = ref::make_corpus({{0}}, 1);
  Rng rng(22);
  const ModelState s = new_state(c, AuthorLabels::unlabeled(1), Hyper::with_depth(0), rng);
  const auto p = temp_path("version.ckpt");
  save_checkpoint(s, rng, p);
  auto bytes = read_bytes(p);
  bytes[8] = static_cast<char>(kCheckpointVersion + 1);
  write_bytes(p, bytes);
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, FlippedByteFailsChecksum) {
  const Corpus c = ref::make_corpus({{0, 1}, {1}}, 2);
  Rng rng(23);
  const ModelState s = new_state(c, AuthorLabels::unlabeled(2), Hyper::with_depth(1), rng);
  const auto p = temp_path("flip.ckpt");
  save_checkpoint(s, rng, p);
  auto bytes = read_bytes(p);
  bytes[bytes.size() / 2] ^= 0x5a;
  write_bytes(p, bytes);
  EXPECT_THROW(load_checkpoint(p), CheckpointError);
}

TEST(Checkpoint, InconsistentStateIsInvariantError) {
  const Corpus c = ref::make_corpus({{0, 1}, {1}}, 2);
  Rng rng(24);
  ModelState s = new_state(c, AuthorLabels::unlabeled(2), Hyper::with_depth(1), rng);
  s.corrupt_count(1, 0, 0, s.count(1, 0, 0) + 1);
  const auto p = temp_path("bad_state.ckpt");
  save_checkpoint(s, rng, p);
  EXPECT_THROW(load_checkpoint(p), InvariantError);
}

TEST(Checkpoint, MissingFileRejected) { EXPECT_THROW(load_checkpoint("/nonexistent/none.ckpt"), CheckpointError); }

TEST(RestaurantPredictive, EmptyRestaurantIsBeta) {
  const Corpus c = ref::make_corpus({{0, 1}}, 2);
  Rng rng(24);
  ModelState s = state_from_assignments(c, Hyper::with_depth(1), {{0, 1}, {0, 0}}, rng);
  s.set_betas(0, {0.5, 0.3}, 0.2);
  const auto p = restaurant_predictive(s, 0, kNewDish);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  EXPECT_NEAR(p[2], 0.2, 1e-15);
}

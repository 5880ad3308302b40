#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nhdp/error.hpp"
#include "nhdp/synth.hpp"

using namespace nhdp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nhdp_synth_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Synth, OneEntityOneTopic) {
  SynthConfig cfg;
  cfg.entities = 1;
  cfg.topics = 1;
  cfg.docs = 12;
  const auto d = synthesize(cfg);
  for (const auto& a : d.labels.known) EXPECT_EQ(a, d.labels.known.front());
  EXPECT_EQ(d.labels.regime, Regime::kComplete);
  for (const auto& row : d.token_topic)
    for (auto k : row) EXPECT_EQ(k, 0u);
}

TEST(Synth, LengthsAddUp) {
  SynthConfig cfg;
  cfg.docs = 17;
  cfg.doc_length = 23;
  const auto d = synthesize(cfg);
  EXPECT_EQ(d.corpus.num_docs(), 17u);
  EXPECT_EQ(d.corpus.num_tokens(), 17u * 23u);
  EXPECT_EQ(d.corpus.vocab_size(), cfg.vocab);
  for (std::size_t j = 0; j < d.corpus.num_docs(); ++j) {
    double total = 0.0;
    for (const auto& c : d.contributions) total += c[j];
    EXPECT_EQ(total, static_cast<double>(d.corpus.docs[j].size()));
    for (auto a : d.token_author[j]) EXPECT_TRUE(std::binary_search(d.labels.known[j].begin(), d.labels.known[j].end(), a));
    EXPECT_GE(d.labels.known[j].size(), 1u);
    EXPECT_LE(d.labels.known[j].size(), cfg.max_authors);
  }
}

TEST(Synth, FixedSeedGivesIdenticalFiles) {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.docs = 20;
  const auto a = synthesize(cfg);
  const auto b = synthesize(cfg);
  write_jsonl_corpus(scratch("a.jsonl"), a.corpus, a.labels);
  write_jsonl_corpus(scratch("b.jsonl"), b.corpus, b.labels);
  write_gold_json(scratch("a.json"), a);
  write_gold_json(scratch("b.json"), b);
  EXPECT_EQ(slurp(scratch("a.jsonl")), slurp(scratch("b.jsonl")));
  EXPECT_EQ(slurp(scratch("a.json")), slurp(scratch("b.json")));
  cfg.seed = 10;
  EXPECT_NE(synthesize(cfg).corpus.docs, a.corpus.docs);
}

TEST(Synth, GoldRoundTrips) {
  SynthConfig cfg;
  cfg.docs = 8;
  const auto d = synthesize(cfg);
  write_gold_json(scratch("gold.json"), d);
  const auto g = load_gold_contributions(scratch("gold.json"));
  EXPECT_EQ(g.authors, d.labels.names);
  EXPECT_EQ(g.doc_ids, d.corpus.doc_ids);
  EXPECT_EQ(g.vectors, d.contributions);
  std::ofstream(scratch("bad.json")) << "{\"authors\": [\"a\"]}";
  EXPECT_THROW(load_gold_contributions(scratch("bad.json")), ParseError);
  std::ofstream(scratch("broken.json")) << "{oops";
  EXPECT_THROW(load_gold_contributions(scratch("broken.json")), ParseError);
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.topics = 0;
  EXPECT_THROW(synthesize(cfg), ArgumentError);
  cfg = SynthConfig{};
  cfg.topic_eta = 0.0;
  EXPECT_THROW(synthesize(cfg), ArgumentError);
}

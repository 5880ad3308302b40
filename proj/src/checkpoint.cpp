// Checkpoint byte layout (little-endian, no padding):
//
//   "NHDPCKPT"  8 bytes magic
//   u32         format version
//   i32 depth, f64 eta, f64 epsilon_bias
//   per level:  f64 alpha, f64 gamma, f64 alpha_shape, f64 alpha_rate, f64 gamma_shape, f64 gamma_rate
//   u8 regime, per level u64 truncation (0 = unbounded)
//   u64 V, u64 M, M x u64 document length, u64 N, N x u32 word id
//   per level:  u64 K, u64 R, R*K x u32 n (row-major), R*K x u32 m, K x f64 beta, f64 beta_new
//   u64 K_top, K_top x i32 author of each top-level dish (-1 = none)
//   K_0*V x u32 topic-word counts
//   per level:  N x i32 dish of every token
//   u64 sweeps done
//   u64 length + bytes of the RNG state string
//   u64 FNV-1a hash of every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nhdp/error.hpp"
#include "nhdp/state.hpp"

namespace nhdp {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'N', 'H', 'D', 'P', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }
  template <typename T>
  void put_all(const std::vector<T>& v) {
    for (const T& x : v) put(x);
  }
  void put_bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::size_t begin, std::size_t end) : bytes_(bytes), pos_(begin), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t get_size(std::size_t limit) {
    const auto v = get<std::uint64_t>();
    if (v > limit) throw CheckpointError("checkpoint: implausible size field " + std::to_string(v));
    return static_cast<std::size_t>(v);
  }
  std::string get_bytes() {
    const std::size_t n = get_size(end_ - pos_);
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw CheckpointError("checkpoint: file is truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t pos_;
  std::size_t end_;
};

}  // namespace

void save_checkpoint(const ModelState& s, const Rng& rng, const std::filesystem::path& path) {
  if (s.num_detached_ != 0) throw InvariantError("save_checkpoint: tokens are detached");
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put<std::uint32_t>(kCheckpointVersion);
  const Hyper& h = s.hyper_;
  w.put<std::int32_t>(h.depth);
  w.put(h.eta);
  w.put(h.epsilon_bias);
  for (int l = 0; l < s.num_levels(); ++l) {
    w.put(h.alpha[l]);
    w.put(h.gamma[l]);
    w.put(h.alpha_prior[l].shape);
    w.put(h.alpha_prior[l].rate);
    w.put(h.gamma_prior[l].shape);
    w.put(h.gamma_prior[l].rate);
  }
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.regime_));
  for (auto k : s.truncation_) w.put<std::uint64_t>(k);
  w.put<std::uint64_t>(s.vocab_size_);
  w.put<std::uint64_t>(s.num_docs());
  for (std::size_t j = 0; j < s.num_docs(); ++j) w.put<std::uint64_t>(s.doc_length(j));
  w.put<std::uint64_t>(s.words_.size());
  w.put_all(s.words_);
  for (const auto& lv : s.levels_) {
    w.put<std::uint64_t>(lv.beta.size());
    w.put<std::uint64_t>(lv.n.size());
    for (const auto& row : lv.n) w.put_all(row);
    for (const auto& row : lv.m) w.put_all(row);
    w.put_all(lv.beta);
    w.put(lv.beta_new);
  }
  w.put<std::uint64_t>(s.dish_author_.size());
  w.put_all(s.dish_author_);
  for (const auto& row : s.topic_word_) w.put_all(row);
  for (const auto& zl : s.z_) w.put_all(zl);
  w.put<std::uint64_t>(s.sweeps_done_);
  w.put_bytes(rng.save_state());
  auto& bytes = w.bytes();
  const std::uint64_t hash = fnv1a(bytes.data(), bytes.size());
  w.put(hash);

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct CheckpointReader {
  static Checkpoint read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    constexpr std::size_t kHeader = sizeof(kMagic) + sizeof(std::uint32_t);
    if (bytes.size() < kHeader) throw CheckpointError("checkpoint: file is truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw CheckpointError("checkpoint: bad magic bytes");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version) + " (this build reads " +
                            std::to_string(kCheckpointVersion) + ")");
    if (bytes.size() < kHeader + sizeof(std::uint64_t)) throw CheckpointError("checkpoint: file is truncated");
    const std::size_t body_end = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body_end, sizeof(stored));
    if (fnv1a(bytes.data(), body_end) != stored)
      throw CheckpointError("checkpoint: checksum mismatch (file truncated or corrupt)");

    Reader r(bytes, kHeader, body_end);
    const std::size_t limit = bytes.size();
    Checkpoint cp;
    ModelState& s = cp.state;
    Hyper& h = s.hyper_;
    h.depth = r.get<std::int32_t>();
    if (h.depth < 0 || static_cast<std::size_t>(h.depth) > limit) throw CheckpointError("checkpoint: bad depth");
    const auto levels = static_cast<std::size_t>(h.depth + 1);
    h.eta = r.get<double>();
    h.epsilon_bias = r.get<double>();
    h.alpha.resize(levels);
    h.gamma.resize(levels);
    h.alpha_prior.resize(levels);
    h.gamma_prior.resize(levels);
    for (std::size_t l = 0; l < levels; ++l) {
      h.alpha[l] = r.get<double>();
      h.gamma[l] = r.get<double>();
      h.alpha_prior[l].shape = r.get<double>();
      h.alpha_prior[l].rate = r.get<double>();
      h.gamma_prior[l].shape = r.get<double>();
      h.gamma_prior[l].rate = r.get<double>();
    }
    const auto regime = r.get<std::uint8_t>();
    if (regime > 2) throw CheckpointError("checkpoint: bad regime tag");
    s.regime_ = static_cast<Regime>(regime);
    s.truncation_.resize(levels);
    for (auto& k : s.truncation_) k = r.get_size(UINT32_MAX);
    s.vocab_size_ = r.get_size(UINT32_MAX);
    const std::size_t M = r.get_size(limit);
    s.doc_offset_.assign(1, 0);
    for (std::size_t j = 0; j < M; ++j) s.doc_offset_.push_back(s.doc_offset_.back() + r.get_size(limit));
    const std::size_t N = r.get_size(limit);
    if (N != s.doc_offset_.back()) throw CheckpointError("checkpoint: document lengths disagree with token count");
    s.words_.resize(N);
    for (auto& w : s.words_) {
      w = r.get<WordId>();
      if (w >= s.vocab_size_) throw CheckpointError("checkpoint: word id outside vocabulary");
    }

    s.levels_.resize(levels);
    for (auto& lv : s.levels_) {
      const std::size_t K = r.get_size(limit);
      const std::size_t R = r.get_size(limit);
      lv.n.assign(R, std::vector<std::uint32_t>(K));
      lv.m.assign(R, std::vector<std::uint32_t>(K));
      for (auto& row : lv.n)
        for (auto& v : row) v = r.get<std::uint32_t>();
      for (auto& row : lv.m)
        for (auto& v : row) v = r.get<std::uint32_t>();
      lv.beta.resize(K);
      for (auto& b : lv.beta) b = r.get<double>();
      lv.beta_new = r.get<double>();
      lv.row_total.assign(R, 0);
      lv.dish_total.assign(K, 0);
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          lv.row_total[i] += lv.n[i][k];
          lv.dish_total[k] += lv.n[i][k];
        }
    }
    s.dish_author_.resize(r.get_size(limit));
    for (auto& a : s.dish_author_) a = r.get<AuthorId>();
    const std::size_t K0 = s.levels_[0].beta.size();
    s.topic_word_.assign(K0, std::vector<std::uint32_t>(s.vocab_size_));
    s.topic_total_.assign(K0, 0);
    for (std::size_t p = 0; p < K0; ++p)
      for (auto& v : s.topic_word_[p]) {
        v = r.get<std::uint32_t>();
        s.topic_total_[p] += v;
      }
    s.z_.assign(levels, std::vector<std::int32_t>(N));
    for (auto& zl : s.z_)
      for (auto& v : zl) v = r.get<std::int32_t>();
    s.detached_.assign(N, 0);
    s.num_detached_ = 0;
    s.sweeps_done_ = r.get<std::uint64_t>();
    cp.rng.load_state(r.get_bytes());
    if (!r.done()) throw CheckpointError("checkpoint: trailing bytes before checksum");

    if (auto report = validate(s); !report)
      throw InvariantError("checkpoint " + path.string() + " holds a state that fails " + report.invariant + ": " + report.detail);
    return cp;
  }
};

Checkpoint load_checkpoint(const std::filesystem::path& path) { return CheckpointReader::read(path); }

}  // namespace nhdp

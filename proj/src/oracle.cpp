#include "nhdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "nhdp/error.hpp"

namespace nhdp {

namespace {

using Real = long double;
using Partition = std::vector<std::uint8_t>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxStirling = 160;

// Unsigned Stirling numbers of the first kind, |s(n, m)|.
const std::vector<std::vector<Real>>& stirling_table() {
  static const auto table = [] {
    std::vector<std::vector<Real>> s(kMaxStirling + 1, std::vector<Real>(kMaxStirling + 1, 0.0L));
    s[0][0] = 1.0L;
    for (std::size_t n = 1; n <= kMaxStirling; ++n)
      for (std::size_t m = 1; m <= n; ++m) s[n][m] = s[n - 1][m - 1] + static_cast<Real>(n - 1) * s[n - 1][m];
    return s;
  }();
  return table;
}

std::vector<Real> convolve(const std::vector<Real>& a, const std::vector<Real>& b) {
  std::vector<Real> out(a.size() + b.size() - 1, 0.0L);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0L) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// log of K (K-1) ... (K-b+1), the number of ways to give b blocks distinct labels.
double log_falling(std::size_t k, std::size_t b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i) s += std::log(static_cast<double>(k - i));
  return s;
}

// Top level as one DP (or symmetric Dirichlet menu) over tokens directly.
double ungrouped_log_prior(const std::vector<std::uint32_t>& sizes, double gamma, std::size_t k) {
  if (sizes.empty()) return 0.0;
  if (k == 0) return eppf_log_prob(sizes, gamma);
  if (sizes.size() > k) return kNegInf;
  const double a = gamma / static_cast<double>(k);
  double n = 0.0;
  double lp = log_falling(k, sizes.size());
  for (auto c : sizes) {
    lp += std::lgamma(a + c) - std::lgamma(a);
    n += c;
  }
  return lp + std::lgamma(gamma) - std::lgamma(gamma + n);
}

double topic_log_likelihood(const std::vector<std::vector<std::uint32_t>>& word_counts, double eta, std::size_t V) {
  const double veta = eta * static_cast<double>(V);
  double ll = 0.0;
  for (const auto& row : word_counts) {
    double n = 0.0;
    for (auto c : row) {
      if (c == 0) continue;
      ll += std::lgamma(eta + c) - std::lgamma(eta);
      n += c;
    }
    ll += std::lgamma(veta) - std::lgamma(veta + n);
  }
  return ll;
}

void all_partitions(std::size_t n, std::size_t max_blocks, Partition& cur, std::size_t used,
                    std::vector<Partition>& out) {
  if (cur.size() == n) {
    out.push_back(cur);
    return;
  }
  const std::size_t limit = std::min(used + 1, max_blocks);
  for (std::size_t b = 0; b < limit; ++b) {
    cur.push_back(static_cast<std::uint8_t>(b));
    all_partitions(n, max_blocks, cur, std::max(used, b + 1), out);
    cur.pop_back();
  }
}

std::vector<Partition> partitions_of(std::size_t n, std::size_t k) {
  std::vector<Partition> out;
  Partition cur;
  all_partitions(n, k == 0 ? std::max<std::size_t>(n, 1) : k, cur, 0, out);
  return out;
}

// Number of set partitions of n items into at most k blocks (k == 0: any).
std::uint64_t partition_count(std::size_t n, std::size_t k) {
  // Stirling numbers of the second kind, saturating.
  const std::size_t kmax = k == 0 ? n : std::min(k, n);
  std::vector<std::vector<long double>> S(n + 1, std::vector<long double>(n + 1, 0.0L));
  S[0][0] = 1.0L;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= i; ++j) S[i][j] = S[i - 1][j - 1] + static_cast<long double>(j) * S[i - 1][j];
  long double total = n == 0 ? 1.0L : 0.0L;
  for (std::size_t j = 1; j <= kmax; ++j) total += S[n][j];
  return total > 1e18L ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(total);
}

Partition canonical(const std::vector<std::int32_t>& labels) {
  std::map<std::int32_t, std::uint8_t> relabel;
  Partition p(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    auto [it, fresh] = relabel.emplace(labels[t], static_cast<std::uint8_t>(relabel.size()));
    p[t] = it->second;
  }
  return p;
}

std::string partition_key(const Partition& p) {
  std::string s;
  for (auto b : p) s.push_back(static_cast<char>('a' + b));
  return s;
}

struct Scorer {
  const TruncSpec& trunc;
  std::vector<WordId> words;
  std::vector<std::uint32_t> doc_of;
  std::size_t num_docs = 0;
  std::size_t vocab = 0;

  Scorer(const Corpus& corpus, const TruncSpec& t) : trunc(t) {
    num_docs = corpus.num_docs();
    vocab = corpus.vocab_size();
    for (std::size_t j = 0; j < corpus.num_docs(); ++j)
      for (WordId w : corpus.docs[j]) {
        words.push_back(w);
        doc_of.push_back(static_cast<std::uint32_t>(j));
      }
  }

  static std::size_t blocks(const Partition& p) {
    std::size_t b = 0;
    for (auto x : p) b = std::max<std::size_t>(b, x + 1u);
    return b;
  }

  // levels[l] is the partition at level l.
  double operator()(const std::vector<const Partition*>& levels) const {
    const Hyper& h = trunc.hyper;
    const int L = h.depth;
    const std::size_t N = words.size();
    double lp = 0.0;
    for (int l = L; l >= 0; --l) {
      const Partition& p = *levels[l];
      const std::size_t B = blocks(p);
      if (l == L && trunc.ungrouped_top) {
        std::vector<std::uint32_t> sizes(B, 0);
        for (auto b : p) ++sizes[b];
        lp += ungrouped_log_prior(sizes, h.gamma[l], trunc.K[l]);
      } else {
        const std::size_t R = l == L ? num_docs : blocks(*levels[l + 1]);
        std::vector<std::vector<std::uint32_t>> counts(R, std::vector<std::uint32_t>(B, 0));
        for (std::size_t t = 0; t < N; ++t) {
          const std::size_t r = l == L ? doc_of[t] : (*levels[l + 1])[t];
          ++counts[r][p[t]];
        }
        lp += level_log_marginal(counts, h.alpha[l], h.gamma[l], trunc.K[l]);
      }
      if (lp == kNegInf) return lp;
    }
    const Partition& topics = *levels[0];
    std::vector<std::vector<std::uint32_t>> wc(blocks(topics), std::vector<std::uint32_t>(vocab, 0));
    for (std::size_t t = 0; t < N; ++t) ++wc[topics[t]][words[t]];
    return lp + topic_log_likelihood(wc, h.eta, vocab);
  }
};

// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& v) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

}  // namespace

void TruncSpec::check() const {
  hyper.check();
  if (K.size() != static_cast<std::size_t>(hyper.num_levels())) throw ArgumentError("TruncSpec: need K per level");
}

std::string canonical_key(const std::vector<std::vector<std::int32_t>>& z) {
  std::string key;
  for (std::size_t l = 0; l < z.size(); ++l) {
    if (l) key.push_back('|');
    key += partition_key(canonical(z[l]));
  }
  return key;
}

double level_log_marginal(const std::vector<std::vector<std::uint32_t>>& counts, double alpha, double gamma,
                          std::size_t k) {
  if (!(alpha > 0.0) || !(gamma > 0.0)) throw ArgumentError("level_log_marginal: concentrations must be > 0");
  const auto& S = stirling_table();
  const std::size_t B = counts.empty() ? 0 : counts.front().size();
  if (B == 0) return 0.0;
  if (k != 0 && B > k) return kNegInf;

  double log_rows = 0.0;
  for (const auto& row : counts) {
    std::uint64_t n = 0;
    for (auto c : row) n += c;
    if (n > 0) log_rows += std::lgamma(alpha) - std::lgamma(alpha + static_cast<double>(n));
  }

  const Real a = alpha;
  const Real small = k == 0 ? 0.0L : static_cast<Real>(gamma) / static_cast<Real>(k);
  std::vector<Real> total{1.0L};
  for (std::size_t d = 0; d < B; ++d) {
    std::vector<Real> poly{1.0L};
    for (const auto& row : counts) {
      const std::uint32_t n = row[d];
      if (n == 0) continue;
      if (n > kMaxStirling) throw ArgumentError("level_log_marginal: count too large for the exact table");
      std::vector<Real> s(n + 1, 0.0L);
      Real apow = 1.0L;
      for (std::uint32_t m = 1; m <= n; ++m) {
        apow *= a;
        s[m] = S[n][m] * apow;
      }
      poly = convolve(poly, s);
    }
    // Weight of a dish whose tables total M.
    for (std::size_t M = 0; M < poly.size(); ++M) {
      if (poly[M] == 0.0L) continue;
      Real h = 1.0L;
      if (k == 0) {
        h = static_cast<Real>(gamma);
        for (std::size_t i = 1; i < M; ++i) h *= static_cast<Real>(i);
      } else {
        for (std::size_t i = 0; i < M; ++i) h *= small + static_cast<Real>(i);
      }
      poly[M] *= h;
    }
    total = convolve(total, poly);
  }
  Real sum = 0.0L;
  for (std::size_t M = 0; M < total.size(); ++M) {
    if (total[M] == 0.0L) continue;
    sum += total[M] * std::exp(static_cast<Real>(std::lgamma(gamma) - std::lgamma(gamma + static_cast<double>(M))));
  }
  double lp = static_cast<double>(std::log(sum)) + log_rows;
  if (k != 0) lp += log_falling(k, B);
  return lp;
}

std::uint64_t enumeration_size(const Corpus& corpus, const TruncSpec& trunc) {
  trunc.check();
  const std::size_t N = corpus.num_tokens();
  long double total = 1.0L;
  for (int l = 0; l < trunc.hyper.num_levels(); ++l) total *= static_cast<long double>(partition_count(N, trunc.K[l]));
  return total > 1e18L ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(total);
}

ExactPosterior enumerate_impl(const Corpus& corpus, const TruncSpec& trunc, bool parallel) {
  const std::uint64_t size = enumeration_size(corpus, trunc);
  if (size > kMaxEnumeration)
    throw ArgumentError("enumerate_posterior: " + std::to_string(size) + " configurations exceed the limit of " +
                        std::to_string(kMaxEnumeration));
  corpus.check();
  const std::size_t N = corpus.num_tokens();
  if (N > 255) throw ArgumentError("enumerate_posterior: too many tokens");
  const int levels = trunc.hyper.num_levels();

  ExactPosterior post;
  post.num_tokens_ = N;
  post.partitions_.resize(levels);
  post.lookup_.resize(levels);
  std::vector<std::size_t> stride(levels, 1);
  for (int l = 0; l < levels; ++l) {
    post.partitions_[l] = partitions_of(N, trunc.K[l]);
    for (std::size_t i = 0; i < post.partitions_[l].size(); ++i)
      post.lookup_[l].emplace(partition_key(post.partitions_[l][i]), i);
    if (l > 0) stride[l] = stride[l - 1] * post.partitions_[l - 1].size();
  }

  const Scorer score(corpus, trunc);
  post.log_joint_.assign(size, kNegInf);
  const auto total = static_cast<long long>(size);
#pragma omp parallel if (parallel)
  {
    std::vector<const Partition*> levels_of(static_cast<std::size_t>(levels));
#pragma omp for schedule(static)
    for (long long c = 0; c < total; ++c) {
      auto rest = static_cast<std::size_t>(c);
      for (int l = levels - 1; l >= 0; --l) {
        levels_of[l] = &post.partitions_[l][rest / stride[l]];
        rest %= stride[l];
      }
      post.log_joint_[static_cast<std::size_t>(c)] = score(levels_of);
    }
  }

  const double peak = *std::max_element(post.log_joint_.begin(), post.log_joint_.end());
  if (!std::isfinite(peak)) throw ArgumentError("enumerate_posterior: every configuration has zero probability");
  post.prob_.resize(size);
  for (std::size_t c = 0; c < size; ++c) post.prob_[c] = std::exp(post.log_joint_[c] - peak);
  const double z = compensated_sum(post.prob_);
  for (auto& p : post.prob_) p /= z;
  post.log_evidence_ = peak + std::log(z);
  return post;
}

ExactPosterior enumerate_posterior(const Corpus& corpus, const TruncSpec& trunc) {
  return enumerate_impl(corpus, trunc, true);
}

ExactPosterior enumerate_posterior_serial(const Corpus& corpus, const TruncSpec& trunc) {
  return enumerate_impl(corpus, trunc, false);
}

std::vector<std::vector<std::int32_t>> ExactPosterior::assignment(std::size_t config) const {
  std::vector<std::vector<std::int32_t>> z(partitions_.size());
  std::size_t rest = config;
  for (std::size_t l = 0; l < partitions_.size(); ++l) {
    const auto& p = partitions_[l][rest % partitions_[l].size()];
    rest /= partitions_[l].size();
    z[l].assign(p.begin(), p.end());
  }
  return z;
}

std::string ExactPosterior::key(std::size_t config) const { return canonical_key(assignment(config)); }

std::size_t ExactPosterior::find(const std::vector<std::vector<std::int32_t>>& z) const {
  if (z.size() != partitions_.size()) throw ArgumentError("ExactPosterior::find: level count mismatch");
  std::size_t index = 0;
  std::size_t stride = 1;
  for (std::size_t l = 0; l < partitions_.size(); ++l) {
    if (z[l].size() != num_tokens_) throw ArgumentError("ExactPosterior::find: token count mismatch");
    auto it = lookup_[l].find(partition_key(canonical(z[l])));
    if (it == lookup_[l].end()) return size();
    index += it->second * stride;
    stride *= partitions_[l].size();
  }
  return index;
}

double ExactPosterior::coincidence(int level, std::size_t a, std::size_t b) const {
  std::size_t stride = 1;
  for (int l = 0; l < level; ++l) stride *= partitions_[l].size();
  const auto& parts = partitions_[level];
  double p = 0.0;
  for (std::size_t c = 0; c < prob_.size(); ++c) {
    const auto& part = parts[(c / stride) % parts.size()];
    if (part[a] == part[b]) p += prob_[c];
  }
  return p;
}

double log_joint(const Corpus& corpus, const TruncSpec& trunc, const std::vector<std::vector<std::int32_t>>& z) {
  trunc.check();
  if (z.size() != static_cast<std::size_t>(trunc.hyper.num_levels())) throw ArgumentError("log_joint: level count");
  std::vector<Partition> parts;
  for (const auto& zl : z) {
    if (zl.size() != corpus.num_tokens()) throw ArgumentError("log_joint: token count");
    parts.push_back(canonical(zl));
  }
  std::vector<const Partition*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return Scorer(corpus, trunc)(ptrs);
}

std::vector<double> word_predictive(const Corpus& corpus, std::size_t j, const TruncSpec& trunc) {
  if (j >= corpus.num_docs()) throw ArgumentError("word_predictive: document out of range");
  const double base = corpus.num_tokens() == 0 ? 0.0 : enumerate_posterior(corpus, trunc).log_evidence();
  std::vector<double> p(corpus.vocab_size());
  for (std::size_t w = 0; w < p.size(); ++w) {
    Corpus extended = corpus;
    extended.docs[j].push_back(static_cast<WordId>(w));
    p[w] = std::exp(enumerate_posterior(extended, trunc).log_evidence() - base);
  }
  return p;
}

double finite_predictive(const TruncSpec& trunc, const std::vector<std::vector<std::uint32_t>>& counts,
                         PredictiveQuery query) {
  if (trunc.K.empty()) throw ArgumentError("finite_predictive: empty truncation");
  if (query.restaurant >= counts.size()) throw ArgumentError("finite_predictive: restaurant out of range");
  const std::size_t B = counts.front().size();
  for (const auto& row : counts)
    if (row.size() != B) throw ArgumentError("finite_predictive: ragged count matrix");
  for (std::size_t d = 0; d < B; ++d) {
    std::uint64_t col = 0;
    for (const auto& row : counts) col += row[d];
    if (col == 0) throw ArgumentError("finite_predictive: every listed dish needs a customer");
  }
  const double alpha = trunc.hyper.alpha.at(0);
  const double gamma = trunc.hyper.gamma.at(0);
  const std::size_t k = trunc.K[0];
  auto next = counts;
  if (query.dish == kNewDish) {
    for (auto& row : next) row.push_back(0);
    next[query.restaurant].back() = 1;
  } else {
    if (query.dish < 0 || static_cast<std::size_t>(query.dish) >= B) throw ArgumentError("finite_predictive: bad dish");
    ++next[query.restaurant][query.dish];
  }
  const double after = level_log_marginal(next, alpha, gamma, k);
  if (after == kNegInf) return 0.0;
  return std::exp(after - level_log_marginal(counts, alpha, gamma, k));
}

std::vector<std::vector<std::int32_t>> theorem2_sampler(const TruncSpec& trunc, const Corpus& corpus, Rng& rng) {
  trunc.check();
  if (trunc.ungrouped_top) throw ArgumentError("theorem2_sampler: grouped data only");
  const Hyper& h = trunc.hyper;
  const int levels = h.num_levels();
  if (trunc.T.size() != static_cast<std::size_t>(levels)) throw ArgumentError("theorem2_sampler: need T per level");
  for (int l = 0; l < levels; ++l) {
    if (trunc.K[l] == 0) throw ArgumentError("theorem2_sampler: needs a finite K at every level");
    if (trunc.T[l].empty()) throw ArgumentError("theorem2_sampler: empty table spec");
    for (auto t : trunc.T[l])
      if (t == 0) throw ArgumentError("theorem2_sampler: tables per restaurant must be >= 1");
  }

  auto draw = [&rng](const std::vector<double>& cumulative) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                             static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
  };
  auto cumulate = [](std::vector<double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
    return v;
  };

  std::vector<std::vector<double>> beta_cum(levels);
  for (int l = levels - 1; l >= 0; --l)
    beta_cum[l] = cumulate(sample_dirichlet(std::vector<double>(trunc.K[l], h.gamma[l] / trunc.K[l]), rng));

  struct Restaurant {
    std::vector<double> table_cum;
    std::vector<std::int32_t> dish;
  };
  std::vector<std::vector<Restaurant>> rest(levels);
  for (int l = 0; l < levels; ++l) rest[l].resize(l == h.depth ? corpus.num_docs() : trunc.K[l + 1]);

  auto visit = [&](int l, std::size_t r) -> Restaurant& {
    Restaurant& R = rest[l][r];
    if (R.dish.empty()) {
      const std::size_t T = trunc.T[l].size() == 1 ? trunc.T[l][0] : trunc.T[l].at(r);
      R.table_cum = cumulate(sample_dirichlet(std::vector<double>(T, h.alpha[l] / static_cast<double>(T)), rng));
      R.dish.resize(T);
      for (auto& d : R.dish) d = static_cast<std::int32_t>(draw(beta_cum[l]));
    }
    return R;
  };

  std::vector<std::vector<std::int32_t>> z(levels, std::vector<std::int32_t>(corpus.num_tokens()));
  std::size_t t = 0;
  for (std::size_t j = 0; j < corpus.num_docs(); ++j) {
    for (std::size_t i = 0; i < corpus.docs[j].size(); ++i, ++t) {
      std::size_t r = j;
      for (int l = h.depth; l >= 0; --l) {
        Restaurant& R = visit(l, r);
        const std::int32_t k = R.dish[draw(R.table_cum)];
        z[l][t] = k;
        r = static_cast<std::size_t>(k);
      }
    }
  }
  return z;
}

}  // namespace nhdp

#pragma once

// Slow, independent reference computations used to check the library. Nothing
// here calls into the code under test except for plain data types and Rng.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "nhdp/corpus.hpp"
#include "nhdp/randdist.hpp"

namespace ref {

using Labels = std::vector<std::vector<std::int32_t>>;  // [level][token]

/// Relabel by first appearance.
inline std::vector<std::int32_t> canon(const std::vector<std::int32_t>& z) {
  std::map<std::int32_t, std::int32_t> m;
  std::vector<std::int32_t> out;
  for (auto x : z) out.push_back(m.emplace(x, static_cast<std::int32_t>(m.size())).first->second);
  return out;
}

/// Probability that customers (restaurant[i], dish[i]) arrive in this order
/// under the table-level franchise, summing over every table seating by brute
/// force. Dish labels are in first-appearance order. k == 0: dishes from a CRP
/// with concentration gamma; otherwise from a K-atom symmetric Dirichlet menu,
/// counted once per labeling (so the result is a partition probability).
inline double franchise_prob(const std::vector<std::size_t>& restaurant, const std::vector<std::int32_t>& dish,
                             double alpha, double gamma, std::size_t k) {
  struct Table {
    std::uint32_t n;
    std::int32_t dish;
  };
  std::map<std::size_t, std::vector<Table>> rooms;
  std::vector<std::uint32_t> m;  // tables per dish
  std::uint32_t M = 0;
  const std::size_t N = restaurant.size();
  std::function<double(std::size_t)> go = [&](std::size_t i) -> double {
    if (i == N) return 1.0;
    auto& tables = rooms[restaurant[i]];
    std::uint32_t nr = 0;
    for (const auto& t : tables) nr += t.n;
    const std::int32_t d = dish[i];
    double total = 0.0;
    for (std::size_t t = 0; t < tables.size(); ++t) {
      if (tables[t].dish != d) continue;
      const double w = tables[t].n / (nr + alpha);
      ++tables[t].n;
      total += w * go(i + 1);
      --rooms[restaurant[i]][t].n;
    }
    // New table serving d.
    double pd;
    const bool fresh = static_cast<std::size_t>(d) >= m.size();
    if (k == 0)
      pd = fresh ? gamma / (M + gamma) : m[d] / (M + gamma);
    else
      pd = fresh ? static_cast<double>(k - m.size()) * (gamma / k) / (M + gamma) : (m[d] + gamma / k) / (M + gamma);
    if (pd > 0.0) {
      const double w = alpha / (nr + alpha) * pd;
      if (fresh) m.push_back(0);
      ++m[d];
      ++M;
      rooms[restaurant[i]].push_back(Table{1, d});
      total += w * go(i + 1);
      rooms[restaurant[i]].pop_back();
      --M;
      --m[d];
      if (fresh) m.pop_back();
    }
    return total;
  };
  return go(0);
}

/// Sequential CRP (or finite symmetric Dirichlet) probability of a labeling.
inline double urn_prob(const std::vector<std::int32_t>& dish, double gamma, std::size_t k) {
  std::vector<std::uint32_t> n;
  double p = 1.0;
  for (std::size_t i = 0; i < dish.size(); ++i) {
    const std::int32_t d = dish[i];
    const bool fresh = static_cast<std::size_t>(d) >= n.size();
    if (k == 0)
      p *= (fresh ? gamma : n[d]) / (i + gamma);
    else
      p *= fresh ? static_cast<double>(k - n.size()) * (gamma / k) / (i + gamma) : (n[d] + gamma / k) / (i + gamma);
    if (fresh) n.push_back(0);
    ++n[d];
  }
  return p;
}

/// Sequential Dirichlet-multinomial probability of the words given topics.
inline double words_prob(const std::vector<nhdp::WordId>& words, const std::vector<std::int32_t>& topic,
                         std::size_t V, double eta) {
  std::map<std::int32_t, std::map<nhdp::WordId, std::uint32_t>> nw;
  std::map<std::int32_t, std::uint32_t> n;
  double p = 1.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    p *= (nw[topic[i]][words[i]] + eta) / (n[topic[i]] + V * eta);
    ++nw[topic[i]][words[i]];
    ++n[topic[i]];
  }
  return p;
}

struct Model {
  int depth = 1;
  std::vector<double> alpha, gamma;  // per level
  double eta = 0.5;
  std::vector<std::size_t> K;  // per level, 0 = infinite
  bool ungrouped_top = false;
};

/// Joint probability of a nested labeling and the words, level by level.
inline double joint(const nhdp::Corpus& c, const Model& m, const Labels& z) {
  std::vector<nhdp::WordId> words;
  std::vector<std::size_t> doc;
  for (std::size_t j = 0; j < c.docs.size(); ++j)
    for (auto w : c.docs[j]) {
      words.push_back(w);
      doc.push_back(j);
    }
  double p = 1.0;
  for (int l = m.depth; l >= 0; --l) {
    const auto d = canon(z[l]);
    if (l == m.depth && m.ungrouped_top) {
      p *= urn_prob(d, m.gamma[l], m.K[l]);
      continue;
    }
    std::vector<std::size_t> r(words.size());
    const auto parent = l == m.depth ? std::vector<std::int32_t>() : canon(z[l + 1]);
    for (std::size_t t = 0; t < words.size(); ++t)
      r[t] = l == m.depth ? doc[t] : static_cast<std::size_t>(parent[t]);
    p *= franchise_prob(r, d, m.alpha[l], m.gamma[l], m.K[l]);
  }
  return p * words_prob(words, canon(z[0]), c.vocab.size(), m.eta);
}

/// Every set partition of n items as restricted growth strings, at most k blocks (0: any).
inline std::vector<std::vector<std::int32_t>> partitions(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::int32_t>> out;
  std::vector<std::int32_t> cur;
  std::function<void(std::int32_t)> rec = [&](std::int32_t used) {
    if (cur.size() == n) {
      out.push_back(cur);
      return;
    }
    for (std::int32_t b = 0; b <= used; ++b) {
      if (k != 0 && static_cast<std::size_t>(b) >= k) break;
      cur.push_back(b);
      rec(std::max(used, b + 1));
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

/// Forward simulation of the nested franchise with CRPs everywhere: tokens in
/// corpus order, each walking from its document down to a topic. Returns
/// z[level][token].
inline Labels nested_crp_draw(const nhdp::Corpus& c, int depth, const std::vector<double>& alpha,
                              const std::vector<double>& gamma, nhdp::Rng& rng) {
  struct Level {
    std::map<std::size_t, std::vector<std::pair<std::uint32_t, std::int32_t>>> rooms;
    std::vector<std::uint32_t> m;
    std::uint32_t M = 0;
  };
  std::vector<Level> lv(static_cast<std::size_t>(depth + 1));
  Labels z(static_cast<std::size_t>(depth + 1));
  for (std::size_t j = 0; j < c.docs.size(); ++j)
    for (std::size_t i = 0; i < c.docs[j].size(); ++i) {
      std::size_t r = j;
      for (int l = depth; l >= 0; --l) {
        auto& L = lv[static_cast<std::size_t>(l)];
        auto& tables = L.rooms[r];
        std::uint32_t nr = 0;
        for (auto& t : tables) nr += t.first;
        double u = rng.uniform() * (nr + alpha[l]);
        std::int32_t dish = -1;
        for (auto& t : tables) {
          if (u < t.first) {
            ++t.first;
            dish = t.second;
            break;
          }
          u -= t.first;
        }
        if (dish < 0) {
          double v = rng.uniform() * (L.M + gamma[l]);
          for (std::size_t d = 0; d < L.m.size(); ++d) {
            if (v < L.m[d]) {
              dish = static_cast<std::int32_t>(d);
              break;
            }
            v -= L.m[d];
          }
          if (dish < 0) {
            dish = static_cast<std::int32_t>(L.m.size());
            L.m.push_back(0);
          }
          ++L.m[dish];
          ++L.M;
          tables.emplace_back(1, dish);
        }
        z[l].push_back(dish);
        r = static_cast<std::size_t>(dish);
      }
    }
  return z;
}

/// Total variation distance between two distributions keyed the same way.
template <class Key>
double tv(const std::map<Key, double>& a, const std::map<Key, double>& b) {
  std::set<Key> keys;
  for (auto& [k, v] : a) keys.insert(k);
  for (auto& [k, v] : b) keys.insert(k);
  double s = 0.0;
  for (const auto& k : keys) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    s += std::abs((ia == a.end() ? 0.0 : ia->second) - (ib == b.end() ? 0.0 : ib->second));
  }
  return 0.5 * s;
}

inline nhdp::Corpus make_corpus(const std::vector<std::vector<nhdp::WordId>>& docs, std::size_t V) {
  nhdp::Corpus c;
  c.docs = docs;
  for (std::size_t w = 0; w < V; ++w) c.vocab.push_back("w" + std::to_string(w));
  for (std::size_t j = 0; j < docs.size(); ++j) c.doc_ids.push_back("d" + std::to_string(j));
  return c;
}

}  // namespace ref

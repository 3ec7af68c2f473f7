#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "atir/core.hpp"
#include "atir/mining.hpp"
#include "atir/retrieval.hpp"
#include "generators.hpp"

namespace atir::oracle {

inline double recall(const RankedList& run, const Qrels& qrels, std::size_t k) {
  const auto& e = run.entries();
  for (std::size_t i = 0; i < std::min(k, e.size()); ++i) {
    if (qrels.grade(run.query_id(), e[i].doc_id) >= 1) return 1.0;
  }
  return 0.0;
}

inline double ndcg(const RankedList& run, const Qrels& qrels, std::size_t k) {
  auto gain = [](int g) { return std::pow(2.0, g) - 1.0; };
  double dcg = 0.0;
  const auto& e = run.entries();
  for (std::size_t i = 0; i < std::min(k, e.size()); ++i) {
    dcg += gain(qrels.grade(run.query_id(), e[i].doc_id)) / std::log2(double(i) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : qrels.judgments(run.query_id())) grades.push_back(g);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) idcg += gain(grades[i]) / std::log2(double(i) + 2.0);
  return dcg / idcg;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(d);
  double n = 0.0;
  for (auto& x : v) {
    x = g(rng);
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

/// Random index whose rows repeat now and then so that exact score ties occur.
inline retrieval::EmbeddingIndex random_index(std::mt19937_64& rng, std::size_t m, std::size_t d) {
  retrieval::EmbeddingIndex index;
  index.matrix = Matrix<float>(m, d);
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution dup(0.3);
  for (std::size_t i = 0; i < m; ++i) {
    index.ids.push_back(testgen::doc_name(order[i]));
    if (i > 0 && dup(rng)) {
      for (std::size_t j = 0; j < d; ++j) index.matrix(i, j) = index.matrix(i - 1, j);
      continue;
    }
    const auto v = random_unit(rng, d);
    for (std::size_t j = 0; j < d; ++j) index.matrix(i, j) = static_cast<float>(v[j]);
  }
  index.model_fingerprint = rng();
  return index;
}

/// Scores every row, sorts everything, keeps the first k.
inline std::vector<ScoredDoc> search(const retrieval::EmbeddingIndex& index, const std::vector<double>& q,
                                     std::size_t k) {
  std::vector<ScoredDoc> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += static_cast<double>(index.matrix(i, j)) * q[j];
    all.push_back({index.ids[i], s});
  }
  std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Classifies every doc by its 0-based rank instead of scanning the run.
inline mining::MiningResult mine(const RankedList& run, const std::vector<std::string>& positives,
                                 const mining::MiningConfig& cfg) {
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < run.entries().size(); ++i) rank[run.entries()[i].doc_id] = i;
  std::size_t anchor = SIZE_MAX;
  for (const auto& p : positives) {
    if (rank.count(p)) anchor = std::min(anchor, rank[p]);
  }
  auto is_pos = [&](const std::string& id) { return std::count(positives.begin(), positives.end(), id) > 0; };
  std::vector<std::pair<std::size_t, std::string>> hard, fn;
  mining::MiningResult r;
  r.positive_found = anchor != SIZE_MAX;
  if (!r.positive_found && cfg.require_positive_found) return r;
  for (const auto& [id, k] : rank) {
    if (k >= cfg.top_k_pool) continue;
    if (!r.positive_found || (k > anchor && !is_pos(id))) hard.push_back({k, id});
  }
  for (const auto& [id, k] : rank) {
    if (r.positive_found && k < anchor) fn.push_back({k, id});
  }
  std::sort(hard.begin(), hard.end());
  std::sort(fn.begin(), fn.end());
  for (std::size_t i = 0; i < hard.size() && i < cfg.max_hard_negatives; ++i) r.hard.push_back(hard[i].second);
  for (const auto& [k, id] : fn) r.false_negatives.push_back(id);
  return r;
}

}  // namespace atir::oracle

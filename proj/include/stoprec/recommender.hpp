#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stoprec/common.hpp"
#include "stoprec/corpus.hpp"
#include "stoprec/fusion.hpp"
#include "stoprec/topic_model.hpp"

namespace stoprec {

// Immutable trained model: fused embeddings, natural topic parameters and the
// id maps needed to answer queries.
struct Model {
  int K = 0;
  FusionParams fusion;
  Matrix psi_w;  // K x |V_w|
  Matrix psi_d;  // K x |V_d|
  std::vector<std::vector<std::uint16_t>> z_w, z_d;
  std::vector<std::string> paper_ids, dataset_ids, vocab_words;
  std::unordered_map<std::string, int> paper_index, dataset_index;
  std::string config_echo;  // JSON text of the training configuration

  // Representation weights, persisted for bundle completeness.
  SdaeParams sdae;
  Matrix struct_S;

  int n_papers() const { return static_cast<int>(paper_ids.size()); }
  int n_datasets() const { return static_cast<int>(dataset_ids.size()); }

  void rebuild_indices() {
    paper_index.clear();
    dataset_index.clear();
    for (int i = 0; i < n_papers(); ++i) paper_index[paper_ids[i]] = i;
    for (int i = 0; i < n_datasets(); ++i) dataset_index[dataset_ids[i]] = i;
  }
};

struct RankedResult {
  std::vector<int> datasets;    // descending score, ties by ascending id
  std::vector<double> scores;
};

// o(Q, d) = (1/|Q|) sum_p v_p . psi^d_{:,d}.
inline std::vector<double> score_query(const Model& m, const std::vector<int>& query_papers) {
  if (query_papers.empty()) throw std::invalid_argument("score_query: empty query");
  {
    std::set<int> uniq(query_papers.begin(), query_papers.end());
    if (uniq.size() != query_papers.size())
      throw std::invalid_argument("score_query: query is a set; duplicate paper id");
  }
  for (int p : query_papers)
    if (p < 0 || p >= m.n_papers())
      throw std::invalid_argument("score_query: unknown paper index " + std::to_string(p));
  std::vector<double> scores(m.n_datasets(), 0.0);
  for (int p : query_papers) {
    auto v = m.fusion.V.row(p);
    for (int d = 0; d < m.n_datasets(); ++d) {
      double s = 0.0;
      for (int k = 0; k < m.K; ++k) s += v[k] * m.psi_d(k, d);
      scores[d] += s;
    }
  }
  for (double& s : scores) s /= static_cast<double>(query_papers.size());
  return scores;
}

// Top-k by score, ties broken by ascending dataset id.
inline RankedResult rank_scores(const std::vector<double>& scores, int k) {
  if (k < 1 || k > static_cast<int>(scores.size()))
    throw std::invalid_argument("rank: k out of range");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  RankedResult r;
  for (int i = 0; i < k; ++i) {
    r.datasets.push_back(order[i]);
    r.scores.push_back(scores[order[i]]);
  }
  return r;
}

inline RankedResult rank(const Model& m, const std::vector<int>& query_papers, int k) {
  return rank_scores(score_query(m, query_papers), k);
}

// Average of the papers' topic proportions; returns the top_t topics.
inline std::vector<std::pair<int, double>> query_topics(const Model& m,
                                                        const std::vector<int>& query_papers,
                                                        int top_t) {
  if (query_papers.empty()) throw std::invalid_argument("query_topics: empty query");
  std::vector<double> agg(m.K, 0.0);
  for (int p : query_papers) {
    if (p < 0 || p >= m.n_papers())
      throw std::invalid_argument("query_topics: unknown paper index " + std::to_string(p));
    auto theta = transform(m.fusion.V.row(p), m.fusion.kappa);
    for (int k = 0; k < m.K; ++k) agg[k] += theta[k];
  }
  for (double& v : agg) v /= static_cast<double>(query_papers.size());
  std::vector<int> order(m.K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (agg[a] != agg[b]) return agg[a] > agg[b];
    return a < b;
  });
  std::vector<std::pair<int, double>> out;
  for (int i = 0; i < std::min(top_t, m.K); ++i) out.emplace_back(order[i], agg[order[i]]);
  return out;
}

struct TopicProfile {
  std::vector<std::pair<int, double>> top_words;     // (word id, phi^w)
  std::vector<std::pair<int, double>> top_datasets;  // (dataset id, phi^d)
};

inline TopicProfile topic_profile(const Model& m, int topic, int n) {
  if (topic < 0 || topic >= m.K) throw std::invalid_argument("topic_profile: topic out of range");
  auto top_of = [&](const Matrix& psi, int count) {
    auto phi = softmax(psi.row(topic));
    std::vector<int> order(phi.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (phi[a] != phi[b]) return phi[a] > phi[b];
      return a < b;
    });
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < std::min<int>(count, static_cast<int>(order.size())); ++i)
      out.emplace_back(order[i], phi[order[i]]);
    return out;
  };
  TopicProfile prof;
  prof.top_words = top_of(m.psi_w, n);
  prof.top_datasets = top_of(m.psi_d, n);
  return prof;
}

// ---------------------------------------------------------------------------
// Naive retrieval baselines.

// Datasets directly linked to any query paper, ranked by link frequency
// across the query (ties by ascending id). May return fewer than k.
inline RankedResult naive_retrieval(const HeteroGraph& g, const std::vector<int>& query_papers,
                                    int k) {
  std::vector<double> freq(g.n_datasets(), 0.0);
  for (int p : query_papers)
    for (int d : g.paper_datasets[p]) freq[d] += 1.0;
  std::vector<int> order;
  for (int d = 0; d < g.n_datasets(); ++d)
    if (freq[d] > 0.0) order.push_back(d);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    return a < b;
  });
  RankedResult r;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i) {
    r.datasets.push_back(order[i]);
    r.scores.push_back(freq[order[i]]);
  }
  return r;
}

// Expand the query by citation neighbors (both directions) up to `hops`
// paper-hops, then apply the same frequency ranking.
inline RankedResult advanced_naive_retrieval(const HeteroGraph& g,
                                             const std::vector<int>& query_papers, int k,
                                             int hops = 2) {
  std::vector<int> dist(g.n_papers(), -1);
  std::queue<int> bfs;
  for (int p : query_papers) {
    dist[p] = 0;
    bfs.push(p);
  }
  std::vector<int> expanded;
  while (!bfs.empty()) {
    int p = bfs.front();
    bfs.pop();
    expanded.push_back(p);
    if (dist[p] >= hops - 1) continue;  // dataset links are the final hop
    for (int q : g.neighbors[p])
      if (dist[q] < 0) {
        dist[q] = dist[p] + 1;
        bfs.push(q);
      }
  }
  return naive_retrieval(g, expanded, k);
}

// ---------------------------------------------------------------------------
// Ranking metrics.

struct MetricRecord {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double auc = 0.0;
};

// Metrics for a single full ranking against a binary relevance set.
// precision@k, recall@k, NDCG@k (binary gains, log2 discount, IDCG over
// min(k, |GT|)), MRR@k; AUC is over the full ranking.
inline MetricRecord ranking_metrics(const std::vector<int>& ranking,
                                    const std::set<int>& relevant, int k) {
  if (relevant.empty()) throw std::invalid_argument("ranking_metrics: empty relevance set");
  MetricRecord m;
  int hits = 0;
  double dcg = 0.0;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(ranking.size())); ++i) {
    if (relevant.count(ranking[i])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      if (m.mrr == 0.0) m.mrr = 1.0 / static_cast<double>(i + 1);
    }
  }
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  double idcg = 0.0;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(relevant.size())); ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;

  // AUC: fraction of (relevant, non-relevant) pairs ordered correctly over
  // the full ranking.
  std::size_t n_rel = 0, n_nonrel_seen = 0, inversions = 0;
  for (int item : ranking) {
    if (relevant.count(item)) {
      ++n_rel;
      inversions += n_nonrel_seen;  // non-relevant items ranked above this one
    } else {
      ++n_nonrel_seen;
    }
  }
  std::size_t n_nonrel = ranking.size() - n_rel;
  if (n_rel > 0 && n_nonrel > 0)
    m.auc = 1.0 - static_cast<double>(inversions) / static_cast<double>(n_rel * n_nonrel);
  else
    m.auc = 1.0;
  return m;
}

struct EvaluationReport {
  std::vector<MetricRecord> per_query;
  MetricRecord summary;  // macro-average
};

// Macro-averaged metrics over full rankings (one per query).
inline EvaluationReport evaluate_rankings(const std::vector<std::vector<int>>& rankings,
                                          const std::vector<std::set<int>>& ground_truth, int k) {
  if (rankings.empty()) throw std::invalid_argument("evaluate: no queries");
  if (rankings.size() != ground_truth.size())
    throw std::invalid_argument("evaluate: rankings/ground-truth size mismatch");
  EvaluationReport rep;
  for (std::size_t q = 0; q < rankings.size(); ++q)
    rep.per_query.push_back(ranking_metrics(rankings[q], ground_truth[q], k));
  for (const auto& m : rep.per_query) {
    rep.summary.precision += m.precision;
    rep.summary.recall += m.recall;
    rep.summary.ndcg += m.ndcg;
    rep.summary.mrr += m.mrr;
    rep.summary.auc += m.auc;
  }
  double n = static_cast<double>(rep.per_query.size());
  rep.summary.precision /= n;
  rep.summary.recall /= n;
  rep.summary.ndcg /= n;
  rep.summary.mrr /= n;
  rep.summary.auc /= n;
  return rep;
}

// Complete a (possibly partial) ranking to a full permutation of datasets:
// unranked datasets appended in ascending id order.
inline std::vector<int> complete_ranking(const std::vector<int>& partial, int n_datasets) {
  std::vector<bool> seen(n_datasets, false);
  std::vector<int> full = partial;
  for (int d : partial) seen[d] = true;
  for (int d = 0; d < n_datasets; ++d)
    if (!seen[d]) full.push_back(d);
  return full;
}

inline EvaluationReport evaluate_model(const Model& m, const QuerySet& queries, int k) {
  if (queries.queries.empty()) throw std::invalid_argument("evaluate: no queries");
  std::vector<std::vector<int>> rankings;
  std::vector<std::set<int>> gts;
  for (const auto& q : queries.queries) {
    for (int d : q.ground_truth)
      if (d < 0 || d >= m.n_datasets())
        throw std::invalid_argument("evaluate: ground-truth dataset unknown to model");
    rankings.push_back(rank(m, q.query_papers, m.n_datasets()).datasets);
    gts.emplace_back(q.ground_truth.begin(), q.ground_truth.end());
  }
  return evaluate_rankings(rankings, gts, k);
}

enum class BaselineKind { Naive, AdvancedNaive };

inline EvaluationReport evaluate_baseline(const HeteroGraph& g, const QuerySet& queries, int k,
                                          BaselineKind kind, int hops = 2) {
  if (queries.queries.empty()) throw std::invalid_argument("evaluate: no queries");
  std::vector<std::vector<int>> rankings;
  std::vector<std::set<int>> gts;
  for (const auto& q : queries.queries) {
    RankedResult r = kind == BaselineKind::Naive
                         ? naive_retrieval(g, q.query_papers, g.n_datasets())
                         : advanced_naive_retrieval(g, q.query_papers, g.n_datasets(), hops);
    rankings.push_back(complete_ranking(r.datasets, g.n_datasets()));
    gts.emplace_back(q.ground_truth.begin(), q.ground_truth.end());
  }
  return evaluate_rankings(rankings, gts, k);
}

}  // namespace stoprec

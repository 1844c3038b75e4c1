#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stoprec/common.hpp"
#include "stoprec/corpus.hpp"

namespace stoprec {

struct WalkConfig {
  int walk_length = 80;
  int walks_per_node = 10;
  int window = 5;
  double p = 1.0;  // node2vec return bias
  double q = 1.0;  // node2vec in-out bias
  int num_negatives = 5;
  int epochs = 3;
  double lr = 0.025;
  std::size_t dim = 8;  // K/2
};

struct StructEmbedding {
  Matrix S;        // center table: |V_p| x dim, the s_p vectors
  Matrix context;  // context table, same shape
  std::vector<double> neg_dist;  // F(p), sums to 1
  WalkConfig config;
  std::vector<double> epoch_objective;  // mean skip-gram objective per epoch
  bool degenerate = false;              // no trainable pairs (e.g. single node)
};

// Full-softmax likelihood that paper j neighbors paper i under embeddings S.
inline double neighbor_likelihood(int i, int j, const Matrix& S) {
  std::vector<double> scores(S.rows());
  for (std::size_t z = 0; z < S.rows(); ++z) scores[z] = dot(S.row(i), S.row(z));
  softmax_inplace(scores);
  return scores[j];
}

// Negative-sampling distribution F(p) proportional to (d_out + 1)^{3/4}, the
// +1 keeping zero-out-degree papers sampleable.
inline std::vector<double> negative_sampling_distribution(const HeteroGraph& g) {
  std::vector<double> f(g.n_papers());
  double total = 0.0;
  for (int p = 0; p < g.n_papers(); ++p) {
    f[p] = std::pow(static_cast<double>(g.cite_out[p].size()) + 1.0, 0.75);
    total += f[p];
  }
  for (double& v : f) v /= total;
  return f;
}

// Second-order (node2vec) biased walks over the symmetrized citation graph.
// Walks truncate early at nodes with no neighbors.
inline std::vector<std::vector<int>> generate_walks(const HeteroGraph& g, const WalkConfig& cfg,
                                                    std::uint64_t seed) {
  if (cfg.walk_length < 2) throw std::invalid_argument("generate_walks: walk_length must be >= 2");
  std::vector<std::vector<int>> walks;
  Rng master(seed);
  auto is_neighbor = [&](int a, int b) {
    const auto& nb = g.neighbors[a];
    return std::binary_search(nb.begin(), nb.end(), b);
  };
  for (int start = 0; start < g.n_papers(); ++start) {
    for (int w = 0; w < cfg.walks_per_node; ++w) {
      Rng rng = master.fork();  // per-walk stream, order-independent within a node
      std::vector<int> walk{start};
      int prev = -1;
      while (static_cast<int>(walk.size()) < cfg.walk_length) {
        int cur = walk.back();
        const auto& nb = g.neighbors[cur];
        if (nb.empty()) break;
        int next;
        if (prev < 0 || (cfg.p == 1.0 && cfg.q == 1.0)) {
          next = nb[rng.below(nb.size())];
        } else {
          std::vector<double> weights(nb.size());
          for (std::size_t i = 0; i < nb.size(); ++i) {
            int x = nb[i];
            if (x == prev)
              weights[i] = 1.0 / cfg.p;
            else if (is_neighbor(prev, x))
              weights[i] = 1.0;
            else
              weights[i] = 1.0 / cfg.q;
          }
          next = nb[rng.categorical(weights)];
        }
        prev = cur;
        walk.push_back(next);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

// Skip-gram with negative sampling over walk windows (LINE-style objective
// maximized by SGD with linearly decaying learning rate). Separate center and
// context tables; s_p is read from the center table.
inline StructEmbedding train_structure_embeddings(const HeteroGraph& g, const WalkConfig& cfg,
                                                  std::uint64_t seed) {
  StructEmbedding emb;
  emb.config = cfg;
  emb.neg_dist = negative_sampling_distribution(g);
  Rng rng(seed);
  emb.S = Matrix(g.n_papers(), cfg.dim);
  emb.context = Matrix(g.n_papers(), cfg.dim);
  for (double& v : emb.S.data()) v = rng.uniform(-0.5, 0.5) / static_cast<double>(cfg.dim);
  // Context table starts at zero (standard skip-gram practice).

  auto walks = generate_walks(g, cfg, rng.next_u64());

  std::vector<std::pair<int, int>> pairs;
  for (const auto& walk : walks)
    for (std::size_t c = 0; c < walk.size(); ++c)
      for (int off = 1; off <= cfg.window; ++off) {
        if (c + off < walk.size() && walk[c] != walk[c + off])
          pairs.emplace_back(walk[c], walk[c + off]);
        if (static_cast<int>(c) - off >= 0 && walk[c] != walk[c - off])
          pairs.emplace_back(walk[c], walk[c - off]);
      }
  if (pairs.empty()) {
    emb.degenerate = true;
    return emb;
  }

  // Cumulative distribution for binary-search negative sampling.
  std::vector<double> cum(emb.neg_dist.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cum.size(); ++i) {
    acc += emb.neg_dist[i];
    cum[i] = acc;
  }
  auto sample_negative = [&]() {
    double r = rng.next_double() * acc;
    return static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
  };

  const std::size_t total_steps = static_cast<std::size_t>(cfg.epochs) * pairs.size();
  std::size_t step = 0;
  std::vector<double> grad_center(cfg.dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double objective = 0.0;
    for (auto [i, j] : pairs) {
      double lr = cfg.lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
      lr = std::max(lr, cfg.lr * 1e-4);
      ++step;
      auto si = emb.S.row(i);
      std::fill(grad_center.begin(), grad_center.end(), 0.0);
      {
        auto cj = emb.context.row(j);
        double score = dot(si, cj);
        objective += log_sigmoid(score);
        double g1 = 1.0 - sigmoid(score);
        for (std::size_t d = 0; d < cfg.dim; ++d) {
          grad_center[d] += g1 * cj[d];
          cj[d] += lr * g1 * si[d];
        }
      }
      for (int n = 0; n < cfg.num_negatives; ++n) {
        int x = sample_negative();
        if (x == i || x == j) continue;
        auto cx = emb.context.row(x);
        double score = dot(si, cx);
        objective += log_sigmoid(-score);
        double g0 = -sigmoid(score);
        for (std::size_t d = 0; d < cfg.dim; ++d) {
          grad_center[d] += g0 * cx[d];
          cx[d] += lr * g0 * si[d];
        }
      }
      for (std::size_t d = 0; d < cfg.dim; ++d) si[d] += lr * grad_center[d];
      if (!std::isfinite(si[0]))
        throw std::runtime_error("train_structure_embeddings: non-finite update");
    }
    emb.epoch_objective.push_back(objective / static_cast<double>(pairs.size()));
  }
  return emb;
}

}  // namespace stoprec

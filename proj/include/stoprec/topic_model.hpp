#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stoprec/common.hpp"
#include "stoprec/corpus.hpp"

namespace stoprec {

// Shared topic space: natural parameters for the per-topic word and dataset
// distributions plus the latent topic assignment of every token and every
// dataset usage.
struct TopicState {
  Matrix psi_w;  // K x |V_w|
  Matrix psi_d;  // K x |V_d|
  std::vector<std::vector<std::uint16_t>> z_w;  // per paper, per token
  std::vector<std::vector<std::uint16_t>> z_d;  // per paper, per dataset usage

  int n_topics() const { return static_cast<int>(psi_w.rows()); }
};

struct SufficientStats {
  Matrix n_kj;  // topic x word token counts
  Matrix n_ki;  // topic x dataset usage counts
  Matrix n_pk;  // paper x topic word counts
  Matrix d_pk;  // paper x topic dataset counts
  std::vector<double> tokens_per_topic;    // N_k over words
  std::vector<double> datasets_per_topic;  // N_k over dataset usages
};

// Row-wise softmax: natural parameters -> per-topic distributions.
inline Matrix topic_dist(const Matrix& psi) {
  Matrix phi = psi;
  for (std::size_t k = 0; k < phi.rows(); ++k) softmax_inplace(phi.row(k));
  return phi;
}

inline Matrix word_topic_dist(const Matrix& psi_w) { return topic_dist(psi_w); }
inline Matrix dataset_topic_dist(const Matrix& psi_d) { return topic_dist(psi_d); }

// Uniform-random topic per token and per dataset usage.
inline void init_assignments(TopicState& state, const HeteroGraph& g, int K, Rng& rng) {
  state.z_w.assign(g.n_papers(), {});
  state.z_d.assign(g.n_papers(), {});
  for (int p = 0; p < g.n_papers(); ++p) {
    state.z_w[p].resize(g.tokens[p].size());
    for (auto& z : state.z_w[p]) z = static_cast<std::uint16_t>(rng.below(K));
    state.z_d[p].resize(g.paper_datasets[p].size());
    for (auto& z : state.z_d[p]) z = static_cast<std::uint16_t>(rng.below(K));
  }
}

inline SufficientStats recount_stats(const HeteroGraph& g, const TopicState& state, int K) {
  if (static_cast<int>(state.z_w.size()) != g.n_papers() ||
      static_cast<int>(state.z_d.size()) != g.n_papers())
    throw std::invalid_argument("recount_stats: z shape mismatch");
  for (int p = 0; p < g.n_papers(); ++p)
    if (state.z_w[p].size() != g.tokens[p].size() ||
        state.z_d[p].size() != g.paper_datasets[p].size())
      throw std::invalid_argument("recount_stats: z shape mismatch at paper " + std::to_string(p));
  SufficientStats s;
  s.n_kj = Matrix(K, state.psi_w.cols());
  s.n_ki = Matrix(K, state.psi_d.cols());
  s.n_pk = Matrix(g.n_papers(), K);
  s.d_pk = Matrix(g.n_papers(), K);
  s.tokens_per_topic.assign(K, 0.0);
  s.datasets_per_topic.assign(K, 0.0);
  for (int p = 0; p < g.n_papers(); ++p) {
    for (std::size_t j = 0; j < g.tokens[p].size(); ++j) {
      int k = state.z_w[p][j];
      s.n_kj(k, g.tokens[p][j]) += 1.0;
      s.n_pk(p, k) += 1.0;
      s.tokens_per_topic[k] += 1.0;
    }
    for (std::size_t i = 0; i < g.paper_datasets[p].size(); ++i) {
      int k = state.z_d[p][i];
      s.n_ki(k, g.paper_datasets[p][i]) += 1.0;
      s.d_pk(p, k) += 1.0;
      s.datasets_per_topic[k] += 1.0;
    }
  }
  return s;
}

// Log of the joint probability of the observed tokens and dataset usages
// under theta, phi and the current assignments (log-space accumulation).
inline double joint_log_likelihood(const HeteroGraph& g, const Matrix& theta, const Matrix& phi_w,
                                   const Matrix& phi_d, const TopicState& state) {
  double ll = 0.0;
  for (int p = 0; p < g.n_papers(); ++p) {
    for (std::size_t j = 0; j < g.tokens[p].size(); ++j) {
      int k = state.z_w[p][j];
      double prob = theta(p, k) * phi_w(k, g.tokens[p][j]);
      if (!(prob > 0.0))
        throw std::runtime_error("joint_log_likelihood: zero probability term");
      ll += std::log(theta(p, k)) + std::log(phi_w(k, g.tokens[p][j]));
    }
    for (std::size_t i = 0; i < g.paper_datasets[p].size(); ++i) {
      int k = state.z_d[p][i];
      double prob = theta(p, k) * phi_d(k, g.paper_datasets[p][i]);
      if (!(prob > 0.0))
        throw std::runtime_error("joint_log_likelihood: zero probability term");
      ll += std::log(theta(p, k)) + std::log(phi_d(k, g.paper_datasets[p][i]));
    }
  }
  return ll;
}

namespace detail {

inline int sample_topic(std::span<const double> theta_row, const Matrix& phi, int item, Rng& rng,
                        std::vector<double>& scratch) {
  const int K = static_cast<int>(phi.rows());
  scratch.resize(K);
  for (int k = 0; k < K; ++k) scratch[k] = theta_row[k] * phi(k, item);
  return static_cast<int>(rng.categorical(scratch));
}

}  // namespace detail

// Resample every token's topic from p(z=k) proportional to theta_{p,k} *
// phi^w_{k,w}, keeping the sufficient statistics incrementally consistent.
inline void gibbs_sweep_words(const HeteroGraph& g, const Matrix& theta, const Matrix& phi_w,
                              TopicState& state, SufficientStats& stats, Rng& rng) {
  std::vector<double> scratch;
  for (int p = 0; p < g.n_papers(); ++p) {
    for (std::size_t j = 0; j < g.tokens[p].size(); ++j) {
      int w = g.tokens[p][j];
      int old_k = state.z_w[p][j];
      int new_k = detail::sample_topic(theta.row(p), phi_w, w, rng, scratch);
      if (new_k == old_k) continue;
      state.z_w[p][j] = static_cast<std::uint16_t>(new_k);
      stats.n_kj(old_k, w) -= 1.0;
      stats.n_kj(new_k, w) += 1.0;
      stats.n_pk(p, old_k) -= 1.0;
      stats.n_pk(p, new_k) += 1.0;
      stats.tokens_per_topic[old_k] -= 1.0;
      stats.tokens_per_topic[new_k] += 1.0;
    }
  }
}

inline void gibbs_sweep_datasets(const HeteroGraph& g, const Matrix& theta, const Matrix& phi_d,
                                 TopicState& state, SufficientStats& stats, Rng& rng) {
  std::vector<double> scratch;
  for (int p = 0; p < g.n_papers(); ++p) {
    for (std::size_t i = 0; i < g.paper_datasets[p].size(); ++i) {
      int d = g.paper_datasets[p][i];
      int old_k = state.z_d[p][i];
      int new_k = detail::sample_topic(theta.row(p), phi_d, d, rng, scratch);
      if (new_k == old_k) continue;
      state.z_d[p][i] = static_cast<std::uint16_t>(new_k);
      stats.n_ki(old_k, d) -= 1.0;
      stats.n_ki(new_k, d) += 1.0;
      stats.d_pk(p, old_k) -= 1.0;
      stats.d_pk(p, new_k) += 1.0;
      stats.datasets_per_topic[old_k] -= 1.0;
      stats.datasets_per_topic[new_k] += 1.0;
    }
  }
}

// Gradient of the minimized loss w.r.t. psi^w: entry (k,j) is
// -lambda * (n_{k,j} - N_k * phi^w_{k,j}) + 2 * lambda_v * psi^w_{k,j}.
inline Matrix grad_psi(const Matrix& counts, std::span<const double> per_topic_total,
                       const Matrix& phi, const Matrix& psi, double lambda, double reg) {
  Matrix grad(psi.rows(), psi.cols());
  for (std::size_t k = 0; k < psi.rows(); ++k)
    for (std::size_t j = 0; j < psi.cols(); ++j)
      grad(k, j) =
          -lambda * (counts(k, j) - per_topic_total[k] * phi(k, j)) + 2.0 * reg * psi(k, j);
  return grad;
}

inline Matrix grad_psi_w(const SufficientStats& stats, const Matrix& phi_w, const Matrix& psi_w,
                         double lambda, double lambda_v) {
  return grad_psi(stats.n_kj, stats.tokens_per_topic, phi_w, psi_w, lambda, lambda_v);
}

inline Matrix grad_psi_d(const SufficientStats& stats, const Matrix& phi_d, const Matrix& psi_d,
                         double lambda, double lambda_d) {
  return grad_psi(stats.n_ki, stats.datasets_per_topic, phi_d, psi_d, lambda, lambda_d);
}

}  // namespace stoprec

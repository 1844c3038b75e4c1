#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoprec/common.hpp"
#include "stoprec/corpus.hpp"
#include "stoprec/graph_embedding.hpp"
#include "stoprec/lbfgs.hpp"
#include "stoprec/sdae.hpp"
#include "stoprec/topic_model.hpp"

namespace stoprec {

// Continuous parameters coupled by the transformation: per-paper embeddings
// v_p = [t_p; s_p], the peakiness kappa and the link-model weights beta.
struct FusionParams {
  Matrix V;  // |V_p| x K
  double kappa = 1.0;
  double beta0 = 0.0;
  std::vector<double> beta1;  // K

  int K() const { return static_cast<int>(V.cols()); }
};

struct TrainConfig {
  int K = 16;
  double lambda = 0.5;
  double lambda_p = 0.1;
  double lambda_d = 0.01;
  double lambda_v = 0.1;
  double lambda_w = 0.01;
  double lr = 0.01;
  std::size_t batch_size = 64;
  int outer_iters = 150;
  int lbfgs_history = 7;
  int lbfgs_iters_per_step = 10;
  double tol = 1e-4;
  int patience = 10;  // consecutive quiet iterations before stopping
  double mu = 1.0;  // alignment weight between [t; s] and v
  std::uint64_t seed = 1;
  double kappa_init = 1.0;

  // Pretraining.
  int sdae_epochs = 20;
  std::size_t sdae_hidden = 256;
  WalkConfig walk;  // dim is set to K/2 internally
  std::size_t finetune_pair_sample = 5000;
};

// Peakiness-controlled softmax from embedding to topic proportions.
inline std::vector<double> transform(std::span<const double> v, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("transform: kappa must be >= 0");
  std::vector<double> theta(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) theta[k] = kappa * v[k];
  softmax_inplace(theta);
  return theta;
}

inline Matrix theta_matrix(const Matrix& V, double kappa) {
  Matrix theta(V.rows(), V.cols());
  for (std::size_t p = 0; p < V.rows(); ++p) {
    auto t = transform(V.row(p), kappa);
    for (std::size_t k = 0; k < t.size(); ++k) theta(p, k) = t[k];
  }
  return theta;
}

// Citation likelihood sigma(beta0 + beta1 . (v_i (.) v_j)).
inline double link_prob(std::span<const double> v_i, std::span<const double> v_j, double beta0,
                        std::span<const double> beta1) {
  if (v_i.size() != v_j.size() || v_i.size() != beta1.size())
    throw std::invalid_argument("link_prob: dimension mismatch");
  double a = beta0;
  for (std::size_t k = 0; k < v_i.size(); ++k) a += beta1[k] * v_i[k] * v_j[k];
  return sigmoid(a);
}

// Positive pairs are the citations; negatives are sampled non-edges.
struct PairSet {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::pair<int, int>> negatives;

  static PairSet from_graph(const HeteroGraph& g, std::uint64_t neg_seed) {
    PairSet ps;
    ps.positives = g.citations;
    ps.negatives = sample_negative_pairs(g, neg_seed);
    return ps;
  }
};

struct LossParts {
  double links = 0.0;
  double topics = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

namespace detail {

inline double link_logit(const Matrix& V, const FusionParams& fp, int i, int j) {
  double a = fp.beta0;
  auto vi = V.row(i), vj = V.row(j);
  for (int k = 0; k < fp.K(); ++k) a += fp.beta1[k] * vi[k] * vj[k];
  return a;
}

}  // namespace detail

// The minimized objective: link NLL + lambda * topic NLL + quadratic
// regularizers on V, psi^d, psi^w plus lambda_w * ||W||^2 for the (fixed
// during this step) representation weights.
inline LossParts total_loss(const HeteroGraph& g, const FusionParams& fp, const Matrix& psi_w,
                            const Matrix& psi_d, const SufficientStats& stats,
                            const PairSet& pairs, const TrainConfig& cfg,
                            double rep_weight_sq_norm = 0.0) {
  LossParts parts;
  for (auto [i, j] : pairs.positives)
    parts.links -= log_sigmoid(detail::link_logit(fp.V, fp, i, j));
  for (auto [i, j] : pairs.negatives)
    parts.links -= log_sigmoid(-detail::link_logit(fp.V, fp, i, j));

  // Log-probabilities are computed directly in log space (natural parameter
  // minus log-sum-exp); softmax probabilities underflow to exact zero when
  // kappa grows large, which would turn the NLL into +inf.
  auto row_lse = [](std::span<const double> row) {
    double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double x : row) s += std::exp(x - m);
    return m + std::log(s);
  };
  const int K = fp.K();
  double topic_nll = 0.0;
  std::vector<double> logits(K);
  for (int p = 0; p < g.n_papers(); ++p) {
    auto v = fp.V.row(p);
    for (int k = 0; k < K; ++k) logits[k] = fp.kappa * v[k];
    double lse = row_lse(logits);
    for (int k = 0; k < K; ++k) {
      double c = stats.n_pk(p, k) + stats.d_pk(p, k);
      if (c > 0.0) topic_nll -= c * (logits[k] - lse);
    }
  }
  for (std::size_t k = 0; k < psi_w.rows(); ++k) {
    double lse_w = row_lse(psi_w.row(k));
    double lse_d = row_lse(psi_d.row(k));
    for (std::size_t j = 0; j < psi_w.cols(); ++j)
      if (stats.n_kj(k, j) > 0.0) topic_nll -= stats.n_kj(k, j) * (psi_w(k, j) - lse_w);
    for (std::size_t i = 0; i < psi_d.cols(); ++i)
      if (stats.n_ki(k, i) > 0.0) topic_nll -= stats.n_ki(k, i) * (psi_d(k, i) - lse_d);
  }
  parts.topics = cfg.lambda * topic_nll;

  parts.reg = cfg.lambda_p * fp.V.squared_norm() + cfg.lambda_d * psi_d.squared_norm() +
              cfg.lambda_v * psi_w.squared_norm() + cfg.lambda_w * rep_weight_sq_norm;
  parts.total = parts.links + parts.topics + parts.reg;
  return parts;
}

struct ContinuousGrads {
  Matrix dV;
  double dkappa = 0.0;
  double dbeta0 = 0.0;
  std::vector<double> dbeta1;
  Matrix dpsi_w;
  Matrix dpsi_d;
};

// Exact gradient of total_loss w.r.t. the step-(1) variables {V, kappa,
// beta, psi^w, psi^d} for fixed z and representation weights.
inline ContinuousGrads grad_continuous(const HeteroGraph& g, const FusionParams& fp,
                                       const Matrix& psi_w, const Matrix& psi_d,
                                       const SufficientStats& stats, const PairSet& pairs,
                                       const TrainConfig& cfg) {
  const int K = fp.K();
  ContinuousGrads gr;
  gr.dV = Matrix(fp.V.rows(), K);
  gr.dbeta1.assign(K, 0.0);

  // Topic-fusion terms.
  for (int p = 0; p < g.n_papers(); ++p) {
    auto v = fp.V.row(p);
    auto theta = transform(v, fp.kappa);
    double total_count = 0.0;
    for (int k = 0; k < K; ++k) total_count += stats.n_pk(p, k) + stats.d_pk(p, k);
    for (int k = 0; k < K; ++k) {
      double resid = (stats.n_pk(p, k) + stats.d_pk(p, k)) - total_count * theta[k];
      gr.dV(p, k) += -cfg.lambda * fp.kappa * resid;
      gr.dkappa += -cfg.lambda * v[k] * resid;
    }
  }

  // Pairwise link terms.
  auto accumulate_pair = [&](int i, int j, double y) {
    double e = sigmoid(detail::link_logit(fp.V, fp, i, j)) - y;
    gr.dbeta0 += e;
    auto vi = fp.V.row(i), vj = fp.V.row(j);
    for (int k = 0; k < K; ++k) {
      gr.dbeta1[k] += e * vi[k] * vj[k];
      gr.dV(i, k) += e * fp.beta1[k] * vj[k];
      gr.dV(j, k) += e * fp.beta1[k] * vi[k];
    }
  };
  for (auto [i, j] : pairs.positives) accumulate_pair(i, j, 1.0);
  for (auto [i, j] : pairs.negatives) accumulate_pair(i, j, 0.0);

  // Regularizers.
  for (std::size_t idx = 0; idx < fp.V.size(); ++idx)
    gr.dV.data()[idx] += 2.0 * cfg.lambda_p * fp.V.data()[idx];
  gr.dpsi_w = grad_psi_w(stats, topic_dist(psi_w), psi_w, cfg.lambda, cfg.lambda_v);
  gr.dpsi_d = grad_psi_d(stats, topic_dist(psi_d), psi_d, cfg.lambda, cfg.lambda_d);
  return gr;
}

// ---------------------------------------------------------------------------
// Flattening for L-BFGS: [V | kappa | beta0 | beta1 | psi_w | psi_d].

namespace detail {

inline std::vector<double> flatten(const FusionParams& fp, const Matrix& psi_w,
                                   const Matrix& psi_d) {
  std::vector<double> x;
  x.reserve(fp.V.size() + 2 + fp.beta1.size() + psi_w.size() + psi_d.size());
  x.insert(x.end(), fp.V.data().begin(), fp.V.data().end());
  x.push_back(fp.kappa);
  x.push_back(fp.beta0);
  x.insert(x.end(), fp.beta1.begin(), fp.beta1.end());
  x.insert(x.end(), psi_w.data().begin(), psi_w.data().end());
  x.insert(x.end(), psi_d.data().begin(), psi_d.data().end());
  return x;
}

inline void unflatten(const std::vector<double>& x, FusionParams& fp, Matrix& psi_w,
                      Matrix& psi_d) {
  std::size_t off = 0;
  std::copy(x.begin(), x.begin() + fp.V.size(), fp.V.data().begin());
  off += fp.V.size();
  fp.kappa = x[off++];
  fp.beta0 = x[off++];
  std::copy(x.begin() + off, x.begin() + off + fp.beta1.size(), fp.beta1.begin());
  off += fp.beta1.size();
  std::copy(x.begin() + off, x.begin() + off + psi_w.size(), psi_w.data().begin());
  off += psi_w.size();
  std::copy(x.begin() + off, x.begin() + off + psi_d.size(), psi_d.data().begin());
}

}  // namespace detail

// Step (1): L-BFGS over {V, kappa, beta, psi^w, psi^d} with z and the
// representation weights fixed. Returns (loss before, loss after).
inline std::pair<double, double> optimize_continuous(const HeteroGraph& g, FusionParams& fp,
                                                     Matrix& psi_w, Matrix& psi_d,
                                                     const SufficientStats& stats,
                                                     const PairSet& pairs,
                                                     const TrainConfig& cfg,
                                                     double rep_weight_sq_norm) {
  FusionParams work = fp;
  Matrix w_psi_w = psi_w, w_psi_d = psi_d;
  auto objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
    detail::unflatten(x, work, w_psi_w, w_psi_d);
    if (work.kappa < 0.0) {
      // Infeasible trial point; the line search backs off on non-finite loss.
      std::fill(grad.begin(), grad.end(), 0.0);
      return std::numeric_limits<double>::infinity();
    }
    double loss =
        total_loss(g, work, w_psi_w, w_psi_d, stats, pairs, cfg, rep_weight_sq_norm).total;
    ContinuousGrads gr = grad_continuous(g, work, w_psi_w, w_psi_d, stats, pairs, cfg);
    grad = detail::flatten({gr.dV, gr.dkappa, gr.dbeta0, gr.dbeta1}, gr.dpsi_w, gr.dpsi_d);
    return loss;
  };
  LbfgsOptions opts;
  opts.history = cfg.lbfgs_history;
  opts.max_iters = cfg.lbfgs_iters_per_step;
  opts.tol = 1e-8;
  std::vector<double> x0 = detail::flatten(fp, psi_w, psi_d);
  std::vector<double> g0(x0.size());
  double before = objective(x0, g0);
  LbfgsResult res = lbfgs_minimize(objective, std::move(x0), opts);
  detail::unflatten(res.x, fp, psi_w, psi_d);
  return {before, res.loss};
}

// ---------------------------------------------------------------------------
// Representation state (Omega): the SDAE, the structure tables and the fixed
// skip-gram pair sample used during joint fine-tuning.

struct RepresentationState {
  SdaeParams sdae;
  std::vector<std::vector<double>> bow;  // max-rescaled SDAE inputs
  StructEmbedding structure;
  std::vector<std::pair<int, int>> finetune_pairs;

  double weight_squared_norm() const {
    return sdae.weight_squared_norm() + structure.S.squared_norm() +
           structure.context.squared_norm();
  }
};

// Step (2a): one epoch of gradient descent on the native representation
// losses plus mu * ||[t_p; s_p] - v_p||^2 for fixed V, then v_p <- [t_p; s_p].
// Returns the alignment residual measured before the reset.
inline double finetune_representation(const HeteroGraph& g, RepresentationState& rep,
                                      FusionParams& fp, const TrainConfig& cfg, Rng& rng) {
  const int half = cfg.K / 2;

  // Text side: minibatch GD through the autoencoder with the alignment
  // penalty injected at the code layer.
  {
    const std::size_t n = rep.bow.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      SdaeGrads grads = SdaeGrads::zeros_like(rep.sdae);
      std::size_t count = 0;
      for (std::size_t i = start; i < std::min(n, start + cfg.batch_size); ++i) {
        std::size_t p = order[i];
        // Fine-tuning runs on clean inputs: the alignment target is the clean
        // code, and corrupted codes are systematically smaller, so corruption
        // here would inflate the encoder scale a little every outer iteration.
        std::vector<double> target(fp.V.row(p).begin(), fp.V.row(p).begin() + half);
        double loss =
            sdae_backprop_example(rep.bow[p], rep.bow[p], rep.sdae, grads, cfg.mu, target);
        if (!std::isfinite(loss))
          throw std::runtime_error("finetune_representation: non-finite text loss");
        ++count;
      }
      // Clip the batch gradient: the alignment targets move every outer
      // iteration and an unclipped overshoot compounds into divergence.
      double gsq = 0.0;
      for (const auto* gl : {&grads.encoder, &grads.decoder})
        for (const auto& l : *gl) {
          gsq += l.W.squared_norm();
          for (double b : l.b) gsq += b * b;
        }
      const double max_norm = 10.0 * static_cast<double>(count);
      const double clip = gsq > max_norm * max_norm ? max_norm / std::sqrt(gsq) : 1.0;
      const double step = clip * cfg.lr / static_cast<double>(count);
      auto apply = [&](std::vector<SdaeLayer>& pl, const std::vector<SdaeLayer>& gl) {
        for (std::size_t li = 0; li < pl.size(); ++li) {
          for (std::size_t j = 0; j < pl[li].W.size(); ++j)
            pl[li].W.data()[j] -=
                step * (gl[li].W.data()[j] + 2.0 * cfg.lambda_w * pl[li].W.data()[j]);
          for (std::size_t j = 0; j < pl[li].b.size(); ++j) pl[li].b[j] -= step * gl[li].b[j];
        }
      };
      apply(rep.sdae.encoder, grads.encoder);
      apply(rep.sdae.decoder, grads.decoder);
    }
  }

  // Structure side: one pass over the fixed skip-gram pair sample, then an
  // alignment step pulling s_p toward the back half of v_p.
  if (!rep.structure.degenerate && !rep.finetune_pairs.empty()) {
    auto& S = rep.structure.S;
    auto& C = rep.structure.context;
    const auto& nd = rep.structure.neg_dist;
    std::vector<double> cum(nd.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < nd.size(); ++i) {
      acc += nd[i];
      cum[i] = acc;
    }
    const std::size_t dim = S.cols();
    std::vector<double> grad_center(dim);
    for (auto [i, j] : rep.finetune_pairs) {
      auto si = S.row(i);
      std::fill(grad_center.begin(), grad_center.end(), 0.0);
      auto cj = C.row(j);
      double score = dot(si, cj);
      double g1 = 1.0 - sigmoid(score);
      for (std::size_t d = 0; d < dim; ++d) {
        grad_center[d] += g1 * cj[d];
        cj[d] += cfg.lr * g1 * si[d];
      }
      for (int neg = 0; neg < rep.structure.config.num_negatives; ++neg) {
        double r = rng.next_double() * acc;
        int x = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
        if (x == i || x == j) continue;
        auto cx = C.row(x);
        double s2 = dot(si, cx);
        double g0 = -sigmoid(s2);
        for (std::size_t d = 0; d < dim; ++d) {
          grad_center[d] += g0 * cx[d];
          cx[d] += cfg.lr * g0 * si[d];
        }
      }
      for (std::size_t d = 0; d < dim; ++d) si[d] += cfg.lr * grad_center[d];
    }
    for (int p = 0; p < g.n_papers(); ++p) {
      auto s = S.row(p);
      auto v = fp.V.row(p);
      for (int d = 0; d < half; ++d)
        s[d] -= cfg.lr * 2.0 * cfg.mu * (s[d] - v[half + d]);
    }
  }

  // Measure alignment residual, then reset v_p to [t_p; s_p].
  double residual = 0.0;
  for (int p = 0; p < g.n_papers(); ++p) {
    auto t = encode(rep.bow[p], rep.sdae);
    auto v = fp.V.row(p);
    for (int k = 0; k < half; ++k) {
      double dt = t[k] - v[k];
      double ds = rep.structure.S(p, k) - v[half + k];
      residual += dt * dt + ds * ds;
    }
    for (int k = 0; k < half; ++k) {
      v[k] = t[k];
      v[half + k] = rep.structure.S(p, k);
    }
  }
  return residual;
}

// ---------------------------------------------------------------------------
// Full alternating training.

struct TraceRow {
  int outer_iter = 0;
  double loss_total = 0.0;
  double loss_links = 0.0;
  double loss_topics = 0.0;
  double loss_reg = 0.0;
  double kappa = 0.0;
  double step1_before = 0.0;
  double step1_after = 0.0;
  double alignment_residual = 0.0;
};

struct TrainOutput {
  FusionParams fusion;
  TopicState topics;
  RepresentationState rep;
  std::vector<TraceRow> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline RepresentationState pretrain_representation(const HeteroGraph& g, int vocab_size,
                                                   const TrainConfig& cfg) {
  if (cfg.K % 2 != 0) throw std::invalid_argument("train: K must be even");
  RepresentationState rep;
  rep.bow = bow_rows(g, vocab_size);

  SdaePretrainConfig scfg;
  scfg.hidden_widths = {std::min<std::size_t>(cfg.sdae_hidden, static_cast<std::size_t>(vocab_size))};
  scfg.code_dim = static_cast<std::size_t>(cfg.K / 2);
  scfg.epochs = cfg.sdae_epochs;
  scfg.lr = cfg.lr;
  scfg.batch_size = cfg.batch_size;
  scfg.weight_decay = cfg.lambda_w;
  scfg.seed = cfg.seed * 2654435761ULL + 1;
  auto sdae_out = sdae_pretrain(rep.bow, scfg);
  rep.sdae = std::move(sdae_out.params);

  WalkConfig wcfg = cfg.walk;
  wcfg.dim = static_cast<std::size_t>(cfg.K / 2);
  rep.structure = train_structure_embeddings(g, wcfg, cfg.seed * 2654435761ULL + 2);

  // Fixed deterministic pair sample reused by every fine-tune epoch.
  {
    Rng rng(cfg.seed * 2654435761ULL + 3);
    auto walks = generate_walks(g, wcfg, rng.next_u64());
    std::vector<std::pair<int, int>> all;
    for (const auto& walk : walks)
      for (std::size_t c = 0; c + 1 < walk.size(); ++c)
        for (int off = 1; off <= wcfg.window && c + off < walk.size(); ++off)
          if (walk[c] != walk[c + off]) all.emplace_back(walk[c], walk[c + off]);
    if (all.size() > cfg.finetune_pair_sample) {
      std::vector<std::pair<int, int>> sample;
      for (std::size_t i = 0; i < cfg.finetune_pair_sample; ++i)
        sample.push_back(all[rng.below(all.size())]);
      rep.finetune_pairs = std::move(sample);
    } else {
      rep.finetune_pairs = std::move(all);
    }
  }
  return rep;
}

// Alternating optimization: step (1) L-BFGS over the continuous parameters,
// step (2a) representation fine-tuning, steps (2b)/(2c) Gibbs sweeps, until
// the relative loss change drops below tol or outer_iters is reached.
inline TrainOutput train_stoprec(const HeteroGraph& g, int vocab_size, const TrainConfig& cfg) {
  TrainOutput out;
  out.rep = pretrain_representation(g, vocab_size, cfg);

  const int K = cfg.K;
  out.fusion.V = Matrix(g.n_papers(), K);
  for (int p = 0; p < g.n_papers(); ++p) {
    auto t = encode(out.rep.bow[p], out.rep.sdae);
    for (int k = 0; k < K / 2; ++k) {
      out.fusion.V(p, k) = t[k];
      out.fusion.V(p, K / 2 + k) = out.rep.structure.S(p, k);
    }
  }
  out.fusion.kappa = cfg.kappa_init;
  out.fusion.beta0 = 0.0;
  out.fusion.beta1.assign(K, 0.0);

  Rng rng(cfg.seed);
  out.topics.psi_w = Matrix(K, vocab_size);
  out.topics.psi_d = Matrix(K, g.n_datasets());
  for (double& v : out.topics.psi_w.data()) v = rng.uniform(-0.01, 0.01);
  for (double& v : out.topics.psi_d.data()) v = rng.uniform(-0.01, 0.01);
  // Seed the assignments from the pretrained embeddings' topic proportions;
  // uniform initial counts would pull kappa to zero before any structure
  // forms.
  init_assignments(out.topics, g, K, rng);
  for (int p = 0; p < g.n_papers(); ++p) {
    auto theta = transform(out.fusion.V.row(p), out.fusion.kappa);
    for (auto& z : out.topics.z_w[p]) z = static_cast<std::uint16_t>(rng.categorical(theta));
    for (auto& z : out.topics.z_d[p]) z = static_cast<std::uint16_t>(rng.categorical(theta));
  }
  SufficientStats stats = recount_stats(g, out.topics, K);

  PairSet pairs = PairSet::from_graph(g, cfg.seed * 1000003ULL);
  double rep_norm = out.rep.weight_squared_norm();
  out.initial_loss =
      total_loss(g, out.fusion, out.topics.psi_w, out.topics.psi_d, stats, pairs, cfg, rep_norm)
          .total;
  double prev_total = out.initial_loss;
  int plateau = 0;

  for (int iter = 1; iter <= cfg.outer_iters; ++iter) {
    pairs.negatives = sample_negative_pairs(g, cfg.seed * 1000003ULL + iter);
    rep_norm = out.rep.weight_squared_norm();

    auto [before, after] =
        optimize_continuous(g, out.fusion, out.topics.psi_w, out.topics.psi_d, stats, pairs, cfg,
                            rep_norm);

    double residual = finetune_representation(g, out.rep, out.fusion, cfg, rng);

    Matrix theta = theta_matrix(out.fusion.V, out.fusion.kappa);
    Matrix phi_w = topic_dist(out.topics.psi_w);
    Matrix phi_d = topic_dist(out.topics.psi_d);
    gibbs_sweep_words(g, theta, phi_w, out.topics, stats, rng);
    gibbs_sweep_datasets(g, theta, phi_d, out.topics, stats, rng);

    rep_norm = out.rep.weight_squared_norm();
    LossParts parts = total_loss(g, out.fusion, out.topics.psi_w, out.topics.psi_d, stats, pairs,
                                 cfg, rep_norm);
    TraceRow row;
    row.outer_iter = iter;
    row.loss_total = parts.total;
    row.loss_links = parts.links;
    row.loss_topics = parts.topics;
    row.loss_reg = parts.reg;
    row.kappa = out.fusion.kappa;
    row.step1_before = before;
    row.step1_after = after;
    row.alignment_residual = residual;
    out.trace.push_back(row);

    if (!std::isfinite(parts.total) || parts.total > 10.0 * std::abs(out.initial_loss))
      throw std::runtime_error("train: divergence at outer iteration " + std::to_string(iter));
    // Stop only after a sustained plateau; single quiet iterations are common
    // early on while the assignments are still near-uniform.
    if (iter > 1 &&
        std::abs(parts.total - prev_total) < cfg.tol * std::max(1.0, std::abs(prev_total)))
      ++plateau;
    else
      plateau = 0;
    if (plateau >= cfg.patience) break;
    prev_total = parts.total;
  }
  out.final_loss = out.trace.empty() ? out.initial_loss : out.trace.back().loss_total;
  return out;
}

}  // namespace stoprec

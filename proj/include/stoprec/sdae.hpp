#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoprec/common.hpp"

namespace stoprec {

struct SdaeLayer {
  Matrix W;                // out x in
  std::vector<double> b;   // out
};

// Stacked denoising autoencoder over bag-of-words rows. Encoder layers chain
// |V_w| -> ... -> K/2; decoder mirrors them back. LeakyReLU at every layer.
struct SdaeParams {
  std::vector<SdaeLayer> encoder;
  std::vector<SdaeLayer> decoder;
  double corruption_rate = 0.3;
  double weight_decay = 0.01;
  double leaky_slope = 0.01;

  std::size_t input_dim() const { return encoder.front().W.cols(); }
  std::size_t code_dim() const { return encoder.back().W.rows(); }

  double weight_squared_norm() const {
    double s = 0.0;
    for (const auto& l : encoder) s += l.W.squared_norm();
    for (const auto& l : decoder) s += l.W.squared_norm();
    return s;
  }
};

struct SdaeGrads {
  std::vector<SdaeLayer> encoder;
  std::vector<SdaeLayer> decoder;

  static SdaeGrads zeros_like(const SdaeParams& p) {
    SdaeGrads g;
    auto zero = [](const std::vector<SdaeLayer>& ls) {
      std::vector<SdaeLayer> out;
      for (const auto& l : ls)
        out.push_back({Matrix(l.W.rows(), l.W.cols()), std::vector<double>(l.b.size(), 0.0)});
      return out;
    };
    g.encoder = zero(p.encoder);
    g.decoder = zero(p.decoder);
    return g;
  }
};

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

// Zero each coordinate independently with probability `rate`; survivors are
// bit-equal to the input.
inline std::vector<double> corrupt(std::span<const double> x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("corrupt: rate must be in [0, 1)");
  std::vector<double> out(x.begin(), x.end());
  if (rate > 0.0)
    for (double& v : out)
      if (rng.bernoulli(rate)) v = 0.0;
  return out;
}

namespace detail {

inline std::vector<double> apply_layer(const SdaeLayer& l, std::span<const double> in,
                                       double slope) {
  if (in.size() != l.W.cols())
    throw std::invalid_argument("sdae: shape mismatch: input " + std::to_string(in.size()) +
                                " vs layer expecting " + std::to_string(l.W.cols()));
  std::vector<double> out(l.W.rows());
  for (std::size_t r = 0; r < l.W.rows(); ++r)
    out[r] = leaky_relu(dot(l.W.row(r), in) + l.b[r], slope);
  return out;
}

}  // namespace detail

inline std::vector<double> encode(std::span<const double> x, const SdaeParams& p) {
  std::vector<double> h(x.begin(), x.end());
  for (const auto& l : p.encoder) h = detail::apply_layer(l, h, p.leaky_slope);
  return h;
}

inline std::vector<double> decode(std::span<const double> t, const SdaeParams& p) {
  std::vector<double> h(t.begin(), t.end());
  for (const auto& l : p.decoder) h = detail::apply_layer(l, h, p.leaky_slope);
  return h;
}

struct SdaeBatch {
  std::vector<std::vector<double>> x;        // clean targets
  std::vector<std::vector<double>> x_tilde;  // corrupted inputs
};

inline SdaeBatch make_corrupted_batch(const std::vector<std::vector<double>>& rows, double rate,
                                      Rng& rng) {
  SdaeBatch b;
  for (const auto& r : rows) {
    b.x.push_back(r);
    b.x_tilde.push_back(corrupt(r, rate, rng));
  }
  return b;
}

// Reconstruction loss sum_i ||x_i - x_hat_i||^2 + lambda * ||W||^2.
inline double sdae_loss(const SdaeBatch& batch, const SdaeParams& p) {
  if (batch.x.empty()) throw std::invalid_argument("sdae_loss: empty batch");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.x.size(); ++i) {
    auto xhat = decode(encode(batch.x_tilde[i], p), p);
    for (std::size_t j = 0; j < xhat.size(); ++j) {
      double d = batch.x[i][j] - xhat[j];
      loss += d * d;
    }
  }
  return loss + p.weight_decay * p.weight_squared_norm();
}

// Backpropagation for one example. When align_mu > 0 an extra penalty
// align_mu * ||t - align_target||^2 on the code is included (used during
// joint fine-tuning to pull [t; s] toward the fused embedding v).
// Accumulates into `grads`, returns this example's loss terms (without the
// weight-decay part, which is per-call).
inline double sdae_backprop_example(std::span<const double> x_target,
                                    std::span<const double> x_tilde, const SdaeParams& p,
                                    SdaeGrads& grads, double align_mu = 0.0,
                                    std::span<const double> align_target = {}) {
  const double slope = p.leaky_slope;
  const std::size_t n_enc = p.encoder.size();
  const std::size_t n_all = n_enc + p.decoder.size();
  auto layer = [&](std::size_t i) -> const SdaeLayer& {
    return i < n_enc ? p.encoder[i] : p.decoder[i - n_enc];
  };
  auto grad_layer = [&](std::size_t i) -> SdaeLayer& {
    return i < n_enc ? grads.encoder[i] : grads.decoder[i - n_enc];
  };

  // Forward pass, keeping pre-activations.
  std::vector<std::vector<double>> acts(n_all + 1);
  std::vector<std::vector<double>> pre(n_all);
  acts[0].assign(x_tilde.begin(), x_tilde.end());
  for (std::size_t i = 0; i < n_all; ++i) {
    const auto& l = layer(i);
    if (acts[i].size() != l.W.cols())
      throw std::invalid_argument("sdae_backprop_example: shape mismatch at layer " +
                                  std::to_string(i));
    pre[i].resize(l.W.rows());
    acts[i + 1].resize(l.W.rows());
    for (std::size_t r = 0; r < l.W.rows(); ++r) {
      double z = dot(l.W.row(r), acts[i]) + l.b[r];
      pre[i][r] = z;
      acts[i + 1][r] = leaky_relu(z, slope);
    }
  }

  double loss = 0.0;
  std::vector<double> delta(acts[n_all].size());
  for (std::size_t j = 0; j < delta.size(); ++j) {
    double d = acts[n_all][j] - x_target[j];
    loss += d * d;
    delta[j] = 2.0 * d * leaky_relu_grad(pre[n_all - 1][j], slope);
  }
  if (align_mu > 0.0) {
    const auto& code = acts[n_enc];
    for (std::size_t j = 0; j < code.size(); ++j) {
      double d = code[j] - align_target[j];
      loss += align_mu * d * d;
    }
  }

  for (std::size_t i = n_all; i-- > 0;) {
    auto& gl = grad_layer(i);
    const auto& l = layer(i);
    for (std::size_t r = 0; r < l.W.rows(); ++r) {
      gl.b[r] += delta[r];
      for (std::size_t c = 0; c < l.W.cols(); ++c) gl.W(r, c) += delta[r] * acts[i][c];
    }
    if (i == 0) break;
    std::vector<double> prev(l.W.cols(), 0.0);
    for (std::size_t r = 0; r < l.W.rows(); ++r)
      for (std::size_t c = 0; c < l.W.cols(); ++c) prev[c] += l.W(r, c) * delta[r];
    // Alignment penalty enters at the code layer.
    if (i == n_enc && align_mu > 0.0)
      for (std::size_t c = 0; c < prev.size(); ++c)
        prev[c] += 2.0 * align_mu * (acts[n_enc][c] - align_target[c]);
    for (std::size_t c = 0; c < prev.size(); ++c)
      prev[c] *= leaky_relu_grad(pre[i - 1][c], slope);
    delta = std::move(prev);
  }
  return loss;
}

// Batch loss + gradient, including the weight-decay term.
inline double sdae_loss_and_grad(const SdaeBatch& batch, const SdaeParams& p, SdaeGrads& grads) {
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.x.size(); ++i)
    loss += sdae_backprop_example(batch.x[i], batch.x_tilde[i], p, grads);
  loss += p.weight_decay * p.weight_squared_norm();
  auto add_decay = [&](std::vector<SdaeLayer>& gl, const std::vector<SdaeLayer>& pl) {
    for (std::size_t i = 0; i < gl.size(); ++i)
      for (std::size_t j = 0; j < gl[i].W.size(); ++j)
        gl[i].W.data()[j] += 2.0 * p.weight_decay * pl[i].W.data()[j];
  };
  add_decay(grads.encoder, p.encoder);
  add_decay(grads.decoder, p.decoder);
  return loss;
}

struct SdaePretrainConfig {
  std::vector<std::size_t> hidden_widths = {256};  // final width K/2 appended by caller
  std::size_t code_dim = 8;                        // K/2
  int epochs = 20;
  double lr = 0.01;
  std::size_t batch_size = 64;
  double corruption_rate = 0.3;
  double weight_decay = 0.01;
  double leaky_slope = 0.01;
  std::uint64_t seed = 1;
};

struct SdaePretrainResult {
  SdaeParams params;
  Matrix codes;                    // n_rows x code_dim, on uncorrupted inputs
  std::vector<double> epoch_loss;  // mean per-sample reconstruction loss per epoch
};

namespace detail {

inline SdaeLayer init_layer(std::size_t out, std::size_t in, Rng& rng) {
  SdaeLayer l{Matrix(out, in), std::vector<double>(out, 0.0)};
  double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.W.data()) w = rng.uniform(-bound, bound);
  return l;
}

}  // namespace detail

// Greedy layer-wise pretraining: each denoising autoencoder level is trained
// on the (uncorrupted) codes of the previous one, then the stacks are
// assembled. Input rows are expected to be max-rescaled bag-of-words vectors.
inline SdaePretrainResult sdae_pretrain(const std::vector<std::vector<double>>& rows,
                                        const SdaePretrainConfig& cfg) {
  if (rows.empty()) throw std::invalid_argument("sdae_pretrain: empty input");
  if (cfg.epochs < 1) throw std::invalid_argument("sdae_pretrain: epochs must be >= 1");
  if (cfg.code_dim == 0) throw std::invalid_argument("sdae_pretrain: code_dim must be >= 1");
  std::vector<std::size_t> widths = cfg.hidden_widths;
  widths.push_back(cfg.code_dim);
  if (widths.empty()) throw std::invalid_argument("sdae_pretrain: no hidden layers requested");

  Rng rng(cfg.seed);
  SdaePretrainResult result;
  result.params.corruption_rate = cfg.corruption_rate;
  result.params.weight_decay = cfg.weight_decay;
  result.params.leaky_slope = cfg.leaky_slope;

  std::vector<std::vector<double>> level_input = rows;
  std::vector<SdaeLayer> decoder_rev;

  for (std::size_t level = 0; level < widths.size(); ++level) {
    const std::size_t in_dim = level_input.front().size();
    const std::size_t out_dim = widths[level];
    SdaeParams dae;
    dae.corruption_rate = cfg.corruption_rate;
    dae.weight_decay = cfg.weight_decay;
    dae.leaky_slope = cfg.leaky_slope;
    dae.encoder.push_back(detail::init_layer(out_dim, in_dim, rng));
    dae.decoder.push_back(detail::init_layer(in_dim, out_dim, rng));

    const std::size_t n = level_input.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Deterministic Fisher-Yates shuffle.
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        SdaeBatch batch;
        for (std::size_t i = start; i < std::min(n, start + cfg.batch_size); ++i) {
          batch.x.push_back(level_input[order[i]]);
          batch.x_tilde.push_back(corrupt(level_input[order[i]], cfg.corruption_rate, rng));
        }
        SdaeGrads grads = SdaeGrads::zeros_like(dae);
        double bl = sdae_loss_and_grad(batch, dae, grads);
        if (!std::isfinite(bl))
          throw std::runtime_error("sdae_pretrain: non-finite loss at level " +
                                   std::to_string(level) + " epoch " + std::to_string(epoch));
        epoch_loss += bl;
        const double step = cfg.lr / static_cast<double>(batch.x.size());
        auto apply = [&](std::vector<SdaeLayer>& pl, const std::vector<SdaeLayer>& gl) {
          for (std::size_t li = 0; li < pl.size(); ++li) {
            for (std::size_t j = 0; j < pl[li].W.size(); ++j)
              pl[li].W.data()[j] -= step * gl[li].W.data()[j];
            for (std::size_t j = 0; j < pl[li].b.size(); ++j)
              pl[li].b[j] -= step * gl[li].b[j];
          }
        };
        apply(dae.encoder, grads.encoder);
        apply(dae.decoder, grads.decoder);
      }
      if (level == widths.size() - 1)
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }

    result.params.encoder.push_back(dae.encoder.front());
    decoder_rev.push_back(dae.decoder.front());
    std::vector<std::vector<double>> next;
    for (const auto& r : level_input) next.push_back(encode(r, dae));
    level_input = std::move(next);
  }

  for (auto it = decoder_rev.rbegin(); it != decoder_rev.rend(); ++it)
    result.params.decoder.push_back(*it);

  result.codes = Matrix(rows.size(), cfg.code_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto t = encode(rows[i], result.params);
    for (std::size_t j = 0; j < t.size(); ++j) result.codes(i, j) = t[j];
  }
  return result;
}

// Max-rescaled bag-of-words rows for a graph (the SDAE input).
template <typename Graph>
inline std::vector<std::vector<double>> bow_rows(const Graph& g, int vocab_size) {
  std::vector<std::vector<double>> rows;
  for (int p = 0; p < g.n_papers(); ++p) {
    std::vector<double> row(vocab_size, 0.0);
    for (auto [w, c] : g.bow(p)) row[w] = static_cast<double>(c);
    double mx = 0.0;
    for (double v : row) mx = std::max(mx, v);
    if (mx > 0.0)
      for (double& v : row) v /= mx;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace stoprec

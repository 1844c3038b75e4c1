#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "stoprec/sdae.hpp"

using namespace stoprec;

namespace {

SdaeParams tiny_params(std::size_t in, std::size_t hidden, std::size_t code, std::uint64_t seed) {
  Rng rng(seed);
  SdaeParams p;
  auto layer = [&](std::size_t out_d, std::size_t in_d) {
    SdaeLayer l{Matrix(out_d, in_d), std::vector<double>(out_d, 0.0)};
    for (double& w : l.W.data()) w = rng.uniform(-0.3, 0.3);
    for (double& b : l.b) b = rng.uniform(-0.1, 0.1);
    return l;
  };
  p.encoder = {layer(hidden, in), layer(code, hidden)};
  p.decoder = {layer(hidden, code), layer(in, hidden)};
  return p;
}

}  // namespace

TEST_CASE("corrupt: identity at rate 0, determinism, binomial zero count") {
  Rng rng(1);
  std::vector<double> x(1000, 5.0);
  CHECK(corrupt(x, 0.0, rng) == x);

  Rng r1(42), r2(42);
  auto a = corrupt(x, 0.3, r1);
  auto b = corrupt(x, 0.3, r2);
  CHECK(a == b);

  int zeros = 0;
  for (double v : a)
    if (v == 0.0) ++zeros;
  CHECK(std::abs(zeros - 300) <= 43);  // 3 sigma of Binomial(1000, 0.3)

  CHECK_THROWS_AS(corrupt(x, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(x, -0.1, rng), std::invalid_argument);
}

TEST_CASE("encode: zero map and positive identity") {
  SdaeParams p;
  p.encoder = {{Matrix(2, 3, 0.0), {0.0, 0.0}}};
  auto t = encode(std::vector<double>{1.0, 2.0, 3.0}, p);
  CHECK(t == std::vector<double>{0.0, 0.0});

  SdaeParams id;
  id.encoder = {{Matrix(2, 2, 0.0), {0.0, 0.0}}};
  id.encoder[0].W(0, 0) = 1.0;
  id.encoder[0].W(1, 1) = 1.0;
  std::vector<double> x{0.5, 2.0};
  CHECK(encode(x, id) == x);

  CHECK_THROWS_AS(encode(std::vector<double>{1.0}, id), std::invalid_argument);
}

TEST_CASE("encode matches a straight-line reference recomputation") {
  auto p = tiny_params(4, 3, 2, 9);
  std::vector<double> x{0.2, -0.4, 0.9, 0.1};
  auto got = encode(x, p);

  std::vector<double> h = x;
  for (const auto& l : p.encoder) {
    std::vector<double> nxt(l.W.rows());
    for (std::size_t r = 0; r < l.W.rows(); ++r) {
      double z = l.b[r];
      for (std::size_t c = 0; c < l.W.cols(); ++c) z += l.W(r, c) * h[c];
      nxt[r] = z >= 0 ? z : p.leaky_slope * z;
    }
    h = nxt;
  }
  REQUIRE(got.size() == h.size());
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(got[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("sdae_loss: perfect reconstruction and simple squared norm") {
  SdaeParams id;
  id.encoder = {{Matrix(2, 2, 0.0), {0.0, 0.0}}};
  id.decoder = {{Matrix(2, 2, 0.0), {0.0, 0.0}}};
  id.encoder[0].W(0, 0) = id.encoder[0].W(1, 1) = 1.0;
  id.decoder[0].W(0, 0) = id.decoder[0].W(1, 1) = 1.0;
  id.weight_decay = 0.0;
  SdaeBatch b;
  b.x = {{1.0, 0.5}};
  b.x_tilde = {{1.0, 0.5}};
  CHECK(sdae_loss(b, id) == doctest::Approx(0.0));

  // x = [1, 0], x_hat = [0, 0] via zero weights.
  SdaeParams zero;
  zero.encoder = {{Matrix(2, 2, 0.0), {0.0, 0.0}}};
  zero.decoder = {{Matrix(2, 2, 0.0), {0.0, 0.0}}};
  zero.weight_decay = 0.0;
  SdaeBatch b2;
  b2.x = {{1.0, 0.0}};
  b2.x_tilde = {{1.0, 0.0}};
  CHECK(sdae_loss(b2, zero) == doctest::Approx(1.0));

  CHECK_THROWS_AS(sdae_loss(SdaeBatch{}, id), std::invalid_argument);
}

TEST_CASE("sdae gradients match central finite differences") {
  auto p = tiny_params(5, 4, 2, 17);
  p.weight_decay = 0.01;
  Rng rng(3);
  SdaeBatch batch;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    batch.x.push_back(x);
    batch.x_tilde.push_back(corrupt(x, 0.3, rng));
  }
  SdaeGrads grads = SdaeGrads::zeros_like(p);
  sdae_loss_and_grad(batch, p, grads);

  const double h = 1e-5;
  double max_rel = 0.0;
  auto check_layers = [&](std::vector<SdaeLayer>& pl, const std::vector<SdaeLayer>& gl) {
    for (std::size_t li = 0; li < pl.size(); ++li)
      for (std::size_t j = 0; j < pl[li].W.size(); ++j) {
        double orig = pl[li].W.data()[j];
        pl[li].W.data()[j] = orig + h;
        double up = sdae_loss(batch, p);
        pl[li].W.data()[j] = orig - h;
        double dn = sdae_loss(batch, p);
        pl[li].W.data()[j] = orig;
        double fd = (up - dn) / (2.0 * h);
        double rel = std::abs(gl[li].W.data()[j] - fd) / std::max(1.0, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
  };
  check_layers(p.encoder, grads.encoder);
  check_layers(p.decoder, grads.decoder);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("alignment penalty gradient matches finite differences") {
  auto p = tiny_params(4, 3, 2, 23);
  p.weight_decay = 0.0;
  std::vector<double> x{0.4, 0.1, 0.8, 0.3};
  std::vector<double> target{0.2, -0.1};
  const double mu = 2.5;

  SdaeGrads grads = SdaeGrads::zeros_like(p);
  sdae_backprop_example(x, x, p, grads, mu, target);

  auto loss_at = [&]() {
    auto code = encode(x, p);
    auto xhat = decode(code, p);
    double l = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) l += (x[j] - xhat[j]) * (x[j] - xhat[j]);
    for (std::size_t j = 0; j < code.size(); ++j)
      l += mu * (code[j] - target[j]) * (code[j] - target[j]);
    return l;
  };
  const double h = 1e-6;
  double max_rel = 0.0;
  auto check_layers = [&](std::vector<SdaeLayer>& pl, const std::vector<SdaeLayer>& gl) {
    for (std::size_t li = 0; li < pl.size(); ++li)
      for (std::size_t j = 0; j < pl[li].W.size(); ++j) {
        double orig = pl[li].W.data()[j];
        pl[li].W.data()[j] = orig + h;
        double up = loss_at();
        pl[li].W.data()[j] = orig - h;
        double dn = loss_at();
        pl[li].W.data()[j] = orig;
        double fd = (up - dn) / (2.0 * h);
        double rel = std::abs(gl[li].W.data()[j] - fd) / std::max(1.0, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
  };
  check_layers(p.encoder, grads.encoder);
  check_layers(p.decoder, grads.decoder);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("sdae_pretrain: loss curve decreases and runs are deterministic") {
  Rng rng(11);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> r(20, 0.0);
    for (int j = 0; j < 6; ++j) r[rng.below(20)] = rng.uniform(0.2, 1.0);
    rows.push_back(r);
  }
  SdaePretrainConfig cfg;
  cfg.hidden_widths = {8};
  cfg.code_dim = 4;
  cfg.epochs = 20;
  cfg.seed = 5;
  auto a = sdae_pretrain(rows, cfg);
  REQUIRE(a.epoch_loss.size() == 20);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  auto b = sdae_pretrain(rows, cfg);
  CHECK(a.codes == b.codes);
  for (std::size_t i = 0; i < a.params.encoder.size(); ++i)
    CHECK(a.params.encoder[i].W == b.params.encoder[i].W);
}

TEST_CASE("sdae_pretrain configuration errors") {
  std::vector<std::vector<double>> rows{{0.1, 0.2}};
  SdaePretrainConfig cfg;
  cfg.code_dim = 0;
  CHECK_THROWS_AS(sdae_pretrain(rows, cfg), std::invalid_argument);
  SdaePretrainConfig cfg2;
  CHECK_THROWS_AS(sdae_pretrain({}, cfg2), std::invalid_argument);
}

TEST_CASE("bow_rows are max-rescaled") {
  auto [g, vocab] = fixtures::toy_graph();
  auto rows = bow_rows(g, vocab.size());
  REQUIRE(static_cast<int>(rows.size()) == g.n_papers());
  for (int p = 0; p < g.n_papers(); ++p) {
    double mx = 0.0;
    for (double v : rows[p]) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      mx = std::max(mx, v);
    }
    if (!g.tokens[p].empty()) CHECK(mx == doctest::Approx(1.0));
  }
}

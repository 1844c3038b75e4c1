#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "stoprec/model_io.hpp"
#include "stoprec/tensor_io.hpp"

using namespace stoprec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor round-trip preserves name, shape and payload") {
  auto dir = fixtures::fresh_dir("tensor_rt");
  TensorData t;
  t.name = "example";
  t.dims = {2, 3};
  t.f32 = {1.5f, -2.0f, 0.0f, 3.25f, 1e-7f, -0.5f};
  write_tensor((dir / "t.tensor").string(), t);
  auto back = read_tensor((dir / "t.tensor").string());
  CHECK(back.name == t.name);
  CHECK(back.dims == t.dims);
  CHECK(back.f32 == t.f32);
  CHECK(back.dtype == TensorDtype::F32);
}

TEST_CASE("u16 tensors round-trip") {
  auto dir = fixtures::fresh_dir("tensor_u16");
  TensorData t;
  t.name = "assignments";
  t.dtype = TensorDtype::U16;
  t.dims = {4};
  t.u16 = {0, 7, 65535, 12};
  write_tensor((dir / "z.tensor").string(), t);
  auto back = read_tensor((dir / "z.tensor").string());
  CHECK(back.u16 == t.u16);
}

TEST_CASE("corrupted payload fails the CRC check") {
  auto dir = fixtures::fresh_dir("tensor_crc");
  TensorData t;
  t.name = "x";
  t.dims = {2};
  t.f32 = {1.0f, 2.0f};
  write_tensor((dir / "x.tensor").string(), t);
  auto bytes = slurp(dir / "x.tensor");
  bytes[bytes.size() - 8] ^= 0x01;  // flip a payload bit
  {
    std::ofstream f(dir / "x.tensor", std::ios::binary);
    f << bytes;
  }
  CHECK_THROWS_AS(read_tensor((dir / "x.tensor").string()), TensorIoError);
}

TEST_CASE("bad magic and truncation are rejected") {
  auto dir = fixtures::fresh_dir("tensor_magic");
  {
    std::ofstream f(dir / "bad.tensor", std::ios::binary);
    f << "NOTATENSORFILE_____________________";
  }
  CHECK_THROWS_AS(read_tensor((dir / "bad.tensor").string()), TensorIoError);
  {
    std::ofstream f(dir / "tiny.tensor", std::ios::binary);
    f << "xy";
  }
  CHECK_THROWS_AS(read_tensor((dir / "tiny.tensor").string()), TensorIoError);
  CHECK_THROWS_AS(read_tensor((dir / "missing.tensor").string()), TensorIoError);
}

TEST_CASE("payload size mismatch is rejected on write") {
  TensorData t;
  t.name = "bad";
  t.dims = {3};
  t.f32 = {1.0f};
  CHECK_THROWS_AS(write_tensor("/tmp/stoprec_bad.tensor", t), TensorIoError);
}

TEST_CASE("model bundle save/load/save is byte-identical") {
  auto c = generate_planted_corpus(2, 16, 5, 30, 3);
  TrainConfig cfg;
  cfg.K = 4;
  cfg.outer_iters = 2;
  cfg.sdae_epochs = 2;
  cfg.sdae_hidden = 8;
  cfg.walk.walk_length = 8;
  cfg.walk.walks_per_node = 2;
  cfg.walk.epochs = 1;
  auto out = train_stoprec(c.graph, c.vocab.size(), cfg);
  Model m = make_model(out, c.graph, c.vocab, R"({"K":4})");

  auto d1 = fixtures::fresh_dir("bundle_a");
  auto d2 = fixtures::fresh_dir("bundle_b");
  save_model(m, d1.string());
  Model m2 = load_model(d1.string());
  save_model(m2, d2.string());

  int compared = 0;
  for (const auto& entry : fs::directory_iterator(d1)) {
    auto other = d2 / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared > 10);

  // Loaded model answers queries identically.
  auto r1 = rank(m, {0, 1}, 3);
  auto r2 = rank(m2, {0, 1}, 3);
  CHECK(r1.datasets == r2.datasets);
  for (std::size_t i = 0; i < r1.scores.size(); ++i) {
    // f32 persistence rounds; scores must agree to float precision.
    CHECK(r2.scores[i] == doctest::Approx(r1.scores[i]).epsilon(1e-5));
  }
}

TEST_CASE("bundle loader rejects tampered metadata") {
  auto c = generate_planted_corpus(2, 12, 4, 20, 5);
  TrainConfig cfg;
  cfg.K = 4;
  cfg.outer_iters = 1;
  cfg.sdae_epochs = 1;
  cfg.sdae_hidden = 8;
  cfg.walk.walk_length = 8;
  cfg.walk.walks_per_node = 1;
  cfg.walk.epochs = 1;
  auto out = train_stoprec(c.graph, c.vocab.size(), cfg);
  Model m = make_model(out, c.graph, c.vocab, "{}");
  auto dir = fixtures::fresh_dir("bundle_bad");
  save_model(m, dir.string());

  auto meta = slurp(dir / "meta.json");
  auto pos = meta.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 19, "\"format_version\": 9");
  {
    std::ofstream f(dir / "meta.json", std::ios::binary);
    f << meta;
  }
  CHECK_THROWS_AS(load_model(dir.string()), TensorIoError);
}

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stoprec/recommender.hpp"
#include "stoprec/tensor_io.hpp"

namespace stoprec {

inline constexpr int kBundleFormatVersion = 1;

namespace detail {

inline TensorData matrix_tensor(const std::string& name, const Matrix& m) {
  TensorData t;
  t.name = name;
  t.dims = {m.rows(), m.cols()};
  t.f32.reserve(m.size());
  for (double v : m.data()) t.f32.push_back(static_cast<float>(v));
  return t;
}

inline TensorData vector_tensor(const std::string& name, const std::vector<double>& v) {
  TensorData t;
  t.name = name;
  t.dims = {v.size()};
  for (double x : v) t.f32.push_back(static_cast<float>(x));
  return t;
}

inline Matrix tensor_matrix(const TensorData& t) {
  if (t.dims.size() != 2) throw TensorIoError("expected rank-2 tensor: " + t.name);
  Matrix m(t.dims[0], t.dims[1]);
  for (std::size_t i = 0; i < t.f32.size(); ++i) m.data()[i] = t.f32[i];
  return m;
}

inline std::pair<TensorData, TensorData> ragged_u16(const std::string& name,
                                                    const std::vector<std::vector<std::uint16_t>>& rows) {
  TensorData flat, lens;
  flat.name = name;
  flat.dtype = TensorDtype::U16;
  lens.name = name + "_lengths";
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.size();
  flat.dims = {total};
  lens.dims = {rows.size()};
  for (const auto& r : rows) {
    lens.f32.push_back(static_cast<float>(r.size()));
    for (auto z : r) flat.u16.push_back(z);
  }
  return {flat, lens};
}

}  // namespace detail

// Model bundle: a directory containing meta.json and one named tensor file
// per array. Every tensor carries a trailing CRC; meta echoes the checksums.
inline void save_model(const Model& m, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::vector<TensorData> tensors;
  tensors.push_back(detail::matrix_tensor("V", m.fusion.V));
  tensors.push_back(detail::vector_tensor("kappa", {m.fusion.kappa}));
  tensors.push_back(detail::vector_tensor("beta0", {m.fusion.beta0}));
  tensors.push_back(detail::vector_tensor("beta1", m.fusion.beta1));
  tensors.push_back(detail::matrix_tensor("psi_w", m.psi_w));
  tensors.push_back(detail::matrix_tensor("psi_d", m.psi_d));
  auto [zw, zw_len] = detail::ragged_u16("z_w", m.z_w);
  auto [zd, zd_len] = detail::ragged_u16("z_d", m.z_d);
  tensors.push_back(zw);
  tensors.push_back(zw_len);
  tensors.push_back(zd);
  tensors.push_back(zd_len);
  for (std::size_t i = 0; i < m.sdae.encoder.size(); ++i) {
    tensors.push_back(detail::matrix_tensor("sdae_enc_W" + std::to_string(i), m.sdae.encoder[i].W));
    tensors.push_back(detail::vector_tensor("sdae_enc_b" + std::to_string(i), m.sdae.encoder[i].b));
  }
  for (std::size_t i = 0; i < m.sdae.decoder.size(); ++i) {
    tensors.push_back(detail::matrix_tensor("sdae_dec_W" + std::to_string(i), m.sdae.decoder[i].W));
    tensors.push_back(detail::vector_tensor("sdae_dec_b" + std::to_string(i), m.sdae.decoder[i].b));
  }
  tensors.push_back(detail::matrix_tensor("struct_S", m.struct_S));

  nlohmann::json meta;
  meta["format_version"] = kBundleFormatVersion;
  meta["K"] = m.K;
  meta["n_papers"] = m.n_papers();
  meta["n_datasets"] = m.n_datasets();
  meta["vocab_size"] = m.vocab_words.size();
  meta["paper_ids"] = m.paper_ids;
  meta["dataset_ids"] = m.dataset_ids;
  meta["vocab_words"] = m.vocab_words;
  meta["sdae_layers"] = {m.sdae.encoder.size(), m.sdae.decoder.size()};
  meta["sdae_corruption_rate"] = m.sdae.corruption_rate;
  meta["sdae_weight_decay"] = m.sdae.weight_decay;
  meta["sdae_leaky_slope"] = m.sdae.leaky_slope;
  if (!m.config_echo.empty()) meta["config"] = nlohmann::json::parse(m.config_echo);

  nlohmann::json tensor_meta = nlohmann::json::array();
  for (const auto& t : tensors) {
    std::string file = t.name + ".tensor";
    std::uint32_t crc = write_tensor((fs::path(dir) / file).string(), t);
    tensor_meta.push_back({{"name", t.name},
                           {"file", file},
                           {"dtype", t.dtype == TensorDtype::F32 ? "f32" : "u16"},
                           {"shape", t.dims},
                           {"crc32", crc}});
  }
  meta["tensors"] = std::move(tensor_meta);

  std::ofstream f(fs::path(dir) / "meta.json", std::ios::binary);
  if (!f) throw TensorIoError("save_model: cannot write meta.json in " + dir);
  f << meta.dump(2) << '\n';
}

inline Model load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(dir) / "meta.json");
  if (!f) throw TensorIoError("load_model: cannot open meta.json in " + dir);
  nlohmann::json meta;
  f >> meta;
  if (meta.value("format_version", -1) != kBundleFormatVersion)
    throw TensorIoError("load_model: unsupported bundle format version");

  std::unordered_map<std::string, TensorData> tensors;
  for (const auto& tm : meta["tensors"]) {
    std::string file = tm["file"].get<std::string>();
    TensorData t = read_tensor((fs::path(dir) / file).string());
    if (t.name != tm["name"].get<std::string>())
      throw TensorIoError("load_model: tensor name mismatch in " + file);
    std::vector<std::uint64_t> shape = tm["shape"].get<std::vector<std::uint64_t>>();
    if (t.dims != shape) throw TensorIoError("load_model: shape mismatch for " + t.name);
    tensors.emplace(t.name, std::move(t));
  }
  auto get = [&](const std::string& name) -> const TensorData& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw TensorIoError("load_model: missing tensor " + name);
    return it->second;
  };

  Model m;
  m.K = meta["K"].get<int>();
  m.paper_ids = meta["paper_ids"].get<std::vector<std::string>>();
  m.dataset_ids = meta["dataset_ids"].get<std::vector<std::string>>();
  m.vocab_words = meta["vocab_words"].get<std::vector<std::string>>();
  if (meta.contains("config")) m.config_echo = meta["config"].dump();
  m.fusion.V = detail::tensor_matrix(get("V"));
  m.fusion.kappa = get("kappa").f32.at(0);
  m.fusion.beta0 = get("beta0").f32.at(0);
  for (float v : get("beta1").f32) m.fusion.beta1.push_back(v);
  m.psi_w = detail::tensor_matrix(get("psi_w"));
  m.psi_d = detail::tensor_matrix(get("psi_d"));

  auto unragged = [&](const std::string& name) {
    const TensorData& flat = get(name);
    const TensorData& lens = get(name + "_lengths");
    std::vector<std::vector<std::uint16_t>> rows;
    std::size_t off = 0;
    for (float lf : lens.f32) {
      std::size_t len = static_cast<std::size_t>(lf);
      rows.emplace_back(flat.u16.begin() + off, flat.u16.begin() + off + len);
      off += len;
    }
    return rows;
  };
  m.z_w = unragged("z_w");
  m.z_d = unragged("z_d");

  m.sdae.corruption_rate = meta.value("sdae_corruption_rate", 0.3);
  m.sdae.weight_decay = meta.value("sdae_weight_decay", 0.01);
  m.sdae.leaky_slope = meta.value("sdae_leaky_slope", 0.01);
  std::size_t n_enc = meta["sdae_layers"][0].get<std::size_t>();
  std::size_t n_dec = meta["sdae_layers"][1].get<std::size_t>();
  for (std::size_t i = 0; i < n_enc; ++i) {
    SdaeLayer l;
    l.W = detail::tensor_matrix(get("sdae_enc_W" + std::to_string(i)));
    for (float v : get("sdae_enc_b" + std::to_string(i)).f32) l.b.push_back(v);
    m.sdae.encoder.push_back(std::move(l));
  }
  for (std::size_t i = 0; i < n_dec; ++i) {
    SdaeLayer l;
    l.W = detail::tensor_matrix(get("sdae_dec_W" + std::to_string(i)));
    for (float v : get("sdae_dec_b" + std::to_string(i)).f32) l.b.push_back(v);
    m.sdae.decoder.push_back(std::move(l));
  }
  m.struct_S = detail::tensor_matrix(get("struct_S"));
  m.rebuild_indices();
  return m;
}

// Assemble a Model from training output plus corpus metadata.
inline Model make_model(const TrainOutput& out, const HeteroGraph& g, const Vocabulary& vocab,
                        const std::string& config_echo_json) {
  Model m;
  m.K = out.fusion.K();
  m.fusion = out.fusion;
  m.psi_w = out.topics.psi_w;
  m.psi_d = out.topics.psi_d;
  m.z_w = out.topics.z_w;
  m.z_d = out.topics.z_d;
  m.paper_ids = g.paper_ids;
  m.dataset_ids = g.dataset_ids;
  m.vocab_words = vocab.words;
  m.config_echo = config_echo_json;
  m.sdae = out.rep.sdae;
  m.struct_S = out.rep.structure.S;
  m.rebuild_indices();
  return m;
}

}  // namespace stoprec

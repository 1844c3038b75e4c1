#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stoprec {

struct TensorIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                           std::uint32_t crc = 0xFFFFFFFFu) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc;
}

}  // namespace detail

// Bit-exact tensor file format:
//   16-byte magic+version, u32 name length + UTF-8 name, u8 dtype tag
//   (1 = f32, 2 = u16), u8 rank, rank * u64 little-endian dims, raw
//   little-endian payload, trailing CRC32 over everything before it.
inline constexpr char kTensorMagic[16] = {'S', 'T', 'O', 'P', 'R', 'E', 'C', 'T',
                                          'E', 'N', 'S', 'O', 'R', '\x01', 0, 0};

enum class TensorDtype : std::uint8_t { F32 = 1, U16 = 2 };

struct TensorData {
  std::string name;
  TensorDtype dtype = TensorDtype::F32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint16_t> u16;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

template <typename T>
inline void append_le(std::vector<std::uint8_t>& buf, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <typename T>
inline T read_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

inline std::uint32_t write_tensor(const std::string& path, const TensorData& t) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kTensorMagic, kTensorMagic + 16);
  detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(t.name.size()));
  buf.insert(buf.end(), t.name.begin(), t.name.end());
  buf.push_back(static_cast<std::uint8_t>(t.dtype));
  buf.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) detail::append_le<std::uint64_t>(buf, d);
  if (t.dtype == TensorDtype::F32) {
    if (t.f32.size() != t.element_count())
      throw TensorIoError("write_tensor: payload size mismatch for " + t.name);
    for (float v : t.f32) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      detail::append_le<std::uint32_t>(buf, bits);
    }
  } else {
    if (t.u16.size() != t.element_count())
      throw TensorIoError("write_tensor: payload size mismatch for " + t.name);
    for (std::uint16_t v : t.u16) detail::append_le<std::uint16_t>(buf, v);
  }
  std::uint32_t crc = detail::crc32(buf.data(), buf.size()) ^ 0xFFFFFFFFu;
  detail::append_le<std::uint32_t>(buf, crc);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw TensorIoError("write_tensor: cannot open " + path);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw TensorIoError("write_tensor: write failed for " + path);
  return crc;
}

inline TensorData read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorIoError("read_tensor: cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 16 + 4 + 2 + 4) throw TensorIoError("read_tensor: truncated file " + path);
  if (std::memcmp(buf.data(), kTensorMagic, 16) != 0)
    throw TensorIoError("read_tensor: bad magic in " + path);

  std::uint32_t stored_crc = detail::read_le<std::uint32_t>(buf.data() + buf.size() - 4);
  std::uint32_t actual_crc = detail::crc32(buf.data(), buf.size() - 4) ^ 0xFFFFFFFFu;
  if (stored_crc != actual_crc)
    throw TensorIoError("read_tensor: CRC mismatch in " + path);

  std::size_t off = 16;
  auto need = [&](std::size_t n) {
    if (off + n > buf.size() - 4) throw TensorIoError("read_tensor: truncated file " + path);
  };
  TensorData t;
  need(4);
  std::uint32_t name_len = detail::read_le<std::uint32_t>(buf.data() + off);
  off += 4;
  need(name_len);
  t.name.assign(reinterpret_cast<const char*>(buf.data() + off), name_len);
  off += name_len;
  need(2);
  t.dtype = static_cast<TensorDtype>(buf[off++]);
  std::uint8_t rank = buf[off++];
  need(static_cast<std::size_t>(rank) * 8);
  for (int i = 0; i < rank; ++i) {
    t.dims.push_back(detail::read_le<std::uint64_t>(buf.data() + off));
    off += 8;
  }
  std::uint64_t n = t.element_count();
  if (t.dtype == TensorDtype::F32) {
    need(n * 4);
    t.f32.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint32_t bits = detail::read_le<std::uint32_t>(buf.data() + off);
      off += 4;
      std::memcpy(&t.f32[i], &bits, 4);
    }
  } else if (t.dtype == TensorDtype::U16) {
    need(n * 2);
    t.u16.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      t.u16[i] = detail::read_le<std::uint16_t>(buf.data() + off);
      off += 2;
    }
  } else {
    throw TensorIoError("read_tensor: unknown dtype tag in " + path);
  }
  return t;
}

}  // namespace stoprec

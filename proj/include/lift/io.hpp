#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "lift/tensor.hpp"

namespace lift {

// ---- byte-level helpers (explicit little-endian) ----

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Bounds-checked cursor; every read failure is a typed Truncated error.
struct ByteReader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > bytes.size())
      throw Error(ErrorCode::Truncated, "need " + std::to_string(n) + " bytes at offset " +
                                            std::to_string(pos) + ", file has " +
                                            std::to_string(bytes.size()));
  }
  uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for reading");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to '" + path + "'");
}

// ---- LIFT tensor file ----
// magic "LIFT" | version u8 = 1 | dtype u8 = 1 (float32 LE) | rank u8 |
// rank x u32 extents | row-major float32 payload.

constexpr char kTensorMagic[4] = {'L', 'I', 'F', 'T'};
constexpr uint8_t kTensorVersion = 1;
constexpr uint8_t kDtypeFloat32 = 1;

inline void append_tensor_file(std::vector<uint8_t>& out, const Tensor<float>& t) {
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  out.push_back(kTensorVersion);
  out.push_back(kDtypeFloat32);
  out.push_back(static_cast<uint8_t>(t.rank()));
  for (int e : t.shape()) detail::put_u32(out, static_cast<uint32_t>(e));
  for (float v : t.data()) detail::put_f32(out, v);
}

inline std::vector<uint8_t> write_tensor_bytes(const Tensor<float>& t) {
  std::vector<uint8_t> out;
  append_tensor_file(out, t);
  return out;
}

// Reads one tensor starting at the cursor position.
inline Tensor<float> read_tensor_at(detail::ByteReader& r) {
  const std::string magic = r.str(4);
  if (magic != std::string(kTensorMagic, 4))
    throw Error(ErrorCode::BadMagic, "expected tensor magic LIFT, found '" + magic + "'");
  const uint8_t version = r.u8();
  if (version != kTensorVersion)
    throw Error(ErrorCode::BadVersion, "unsupported tensor version " + std::to_string(version));
  const uint8_t dtype = r.u8();
  if (dtype != kDtypeFloat32)
    throw Error(ErrorCode::BadDtype, "unsupported dtype code " + std::to_string(dtype));
  const int rank = r.u8();
  if (rank < 1 || rank > 8) throw Error(ErrorCode::InvalidArgument, "implausible tensor rank");
  Shape shape(rank);
  int64_t numel = 1;
  for (int d = 0; d < rank; ++d) {
    const uint32_t e = r.u32();
    if (e == 0 || e > (1u << 28)) throw Error(ErrorCode::InvalidArgument, "implausible tensor extent");
    shape[d] = static_cast<int>(e);
    numel *= e;
  }
  r.need(static_cast<size_t>(numel) * 4);
  std::vector<float> data(static_cast<size_t>(numel));
  for (auto& v : data) v = r.f32();
  return Tensor<float>::from_data(std::move(shape), std::move(data));
}

inline Tensor<float> read_tensor_bytes(const std::vector<uint8_t>& bytes) {
  detail::ByteReader r{bytes};
  auto t = read_tensor_at(r);
  if (r.pos != bytes.size())
    throw Error(ErrorCode::Truncated, "trailing bytes after tensor payload");
  return t;
}

inline void write_tensor_file(const std::string& path, const Tensor<float>& t) {
  write_file(path, write_tensor_bytes(t));
}

inline Tensor<float> read_tensor_file(const std::string& path) {
  return read_tensor_bytes(read_file(path));
}

// ---- checkpoint ----
// magic "LIFC" | version u8 = 1 | u32 entry count |
// entries: u16 name length, name bytes, u64 absolute offset |
// concatenated LIFT tensor blocks.

constexpr char kCheckpointMagic[4] = {'L', 'I', 'F', 'C'};
constexpr uint8_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

inline std::vector<uint8_t> write_checkpoint_bytes(const NamedTensors& entries) {
  size_t header = 4 + 1 + 4;
  for (const auto& [name, t] : entries) header += 2 + name.size() + 8;
  std::vector<uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  out.push_back(kCheckpointVersion);
  detail::put_u32(out, static_cast<uint32_t>(entries.size()));
  // Manifest offsets are known up front from the block sizes.
  uint64_t offset = header;
  for (const auto& [name, t] : entries) {
    if (name.size() > 0xffff) throw Error(ErrorCode::InvalidArgument, "checkpoint name too long");
    detail::put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u64(out, offset);
    offset += 7 + 4 * static_cast<uint64_t>(t.rank()) + 4 * static_cast<uint64_t>(t.numel());
  }
  for (const auto& [name, t] : entries) append_tensor_file(out, t);
  return out;
}

inline NamedTensors read_checkpoint_bytes(const std::vector<uint8_t>& bytes) {
  detail::ByteReader r{bytes};
  const std::string magic = r.str(4);
  if (magic != std::string(kCheckpointMagic, 4))
    throw Error(ErrorCode::BadMagic, "expected checkpoint magic LIFC, found '" + magic + "'");
  const uint8_t version = r.u8();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::BadVersion, "unsupported checkpoint version " + std::to_string(version));
  const uint32_t count = r.u32();
  std::vector<std::pair<std::string, uint64_t>> manifest;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = r.u16();
    std::string name = r.str(len);
    const uint64_t offset = r.u64();
    for (const auto& [n, o] : manifest)
      if (n == name) throw Error(ErrorCode::NameMismatch, "duplicate checkpoint entry '" + name + "'");
    manifest.emplace_back(std::move(name), offset);
  }
  NamedTensors out;
  for (const auto& [name, offset] : manifest) {
    if (offset > bytes.size()) throw Error(ErrorCode::Truncated, "manifest offset beyond file end");
    detail::ByteReader block{bytes, static_cast<size_t>(offset)};
    out.emplace_back(name, read_tensor_at(block));
  }
  return out;
}

inline void write_checkpoint(const std::string& path, const NamedTensors& entries) {
  write_file(path, write_checkpoint_bytes(entries));
}

inline NamedTensors read_checkpoint(const std::string& path) {
  return read_checkpoint_bytes(read_file(path));
}

// ---- PGM / PPM ----

// Binary PGM (P5), maxval 255, value v -> round(255 v).
inline std::vector<uint8_t> write_pgm_bytes(const std::vector<float>& map, int h, int w) {
  if (static_cast<int64_t>(map.size()) != static_cast<int64_t>(h) * w)
    throw Error(ErrorCode::ShapeMismatch, "map size does not match extents");
  for (float v : map)
    if (!(v >= 0.0f && v <= 1.0f))
      throw Error(ErrorCode::InvalidArgument, "PGM values must lie in [0,1]");
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  for (float v : map) out.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
  return out;
}

inline void write_map_pgm(const std::string& path, const std::vector<float>& map, int h, int w) {
  write_file(path, write_pgm_bytes(map, h, w));
}

struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 = PGM, 3 = PPM
  std::vector<uint8_t> pixels;  // interleaved rows

  // Channel-planar 3xHxW tensor in [0,1]; grayscale replicates the plane.
  Tensor<float> to_image_tensor() const {
    std::vector<float> d(static_cast<size_t>(3) * height * width);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const int src = channels == 1 ? y * width + x : (y * width + x) * 3 + ch;
          d[(static_cast<size_t>(ch) * height + y) * width + x] =
              static_cast<float>(pixels[static_cast<size_t>(src)]) / 255.0f;
        }
    return Tensor<float>::from_data({3, height, width}, std::move(d));
  }
};

// Binary P5/P6 reader, maxval 255.
inline PnmImage read_pnm_bytes(const std::vector<uint8_t>& bytes) {
  detail::ByteReader r{bytes};
  auto token = [&]() -> std::string {
    std::string t;
    while (r.pos < bytes.size()) {
      const char c = static_cast<char>(bytes[r.pos]);
      if (c == '#') {
        while (r.pos < bytes.size() && bytes[r.pos] != '\n') ++r.pos;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) return t;
        ++r.pos;
        continue;
      }
      t.push_back(c);
      ++r.pos;
    }
    if (t.empty()) throw Error(ErrorCode::Truncated, "PNM header ended early");
    return t;
  };
  const std::string magic = token();
  PnmImage img;
  if (magic == "P5")
    img.channels = 1;
  else if (magic == "P6")
    img.channels = 3;
  else
    throw Error(ErrorCode::BadMagic, "expected P5 or P6, found '" + magic + "'");
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (maxval != 255) throw Error(ErrorCode::BadDtype, "only maxval 255 PNM images are supported");
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::InvalidArgument, "malformed PNM header token");
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::InvalidArgument, "PNM header value out of range");
  }
  if (img.width <= 0 || img.height <= 0 || img.width > (1 << 16) || img.height > (1 << 16))
    throw Error(ErrorCode::InvalidArgument, "implausible PNM extents");
  ++r.pos;  // the single whitespace byte after maxval
  const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
  r.need(n);
  img.pixels.assign(bytes.begin() + static_cast<long>(r.pos), bytes.begin() + static_cast<long>(r.pos + n));
  return img;
}

inline PnmImage read_pnm_file(const std::string& path) { return read_pnm_bytes(read_file(path)); }

}  // namespace lift

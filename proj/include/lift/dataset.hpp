#pragma once

#include <array>
#include <cstdint>

#include "lift/rng.hpp"
#include "lift/tensor.hpp"

namespace lift {

// One labeled RGB image, channel-planar, values in [0, 1].
struct Sample {
  Tensor<float> image;  // 3 x H x W
  int label = 0;
};

enum class CifarVariant { cifar10 };

constexpr int kSynthImageSize = 32;
constexpr int kSynthMotifSize = 5;
constexpr int kSynthPatch = 4;
constexpr int kSynthMaxClasses = 16;

namespace detail {

constexpr int kRecordPixels = 3 * kSynthImageSize * kSynthImageSize;
constexpr int kRecordBytes = 1 + kRecordPixels;

// Sylvester 4x4 Hadamard rows, the sign codes behind the motif table.
inline int hadamard4(int row, int col) {
  static constexpr std::array<std::array<int, 4>, 4> h{{{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1},
                                                        {1, -1, -1, 1}}};
  return h[row][col];
}

}  // namespace detail

// The 5x5 sign pattern identifying class k: a Hadamard outer-product code in
// the 4x4 interior and an all-positive last row and column.
inline std::array<std::array<int, kSynthMotifSize>, kSynthMotifSize> motif_pattern(int k) {
  if (k < 0 || k >= kSynthMaxClasses)
    throw Error(ErrorCode::MotifTableExhausted,
                "motif table has " + std::to_string(kSynthMaxClasses) + " entries, class " +
                    std::to_string(k) + " requested");
  const int a = k / 4, b = k % 4;
  std::array<std::array<int, kSynthMotifSize>, kSynthMotifSize> m{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m[i][j] = detail::hadamard4(a, i) * detail::hadamard4(b, j);
  for (int i = 0; i < kSynthMotifSize; ++i) {
    m[i][4] = 1;
    m[4][i] = 1;
  }
  return m;
}

// Pixel rendering of a motif cell: saturated border row/column, low-contrast
// interior code.
constexpr int kMotifCodeDelta = 24;

inline uint8_t motif_byte(const std::array<std::array<int, kSynthMotifSize>, kSynthMotifSize>& m,
                          int y, int x) {
  if (y == kSynthMotifSize - 1 || x == kSynthMotifSize - 1) return m[y][x] > 0 ? 255 : 0;
  return static_cast<uint8_t>(128 + m[y][x] * kMotifCodeDelta);
}

// Synthetic locality dataset: uniform byte noise carrying the label's 5x5
// motif (low-contrast interior code plus saturated border) at a random
// patch-aligned cell. The interior code hides below the noise floor for any
// single 4x4 patch, while the saturated border lands in the neighboring
// patches, so embeddings with local context pick the task up far faster than
// point-wise ones. Pixel values are multiples of 1/255 so byte serialization
// round-trips exactly. Pure function of (seed, n, k).
inline std::vector<Sample> gen_synthetic(uint64_t seed, int n, int k) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative sample count");
  if (k < 1 || k > kSynthMaxClasses)
    throw Error(ErrorCode::MotifTableExhausted,
                "class count must lie in [1, " + std::to_string(kSynthMaxClasses) + "]");
  constexpr int s = kSynthImageSize;
  // Any pixel-lattice position keeping the motif inside the image.
  const int max_origin = s - kSynthMotifSize + 1;
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = rng.uniform_int(k);
    const int oy = rng.uniform_int(max_origin);
    const int ox = rng.uniform_int(max_origin);
    std::vector<float> img(static_cast<size_t>(detail::kRecordPixels));
    for (auto& v : img) v = static_cast<float>(rng.uniform_int(256)) / 255.0f;
    const auto motif = motif_pattern(label);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < kSynthMotifSize; ++y)
        for (int x = 0; x < kSynthMotifSize; ++x)
          img[(static_cast<size_t>(ch) * s + oy + y) * s + ox + x] =
              static_cast<float>(motif_byte(motif, y, x)) / 255.0f;
    out.push_back({Tensor<float>::from_data({3, s, s}, std::move(img)), label});
  }
  return out;
}

// Parses channel-planar 3073-byte records (1 label byte, then R, G, B planes),
// scaling pixels to [0, 1]. Labels at or above the bound are rejected.
inline std::vector<Sample> read_samples(const std::vector<uint8_t>& bytes, int label_bound) {
  if (bytes.size() % detail::kRecordBytes != 0)
    throw Error(ErrorCode::Truncated, "file size " + std::to_string(bytes.size()) +
                                          " is not a multiple of the " +
                                          std::to_string(detail::kRecordBytes) + "-byte record");
  const size_t count = bytes.size() / detail::kRecordBytes;
  std::vector<Sample> out;
  out.reserve(count);
  for (size_t r = 0; r < count; ++r) {
    const uint8_t* rec = bytes.data() + r * detail::kRecordBytes;
    const int label = rec[0];
    if (label >= label_bound)
      throw Error(ErrorCode::LabelOutOfRange, "record " + std::to_string(r) + " has label byte " +
                                                  std::to_string(label) + " >= " +
                                                  std::to_string(label_bound));
    std::vector<float> img(static_cast<size_t>(detail::kRecordPixels));
    for (int i = 0; i < detail::kRecordPixels; ++i) img[i] = static_cast<float>(rec[1 + i]) / 255.0f;
    out.push_back({Tensor<float>::from_data({3, kSynthImageSize, kSynthImageSize}, std::move(img)), label});
  }
  return out;
}

inline std::vector<Sample> read_cifar(const std::vector<uint8_t>& bytes, CifarVariant) {
  return read_samples(bytes, 10);
}

// Serializes samples back into the 3073-byte record framing.
inline std::vector<uint8_t> write_samples(const std::vector<Sample>& samples) {
  std::vector<uint8_t> out;
  out.reserve(samples.size() * detail::kRecordBytes);
  for (const auto& s : samples) {
    if (s.image.shape() != Shape{3, kSynthImageSize, kSynthImageSize})
      throw Error(ErrorCode::ShapeMismatch, "record framing requires 3x32x32 images, got " +
                                                shape_str(s.image.shape()));
    if (s.label < 0 || s.label > 255)
      throw Error(ErrorCode::LabelOutOfRange, "label does not fit in the record's label byte");
    out.push_back(static_cast<uint8_t>(s.label));
    for (float v : s.image.data()) {
      if (v < 0.0f || v > 1.0f)
        throw Error(ErrorCode::InvalidArgument, "pixel outside [0,1]");
      out.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
    }
  }
  return out;
}

struct ChannelStats {
  std::array<float, 3> mean{};
  std::array<float, 3> stddev{};
};

inline ChannelStats channel_stats(const std::vector<Sample>& samples) {
  ChannelStats st;
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples to compute stats over");
  const int64_t per_channel = samples[0].image.numel() / 3;
  std::array<double, 3> sum{}, sq{};
  for (const auto& s : samples)
    for (int ch = 0; ch < 3; ++ch)
      for (int64_t i = 0; i < per_channel; ++i) {
        const double v = s.image.data()[ch * per_channel + i];
        sum[ch] += v;
        sq[ch] += v * v;
      }
  const double n = static_cast<double>(per_channel) * samples.size();
  for (int ch = 0; ch < 3; ++ch) {
    const double m = sum[ch] / n;
    st.mean[ch] = static_cast<float>(m);
    st.stddev[ch] = static_cast<float>(std::sqrt(std::max(sq[ch] / n - m * m, 1e-12)));
  }
  return st;
}

// Per-channel (x - mean) / std, in place. Values may leave [0, 1].
inline void normalize_samples(std::vector<Sample>& samples, const ChannelStats& st) {
  for (auto& s : samples) {
    const int64_t per_channel = s.image.numel() / 3;
    auto& d = s.image.mutable_data();
    for (int ch = 0; ch < 3; ++ch)
      for (int64_t i = 0; i < per_channel; ++i)
        d[ch * per_channel + i] = (d[ch * per_channel + i] - st.mean[ch]) / st.stddev[ch];
  }
}

}  // namespace lift

#pragma once

#include <string>
#include <vector>

#include "lift/error.hpp"

namespace lift {

// How a transformer block turns tokens into query/key/value embeddings.
enum class QkvMode { pff, life, life_onescale };

inline std::string qkv_mode_name(QkvMode m) {
  switch (m) {
    case QkvMode::pff: return "pff";
    case QkvMode::life: return "life";
    case QkvMode::life_onescale: return "life_onescale";
  }
  return "?";
}

inline QkvMode qkv_mode_from_string(const std::string& s) {
  if (s == "pff") return QkvMode::pff;
  if (s == "life") return QkvMode::life;
  if (s == "life_onescale" || s == "life-onescale") return QkvMode::life_onescale;
  throw Error(ErrorCode::InvalidArgument, "unknown qkv mode '" + s + "'");
}

// Full architectural description of the ViT. Defaults are the tiny variant at
// 224x224 with 100 classes.
struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int embed_dim = 192;
  int depth = 12;
  int num_heads = 3;
  int mlp_ratio = 4;
  int num_classes = 100;
  QkvMode qkv_mode = QkvMode::pff;
  std::vector<int> kernel_sizes{1, 3, 5};
  std::vector<int> paddings{0, 1, 2};
  double dropout = 0.0;

  int grid() const { return image_size / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int tokens() const { return num_patches() + 1; }
  int head_dim() const { return embed_dim / num_heads; }
  int scales() const { return static_cast<int>(kernel_sizes.size()); }
  bool uses_life() const { return qkv_mode != QkvMode::pff; }

  ModelConfig with_qkv_mode(QkvMode m) const {
    ModelConfig c = *this;
    c.qkv_mode = m;
    if (m == QkvMode::life_onescale) {
      c.kernel_sizes = {3};
      c.paddings = {1};
    } else if (m == QkvMode::life && c.kernel_sizes == std::vector<int>{3}) {
      c.kernel_sizes = {1, 3, 5};
      c.paddings = {0, 1, 2};
    }
    return c;
  }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
      throw Error(ErrorCode::InvalidArgument, "image_size must be a positive multiple of patch_size");
    if (embed_dim <= 0 || depth <= 0 || num_heads <= 0 || mlp_ratio <= 0 || num_classes <= 0)
      throw Error(ErrorCode::InvalidArgument, "model dimensions must be positive");
    if (embed_dim % num_heads != 0)
      throw Error(ErrorCode::InvalidArgument, "embed_dim must be divisible by num_heads");
    if (dropout < 0.0 || dropout >= 1.0)
      throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
    if (uses_life()) {
      if (embed_dim % 3 != 0)
        throw Error(ErrorCode::InvalidArgument, "LIFE modes require embed_dim divisible by 3");
      if (kernel_sizes.empty() || kernel_sizes.size() != paddings.size())
        throw Error(ErrorCode::InvalidArgument, "kernel_sizes and paddings must have equal nonzero length");
      for (size_t i = 0; i < kernel_sizes.size(); ++i) {
        if (kernel_sizes[i] < 1 || kernel_sizes[i] % 2 == 0 || kernel_sizes[i] != 2 * paddings[i] + 1)
          throw Error(ErrorCode::InvalidArgument,
                      "kernel/padding schedule must satisfy k = 2*pad + 1 to preserve resolution");
      }
      if (qkv_mode == QkvMode::life_onescale &&
          (kernel_sizes != std::vector<int>{3} || paddings != std::vector<int>{1}))
        throw Error(ErrorCode::InvalidArgument, "life_onescale uses a single scale with kernel 3, pad 1");
    }
  }
};

}  // namespace lift

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lift/config.hpp"

namespace lift {

struct CostItem {
  std::string name;
  int64_t params = 0;
  int64_t macs = 0;
};

// Exact parameter and multiply-accumulate counts for one forward pass at a
// stated input size. One MAC is one multiply-add; norms, softmax, and
// activations are excluded.
struct CostReport {
  int64_t total_params = 0;
  int64_t total_macs = 0;
  int input_size = 0;
  std::vector<CostItem> breakdown;
};

namespace detail {

inline CostItem qkv_cost(const ModelConfig& cfg, int64_t n) {
  const int64_t c = cfg.embed_dim;
  const int64_t t = n + 1;
  CostItem item{"qkv", 0, 0};
  if (cfg.qkv_mode == QkvMode::pff) {
    item.params = 3 * c * c + 3 * c;
    item.macs = 3 * c * c * t;
    return item;
  }
  if (cfg.qkv_mode == QkvMode::life_onescale) {
    // one kernel-3 depthwise stage plus a C -> 3C pointwise
    item.params = (9 * c + c) + (3 * c * c + 3 * c);
    item.macs = 9 * c * n + 3 * c * c * t;
    return item;
  }
  for (size_t s = 0; s < cfg.kernel_sizes.size(); ++s) {
    const int64_t k = cfg.kernel_sizes[s];
    if (k > 1) {
      // depthwise: k^2 C HW MACs (the k^2 Cin Cout HW / C depthwise rule)
      item.params += c * k * k + c;
      item.macs += k * k * c * n;
    }
    // pointwise over the lattice plus the auxiliary token column
    item.params += c * c + c;
    item.macs += c * c * t;
  }
  return item;
}

}  // namespace detail

inline CostReport cost_report(const ModelConfig& cfg, int input_size = 0) {
  cfg.validate();
  if (input_size == 0) input_size = cfg.image_size;
  if (input_size <= 0 || input_size % cfg.patch_size != 0)
    throw Error(ErrorCode::InvalidArgument, "input size must be a positive multiple of the patch size");
  const int64_t c = cfg.embed_dim;
  const int64_t grid = input_size / cfg.patch_size;
  const int64_t n = grid * grid;
  const int64_t t = n + 1;
  const int64_t patch_dim = 3 * static_cast<int64_t>(cfg.patch_size) * cfg.patch_size;
  const int64_t hidden = static_cast<int64_t>(cfg.mlp_ratio) * c;

  CostReport report;
  report.input_size = input_size;
  auto push = [&](std::string name, int64_t params, int64_t macs) {
    report.breakdown.push_back({std::move(name), params, macs});
    report.total_params += params;
    report.total_macs += macs;
  };

  push("patch_embed", patch_dim * c + c, patch_dim * c * n);
  push("pos_embed", c * t, 0);
  push("cls_token", c, 0);
  for (int l = 0; l < cfg.depth; ++l) {
    const auto qkv = detail::qkv_cost(cfg, n);
    int64_t params = qkv.params, macs = qkv.macs;
    params += 2 * 2 * c;            // two layer norms
    macs += 2 * t * t * c;          // QK^T and AV
    params += c * c + c;            // attention output projection
    macs += c * c * t;
    params += (hidden * c + hidden) + (c * hidden + c);  // MLP
    macs += 2 * hidden * c * t;
    push("block." + std::to_string(l), params, macs);
  }
  push("final_norm", 2 * c, 0);
  push("head", static_cast<int64_t>(cfg.num_classes) * c + cfg.num_classes,
       static_cast<int64_t>(cfg.num_classes) * c);
  return report;
}

inline int64_t count_params(const ModelConfig& cfg) { return cost_report(cfg).total_params; }

inline int64_t count_macs(const ModelConfig& cfg, int input_size = 0) {
  return cost_report(cfg, input_size).total_macs;
}

struct OverheadReport {
  double params_pct = 0.0;
  double macs_pct = 0.0;
};

// Relative cost deltas of a variant against a base configuration.
inline OverheadReport overhead_report(const CostReport& base, const CostReport& variant) {
  if (base.total_params == 0 || base.total_macs == 0)
    throw Error(ErrorCode::InvalidArgument, "overhead_report: zero-cost base");
  return {100.0 * (static_cast<double>(variant.total_params - base.total_params) /
                   static_cast<double>(base.total_params)),
          100.0 * (static_cast<double>(variant.total_macs - base.total_macs) /
                   static_cast<double>(base.total_macs))};
}

}  // namespace lift

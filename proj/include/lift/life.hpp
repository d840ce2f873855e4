#pragma once

#include <optional>

#include "lift/config.hpp"
#include "lift/nn.hpp"
#include "lift/rng.hpp"

namespace lift {

template <typename T>
struct Qkv {
  Tensor<T> q, k, v;
};

// One stage of the convolutional hierarchy: a depthwise spatial convolution
// (absent for kernel size 1) followed by a pointwise C->C convolution. The
// pointwise weights are shared with the auxiliary-token path.
template <typename T>
struct LifeStage {
  std::optional<ConvWeights<T>> depthwise;
  ConvWeights<T> pointwise;
  int kernel = 1;
  int pad = 0;
};

template <typename T>
struct LifeParams {
  std::vector<LifeStage<T>> stages;
  // Single-scale ablation: one kernel-3 depthwise-separable stage whose
  // pointwise maps C -> 3C, the thirds becoming Q, K, V directly.
  bool onescale = false;

  int scales() const { return static_cast<int>(stages.size()); }

  void validate(int channels) const {
    if (stages.empty()) throw Error(ErrorCode::InvalidArgument, "LIFE needs at least one stage");
    if (channels % 3 != 0)
      throw Error(ErrorCode::InvalidArgument, "LIFE channel count must be divisible by 3");
    if (onescale) {
      if (stages.size() != 1 || stages[0].kernel != 3 || !stages[0].depthwise)
        throw Error(ErrorCode::InvalidArgument, "onescale requires a single kernel-3 DSC stage");
      const auto& st = stages[0];
      if (st.depthwise->k() != 3 || st.depthwise->out_channels() != channels)
        throw Error(ErrorCode::ShapeMismatch, "onescale depthwise kernel/channel mismatch");
      if (st.pointwise.k() != 1 || st.pointwise.in_channels() != channels ||
          st.pointwise.out_channels() != 3 * channels)
        throw Error(ErrorCode::ShapeMismatch, "onescale pointwise must map C->3C with kernel 1");
      return;
    }
    for (const auto& st : stages) {
      if (st.kernel != 2 * st.pad + 1)
        throw Error(ErrorCode::InvalidArgument, "LIFE stage would change spatial resolution");
      if (st.pointwise.k() != 1 || st.pointwise.out_channels() != channels ||
          st.pointwise.in_channels() != channels)
        throw Error(ErrorCode::ShapeMismatch, "LIFE pointwise must map C->C with kernel 1");
      if (st.kernel > 1) {
        if (!st.depthwise) throw Error(ErrorCode::InvalidArgument, "LIFE stage with k>1 needs a depthwise conv");
        if (st.depthwise->k() != st.kernel || st.depthwise->out_channels() != channels)
          throw Error(ErrorCode::ShapeMismatch, "LIFE depthwise kernel/channel mismatch");
      } else if (st.depthwise) {
        throw Error(ErrorCode::InvalidArgument, "LIFE pointwise stage must not carry a depthwise conv");
      }
    }
  }
};

template <typename T>
LifeParams<T> init_life_params(const ModelConfig& cfg, Rng& rng) {
  const int c = cfg.embed_dim;
  auto trunc_fill = [&](Shape shape) {
    std::vector<T> d(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : d) v = static_cast<T>(rng.trunc_normal(0.02));
    return Tensor<T>::param(std::move(shape), std::move(d));
  };
  auto zero_param = [&](Shape shape) {
    auto t = Tensor<T>::zeros(std::move(shape));
    t.set_requires_grad(true);
    return t;
  };
  LifeParams<T> p;
  p.onescale = cfg.qkv_mode == QkvMode::life_onescale;
  for (int s = 0; s < cfg.scales(); ++s) {
    LifeStage<T> st;
    st.kernel = cfg.kernel_sizes[s];
    st.pad = cfg.paddings[s];
    if (st.kernel > 1)
      st.depthwise = ConvWeights<T>{trunc_fill({c, 1, st.kernel, st.kernel}), zero_param({c}), true};
    const int out = p.onescale ? 3 * c : c;
    st.pointwise = ConvWeights<T>{trunc_fill({out, c, 1, 1}), zero_param({out}), false};
    p.stages.push_back(std::move(st));
  }
  p.validate(c);
  return p;
}

// Columns of the patch-token matrix laid out on the H x W patch lattice.
// Token i maps to cell (i / W, i % W); with row-major storage this is a pure
// reshape, and grid_to_tokens is its exact inverse.
template <typename T>
Tensor<T> tokens_to_grid(const Tensor<T>& x_patch, int h, int w) {
  if (x_patch.rank() != 2)
    throw Error(ErrorCode::ShapeMismatch, "tokens_to_grid expects CxN, got " + shape_str(x_patch.shape()));
  if (x_patch.shape()[1] != h * w)
    throw Error(ErrorCode::ShapeMismatch, "cannot lay out " + std::to_string(x_patch.shape()[1]) +
                                              " tokens on a " + std::to_string(h) + "x" + std::to_string(w) +
                                              " lattice");
  return reshape(x_patch, {x_patch.shape()[0], h, w});
}

template <typename T>
Tensor<T> grid_to_tokens(const Tensor<T>& grid) {
  if (grid.rank() != 3)
    throw Error(ErrorCode::ShapeMismatch, "grid_to_tokens expects CxHxW, got " + shape_str(grid.shape()));
  return reshape(grid, {grid.shape()[0], grid.shape()[1] * grid.shape()[2]});
}

// Hierarchical multiscale features over the patch lattice: each stage applies
// its depthwise conv (if any) and pointwise conv to the previous stage's
// output, preserving the spatial extents throughout.
template <typename T>
std::vector<Tensor<T>> life_patch_features(const Tensor<T>& grid, const LifeParams<T>& params) {
  params.validate(grid.shape()[0]);
  std::vector<Tensor<T>> feats;
  Tensor<T> cur = grid;
  for (const auto& st : params.stages) {
    Tensor<T> mid = st.depthwise ? depthwise_conv2d(cur, *st.depthwise, st.pad) : cur;
    cur = conv2d(mid, st.pointwise, 1, 0);
    if (cur.shape()[1] != grid.shape()[1] || cur.shape()[2] != grid.shape()[2])
      throw Error(ErrorCode::ShapeMismatch, "LIFE stage changed the lattice resolution");
    feats.push_back(cur);
  }
  return feats;
}

// Auxiliary-token path: the same pointwise convolutions as the patch path,
// skipping every depthwise stage.
template <typename T>
std::vector<Tensor<T>> life_aux_features(const Tensor<T>& x_cls, const LifeParams<T>& params) {
  const int c = x_cls.shape()[0];
  params.validate(c);
  if (x_cls.rank() != 2 || x_cls.shape()[1] != 1)
    throw Error(ErrorCode::ShapeMismatch, "life_aux_features expects a Cx1 token");
  std::vector<Tensor<T>> feats;
  Tensor<T> cur = reshape(x_cls, {c, 1, 1});
  for (const auto& st : params.stages) {
    cur = conv2d(cur, st.pointwise, 1, 0);
    feats.push_back(reshape(cur, {c, 1}));
  }
  return feats;
}

// Channel-third rearrangement of the per-scale features into Q, K, V. The
// first third of every scale feeds Q, the second K, the third V; the three
// output slots cycle through the scales in order, so three scales contribute
// one slice each and a single scale fills all three slots.
template <typename T>
Qkv<T> assemble_qkv(const std::vector<Tensor<T>>& patch_feats, const std::vector<Tensor<T>>& aux_feats) {
  if (patch_feats.empty() || patch_feats.size() != aux_feats.size())
    throw Error(ErrorCode::InvalidArgument, "assemble_qkv: patch/aux scale counts differ");
  const int s = static_cast<int>(patch_feats.size());
  const int c = patch_feats[0].shape()[0];
  if (c % 3 != 0) throw Error(ErrorCode::InvalidArgument, "assemble_qkv: channels not divisible by 3");

  std::vector<Tensor<T>> q_parts, k_parts, v_parts;
  for (int slot = 0; slot < 3; ++slot) {
    const int scale = slot % s;
    auto flat = grid_to_tokens(patch_feats[scale]);
    auto patch_slices = split(flat, 0, 3);
    auto aux_slices = split(aux_feats[scale], 0, 3);
    q_parts.push_back(concat<T>({patch_slices[0], aux_slices[0]}, 1));
    k_parts.push_back(concat<T>({patch_slices[1], aux_slices[1]}, 1));
    v_parts.push_back(concat<T>({patch_slices[2], aux_slices[2]}, 1));
  }
  return {concat(q_parts, 0), concat(k_parts, 0), concat(v_parts, 0)};
}

// The LIFE Q/K/V generator: lattice rearrangement, hierarchical convolutions
// over patch tokens, the shared-pointwise path for the classification token,
// and channel-third reassembly. Output shapes match pff_qkv exactly.
template <typename T>
Qkv<T> life_qkv(const Tensor<T>& x, const LifeParams<T>& params, int grid_h, int grid_w) {
  if (params.onescale) throw Error(ErrorCode::InvalidArgument, "use life_onescale_qkv");
  const int n = grid_h * grid_w;
  if (x.rank() != 2 || x.shape()[1] != n + 1)
    throw Error(ErrorCode::ShapeMismatch, "life_qkv expects Cx(N+1) tokens, got " + shape_str(x.shape()));
  auto cols = split_sizes(x, 1, {n, 1});
  auto grid = tokens_to_grid(cols[0], grid_h, grid_w);
  auto patch_feats = life_patch_features(grid, params);
  auto aux_feats = life_aux_features(cols[1], params);
  return assemble_qkv(patch_feats, aux_feats);
}

// Single-scale ablation: one kernel-3 depthwise-separable stage whose 3C
// output channels split into thirds as Q, K, V directly. The classification
// token passes through the shared pointwise convolution only.
template <typename T>
Qkv<T> life_onescale_qkv(const Tensor<T>& x, const LifeParams<T>& params, int grid_h, int grid_w) {
  const int c = x.shape()[0];
  params.validate(c);
  if (!params.onescale)
    throw Error(ErrorCode::InvalidArgument, "life_onescale_qkv requires onescale parameters");
  const int n = grid_h * grid_w;
  if (x.rank() != 2 || x.shape()[1] != n + 1)
    throw Error(ErrorCode::ShapeMismatch,
                "life_onescale_qkv expects Cx(N+1) tokens, got " + shape_str(x.shape()));
  const auto& st = params.stages[0];
  auto cols = split_sizes(x, 1, {n, 1});
  auto grid = tokens_to_grid(cols[0], grid_h, grid_w);
  auto patch = conv2d(depthwise_conv2d(grid, *st.depthwise, st.pad), st.pointwise, 1, 0);
  auto patch_thirds = split(grid_to_tokens(patch), 0, 3);
  auto aux = reshape(conv2d(reshape(cols[1], {c, 1, 1}), st.pointwise, 1, 0), {3 * c, 1});
  auto aux_thirds = split(aux, 0, 3);
  return {concat<T>({patch_thirds[0], aux_thirds[0]}, 1), concat<T>({patch_thirds[1], aux_thirds[1]}, 1),
          concat<T>({patch_thirds[2], aux_thirds[2]}, 1)};
}

}  // namespace lift

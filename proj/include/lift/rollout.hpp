#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lift/vit.hpp"

namespace lift {

using RolloutMat = Eigen::MatrixXd;
using AttnMap = Eigen::MatrixXd;  // H x W patch-lattice map in [0,1]

// Arithmetic mean over heads; rows stay stochastic by convexity.
inline RolloutMat head_average(const std::vector<RolloutMat>& heads) {
  if (heads.empty()) throw Error(ErrorCode::InvalidArgument, "head_average: no heads");
  RolloutMat acc = heads[0];
  for (size_t h = 1; h < heads.size(); ++h) {
    if (heads[h].rows() != acc.rows() || heads[h].cols() != acc.cols())
      throw Error(ErrorCode::ShapeMismatch, "head_average: head size mismatch");
    acc += heads[h];
  }
  return acc / static_cast<double>(heads.size());
}

template <typename T>
RolloutMat to_rollout_mat(const Tensor<T>& attn) {
  if (attn.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "attention matrix must be rank 2");
  const int r = attn.shape()[0], c = attn.shape()[1];
  RolloutMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = static_cast<double>(attn.data()[i * c + j]);
  return m;
}

template <typename T>
RolloutMat head_average(const AttentionRecord<T>& record, int block) {
  if (block < 0 || block >= static_cast<int>(record.blocks.size()))
    throw Error(ErrorCode::InvalidArgument, "head_average: block index out of range");
  if (record.blocks[block].empty()) throw Error(ErrorCode::InvalidArgument, "head_average: empty record");
  std::vector<RolloutMat> heads;
  for (const auto& h : record.blocks[block]) heads.push_back(to_rollout_mat(h));
  return head_average(heads);
}

// Attention Roll-Out: per block blend attention with the residual identity,
// re-normalize rows, and accumulate the product R = A_hat_L * ... * A_hat_1.
inline RolloutMat rollout(const std::vector<RolloutMat>& blocks) {
  if (blocks.empty()) throw Error(ErrorCode::InvalidArgument, "rollout: no blocks");
  const auto n = blocks[0].rows();
  for (const auto& a : blocks)
    if (a.rows() != n || a.cols() != n)
      throw Error(ErrorCode::ShapeMismatch, "rollout: block attention sizes differ");
  RolloutMat result = RolloutMat::Identity(n, n);
  for (const auto& a : blocks) {
    RolloutMat blended = 0.5 * a + 0.5 * RolloutMat::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double row_sum = blended.row(i).sum();
      if (row_sum <= 0.0) throw Error(ErrorCode::InvalidArgument, "rollout: non-positive row sum");
      blended.row(i) /= row_sum;
    }
    result = blended * result;
  }
  return result;
}

template <typename T>
RolloutMat rollout(const AttentionRecord<T>& record) {
  std::vector<RolloutMat> blocks;
  for (size_t l = 0; l < record.blocks.size(); ++l)
    blocks.push_back(head_average(record, static_cast<int>(l)));
  return rollout(blocks);
}

namespace detail {

// Min-max normalization to [0,1]. Maps that are constant up to floating-point
// rounding collapse to all zeros rather than stretching the rounding noise.
inline void min_max_normalize(AttnMap& m) {
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  if (hi - lo <= 1e-12 * std::max({1.0, std::abs(hi), std::abs(lo)})) {
    m.setZero();
    return;
  }
  m = (m.array() - lo) / (hi - lo);
}

}  // namespace detail

// Classification attention map: the cls row of R (cls column dropped),
// reshaped onto the patch lattice and min-max normalized.
inline AttnMap cls_attention_map(const RolloutMat& r, int grid_h, int grid_w) {
  const int n = grid_h * grid_w;
  if (n <= 1) throw Error(ErrorCode::InvalidArgument, "cls_attention_map: degenerate lattice");
  if (r.rows() != n + 1 || r.cols() != n + 1)
    throw Error(ErrorCode::ShapeMismatch, "cls_attention_map: rollout size does not fit the lattice");
  AttnMap map(grid_h, grid_w);
  for (int i = 0; i < n; ++i) map(i / grid_w, i % grid_w) = r(n, i);
  detail::min_max_normalize(map);
  return map;
}

enum class RegionSource { ground_truth, bbox, segmentation };

// Boolean grid aligning a region to tokens; the grid may be at pixel
// resolution (use the image's patch size) or directly on the patch lattice
// (use patch size 1).
struct RegionMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> grid;  // row-major, nonzero = inside region
  RegionSource source = RegionSource::segmentation;

  bool any() const {
    for (uint8_t v : grid)
      if (v) return true;
    return false;
  }
};

// Tokens whose patch footprint contains at least one true mask cell. The
// classification token is never selected.
inline std::vector<int> align_mask(const RegionMask& region, int patch_size, int grid_h, int grid_w) {
  if (region.height != grid_h * patch_size || region.width != grid_w * patch_size ||
      static_cast<int>(region.grid.size()) != region.height * region.width)
    throw Error(ErrorCode::ShapeMismatch, "align_mask: mask extents do not cover the patch lattice");
  std::vector<int> tokens;
  for (int py = 0; py < grid_h; ++py)
    for (int px = 0; px < grid_w; ++px) {
      bool hit = false;
      for (int y = py * patch_size; y < (py + 1) * patch_size && !hit; ++y)
        for (int x = px * patch_size; x < (px + 1) * patch_size && !hit; ++x)
          hit = region.grid[static_cast<size_t>(y) * region.width + x] != 0;
      if (hit) tokens.push_back(py * grid_w + px);
    }
  if (tokens.empty()) throw Error(ErrorCode::EmptySelection, "align_mask: region selects no tokens");
  return tokens;
}

// Tokens whose patch footprint intersects the half-open pixel box
// [x0, x1) x [y0, y1).
inline std::vector<int> align_mask_bbox(int x0, int y0, int x1, int y1, int patch_size, int grid_h,
                                        int grid_w) {
  if (x1 <= x0 || y1 <= y0)
    throw Error(ErrorCode::EmptySelection, "align_mask: empty bounding box");
  std::vector<int> tokens;
  for (int py = 0; py < grid_h; ++py)
    for (int px = 0; px < grid_w; ++px) {
      const int fx0 = px * patch_size, fy0 = py * patch_size;
      if (x0 < fx0 + patch_size && x1 > fx0 && y0 < fy0 + patch_size && y1 > fy0)
        tokens.push_back(py * grid_w + px);
    }
  if (tokens.empty()) throw Error(ErrorCode::EmptySelection, "align_mask: box misses the image");
  return tokens;
}

// Dense Attention Roll-Out: average the rolled-out rows of the selected
// tokens, remove the global content (the mean over all rows), clamp at zero,
// and normalize onto the patch lattice.
inline AttnMap dense_rollout(const RolloutMat& r, const std::vector<int>& tokens, int grid_h,
                             int grid_w) {
  const int n = grid_h * grid_w;
  if (r.rows() != n + 1 || r.cols() != n + 1)
    throw Error(ErrorCode::ShapeMismatch, "dense_rollout: rollout size does not fit the lattice");
  if (tokens.empty()) throw Error(ErrorCode::EmptySelection, "dense_rollout: no tokens selected");
  for (int t : tokens)
    if (t < 0 || t >= n)
      throw Error(ErrorCode::InvalidArgument, "dense_rollout: token index outside the patch range");

  Eigen::RowVectorXd selected = Eigen::RowVectorXd::Zero(n + 1);
  for (int t : tokens) selected += r.row(t);
  selected /= static_cast<double>(tokens.size());
  const Eigen::RowVectorXd global = r.colwise().mean();

  AttnMap map(grid_h, grid_w);
  for (int i = 0; i < n; ++i)
    map(i / grid_w, i % grid_w) = std::max(selected(i) - global(i), 0.0);
  detail::min_max_normalize(map);
  return map;
}

// Row-major [0,1] floats for the grayscale writer.
inline std::vector<float> map_to_floats(const AttnMap& m) {
  std::vector<float> out(static_cast<size_t>(m.rows()) * m.cols());
  for (Eigen::Index y = 0; y < m.rows(); ++y)
    for (Eigen::Index x = 0; x < m.cols(); ++x)
      out[static_cast<size_t>(y) * m.cols() + x] = static_cast<float>(m(y, x));
  return out;
}

}  // namespace lift

#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "lift/life.hpp"

namespace lift {

constexpr double kLayerNormEps = 1e-6;

// Baseline point-wise Q/K/V generator: one affine map of output width 3C.
template <typename T>
struct PffParams {
  Tensor<T> weight;  // 3C x C
  Tensor<T> bias;    // 3C
};

template <typename T>
struct BlockParams {
  Tensor<T> norm1_gamma, norm1_beta;
  std::optional<PffParams<T>> pff;
  std::optional<LifeParams<T>> life;
  Tensor<T> proj_weight, proj_bias;  // C x C, C
  Tensor<T> norm2_gamma, norm2_beta;
  Tensor<T> mlp_fc1_weight, mlp_fc1_bias;  // mC x C, mC
  Tensor<T> mlp_fc2_weight, mlp_fc2_bias;  // C x mC, C
};

template <typename T>
struct ModelParams {
  Tensor<T> patch_weight, patch_bias;  // C x 3p^2, C
  Tensor<T> pos_embed;                 // C x (N+1)
  Tensor<T> cls_token;                 // C x 1
  std::vector<BlockParams<T>> blocks;
  Tensor<T> final_norm_gamma, final_norm_beta;
  Tensor<T> head_weight, head_bias;  // classes x C, classes
};

// Row-stochastic attention matrices captured during a forward pass,
// indexed [block][head].
template <typename T>
struct AttentionRecord {
  std::vector<std::vector<Tensor<T>>> blocks;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;
  AttentionRecord<T> attention;
};

// ---- parameter initialization ----

template <typename T>
ModelParams<T> init_model_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int c = cfg.embed_dim;
  auto trunc_fill = [&](Shape shape) {
    std::vector<T> d(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : d) v = static_cast<T>(rng.trunc_normal(0.02));
    return Tensor<T>::param(std::move(shape), std::move(d));
  };
  auto zeros_param = [&](Shape shape) {
    auto t = Tensor<T>::zeros(std::move(shape));
    t.set_requires_grad(true);
    return t;
  };
  auto ones_param = [&](Shape shape) {
    auto t = Tensor<T>::full(std::move(shape), T(1));
    t.set_requires_grad(true);
    return t;
  };

  ModelParams<T> p;
  const int patch_dim = 3 * cfg.patch_size * cfg.patch_size;
  p.patch_weight = trunc_fill({c, patch_dim});
  p.patch_bias = zeros_param({c});
  p.pos_embed = trunc_fill({c, cfg.tokens()});
  p.cls_token = trunc_fill({c, 1});
  for (int l = 0; l < cfg.depth; ++l) {
    BlockParams<T> b;
    b.norm1_gamma = ones_param({c});
    b.norm1_beta = zeros_param({c});
    if (cfg.qkv_mode == QkvMode::pff) {
      b.pff = PffParams<T>{trunc_fill({3 * c, c}), zeros_param({3 * c})};
    } else {
      b.life = init_life_params<T>(cfg, rng);
    }
    b.proj_weight = trunc_fill({c, c});
    b.proj_bias = zeros_param({c});
    b.norm2_gamma = ones_param({c});
    b.norm2_beta = zeros_param({c});
    const int hidden = cfg.mlp_ratio * c;
    b.mlp_fc1_weight = trunc_fill({hidden, c});
    b.mlp_fc1_bias = zeros_param({hidden});
    b.mlp_fc2_weight = trunc_fill({c, hidden});
    b.mlp_fc2_bias = zeros_param({c});
    p.blocks.push_back(std::move(b));
  }
  p.final_norm_gamma = ones_param({c});
  p.final_norm_beta = zeros_param({c});
  p.head_weight = trunc_fill({cfg.num_classes, c});
  p.head_bias = zeros_param({cfg.num_classes});
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(const ModelParams<T>& p) {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("patch_embed.weight", p.patch_weight);
  out.emplace_back("patch_embed.bias", p.patch_bias);
  out.emplace_back("pos_embed", p.pos_embed);
  out.emplace_back("cls_token", p.cls_token);
  for (size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& b = p.blocks[l];
    const std::string pre = "blocks." + std::to_string(l) + ".";
    out.emplace_back(pre + "norm1.gamma", b.norm1_gamma);
    out.emplace_back(pre + "norm1.beta", b.norm1_beta);
    if (b.pff) {
      out.emplace_back(pre + "qkv.weight", b.pff->weight);
      out.emplace_back(pre + "qkv.bias", b.pff->bias);
    }
    if (b.life) {
      for (size_t s = 0; s < b.life->stages.size(); ++s) {
        const auto& st = b.life->stages[s];
        const std::string sp = pre + "life.stage" + std::to_string(s) + ".";
        if (st.depthwise) {
          out.emplace_back(sp + "dw.kernel", st.depthwise->kernel);
          out.emplace_back(sp + "dw.bias", st.depthwise->bias);
        }
        out.emplace_back(sp + "pw.kernel", st.pointwise.kernel);
        out.emplace_back(sp + "pw.bias", st.pointwise.bias);
      }
    }
    out.emplace_back(pre + "attn.proj.weight", b.proj_weight);
    out.emplace_back(pre + "attn.proj.bias", b.proj_bias);
    out.emplace_back(pre + "norm2.gamma", b.norm2_gamma);
    out.emplace_back(pre + "norm2.beta", b.norm2_beta);
    out.emplace_back(pre + "mlp.fc1.weight", b.mlp_fc1_weight);
    out.emplace_back(pre + "mlp.fc1.bias", b.mlp_fc1_bias);
    out.emplace_back(pre + "mlp.fc2.weight", b.mlp_fc2_weight);
    out.emplace_back(pre + "mlp.fc2.bias", b.mlp_fc2_bias);
  }
  out.emplace_back("final_norm.gamma", p.final_norm_gamma);
  out.emplace_back("final_norm.beta", p.final_norm_beta);
  out.emplace_back("head.weight", p.head_weight);
  out.emplace_back("head.bias", p.head_bias);
  return out;
}

template <typename T>
std::vector<Tensor<T>> parameters(const ModelParams<T>& p) {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_params(p)) out.push_back(t);
  return out;
}

template <typename T>
int64_t parameter_scalars(const ModelParams<T>& p) {
  int64_t n = 0;
  for (const auto& t : parameters(p)) n += t.numel();
  return n;
}

// ---- forward ops ----

// Flattens each non-overlapping patch (channel, then row, then column) into a
// column of a (3 p^2) x N matrix, grid row-major.
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& image, const ModelConfig& cfg) {
  if (image.rank() != 3 || image.shape()[0] != 3 || image.shape()[1] != cfg.image_size ||
      image.shape()[2] != cfg.image_size)
    throw Error(ErrorCode::ShapeMismatch, "image must be 3x" + std::to_string(cfg.image_size) + "x" +
                                              std::to_string(cfg.image_size) + ", got " +
                                              shape_str(image.shape()));
  const int p = cfg.patch_size, g = cfg.grid(), n = cfg.num_patches();
  const int patch_dim = 3 * p * p;
  std::vector<T> out(static_cast<size_t>(patch_dim) * n);
  const T* img = image.data().data();
  const int s = cfg.image_size;
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      const int col = py * g + px;
      for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < p; ++y)
          for (int x = 0; x < p; ++x) {
            const int row = (ch * p + y) * p + x;
            out[static_cast<size_t>(row) * n + col] =
                img[(static_cast<int64_t>(ch) * s + py * p + y) * s + px * p + x];
          }
    }
  return Tensor<T>::from_data({patch_dim, n}, std::move(out));
}

// Token matrix assembly: projected patches, positional embeddings, and the
// classification token appended last (index N).
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& image, const ModelConfig& cfg, const ModelParams<T>& params) {
  auto patches = extract_patches(image, cfg);
  auto x_patch = add_bias(matmul(params.patch_weight, patches), params.patch_bias);
  auto x = concat<T>({x_patch, params.cls_token}, 1);
  return add(x, params.pos_embed);
}

template <typename T>
Qkv<T> pff_qkv(const Tensor<T>& x, const PffParams<T>& pff) {
  const int c = x.shape()[0];
  if (pff.weight.shape() != Shape{3 * c, c} || pff.bias.shape() != Shape{3 * c})
    throw Error(ErrorCode::ShapeMismatch, "pff parameters must have width 3C, got " +
                                              shape_str(pff.weight.shape()));
  auto stacked = add_bias(matmul(pff.weight, x), pff.bias);
  auto thirds = split(stacked, 0, 3);
  return {thirds[0], thirds[1], thirds[2]};
}

template <typename T>
struct MhsaResult {
  Tensor<T> out;
  std::vector<Tensor<T>> attention;  // per head, (N+1) x (N+1)
};

// Scaled dot-product attention per head over channel slices, concatenated and
// passed through the output projection.
template <typename T>
MhsaResult<T> mhsa(const Qkv<T>& qkv, int num_heads, const Tensor<T>& proj_weight,
                   const Tensor<T>& proj_bias) {
  const int c = qkv.q.shape()[0];
  if (c % num_heads != 0)
    throw Error(ErrorCode::InvalidArgument, "embedding width " + std::to_string(c) +
                                                " not divisible by " + std::to_string(num_heads) + " heads");
  const int dh = c / num_heads;
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
  auto q_heads = split(qkv.q, 0, num_heads);
  auto k_heads = split(qkv.k, 0, num_heads);
  auto v_heads = split(qkv.v, 0, num_heads);
  std::vector<Tensor<T>> head_outs, attention;
  for (int h = 0; h < num_heads; ++h) {
    auto logits = scale(matmul(transpose(q_heads[h]), k_heads[h]), inv_sqrt_dh);
    auto attn = softmax(logits, 1);
    attention.push_back(attn);
    head_outs.push_back(matmul(attn, transpose(v_heads[h])));  // T x dh
  }
  auto merged = transpose(concat(head_outs, 1));  // C x T
  return {add_bias(matmul(proj_weight, merged), proj_bias), std::move(attention)};
}

namespace detail {

// Dropout as a sampled mask multiply; identity when disabled.
template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, double rate, Rng* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  std::vector<T> mask(static_cast<size_t>(x.numel()));
  const T keep = T(1) / static_cast<T>(1.0 - rate);
  for (auto& v : mask) v = rng->uniform01() < rate ? T(0) : keep;
  return mul(x, Tensor<T>::from_data(x.shape(), std::move(mask)));
}

}  // namespace detail

template <typename T>
struct BlockResult {
  Tensor<T> tokens;
  std::vector<Tensor<T>> attention;
};

// Pre-normalized residual block: X' = X + MHSA(QKV(norm(X))),
// X_out = X' + MLP(norm(X')). QKV dispatches on the configured generator.
template <typename T>
BlockResult<T> transformer_block(const Tensor<T>& x, const ModelConfig& cfg, const BlockParams<T>& b,
                                 Rng* dropout_rng = nullptr) {
  auto normed = layer_norm(x, b.norm1_gamma, b.norm1_beta, T(kLayerNormEps));
  Qkv<T> qkv;
  switch (cfg.qkv_mode) {
    case QkvMode::pff:
      qkv = pff_qkv(normed, *b.pff);
      break;
    case QkvMode::life:
      qkv = life_qkv(normed, *b.life, cfg.grid(), cfg.grid());
      break;
    case QkvMode::life_onescale:
      qkv = life_onescale_qkv(normed, *b.life, cfg.grid(), cfg.grid());
      break;
  }
  auto attn = mhsa(qkv, cfg.num_heads, b.proj_weight, b.proj_bias);
  auto x1 = add(x, detail::maybe_dropout(attn.out, cfg.dropout, dropout_rng));
  auto normed2 = layer_norm(x1, b.norm2_gamma, b.norm2_beta, T(kLayerNormEps));
  auto hidden = gelu(add_bias(matmul(b.mlp_fc1_weight, normed2), b.mlp_fc1_bias));
  auto mlp_out = add_bias(matmul(b.mlp_fc2_weight, hidden), b.mlp_fc2_bias);
  auto out = add(x1, detail::maybe_dropout(mlp_out, cfg.dropout, dropout_rng));
  return {out, std::move(attn.attention)};
}

// Full forward pass: logits from the final classification-token column plus
// the attention maps of every block.
template <typename T>
ForwardResult<T> forward(const Tensor<T>& image, const ModelConfig& cfg, const ModelParams<T>& params,
                         Rng* dropout_rng = nullptr) {
  auto x = patch_embed(image, cfg, params);
  x = detail::maybe_dropout(x, cfg.dropout, dropout_rng);
  AttentionRecord<T> record;
  for (const auto& b : params.blocks) {
    auto res = transformer_block(x, cfg, b, dropout_rng);
    x = res.tokens;
    record.blocks.push_back(std::move(res.attention));
  }
  x = layer_norm(x, params.final_norm_gamma, params.final_norm_beta, T(kLayerNormEps));
  auto cls_col = split_sizes(x, 1, {cfg.num_patches(), 1})[1];
  auto logits = add_bias(reshape(matmul(params.head_weight, cls_col), {cfg.num_classes}),
                         params.head_bias);
  return {logits, std::move(record)};
}

// Convenience bundle used by training, checkpointing and the CLI.
template <typename T>
struct VitModel {
  ModelConfig cfg;
  ModelParams<T> params;

  static VitModel init(const ModelConfig& cfg, uint64_t seed) {
    return {cfg, init_model_params<T>(cfg, seed)};
  }
};

}  // namespace lift

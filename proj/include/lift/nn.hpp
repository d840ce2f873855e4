#pragma once

#include <cmath>
#include <numbers>

#include "lift/tensor.hpp"

namespace lift {

// Convolution parameters. Standard kernels are out_channels x in_channels x k x k;
// depthwise kernels are channels x 1 x k x k with one group per channel.
template <typename T>
struct ConvWeights {
  Tensor<T> kernel;
  Tensor<T> bias;
  bool depthwise = false;

  int out_channels() const { return kernel.shape()[0]; }
  int in_channels() const { return kernel.shape()[1]; }
  int k() const { return kernel.shape()[2]; }

  void validate() const {
    if (kernel.rank() != 4 || kernel.shape()[2] != kernel.shape()[3])
      throw Error(ErrorCode::InvalidArgument, "conv kernel must be OxIxKxK, got " + shape_str(kernel.shape()));
    if (k() % 2 == 0) throw Error(ErrorCode::InvalidArgument, "conv kernel size must be odd");
    if (bias.rank() != 1 || bias.shape()[0] != out_channels())
      throw Error(ErrorCode::ShapeMismatch, "conv bias length must equal out_channels");
    if (depthwise && in_channels() != 1)
      throw Error(ErrorCode::InvalidArgument, "depthwise kernel must have a singleton in_channels dim");
  }
};

// Zero-padded cross-correlation over a C_in x H x W input.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvWeights<T>& w, int stride, int pad) {
  w.validate();
  if (w.depthwise) throw Error(ErrorCode::InvalidArgument, "use depthwise_conv2d for depthwise weights");
  if (input.rank() != 3)
    throw Error(ErrorCode::ShapeMismatch, "conv2d expects CxHxW input, got " + shape_str(input.shape()));
  const int cin = input.shape()[0], h = input.shape()[1], ww = input.shape()[2];
  const int cout = w.out_channels(), k = w.k();
  if (w.in_channels() != cin)
    throw Error(ErrorCode::ShapeMismatch, "conv2d: input has " + std::to_string(cin) +
                                              " channels but kernel expects " + std::to_string(w.in_channels()));
  if (stride <= 0 || pad < 0) throw Error(ErrorCode::InvalidArgument, "conv2d: bad stride/pad");
  if (h + 2 * pad < k || ww + 2 * pad < k)
    throw Error(ErrorCode::InvalidArgument, "conv2d: kernel larger than padded input");
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (ww + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw Error(ErrorCode::InvalidArgument, "conv2d: non-positive output extent");

  const Tensor<T> kernel = w.kernel, bias = w.bias;
  std::vector<T> out(static_cast<size_t>(cout) * ho * wo);

  if (k == 1 && stride == 1 && pad == 0) {
    // Pointwise convolution is a per-pixel linear map.
    const int64_t hw = static_cast<int64_t>(h) * ww;
    detail::CMatMap<T> K(kernel.data().data(), cout, cin), X(input.data().data(), cin, hw);
    detail::MatMap<T> O(out.data(), cout, hw);
    O.noalias() = K * X;
    for (int oc = 0; oc < cout; ++oc) O.row(oc).array() += bias.data()[oc];
    return make_op_result<T>(
        {cout, ho, wo}, std::move(out), "conv2d", {input, kernel, bias},
        [input, kernel, bias, cin, cout, hw](const std::vector<T>&, const std::vector<T>& g) mutable {
          detail::CMatMap<T> K(kernel.data().data(), cout, cin), X(input.data().data(), cin, hw),
              G(g.data(), cout, hw);
          if (input.tracked())
            detail::MatMap<T>(input.ensure_grad().data(), cin, hw).noalias() += K.transpose() * G;
          if (kernel.tracked())
            detail::MatMap<T>(kernel.ensure_grad().data(), cout, cin).noalias() += G * X.transpose();
          if (bias.tracked()) {
            auto& gb = bias.ensure_grad();
            for (int oc = 0; oc < cout; ++oc) gb[oc] += G.row(oc).sum();
          }
        });
  }

  const T* in = input.data().data();
  const T* ker = kernel.data().data();
  for (int oc = 0; oc < cout; ++oc)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T acc = bias.data()[oc];
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= ww) continue;
              acc += in[(static_cast<int64_t>(ic) * h + iy) * ww + ix] *
                     ker[((static_cast<int64_t>(oc) * cin + ic) * k + ky) * k + kx];
            }
          }
        out[(static_cast<int64_t>(oc) * ho + oy) * wo + ox] = acc;
      }

  return make_op_result<T>(
      {cout, ho, wo}, std::move(out), "conv2d", {input, kernel, bias},
      [input, kernel, bias, cin, cout, h, ww, ho, wo, k, stride, pad](const std::vector<T>&,
                                                                      const std::vector<T>& g) mutable {
        const T* in = input.data().data();
        const T* ker = kernel.data().data();
        std::vector<T>* gi = input.tracked() ? &input.ensure_grad() : nullptr;
        std::vector<T>* gk = kernel.tracked() ? &kernel.ensure_grad() : nullptr;
        std::vector<T>* gb = bias.tracked() ? &bias.ensure_grad() : nullptr;
        for (int oc = 0; oc < cout; ++oc)
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              const T go = g[(static_cast<int64_t>(oc) * ho + oy) * wo + ox];
              if (gb) (*gb)[oc] += go;
              for (int ic = 0; ic < cin; ++ic)
                for (int ky = 0; ky < k; ++ky) {
                  const int iy = oy * stride + ky - pad;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= ww) continue;
                    const int64_t ii = (static_cast<int64_t>(ic) * h + iy) * ww + ix;
                    const int64_t ki = ((static_cast<int64_t>(oc) * cin + ic) * k + ky) * k + kx;
                    if (gi) (*gi)[ii] += go * ker[ki];
                    if (gk) (*gk)[ki] += go * in[ii];
                  }
                }
            }
      });
}

// Per-channel spatial convolution, stride 1, resolution preserving.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const ConvWeights<T>& w, int pad) {
  w.validate();
  if (!w.depthwise) throw Error(ErrorCode::InvalidArgument, "depthwise_conv2d requires depthwise weights");
  if (input.rank() != 3)
    throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d expects CxHxW input");
  const int c = input.shape()[0], h = input.shape()[1], ww = input.shape()[2];
  const int k = w.k();
  if (w.out_channels() != c)
    throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d: kernel has " + std::to_string(w.out_channels()) +
                                              " channels but input has " + std::to_string(c));
  if (2 * pad != k - 1)
    throw Error(ErrorCode::InvalidArgument, "depthwise_conv2d: pad must preserve resolution (2*pad == k-1)");

  const Tensor<T> kernel = w.kernel, bias = w.bias;
  std::vector<T> out(input.data().size());
  const T* in = input.data().data();
  const T* ker = kernel.data().data();
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < ww; ++ox) {
        T acc = bias.data()[ch];
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox + kx - pad;
            if (ix < 0 || ix >= ww) continue;
            acc += in[(static_cast<int64_t>(ch) * h + iy) * ww + ix] *
                   ker[(static_cast<int64_t>(ch) * k + ky) * k + kx];
          }
        }
        out[(static_cast<int64_t>(ch) * h + oy) * ww + ox] = acc;
      }

  return make_op_result<T>(
      input.shape(), std::move(out), "depthwise_conv2d", {input, kernel, bias},
      [input, kernel, bias, c, h, ww, k, pad](const std::vector<T>&, const std::vector<T>& g) mutable {
        const T* in = input.data().data();
        const T* ker = kernel.data().data();
        std::vector<T>* gi = input.tracked() ? &input.ensure_grad() : nullptr;
        std::vector<T>* gk = kernel.tracked() ? &kernel.ensure_grad() : nullptr;
        std::vector<T>* gb = bias.tracked() ? &bias.ensure_grad() : nullptr;
        for (int ch = 0; ch < c; ++ch)
          for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < ww; ++ox) {
              const T go = g[(static_cast<int64_t>(ch) * h + oy) * ww + ox];
              if (gb) (*gb)[ch] += go;
              for (int ky = 0; ky < k; ++ky) {
                const int iy = oy + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                  const int ix = ox + kx - pad;
                  if (ix < 0 || ix >= ww) continue;
                  const int64_t ii = (static_cast<int64_t>(ch) * h + iy) * ww + ix;
                  const int64_t ki = (static_cast<int64_t>(ch) * k + ky) * k + kx;
                  if (gi) (*gi)[ii] += go * ker[ki];
                  if (gk) (*gk)[ki] += go * in[ii];
                }
              }
            }
      });
}

// Numerically stable softmax along one axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  if (axis < 0 || axis >= x.rank())
    throw Error(ErrorCode::InvalidArgument, "softmax: axis " + std::to_string(axis) + " out of range for " +
                                                shape_str(x.shape()));
  const int extent = x.shape()[axis];
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (int d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

  std::vector<T> out(x.data().size());
  const T* in = x.data().data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * extent * inner + i;
      T m = in[base];
      for (int j = 1; j < extent; ++j) m = std::max(m, in[base + j * inner]);
      T z = 0;
      for (int j = 0; j < extent; ++j) {
        const T e = std::exp(in[base + j * inner] - m);
        out[base + j * inner] = e;
        z += e;
      }
      for (int j = 0; j < extent; ++j) out[base + j * inner] /= z;
    }

  return make_op_result<T>(
      x.shape(), std::move(out), "softmax", {x},
      [x, outer, inner, extent](const std::vector<T>& y, const std::vector<T>& g) mutable {
        if (!x.tracked()) return;
        auto& gx = x.ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * extent * inner + i;
            T dot = 0;
            for (int j = 0; j < extent; ++j) dot += g[base + j * inner] * y[base + j * inner];
            for (int j = 0; j < extent; ++j)
              gx[base + j * inner] += y[base + j * inner] * (g[base + j * inner] - dot);
          }
      });
}

// Layer normalization over the leading (channel) axis of each slice, followed
// by the per-channel affine map gamma * xhat + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (eps <= 0) throw Error(ErrorCode::InvalidArgument, "layer_norm: eps must be positive");
  const int c = x.shape()[0];
  if (gamma.rank() != 1 || gamma.shape()[0] != c || beta.rank() != 1 || beta.shape()[0] != c)
    throw Error(ErrorCode::ShapeMismatch, "layer_norm: gamma/beta must be length-" + std::to_string(c) +
                                              " vectors");
  const int64_t inner = x.numel() / c;
  std::vector<T> out(x.data().size());
  std::vector<T> mu(inner), rstd(inner);
  const T* in = x.data().data();
  for (int64_t i = 0; i < inner; ++i) {
    T m = 0;
    for (int ch = 0; ch < c; ++ch) m += in[ch * inner + i];
    m /= static_cast<T>(c);
    T v = 0;
    for (int ch = 0; ch < c; ++ch) {
      const T d = in[ch * inner + i] - m;
      v += d * d;
    }
    v /= static_cast<T>(c);
    mu[i] = m;
    rstd[i] = T(1) / std::sqrt(v + eps);
    for (int ch = 0; ch < c; ++ch)
      out[ch * inner + i] = gamma.data()[ch] * (in[ch * inner + i] - m) * rstd[i] + beta.data()[ch];
  }

  return make_op_result<T>(
      x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
      [x, gamma, beta, c, inner, mu, rstd](const std::vector<T>&, const std::vector<T>& g) mutable {
        const T* in = x.data().data();
        std::vector<T>* gx = x.tracked() ? &x.ensure_grad() : nullptr;
        std::vector<T>* gg = gamma.tracked() ? &gamma.ensure_grad() : nullptr;
        std::vector<T>* gb = beta.tracked() ? &beta.ensure_grad() : nullptr;
        for (int64_t i = 0; i < inner; ++i) {
          const T rs = rstd[i], m = mu[i];
          T sum_dxhat = 0, sum_dxhat_xhat = 0;
          for (int ch = 0; ch < c; ++ch) {
            const T xhat = (in[ch * inner + i] - m) * rs;
            const T dxhat = g[ch * inner + i] * gamma.data()[ch];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            if (gg) (*gg)[ch] += g[ch * inner + i] * xhat;
            if (gb) (*gb)[ch] += g[ch * inner + i];
          }
          if (gx)
            for (int ch = 0; ch < c; ++ch) {
              const T xhat = (in[ch * inner + i] - m) * rs;
              const T dxhat = g[ch * inner + i] * gamma.data()[ch];
              (*gx)[ch * inner + i] +=
                  rs * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / static_cast<T>(c));
            }
        }
      });
}

// Exact (erf-based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(0.70710678118654752440);
  std::vector<T> out(x.data());
  for (auto& v : out) v = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  return make_op_result<T>(
      x.shape(), std::move(out), "gelu", {x},
      [x](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (!x.tracked()) return;
        constexpr T inv_sqrt2 = T(0.70710678118654752440);
        const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        auto& gx = x.ensure_grad();
        for (size_t i = 0; i < gx.size(); ++i) {
          const T v = x.data()[i];
          const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
          const T pdf = std::exp(T(-0.5) * v * v) * inv_sqrt2pi;
          gx[i] += g[i] * (cdf + v * pdf);
        }
      });
}

// Softmax cross-entropy of a single logit vector against an integer label.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, int label) {
  if (logits.rank() > 2 || (logits.rank() == 2 && logits.shape()[1] != 1))
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy expects a logit vector, got " +
                                              shape_str(logits.shape()));
  const int k = logits.shape()[0];
  if (label < 0 || label >= k)
    throw Error(ErrorCode::LabelOutOfRange,
                "label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
  const T* in = logits.data().data();
  T m = in[0];
  for (int j = 1; j < k; ++j) m = std::max(m, in[j]);
  T z = 0;
  for (int j = 0; j < k; ++j) z += std::exp(in[j] - m);
  const T lse = m + std::log(z);
  return make_op_result<T>(
      {1}, {lse - in[label]}, "softmax_cross_entropy", {logits},
      [logits, label, m, z, k](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (!logits.tracked()) return;
        auto& gl = logits.ensure_grad();
        const T* in = logits.data().data();
        for (int j = 0; j < k; ++j) {
          const T p = std::exp(in[j] - m) / z;
          gl[j] += g[0] * (p - (j == label ? T(1) : T(0)));
        }
      });
}

}  // namespace lift

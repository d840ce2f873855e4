#pragma once

// Seeded finite-difference sweeps over every differentiable op in the tensor
// core. Shared by the unit suite and the acceptance runner.

#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lift/nn.hpp"
#include "lift/rng.hpp"

namespace gradcheck {

struct OpCheck {
  std::string name;
  double max_err = 0.0;
};

namespace detail {

inline lift::Tensor<double> rand_param(lift::Shape shape, lift::Rng& rng) {
  std::vector<double> d(static_cast<size_t>(lift::shape_numel(shape)));
  for (auto& v : d) v = rng.normal();
  return lift::Tensor<double>::param(std::move(shape), std::move(d));
}

inline lift::Tensor<double> rand_const(lift::Shape shape, lift::Rng& rng) {
  auto t = rand_param(std::move(shape), rng);
  t.set_requires_grad(false);
  return t;
}

// Scalarizes a forward function with a fixed random linear functional, runs
// backward once, and compares every input's gradient against the oracle.
template <typename Fwd>
double check_op(Fwd&& fwd, std::vector<lift::Tensor<double>> inputs, lift::Rng& rng) {
  auto probe = fwd();
  auto mixer = rand_const(probe.shape(), rng);
  auto build = [&] { return lift::sum(lift::mul(fwd(), mixer)); };
  for (auto& in : inputs) in.zero_grad();
  auto loss = build();
  lift::backward(loss);
  double worst = 0.0;
  for (auto& in : inputs)
    worst = std::max(worst, max_grad_err([&] { return build().item(); }, in));
  return worst;
}

// Same, for a forward function that is already scalar.
template <typename Fwd>
double check_scalar_op(Fwd&& fwd, std::vector<lift::Tensor<double>> inputs) {
  for (auto& in : inputs) in.zero_grad();
  auto loss = fwd();
  lift::backward(loss);
  double worst = 0.0;
  for (auto& in : inputs)
    worst = std::max(worst, max_grad_err([&] { return fwd().item(); }, in));
  return worst;
}

}  // namespace detail

inline std::vector<OpCheck> run_op_gradchecks(int instances_per_op = 20) {
  using lift::Tensor;
  using detail::rand_param;
  using detail::rand_const;
  std::vector<OpCheck> results;
  auto record = [&](const std::string& name, double err) {
    for (auto& r : results)
      if (r.name == name) {
        r.max_err = std::max(r.max_err, err);
        return;
      }
    results.push_back({name, err});
  };

  for (int inst = 0; inst < instances_per_op; ++inst) {
    lift::Rng rng(1000 + inst);
    const int a = 1 + rng.uniform_int(4), b = 1 + rng.uniform_int(4), c = 1 + rng.uniform_int(4);

    {
      auto x = rand_param({a, b}, rng), y = rand_param({a, b}, rng);
      record("add", detail::check_op([&] { return lift::add(x, y); }, {x, y}, rng));
    }
    {
      auto x = rand_param({a, b}, rng), y = rand_param({a, b}, rng);
      record("sub", detail::check_op([&] { return lift::sub(x, y); }, {x, y}, rng));
    }
    {
      auto x = rand_param({a, b}, rng), y = rand_param({a, b}, rng);
      record("mul", detail::check_op([&] { return lift::mul(x, y); }, {x, y}, rng));
    }
    {
      auto x = rand_param({a, b}, rng);
      const double s = rng.normal();
      record("scale", detail::check_op([&] { return lift::scale(x, s); }, {x}, rng));
    }
    {
      auto x = rand_param({a, b}, rng), y = rand_param({b, c}, rng);
      record("matmul", detail::check_op([&] { return lift::matmul(x, y); }, {x, y}, rng));
    }
    {
      auto x = rand_param({a, b}, rng), y = rand_param({c, b}, rng);
      record("concat", detail::check_op(
                           [&] { return lift::concat(std::vector<Tensor<double>>{x, y}, 0); }, {x, y},
                           rng));
    }
    {
      auto x = rand_param({2 * a, b}, rng);
      auto m0 = rand_const({a, b}, rng), m1 = rand_const({a, b}, rng);
      record("split", detail::check_scalar_op(
                          [&] {
                            auto parts = lift::split(x, 0, 2);
                            return lift::add(lift::sum(lift::mul(parts[0], m0)),
                                             lift::sum(lift::mul(parts[1], m1)));
                          },
                          {x}));
    }
    {
      auto x = rand_param({a, b, 2}, rng);
      record("reshape", detail::check_op([&] { return lift::reshape(x, {2 * a, b}); }, {x}, rng));
    }
    {
      auto x = rand_param({a, b, c}, rng);
      record("permute", detail::check_op([&] { return lift::permute(x, {2, 0, 1}); }, {x}, rng));
    }
    {
      auto x = rand_param({a, b}, rng), bias = rand_param({a}, rng);
      record("add_bias", detail::check_op([&] { return lift::add_bias(x, bias); }, {x, bias}, rng));
    }
    {
      auto x = rand_param({a, b}, rng);
      record("sum", detail::check_scalar_op([&] { return lift::sum(x); }, {x}));
      record("mean", detail::check_scalar_op([&] { return lift::mean(lift::mul(x, x)); }, {x}));
    }
    {
      const int cin = 1 + rng.uniform_int(3), cout = 1 + rng.uniform_int(3);
      const int k = 1 + 2 * rng.uniform_int(2);
      const int h = k + 1 + rng.uniform_int(3), w = k + 1 + rng.uniform_int(3);
      const int pad = rng.uniform_int(2), stride = 1 + rng.uniform_int(2);
      auto x = rand_param({cin, h, w}, rng);
      auto ker = rand_param({cout, cin, k, k}, rng);
      auto bias = rand_param({cout}, rng);
      record("conv2d",
             detail::check_op(
                 [&] { return lift::conv2d(x, lift::ConvWeights<double>{ker, bias, false}, stride, pad); },
                 {x, ker, bias}, rng));
    }
    {
      const int ch = 1 + rng.uniform_int(3), k = 1 + 2 * rng.uniform_int(2);
      const int h = k + rng.uniform_int(3), w = k + rng.uniform_int(3);
      auto x = rand_param({ch, h, w}, rng);
      auto ker = rand_param({ch, 1, k, k}, rng);
      auto bias = rand_param({ch}, rng);
      record("depthwise_conv2d",
             detail::check_op(
                 [&] {
                   return lift::depthwise_conv2d(x, lift::ConvWeights<double>{ker, bias, true},
                                                 (k - 1) / 2);
                 },
                 {x, ker, bias}, rng));
    }
    {
      auto x = rand_param({a, b}, rng);
      const int axis = rng.uniform_int(2);
      record("softmax", detail::check_op([&] { return lift::softmax(x, axis); }, {x}, rng));
    }
    {
      // With few channels and tiny eps the oracle's truncation error blows up
      // near zero-variance slices; a moderate eps keeps the check meaningful.
      const int ch = 4 + rng.uniform_int(4);
      auto x = rand_param({ch, b}, rng);
      auto gamma = rand_param({ch}, rng);
      auto beta = rand_param({ch}, rng);
      record("layer_norm",
             detail::check_op([&] { return lift::layer_norm(x, gamma, beta, 1e-3); }, {x, gamma, beta},
                              rng));
    }
    {
      auto x = rand_param({a, b}, rng);
      record("gelu", detail::check_op([&] { return lift::gelu(x); }, {x}, rng));
    }
    {
      const int k = 2 + rng.uniform_int(5);
      auto logits = rand_param({k}, rng);
      const int label = rng.uniform_int(k);
      record("softmax_cross_entropy",
             detail::check_scalar_op([&] { return lift::softmax_cross_entropy(logits, label); },
                                     {logits}));
    }
  }
  return results;
}

}  // namespace gradcheck

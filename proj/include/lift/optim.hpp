#pragma once

#include <unordered_map>

#include "lift/tensor.hpp"

namespace lift {

enum class OptimizerKind { sgd_momentum, adamw };

// Parameter updater with per-tensor state buffers keyed by the underlying
// storage. Gradients are cleared after each step.
template <typename T>
class Optimizer {
 public:
  OptimizerKind kind = OptimizerKind::adamw;
  T learning_rate = T(1e-3);
  T momentum = T(0.9);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(0);

  static Optimizer sgd(T lr, T momentum_ = T(0.9), T weight_decay_ = T(0)) {
    Optimizer o;
    o.kind = OptimizerKind::sgd_momentum;
    o.learning_rate = lr;
    o.momentum = momentum_;
    o.weight_decay = weight_decay_;
    return o;
  }

  static Optimizer adamw(T lr, T weight_decay_ = T(0)) {
    Optimizer o;
    o.kind = OptimizerKind::adamw;
    o.learning_rate = lr;
    o.weight_decay = weight_decay_;
    return o;
  }

  int64_t step_count() const { return step_count_; }

  void validate() const {
    if (learning_rate < 0) throw Error(ErrorCode::InvalidArgument, "learning_rate must be non-negative");
    if (kind == OptimizerKind::adamw && (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || eps <= 0))
      throw Error(ErrorCode::InvalidArgument, "adamw betas must lie in (0,1) and eps must be positive");
    if (kind == OptimizerKind::sgd_momentum && (momentum < 0 || momentum >= 1))
      throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0,1)");
    if (weight_decay < 0) throw Error(ErrorCode::InvalidArgument, "weight_decay must be non-negative");
  }

  void step(std::vector<Tensor<T>>& params) {
    validate();
    for (auto& p : params)
      if (!p.has_grad())
        throw Error(ErrorCode::MissingGradient, "optimizer step with a gradient-free parameter");
    ++step_count_;
    for (auto& p : params) {
      auto& x = p.mutable_data();
      const auto& g = p.grad();
      if (kind == OptimizerKind::sgd_momentum) {
        auto& v = state_buffer(p, 0);
        for (size_t i = 0; i < x.size(); ++i) {
          const T geff = g[i] + weight_decay * x[i];
          v[i] = momentum * v[i] + geff;
          x[i] -= learning_rate * v[i];
        }
      } else {
        auto& m = state_buffer(p, 0);
        auto& v = state_buffer(p, 1);
        const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step_count_));
        const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step_count_));
        for (size_t i = 0; i < x.size(); ++i) {
          m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
          v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
          const T mhat = m[i] / bc1;
          const T vhat = v[i] / bc2;
          x[i] -= learning_rate * (mhat / (std::sqrt(vhat) + eps) + weight_decay * x[i]);
        }
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<T>& state_buffer(const Tensor<T>& p, int slot) {
    auto& slots = state_[p.impl()];
    if (slots.size() < 2) slots.resize(2);
    if (slots[slot].empty()) slots[slot].assign(p.data().size(), T(0));
    return slots[slot];
  }

  int64_t step_count_ = 0;
  std::unordered_map<const TensorImpl<T>*, std::vector<std::vector<T>>> state_;
};

}  // namespace lift

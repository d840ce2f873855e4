#pragma once

#include "lift/dataset.hpp"
#include "lift/optim.hpp"
#include "lift/vit.hpp"

namespace lift {

struct EpochMetrics {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

template <typename T>
Tensor<T> to_scalar(const Tensor<float>& x) {
  if constexpr (std::is_same_v<T, float>) return x;
  std::vector<T> d(x.data().begin(), x.data().end());
  return Tensor<T>::from_data(x.shape(), std::move(d));
}

template <typename T>
int argmax_label(const Tensor<T>& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.numel()); ++i)
    if (logits.data()[i] > logits.data()[best]) best = i;
  return best;
}

// Mean cross-entropy and accuracy over a dataset, without building graphs.
template <typename T>
EpochMetrics evaluate(const VitModel<T>& model, const std::vector<Sample>& data) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "evaluate: empty dataset");
  NoGradGuard guard;
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (const auto& s : data) {
    auto res = forward(to_scalar<T>(s.image), model.cfg, model.params);
    loss_sum += static_cast<double>(softmax_cross_entropy(res.logits, s.label).item());
    if (argmax_label(res.logits) == s.label) ++correct;
  }
  return {loss_sum / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

// One pass over the dataset in seeded shuffled order, stepping the optimizer
// per batch. Per-sample losses are scaled by the batch size so gradients
// accumulate into the batch mean. The reported accuracy is an evaluation pass
// over the same data after the epoch's updates, so a later `eval` on this
// split reproduces it exactly.
template <typename T>
EpochMetrics train_epoch(VitModel<T>& model, const std::vector<Sample>& data, Optimizer<T>& opt,
                         int batch_size, Rng& rng) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "train_epoch: empty dataset");
  if (batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "train_epoch: batch_size must be positive");
  std::vector<int> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  auto params = parameters(model.params);
  Rng* dropout_rng = model.cfg.dropout > 0.0 ? &rng : nullptr;
  double loss_sum = 0.0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));
    const T inv_batch = T(1) / static_cast<T>(stop - start);
    for (size_t i = start; i < stop; ++i) {
      const Sample& s = data[static_cast<size_t>(order[i])];
      auto res = forward(to_scalar<T>(s.image), model.cfg, model.params, dropout_rng);
      auto ce = softmax_cross_entropy(res.logits, s.label);
      loss_sum += static_cast<double>(ce.item());
      backward(scale(ce, inv_batch));
    }
    opt.step(params);
  }
  EpochMetrics m;
  m.mean_loss = loss_sum / static_cast<double>(data.size());
  m.accuracy = evaluate(model, data).accuracy;
  return m;
}

}  // namespace lift

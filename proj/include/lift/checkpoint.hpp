#pragma once

#include "lift/io.hpp"
#include "lift/vit.hpp"

namespace lift {

inline void save_model(const std::string& path, const VitModel<float>& model) {
  write_checkpoint(path, named_params(model.params));
}

// Loads a checkpoint into an already-constructed model, rejecting any
// name-set or shape disagreement with the target configuration.
inline void load_model(const std::string& path, VitModel<float>& model) {
  const auto loaded = read_checkpoint(path);
  auto target = named_params(model.params);
  if (loaded.size() != target.size())
    throw Error(ErrorCode::NameMismatch,
                "checkpoint has " + std::to_string(loaded.size()) + " parameters, config expects " +
                    std::to_string(target.size()));
  for (size_t i = 0; i < target.size(); ++i) {
    auto& [name, tensor] = target[i];
    const auto it = std::find_if(loaded.begin(), loaded.end(),
                                 [&](const auto& e) { return e.first == name; });
    if (it == loaded.end())
      throw Error(ErrorCode::NameMismatch, "checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != tensor.shape())
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + name + "' has shape " +
                                                shape_str(it->second.shape()) + ", config expects " +
                                                shape_str(tensor.shape()));
    tensor.mutable_data() = it->second.data();
  }
}

}  // namespace lift

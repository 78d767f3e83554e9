#pragma once

#include <map>
#include <string>
#include <vector>

#include "webrpg/nn/tensor.hpp"

namespace webrpg::nn {

// Binary container of named tensors plus a JSON sidecar (written to
// path + ".json") carrying whatever configuration the model wants to pin.
struct Checkpoint {
  std::map<std::string, TensorPtr> tensors;
  std::string config_json;
};

void save_checkpoint(const std::string& path,
                     const std::vector<TensorPtr>& tensors,
                     const std::string& config_json);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into same-named parameters; every parameter must
// be present with a matching shape (CheckpointError otherwise).
void restore_params(const Checkpoint& ckpt,
                    const std::vector<TensorPtr>& params);

}  // namespace webrpg::nn

#pragma once

#include <vector>

#include "webrpg/nn/tensor.hpp"

namespace webrpg::nn {

struct OptimizerConfig {
  real lr = 1.2e-4;
  real beta1 = 0.9;
  real beta2 = 0.99;
  real weight_decay = 0.0;
  real eps = 1e-8;
};

// AdamW: bias-corrected Adam moments plus decoupled weight decay applied
// directly to the parameter (never through the moments).
class AdamW {
 public:
  AdamW(std::vector<TensorPtr> params, OptimizerConfig config = {});

  void step();       // consumes .grad, updates .value
  void zero_grad();  // clears all parameter grads

  const OptimizerConfig& config() const { return config_; }
  long long step_count() const { return t_; }

 private:
  std::vector<TensorPtr> params_;
  OptimizerConfig config_;
  std::vector<std::vector<real>> m_;
  std::vector<std::vector<real>> v_;
  long long t_ = 0;
};

}  // namespace webrpg::nn

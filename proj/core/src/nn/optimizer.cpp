#include "webrpg/nn/optimizer.hpp"

#include <Eigen/Core>
#include <cmath>

#include "webrpg/errors.hpp"

namespace webrpg::nn {

namespace {
using Arr = Eigen::Array<real, Eigen::Dynamic, 1>;
using ArrMap = Eigen::Map<Arr>;
using ConstArrMap = Eigen::Map<const Arr>;
}  // namespace

AdamW::AdamW(std::vector<TensorPtr> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) {
    throw BadConfigError("AdamW: learning rate must be positive");
  }
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0) {
    throw BadConfigError("AdamW: betas must lie in [0, 1)");
  }
  if (!(config_.eps > 0.0)) {
    throw BadConfigError("AdamW: eps must be positive");
  }
  if (config_.weight_decay < 0.0) {
    throw BadConfigError("AdamW: weight decay must be non-negative");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p) {
      throw BadConfigError("AdamW: null parameter");
    }
    p->ensure_grad();
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const real bc1 = 1.0 - std::pow(config_.beta1, static_cast<real>(t_));
  const real bc2 = 1.0 - std::pow(config_.beta2, static_cast<real>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const auto n = static_cast<Eigen::Index>(p.value.size());
    ConstArrMap g(p.grad.data(), n);
    ArrMap m(m_[i].data(), n);
    ArrMap v(v_[i].data(), n);
    ArrMap x(p.value.data(), n);
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.square();
    if (config_.weight_decay > 0.0) {
      x -= config_.lr * config_.weight_decay * x;
    }
    x -= config_.lr * (m / bc1) / ((v / bc2).sqrt() + config_.eps);
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) {
    p->zero_grad();
  }
}

}  // namespace webrpg::nn

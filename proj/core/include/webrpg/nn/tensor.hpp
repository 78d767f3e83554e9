#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace webrpg::nn {

// All math runs in double precision: the acceptance tolerances on gradient
// checks and schedule identities leave no headroom in float, and determinism
// is unaffected.
using real = double;

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// A dense row-major tensor node in a reverse-mode tape. Ops build the graph
// by recording parents and a backward closure; backward() walks it once in
// reverse topological order.
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<real> value;
  std::vector<real> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::string name;  // set for parameters; checkpoint key

  // `parents` is the sole owner of the upstream graph. Backward closures
  // capture raw Tensor pointers only (never TensorPtr), so the destructor
  // can dismantle arbitrarily deep chains iteratively.
  std::vector<TensorPtr> parents;
  std::function<void()> backward_fn;  // accumulates into parents' grads

  ~Tensor();

  static TensorPtr create(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr from_values(std::vector<int> shape, std::vector<real> values,
                               bool requires_grad = false);
  static TensorPtr scalar(real v);

  int numel() const;
  int rows() const;  // 2-D accessors; throw ShapeMismatchError otherwise
  int cols() const;
  bool is_scalar() const { return numel() == 1; }

  real& at(int r, int c) { return value[static_cast<size_t>(r) * cols() + c]; }
  real at(int r, int c) const {
    return value[static_cast<size_t>(r) * static_cast<size_t>(cols()) +
                 static_cast<size_t>(c)];
  }

  void ensure_grad();   // allocate (zeroed) grad storage
  void zero_grad();
};

// Runs reverse-mode accumulation from a scalar loss. Parameter gradients are
// ADDED to; call zero_grad between steps.
void backward(const TensorPtr& loss);

// Checked mode guards every op output against NaN/Inf (NonFiniteError).
// Shape checks are always on. Default: enabled.
void set_checked_mode(bool on);
bool checked_mode();

}  // namespace webrpg::nn

namespace webrpg {
class Rng;
}

namespace webrpg::nn {

// Deterministic parameter initializers (caller supplies the Rng).
void fill_normal(Tensor& t, webrpg::Rng& rng, real mean, real sd);
void fill_uniform(Tensor& t, webrpg::Rng& rng, real lo, real hi);
void fill_const(Tensor& t, real v);
// He/Xavier-style scaled normal: sd = sqrt(2 / fan_in).
void fill_kaiming(Tensor& t, webrpg::Rng& rng, int fan_in);

// Named parameter collection shared by models, the optimizer, and the
// checkpoint container. Names must be unique.
class ParamSet {
 public:
  TensorPtr add(const std::string& name, TensorPtr t);
  const std::vector<TensorPtr>& all() const { return params_; }
  TensorPtr find(const std::string& name) const;  // null when absent

 private:
  std::vector<TensorPtr> params_;
};

}  // namespace webrpg::nn

#include "webrpg/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "webrpg/errors.hpp"
#include "webrpg/rng.hpp"

namespace webrpg::nn {

namespace {
bool g_checked_mode = true;

int checked_numel(const std::vector<int>& shape) {
  if (shape.empty()) {
    throw ShapeMismatchError("tensor shape must have at least one dimension");
  }
  long long n = 1;
  for (const int d : shape) {
    if (d <= 0) {
      throw ShapeMismatchError("tensor dimensions must be positive");
    }
    n *= d;
    if (n > (1LL << 31)) {
      throw ShapeMismatchError("tensor too large");
    }
  }
  return static_cast<int>(n);
}
}  // namespace

TensorPtr Tensor::create(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  const int n = checked_numel(shape);
  t->shape = std::move(shape);
  t->value.assign(static_cast<size_t>(n), 0.0);
  t->requires_grad = requires_grad;
  if (requires_grad) {
    t->ensure_grad();
  }
  return t;
}

TensorPtr Tensor::from_values(std::vector<int> shape, std::vector<real> values,
                              bool requires_grad) {
  const int n = checked_numel(shape);
  if (static_cast<size_t>(n) != values.size()) {
    throw ShapeMismatchError("value count does not match shape");
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->value = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) {
    t->ensure_grad();
  }
  return t;
}

TensorPtr Tensor::scalar(real v) { return from_values({1, 1}, {v}); }

Tensor::~Tensor() {
  // Flatten the recursive shared_ptr teardown: strip each uniquely-owned
  // ancestor's edges before releasing it, so its own destructor is trivial.
  std::vector<TensorPtr> pending;
  pending.reserve(parents.size());
  for (auto& p : parents) {
    pending.push_back(std::move(p));
  }
  parents.clear();
  while (!pending.empty()) {
    TensorPtr t = std::move(pending.back());
    pending.pop_back();
    if (t && t.use_count() == 1) {
      for (auto& p : t->parents) {
        pending.push_back(std::move(p));
      }
      t->parents.clear();
      t->backward_fn = nullptr;  // holds raw pointers only; cheap
    }
  }
}

int Tensor::numel() const {
  int n = 1;
  for (const int d : shape) {
    n *= d;
  }
  return n;
}

int Tensor::rows() const {
  if (shape.size() != 2) {
    throw ShapeMismatchError("rows() needs a 2-D tensor");
  }
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) {
    throw ShapeMismatchError("cols() needs a 2-D tensor");
  }
  return shape[1];
}

void Tensor::ensure_grad() {
  if (grad.size() != value.size()) {
    grad.assign(value.size(), 0.0);
  }
}

void Tensor::zero_grad() {
  grad.assign(value.size(), 0.0);
}

void backward(const TensorPtr& loss) {
  if (!loss) {
    throw ShapeMismatchError("backward: null loss");
  }
  if (!loss->is_scalar()) {
    throw ShapeMismatchError("backward: loss must be a scalar");
  }
  if (!loss->requires_grad) {
    return;  // nothing upstream wants a gradient
  }

  // Post-order DFS over the requires_grad subgraph: inputs come out first,
  // the loss last. Iterative so deep graphs (long training chains) are safe.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  std::vector<std::pair<Tensor*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor* p = node->parents[next].get();
      ++next;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Tensor* t : order) {
    t->ensure_grad();
  }
  loss->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) {
      (*it)->backward_fn();
    }
  }
}

void set_checked_mode(bool on) { g_checked_mode = on; }
bool checked_mode() { return g_checked_mode; }

void fill_normal(Tensor& t, webrpg::Rng& rng, real mean, real sd) {
  for (real& v : t.value) {
    v = mean + sd * rng.normal();
  }
}

void fill_uniform(Tensor& t, webrpg::Rng& rng, real lo, real hi) {
  for (real& v : t.value) {
    v = rng.uniform(lo, hi);
  }
}

void fill_const(Tensor& t, real v) {
  for (real& x : t.value) {
    x = v;
  }
}

void fill_kaiming(Tensor& t, webrpg::Rng& rng, int fan_in) {
  if (fan_in <= 0) {
    throw BadConfigError("fill_kaiming: fan_in must be positive");
  }
  fill_normal(t, rng, 0.0, std::sqrt(2.0 / static_cast<real>(fan_in)));
}

TensorPtr ParamSet::add(const std::string& name, TensorPtr t) {
  if (!t) {
    throw BadConfigError("ParamSet: null parameter '" + name + "'");
  }
  if (find(name)) {
    throw BadConfigError("ParamSet: duplicate parameter name '" + name + "'");
  }
  t->name = name;
  t->requires_grad = true;
  t->ensure_grad();
  params_.push_back(t);
  return t;
}

TensorPtr ParamSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) {
      return p;
    }
  }
  return nullptr;
}

}  // namespace webrpg::nn

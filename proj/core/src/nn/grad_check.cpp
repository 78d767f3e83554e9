#include "webrpg/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "webrpg/errors.hpp"
#include "webrpg/rng.hpp"

namespace webrpg::nn {

real grad_check(const std::function<TensorPtr()>& loss_fn,
                const std::vector<TensorPtr>& params,
                const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) {
    throw BadConfigError("grad_check: eps must be positive");
  }
  if (!(options.denom_floor > 0.0)) {
    throw BadConfigError("grad_check: denom_floor must be positive");
  }
  for (const auto& p : params) {
    if (!p || !p->requires_grad) {
      throw BadConfigError("grad_check: every parameter must require grad");
    }
    p->zero_grad();
  }

  auto loss = loss_fn();
  if (!loss || !loss->is_scalar()) {
    throw ShapeMismatchError("grad_check: loss_fn must return a scalar");
  }
  backward(loss);

  real worst = 0.0;
  for (const auto& p : params) {
    const int n = p->numel();
    std::vector<int> entries;
    if (options.max_entries > 0 && n > options.max_entries) {
      if (!options.rng) {
        throw BadConfigError("grad_check: subsampling requires an rng");
      }
      entries = options.rng->sample_without_replacement(n, options.max_entries);
    } else {
      entries.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        entries[static_cast<size_t>(i)] = i;
      }
    }
    for (const int idx : entries) {
      const real saved = p->value[static_cast<size_t>(idx)];
      p->value[static_cast<size_t>(idx)] = saved + options.eps;
      const real up = loss_fn()->value[0];
      p->value[static_cast<size_t>(idx)] = saved - options.eps;
      const real down = loss_fn()->value[0];
      p->value[static_cast<size_t>(idx)] = saved;
      const real numeric = (up - down) / (2.0 * options.eps);
      const real analytic = p->grad[static_cast<size_t>(idx)];
      const real denom =
          std::max({std::abs(analytic), std::abs(numeric), options.denom_floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace webrpg::nn

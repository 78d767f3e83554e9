#pragma once

#include <functional>
#include <vector>

#include "webrpg/nn/tensor.hpp"

namespace webrpg {
class Rng;
}

namespace webrpg::nn {

struct GradCheckOptions {
  real eps = 1e-4;       // central-difference step
  int max_entries = -1;  // per-parameter cap; <0 checks every entry
  webrpg::Rng* rng = nullptr;  // used only when subsampling entries
  // Relative-error denominator floor. Central differences on a double loss of
  // magnitude L carry ~L*1e-14/eps of noise, so gradients below that level
  // cannot be resolved; raise the floor accordingly for large composite
  // losses.
  real denom_floor = 1e-8;
};

// Compares analytic gradients against central finite differences of the
// scalar loss produced by `loss_fn` (which must rebuild the graph on every
// call from the current parameter values). Returns the worst relative error
// max(|a-n|) / max(|a|, |n|, denom_floor) over all checked entries.
real grad_check(const std::function<TensorPtr()>& loss_fn,
                const std::vector<TensorPtr>& params,
                const GradCheckOptions& options = {});

}  // namespace webrpg::nn

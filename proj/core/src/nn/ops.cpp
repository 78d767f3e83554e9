#include "webrpg/nn/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "webrpg/errors.hpp"

// Closure convention: backward lambdas capture raw Tensor pointers. The
// output's `parents` vector is what keeps those tensors alive, so every
// tensor a closure reads in backward must be listed there (constants too).

namespace webrpg::nn {

namespace {

constexpr real kMaskedOut = -1e30;

using Mat =
    Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

void need(const TensorPtr& t, const char* op) {
  if (!t) {
    throw ShapeMismatchError(std::string(op) + ": null input");
  }
}

void need_2d(const TensorPtr& t, const char* op) {
  need(t, op);
  if (t->shape.size() != 2) {
    throw ShapeMismatchError(std::string(op) + ": expected a 2-D tensor");
  }
}

void same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  need(a, op);
  need(b, op);
  if (a->shape != b->shape) {
    throw ShapeMismatchError(std::string(op) + ": shapes differ");
  }
}

void guard(const TensorPtr& t, const char* op) {
  if (!checked_mode()) {
    return;
  }
  for (const real v : t->value) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(op) + ": produced a non-finite value");
    }
  }
}

TensorPtr make_out(std::vector<int> shape, std::vector<TensorPtr> parents) {
  auto out = Tensor::create(std::move(shape));
  for (const auto& p : parents) {
    if (p->requires_grad) {
      out->requires_grad = true;
    }
  }
  out->parents = std::move(parents);
  return out;
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  same_shape(a, b, "add");
  auto out = make_out(a->shape, {a, b});
  const size_t n = out->value.size();
  for (size_t i = 0; i < n; ++i) {
    out->value[i] = a->value[i] + b->value[i];
  }
  guard(out, "add");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, n] {
      if (ap->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          ap->grad[i] += o->grad[i];
        }
      }
      if (bp->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          bp->grad[i] += o->grad[i];
        }
      }
    };
  }
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  same_shape(a, b, "sub");
  auto out = make_out(a->shape, {a, b});
  const size_t n = out->value.size();
  for (size_t i = 0; i < n; ++i) {
    out->value[i] = a->value[i] - b->value[i];
  }
  guard(out, "sub");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, n] {
      if (ap->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          ap->grad[i] += o->grad[i];
        }
      }
      if (bp->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          bp->grad[i] -= o->grad[i];
        }
      }
    };
  }
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  same_shape(a, b, "mul");
  auto out = make_out(a->shape, {a, b});
  const size_t n = out->value.size();
  for (size_t i = 0; i < n; ++i) {
    out->value[i] = a->value[i] * b->value[i];
  }
  guard(out, "mul");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, n] {
      if (ap->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          ap->grad[i] += o->grad[i] * bp->value[i];
        }
      }
      if (bp->requires_grad) {
        for (size_t i = 0; i < n; ++i) {
          bp->grad[i] += o->grad[i] * ap->value[i];
        }
      }
    };
  }
  return out;
}

TensorPtr scale(const TensorPtr& x, real c) {
  need(x, "scale");
  auto out = make_out(x->shape, {x});
  const size_t n = out->value.size();
  for (size_t i = 0; i < n; ++i) {
    out->value[i] = c * x->value[i];
  }
  guard(out, "scale");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, c, n] {
      for (size_t i = 0; i < n; ++i) {
        xp->grad[i] += c * o->grad[i];
      }
    };
  }
  return out;
}

TensorPtr add_broadcast_row(const TensorPtr& x, const TensorPtr& row) {
  need_2d(x, "add_broadcast_row");
  need_2d(row, "add_broadcast_row");
  if (row->rows() != 1 || row->cols() != x->cols()) {
    throw ShapeMismatchError("add_broadcast_row: row must be [1,cols(x)]");
  }
  const int nr = x->rows();
  const int nc = x->cols();
  auto out = make_out({nr, nc}, {x, row});
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) {
      out->at(i, j) = x->at(i, j) + row->value[j];
    }
  }
  guard(out, "add_broadcast_row");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    Tensor* rp = row.get();
    out->backward_fn = [o, xp, rp, nr, nc] {
      if (xp->requires_grad) {
        const size_t n = xp->value.size();
        for (size_t i = 0; i < n; ++i) {
          xp->grad[i] += o->grad[i];
        }
      }
      if (rp->requires_grad) {
        for (int i = 0; i < nr; ++i) {
          for (int j = 0; j < nc; ++j) {
            rp->grad[j] += o->grad[static_cast<size_t>(i) * nc + j];
          }
        }
      }
    };
  }
  return out;
}

TensorPtr repeat_row(const TensorPtr& row, int n) {
  need_2d(row, "repeat_row");
  if (row->rows() != 1) {
    throw ShapeMismatchError("repeat_row: input must be a single row");
  }
  if (n <= 0) {
    throw ShapeMismatchError("repeat_row: count must be positive");
  }
  const int nc = row->cols();
  auto out = make_out({n, nc}, {row});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < nc; ++j) {
      out->at(i, j) = row->value[j];
    }
  }
  guard(out, "repeat_row");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* rp = row.get();
    out->backward_fn = [o, rp, n, nc] {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nc; ++j) {
          rp->grad[j] += o->grad[static_cast<size_t>(i) * nc + j];
        }
      }
    };
  }
  return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  need_2d(a, "matmul");
  need_2d(b, "matmul");
  if (a->cols() != b->rows()) {
    throw ShapeMismatchError("matmul: inner dimensions differ");
  }
  const int n = a->rows();
  const int k = a->cols();
  const int m = b->cols();
  auto out = make_out({n, m}, {a, b});
  MatMap(out->value.data(), n, m).noalias() =
      ConstMatMap(a->value.data(), n, k) * ConstMatMap(b->value.data(), k, m);
  guard(out, "matmul");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, n, k, m] {
      ConstMatMap g(o->grad.data(), n, m);
      if (ap->requires_grad) {
        MatMap(ap->grad.data(), n, k).noalias() +=
            g * ConstMatMap(bp->value.data(), k, m).transpose();
      }
      if (bp->requires_grad) {
        MatMap(bp->grad.data(), k, m).noalias() +=
            ConstMatMap(ap->value.data(), n, k).transpose() * g;
      }
    };
  }
  return out;
}

TensorPtr transpose(const TensorPtr& x) {
  need_2d(x, "transpose");
  const int nr = x->rows();
  const int nc = x->cols();
  auto out = make_out({nc, nr}, {x});
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) {
      out->at(j, i) = x->at(i, j);
    }
  }
  guard(out, "transpose");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, nr, nc] {
      for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nc; ++j) {
          xp->grad[static_cast<size_t>(i) * nc + j] +=
              o->grad[static_cast<size_t>(j) * nr + i];
        }
      }
    };
  }
  return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  auto y = matmul(x, w);
  return b ? add_broadcast_row(y, b) : y;
}

TensorPtr relu(const TensorPtr& x) {
  need(x, "relu");
  auto out = make_out(x->shape, {x});
  const size_t n = out->value.size();
  for (size_t i = 0; i < n; ++i) {
    out->value[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
  }
  guard(out, "relu");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, n] {
      for (size_t i = 0; i < n; ++i) {
        if (xp->value[i] > 0.0) {
          xp->grad[i] += o->grad[i];
        }
      }
    };
  }
  return out;
}

TensorPtr gelu(const TensorPtr& x) {
  need(x, "gelu");
  auto out = make_out(x->shape, {x});
  const size_t n = out->value.size();
  const real inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (size_t i = 0; i < n; ++i) {
    const real v = x->value[i];
    out->value[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  guard(out, "gelu");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, n, inv_sqrt2] {
      const real inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
      for (size_t i = 0; i < n; ++i) {
        const real v = xp->value[i];
        const real cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const real pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        xp->grad[i] += o->grad[i] * (cdf + v * pdf);
      }
    };
  }
  return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, real eps) {
  need_2d(x, "layer_norm");
  need_2d(gamma, "layer_norm");
  need_2d(beta, "layer_norm");
  const int nr = x->rows();
  const int nc = x->cols();
  if (gamma->rows() != 1 || gamma->cols() != nc || beta->rows() != 1 ||
      beta->cols() != nc) {
    throw ShapeMismatchError("layer_norm: gamma/beta must be [1,cols(x)]");
  }
  auto out = make_out({nr, nc}, {x, gamma, beta});
  std::vector<real> xhat(static_cast<size_t>(nr) * nc);
  std::vector<real> inv_std(static_cast<size_t>(nr));
  for (int i = 0; i < nr; ++i) {
    real mean = 0.0;
    for (int j = 0; j < nc; ++j) {
      mean += x->at(i, j);
    }
    mean /= nc;
    real var = 0.0;
    for (int j = 0; j < nc; ++j) {
      const real d = x->at(i, j) - mean;
      var += d * d;
    }
    var /= nc;
    const real is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int j = 0; j < nc; ++j) {
      const real h = (x->at(i, j) - mean) * is;
      xhat[static_cast<size_t>(i) * nc + j] = h;
      out->at(i, j) = gamma->value[j] * h + beta->value[j];
    }
  }
  guard(out, "layer_norm");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    Tensor* gp = gamma.get();
    Tensor* bp = beta.get();
    out->backward_fn = [o, xp, gp, bp, nr, nc, xhat = std::move(xhat),
                        inv_std = std::move(inv_std)] {
      for (int i = 0; i < nr; ++i) {
        const size_t base = static_cast<size_t>(i) * nc;
        if (gp->requires_grad || bp->requires_grad) {
          for (int j = 0; j < nc; ++j) {
            const real g = o->grad[base + j];
            if (gp->requires_grad) {
              gp->grad[j] += g * xhat[base + j];
            }
            if (bp->requires_grad) {
              bp->grad[j] += g;
            }
          }
        }
        if (xp->requires_grad) {
          real m1 = 0.0;  // mean of d(xhat)
          real m2 = 0.0;  // mean of d(xhat) * xhat
          for (int j = 0; j < nc; ++j) {
            const real dh = o->grad[base + j] * gp->value[j];
            m1 += dh;
            m2 += dh * xhat[base + j];
          }
          m1 /= nc;
          m2 /= nc;
          for (int j = 0; j < nc; ++j) {
            const real dh = o->grad[base + j] * gp->value[j];
            xp->grad[base + j] +=
                inv_std[static_cast<size_t>(i)] * (dh - m1 - xhat[base + j] * m2);
          }
        }
      }
    };
  }
  return out;
}

TensorPtr softmax_rows(const TensorPtr& x, const TensorPtr& additive_mask) {
  need_2d(x, "softmax_rows");
  if (additive_mask && additive_mask->shape != x->shape) {
    throw ShapeMismatchError("softmax_rows: mask shape differs");
  }
  const int nr = x->rows();
  const int nc = x->cols();
  auto out = make_out({nr, nc}, {x});
  for (int i = 0; i < nr; ++i) {
    const size_t base = static_cast<size_t>(i) * nc;
    real mx = -std::numeric_limits<real>::infinity();
    for (int j = 0; j < nc; ++j) {
      real v = x->value[base + j];
      if (additive_mask) {
        v += additive_mask->value[base + j];
      }
      if (v > mx) {
        mx = v;
      }
    }
    real sum = 0.0;
    for (int j = 0; j < nc; ++j) {
      real v = x->value[base + j];
      if (additive_mask) {
        v += additive_mask->value[base + j];
      }
      const real e = std::exp(v - mx);
      out->value[base + j] = e;
      sum += e;
    }
    for (int j = 0; j < nc; ++j) {
      out->value[base + j] /= sum;
    }
  }
  guard(out, "softmax_rows");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, nr, nc] {
      for (int i = 0; i < nr; ++i) {
        const size_t base = static_cast<size_t>(i) * nc;
        real dot = 0.0;
        for (int j = 0; j < nc; ++j) {
          dot += o->grad[base + j] * o->value[base + j];
        }
        for (int j = 0; j < nc; ++j) {
          xp->grad[base + j] += o->value[base + j] * (o->grad[base + j] - dot);
        }
      }
    };
  }
  return out;
}

TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
  need_2d(table, "embedding_lookup");
  if (ids.empty()) {
    throw ShapeMismatchError("embedding_lookup: empty id list");
  }
  const int v = table->rows();
  const int d = table->cols();
  for (const int id : ids) {
    if (id < 0 || id >= v) {
      throw OutOfRangeError("embedding_lookup: id " + std::to_string(id) +
                            " outside table of " + std::to_string(v) + " rows");
    }
  }
  const int n = static_cast<int>(ids.size());
  auto out = make_out({n, d}, {table});
  for (int i = 0; i < n; ++i) {
    const size_t src = static_cast<size_t>(ids[static_cast<size_t>(i)]) * d;
    const size_t dst = static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      out->value[dst + j] = table->value[src + j];
    }
  }
  guard(out, "embedding_lookup");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tp = table.get();
    out->backward_fn = [o, tp, ids, n, d] {
      for (int i = 0; i < n; ++i) {
        const size_t src = static_cast<size_t>(i) * d;
        const size_t dst = static_cast<size_t>(ids[static_cast<size_t>(i)]) * d;
        for (int j = 0; j < d; ++j) {
          tp->grad[dst + j] += o->grad[src + j];
        }
      }
    };
  }
  return out;
}

TensorPtr lookup_sum(const TensorPtr& table,
                     const std::vector<std::vector<int>>& ids) {
  need_2d(table, "lookup_sum");
  if (ids.empty()) {
    throw ShapeMismatchError("lookup_sum: empty id list");
  }
  const int v = table->rows();
  const int d = table->cols();
  for (const auto& row : ids) {
    for (const int id : row) {
      if (id < 0 || id >= v) {
        throw OutOfRangeError("lookup_sum: id " + std::to_string(id) +
                              " outside table of " + std::to_string(v) +
                              " rows");
      }
    }
  }
  const int n = static_cast<int>(ids.size());
  auto out = make_out({n, d}, {table});
  for (int i = 0; i < n; ++i) {
    const size_t dst = static_cast<size_t>(i) * d;
    for (const int id : ids[static_cast<size_t>(i)]) {
      const size_t src = static_cast<size_t>(id) * d;
      for (int j = 0; j < d; ++j) {
        out->value[dst + j] += table->value[src + j];
      }
    }
  }
  guard(out, "lookup_sum");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tp = table.get();
    out->backward_fn = [o, tp, ids, n, d] {
      for (int i = 0; i < n; ++i) {
        const size_t src = static_cast<size_t>(i) * d;
        for (const int id : ids[static_cast<size_t>(i)]) {
          const size_t dst = static_cast<size_t>(id) * d;
          for (int j = 0; j < d; ++j) {
            tp->grad[dst + j] += o->grad[src + j];
          }
        }
      }
    };
  }
  return out;
}

TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b) {
  need_2d(a, "concat_rows");
  need_2d(b, "concat_rows");
  if (a->cols() != b->cols()) {
    throw ShapeMismatchError("concat_rows: column counts differ");
  }
  const int na = a->rows();
  const int nb = b->rows();
  const int nc = a->cols();
  auto out = make_out({na + nb, nc}, {a, b});
  std::copy(a->value.begin(), a->value.end(), out->value.begin());
  std::copy(b->value.begin(), b->value.end(),
            out->value.begin() + static_cast<ptrdiff_t>(a->value.size()));
  guard(out, "concat_rows");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp] {
      const size_t an = ap->value.size();
      if (ap->requires_grad) {
        for (size_t i = 0; i < an; ++i) {
          ap->grad[i] += o->grad[i];
        }
      }
      if (bp->requires_grad) {
        const size_t bn = bp->value.size();
        for (size_t i = 0; i < bn; ++i) {
          bp->grad[i] += o->grad[an + i];
        }
      }
    };
  }
  return out;
}

TensorPtr slice_rows(const TensorPtr& x, int lo, int hi) {
  need_2d(x, "slice_rows");
  if (lo < 0 || hi > x->rows() || lo >= hi) {
    throw ShapeMismatchError("slice_rows: bad row range");
  }
  const int nc = x->cols();
  const int n = hi - lo;
  auto out = make_out({n, nc}, {x});
  const size_t off = static_cast<size_t>(lo) * nc;
  std::copy(x->value.begin() + static_cast<ptrdiff_t>(off),
            x->value.begin() + static_cast<ptrdiff_t>(off + out->value.size()),
            out->value.begin());
  guard(out, "slice_rows");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, off] {
      const size_t n = o->value.size();
      for (size_t i = 0; i < n; ++i) {
        xp->grad[off + i] += o->grad[i];
      }
    };
  }
  return out;
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
  need_2d(a, "concat_cols");
  need_2d(b, "concat_cols");
  if (a->rows() != b->rows()) {
    throw ShapeMismatchError("concat_cols: row counts differ");
  }
  const int nr = a->rows();
  const int ca = a->cols();
  const int cb = b->cols();
  auto out = make_out({nr, ca + cb}, {a, b});
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < ca; ++j) {
      out->at(i, j) = a->at(i, j);
    }
    for (int j = 0; j < cb; ++j) {
      out->at(i, ca + j) = b->at(i, j);
    }
  }
  guard(out, "concat_cols");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, nr, ca, cb] {
      for (int i = 0; i < nr; ++i) {
        const size_t ob = static_cast<size_t>(i) * (ca + cb);
        if (ap->requires_grad) {
          for (int j = 0; j < ca; ++j) {
            ap->grad[static_cast<size_t>(i) * ca + j] += o->grad[ob + j];
          }
        }
        if (bp->requires_grad) {
          for (int j = 0; j < cb; ++j) {
            bp->grad[static_cast<size_t>(i) * cb + j] += o->grad[ob + ca + j];
          }
        }
      }
    };
  }
  return out;
}

TensorPtr slice_cols(const TensorPtr& x, int lo, int hi) {
  need_2d(x, "slice_cols");
  if (lo < 0 || hi > x->cols() || lo >= hi) {
    throw ShapeMismatchError("slice_cols: bad column range");
  }
  const int nr = x->rows();
  const int nc = x->cols();
  const int n = hi - lo;
  auto out = make_out({nr, n}, {x});
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < n; ++j) {
      out->at(i, j) = x->at(i, lo + j);
    }
  }
  guard(out, "slice_cols");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, nr, nc, lo, n] {
      for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < n; ++j) {
          xp->grad[static_cast<size_t>(i) * nc + lo + j] +=
              o->grad[static_cast<size_t>(i) * n + j];
        }
      }
    };
  }
  return out;
}

TensorPtr row_blend(const std::vector<real>& mask, const TensorPtr& a,
                    const TensorPtr& b) {
  same_shape(a, b, "row_blend");
  need_2d(a, "row_blend");
  const int nr = a->rows();
  const int nc = a->cols();
  if (static_cast<int>(mask.size()) != nr) {
    throw ShapeMismatchError("row_blend: mask length must equal row count");
  }
  auto out = make_out({nr, nc}, {a, b});
  for (int i = 0; i < nr; ++i) {
    const real m = mask[static_cast<size_t>(i)];
    for (int j = 0; j < nc; ++j) {
      out->at(i, j) = m * a->at(i, j) + (1.0 - m) * b->at(i, j);
    }
  }
  guard(out, "row_blend");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, mask, nr, nc] {
      for (int i = 0; i < nr; ++i) {
        const real m = mask[static_cast<size_t>(i)];
        const size_t base = static_cast<size_t>(i) * nc;
        if (ap->requires_grad) {
          for (int j = 0; j < nc; ++j) {
            ap->grad[base + j] += m * o->grad[base + j];
          }
        }
        if (bp->requires_grad) {
          for (int j = 0; j < nc; ++j) {
            bp->grad[base + j] += (1.0 - m) * o->grad[base + j];
          }
        }
      }
    };
  }
  return out;
}

TensorPtr sum_all(const TensorPtr& x) {
  need(x, "sum_all");
  real s = 0.0;
  for (const real v : x->value) {
    s += v;
  }
  auto out = make_out({1, 1}, {x});
  out->value[0] = s;
  guard(out, "sum_all");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp] {
      const real g = o->grad[0];
      for (real& gv : xp->grad) {
        gv += g;
      }
    };
  }
  return out;
}

TensorPtr mean_all(const TensorPtr& x) {
  need(x, "mean_all");
  const real inv_n = 1.0 / static_cast<real>(x->numel());
  real s = 0.0;
  for (const real v : x->value) {
    s += v;
  }
  auto out = make_out({1, 1}, {x});
  out->value[0] = s * inv_n;
  guard(out, "mean_all");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* xp = x.get();
    out->backward_fn = [o, xp, inv_n] {
      const real g = o->grad[0] * inv_n;
      for (real& gv : xp->grad) {
        gv += g;
      }
    };
  }
  return out;
}

TensorPtr mse(const TensorPtr& a, const TensorPtr& b) {
  same_shape(a, b, "mse");
  const size_t n = a->value.size();
  const real inv_n = 1.0 / static_cast<real>(n);
  real s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const real d = a->value[i] - b->value[i];
    s += d * d;
  }
  auto out = make_out({1, 1}, {a, b});
  out->value[0] = s * inv_n;
  guard(out, "mse");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    out->backward_fn = [o, ap, bp, n, inv_n] {
      const real g = o->grad[0] * 2.0 * inv_n;
      for (size_t i = 0; i < n; ++i) {
        const real d = ap->value[i] - bp->value[i];
        if (ap->requires_grad) {
          ap->grad[i] += g * d;
        }
        if (bp->requires_grad) {
          bp->grad[i] -= g * d;
        }
      }
    };
  }
  return out;
}

TensorPtr softmax_cross_entropy(const TensorPtr& logits,
                                const std::vector<int>& targets) {
  need_2d(logits, "softmax_cross_entropy");
  const int nr = logits->rows();
  const int nc = logits->cols();
  if (static_cast<int>(targets.size()) != nr) {
    throw ShapeMismatchError(
        "softmax_cross_entropy: one target per logit row required");
  }
  for (const int t : targets) {
    if (t < 0 || t >= nc) {
      throw OutOfRangeError("softmax_cross_entropy: target " +
                            std::to_string(t) + " outside " +
                            std::to_string(nc) + " classes");
    }
  }
  std::vector<real> probs(logits->value.size());
  real loss = 0.0;
  for (int i = 0; i < nr; ++i) {
    const size_t base = static_cast<size_t>(i) * nc;
    real mx = logits->value[base];
    for (int j = 1; j < nc; ++j) {
      mx = std::max(mx, logits->value[base + j]);
    }
    real sum = 0.0;
    for (int j = 0; j < nc; ++j) {
      const real e = std::exp(logits->value[base + j] - mx);
      probs[base + j] = e;
      sum += e;
    }
    for (int j = 0; j < nc; ++j) {
      probs[base + j] /= sum;
    }
    loss += mx + std::log(sum) -
            logits->value[base + static_cast<size_t>(targets[static_cast<size_t>(i)])];
  }
  auto out = make_out({1, 1}, {logits});
  out->value[0] = loss / nr;
  guard(out, "softmax_cross_entropy");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* lp = logits.get();
    out->backward_fn = [o, lp, targets, nr, nc, probs = std::move(probs)] {
      const real g = o->grad[0] / nr;
      for (int i = 0; i < nr; ++i) {
        const size_t base = static_cast<size_t>(i) * nc;
        for (int j = 0; j < nc; ++j) {
          real p = probs[base + j];
          if (j == targets[static_cast<size_t>(i)]) {
            p -= 1.0;
          }
          lp->grad[base + j] += g * p;
        }
      }
    };
  }
  return out;
}

TensorPtr gaussian_sample(const TensorPtr& mu, const TensorPtr& logvar,
                          const TensorPtr& eps) {
  same_shape(mu, logvar, "gaussian_sample");
  same_shape(mu, eps, "gaussian_sample");
  const size_t n = mu->value.size();
  // eps is a parent for ownership only: no gradient ever flows into it.
  auto out = make_out(mu->shape, {mu, logvar, eps});
  out->requires_grad = mu->requires_grad || logvar->requires_grad;
  for (size_t i = 0; i < n; ++i) {
    out->value[i] =
        mu->value[i] + std::exp(0.5 * logvar->value[i]) * eps->value[i];
  }
  guard(out, "gaussian_sample");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* mp = mu.get();
    Tensor* lp = logvar.get();
    Tensor* ep = eps.get();
    out->backward_fn = [o, mp, lp, ep, n] {
      for (size_t i = 0; i < n; ++i) {
        const real g = o->grad[i];
        if (mp->requires_grad) {
          mp->grad[i] += g;
        }
        if (lp->requires_grad) {
          lp->grad[i] +=
              g * 0.5 * std::exp(0.5 * lp->value[i]) * ep->value[i];
        }
      }
    };
  }
  return out;
}

TensorPtr kl_standard_normal(const TensorPtr& mu, const TensorPtr& logvar) {
  same_shape(mu, logvar, "kl_standard_normal");
  need_2d(mu, "kl_standard_normal");
  const int nr = mu->rows();
  const size_t n = mu->value.size();
  real s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const real m = mu->value[i];
    const real lv = logvar->value[i];
    s += m * m + std::exp(lv) - 1.0 - lv;
  }
  auto out = make_out({1, 1}, {mu, logvar});
  out->value[0] = 0.5 * s / nr;
  guard(out, "kl_standard_normal");
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* mp = mu.get();
    Tensor* lp = logvar.get();
    out->backward_fn = [o, mp, lp, nr, n] {
      const real g = o->grad[0] / nr;
      for (size_t i = 0; i < n; ++i) {
        if (mp->requires_grad) {
          mp->grad[i] += g * mp->value[i];
        }
        if (lp->requires_grad) {
          lp->grad[i] += g * 0.5 * (std::exp(lp->value[i]) - 1.0);
        }
      }
    };
  }
  return out;
}

TensorPtr detach(const TensorPtr& x) {
  need(x, "detach");
  return Tensor::from_values(x->shape, x->value);
}

TensorPtr attention(const TensorPtr& x_q, const TensorPtr& x_kv,
                    const AttentionWeights& w, int n_heads, bool causal) {
  need_2d(x_q, "attention");
  need_2d(x_kv, "attention");
  need_2d(w.wq, "attention");
  need_2d(w.wk, "attention");
  need_2d(w.wv, "attention");
  need_2d(w.wo, "attention");
  const int d = x_q->cols();
  if (x_kv->cols() != d) {
    throw ShapeMismatchError("attention: query/key feature sizes differ");
  }
  if (n_heads <= 0) {
    throw BadConfigError("attention: head count must be positive");
  }
  if (d % n_heads != 0) {
    throw ShapeMismatchError(
        "attention: feature size must divide evenly across heads");
  }
  const int nq = x_q->rows();
  const int nk = x_kv->rows();
  if (causal && nq != nk) {
    throw ShapeMismatchError("attention: causal mask needs square scores");
  }
  const int dh = d / n_heads;
  const real inv_sqrt_dh = 1.0 / std::sqrt(static_cast<real>(dh));

  auto q = linear(x_q, w.wq, w.bq);
  auto k = linear(x_kv, w.wk, w.bk);
  auto v = linear(x_kv, w.wv, w.bv);

  TensorPtr mask;
  if (causal) {
    mask = Tensor::create({nq, nk});
    for (int i = 0; i < nq; ++i) {
      for (int j = i + 1; j < nk; ++j) {
        mask->at(i, j) = kMaskedOut;
      }
    }
  }

  TensorPtr heads;
  for (int h = 0; h < n_heads; ++h) {
    auto qh = slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    auto attn = softmax_rows(scores, mask);
    auto oh = matmul(attn, vh);
    heads = heads ? concat_cols(heads, oh) : oh;
  }
  return linear(heads, w.wo, w.bo);
}

int argmax_row(const Tensor& t, int row, int lo, int hi) {
  if (t.shape.size() != 2) {
    throw ShapeMismatchError("argmax_row: expected a 2-D tensor");
  }
  const int nc = t.shape[1];
  if (hi < 0) {
    hi = nc;
  }
  if (row < 0 || row >= t.shape[0] || lo < 0 || hi > nc || lo >= hi) {
    throw ShapeMismatchError("argmax_row: bad range");
  }
  int best = lo;
  for (int j = lo + 1; j < hi; ++j) {
    if (t.at(row, j) > t.at(row, best)) {
      best = j;
    }
  }
  return best;
}

}  // namespace webrpg::nn

#pragma once

#include <vector>

#include "webrpg/nn/tensor.hpp"

namespace webrpg::nn {

// Elementwise; shapes must match exactly.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, real c);

// x: [N,D], row: [1,D]; adds the row to every row of x.
TensorPtr add_broadcast_row(const TensorPtr& x, const TensorPtr& row);

// row: [1,D] stacked n times into [n,D].
TensorPtr repeat_row(const TensorPtr& row, int n);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);  // [N,K]x[K,M]
TensorPtr transpose(const TensorPtr& x);

// matmul plus optional bias row (pass nullptr for none).
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr relu(const TensorPtr& x);
TensorPtr gelu(const TensorPtr& x);  // exact erf form

// Per-row normalization with learned gain/shift ([1,D] each).
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, real eps = 1e-5);

// Row-wise softmax; `additive_mask` (optional, same shape, constant) is
// added to the logits first — use large negatives to mask positions out.
TensorPtr softmax_rows(const TensorPtr& x, const TensorPtr& additive_mask = nullptr);

// table: [V,D]; one output row per id.
TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);

// Ragged gather-sum: output row i is the sum of table rows ids[i]. Equals a
// one-hot (multi-hot) matrix product without materializing it.
TensorPtr lookup_sum(const TensorPtr& table, const std::vector<std::vector<int>>& ids);

TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_rows(const TensorPtr& x, int lo, int hi);  // rows [lo,hi)
TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_cols(const TensorPtr& x, int lo, int hi);

// Row-wise convex blend: out_i = m_i * a_i + (1 - m_i) * b_i with a constant
// per-row mask m of length N.
TensorPtr row_blend(const std::vector<real>& mask, const TensorPtr& a,
                    const TensorPtr& b);

TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);

// Mean over all elements of (a-b)^2.
TensorPtr mse(const TensorPtr& a, const TensorPtr& b);

// Mean over rows of -log softmax(logits)[target]. targets.size() == N.
TensorPtr softmax_cross_entropy(const TensorPtr& logits,
                                const std::vector<int>& targets);

// Reparameterized draw mu + exp(logvar/2) * eps. eps is a constant: the
// gradient flows into mu and logvar only.
TensorPtr gaussian_sample(const TensorPtr& mu, const TensorPtr& logvar,
                          const TensorPtr& eps);

// Mean over rows of 0.5 * sum_d (mu^2 + e^logvar - 1 - logvar): the closed
// form of KL(N(mu, diag e^logvar) || N(0, I)).
TensorPtr kl_standard_normal(const TensorPtr& mu, const TensorPtr& logvar);

// Value copy that blocks the gradient.
TensorPtr detach(const TensorPtr& x);

// Standard scaled-dot-product multi-head attention: queries from x_q [N,D],
// keys/values from x_kv [M,D]; causal adds a lower-triangular mask (requires
// N == M). Weights are [D,D], biases [1,D].
struct AttentionWeights {
  TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
};
TensorPtr attention(const TensorPtr& x_q, const TensorPtr& x_kv,
                    const AttentionWeights& w, int n_heads, bool causal);

// Inference helpers (no graph):
int argmax_row(const Tensor& t, int row, int lo = 0, int hi = -1);

}  // namespace webrpg::nn

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "webrpg/nn/ops.hpp"
#include "webrpg/nn/optimizer.hpp"
#include "webrpg/nn/tensor.hpp"
#include "webrpg/page.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/rp_codec.hpp"
#include "webrpg/vae.hpp"

namespace webrpg {

// ---------------------------------------------------------------- layout --

struct BBox {
  int left = 0;
  int top = 0;
  int width = 0;   // >= 0
  int height = 0;  // >= 0
};

// Reads the four layout tokens; MissingLayoutError when any is pad.
BBox bbox_of(const RpVector& v);

// Intersection over union in integer pixel areas. Two zero-area boxes score
// 1 (nothing to misplace); a zero-area box against a real one scores 0.
double box_iou(const BBox& a, const BBox& b);

// Mean IoU over index-aligned boxes.
double ele_iou(const std::vector<BBox>& real, const std::vector<BBox>& gen);

// Same, aligned by element id; the id sets must be equal.
double ele_iou(const PageRps& real, const PageRps& gen);

// ----------------------------------------------------------------- style --

// The 9 style tokens (7 text + 2 color) in declaration order.
using StyleKey = std::array<RpTokenId, 9>;

StyleKey style_key(const RpVector& v);

// Maximal groups of elements whose 9 style tokens are all identical,
// ordered by smallest member id; members ascend within each subset.
struct StyleSubset {
  StyleKey style{};
  std::vector<int> members;
};

std::vector<StyleSubset> style_partition(const PageRps& page);

// Page-level wrapper; MissingStyleError when rendering parameters are
// absent for the page or any of its elements.
std::vector<StyleSubset> style_partition(const Page& page);

// Weighted best-Jaccard overlap of the real partition against the generated
// one: sum_j (|S_j|/N) * max_k J(S_j, S_hat_k). Generated subsets may be
// reused by several real subsets. Ids must match.
double sc_score(const PageRps& real, const PageRps& gen);

// ------------------------------------------------------------------- fid --

struct FidStats {
  int dim = 0;
  std::vector<double> mean;  // dim
  std::vector<double> cov;   // dim x dim, row-major, unbiased (n-1)
};

// Sample mean and covariance; needs at least two feature vectors.
FidStats feature_stats(const std::vector<std::vector<double>>& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)), the matrix root taken
// through the symmetric form (sqrt(Sa) Sb sqrt(Sa))^(1/2) with a small
// diagonal jitter. SingularCovarianceError when the root is not finite.
double fid_from_stats(const FidStats& a, const FidStats& b);

double fid(const std::vector<std::vector<double>>& a,
           const std::vector<std::vector<double>>& b);

// ------------------------------------------------------------ classifier --

// Real-vs-noised binary classifier whose pooled representation doubles as
// the FID feature space. Input per element: frozen-compressor latent of its
// rendering parameters plus its HTML embedding; a learned CLS row is
// prepended and its representation entering the final head is the feature.
struct FidClassifierConfig {
  int d = 128;  // latent/embedding width
  int layers = 4;
  int n_heads = 4;
  int max_seq = 128;  // elements per page (the CLS slot is extra)
  int mlp_hidden = 512;
  enum class Variant { kOverall, kLayout, kStyle };
  // kLayout pads out every style token before encoding; kStyle zeroes the
  // layout tokens. kOverall sees everything.
  Variant variant = Variant::kOverall;
};

class FidClassifier {
 public:
  struct Example {
    nn::TensorPtr h;
    std::vector<RpVector> rps;
    int label = 0;  // 1 = real, 0 = polluted
  };

  FidClassifier(FidClassifierConfig config, Rng& rng);

  // The variant's input masking, exposed for tests.
  RpVector masked(const RpVector& v) const;

  // CLS representation entering the classification head.
  std::vector<double> features(const nn::TensorPtr& h,
                               const std::vector<RpVector>& rps,
                               const Vae& vae) const;

  nn::TensorPtr logits(const nn::TensorPtr& h,
                       const std::vector<RpVector>& rps,
                       const Vae& vae) const;  // [1, 2]

  nn::TensorPtr loss(const std::vector<Example>& batch, const Vae& vae) const;

  double train_step(const std::vector<Example>& batch, const Vae& vae,
                    nn::AdamW& opt);

  double accuracy(const std::vector<Example>& batch, const Vae& vae) const;

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const FidClassifierConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static FidClassifier load(const std::string& path);

 private:
  struct LnParams {
    nn::TensorPtr g, b;
  };
  struct Layer {
    LnParams ln1;
    nn::AttentionWeights attn;
    LnParams ln2;
    nn::TensorPtr mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };

  nn::TensorPtr cls_representation(const nn::TensorPtr& h,
                                   const std::vector<RpVector>& rps,
                                   const Vae& vae) const;  // [1, d]

  FidClassifierConfig config_;
  nn::ParamSet params_;
  nn::TensorPtr cls_, pos_;
  std::vector<Layer> layers_;
  LnParams ln_f_;
  nn::TensorPtr head_w_, head_b_;
  bool trained_ = false;
};

// ---------------------------------------------------------------- noisers --

struct NoiserConfig {
  double sigma_px = 20.0;       // Gaussian jitter on numeric tokens
  double cat_redraw_p = 0.15;   // per-token re-draw probability
  double substitute_frac = 0.15;
  double swap_frac = 0.1;
};

// Gaussian jitter (rounded, clamped to the legal range) on numeric tokens
// and uniform re-draws on categorical ones; both scaled by intensity. Pad
// slots are left untouched, so outputs stay valid under the style-only
// policy whenever inputs are.
PageRps perturb_values(const PageRps& page, double intensity, uint64_t seed,
                       const NoiserConfig& cfg = {},
                       const Vocabulary& vocab = Vocabulary::standard());

// Replaces a fraction of elements with uniformly drawn legal vectors.
PageRps substitute_elements(const PageRps& page, double intensity,
                            uint64_t seed, const NoiserConfig& cfg = {},
                            const Vocabulary& vocab = Vocabulary::standard());

// Disjoint random id pairs covering ~swap_frac * intensity of the page.
std::vector<std::pair<int, int>> plan_swaps(const PageRps& page,
                                            double intensity, uint64_t seed,
                                            const NoiserConfig& cfg = {});

// Exchanges the vectors of each pair; applying the same plan twice is the
// identity.
PageRps apply_swaps(const PageRps& page,
                    const std::vector<std::pair<int, int>>& pairs);

PageRps swap_elements(const PageRps& page, double intensity, uint64_t seed,
                      const NoiserConfig& cfg = {});

}  // namespace webrpg

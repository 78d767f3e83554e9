#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "webrpg/nn/optimizer.hpp"
#include "webrpg/nn/tensor.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/vocabulary.hpp"

namespace webrpg {

struct VaeConfig {
  int latent_dim = 128;
  // Hidden widths; together with the input and output maps these make two
  // 5-layer MLPs. Depth is fixed, widths are tunable.
  std::vector<int> enc_hidden = {512, 256, 128, 128};
  std::vector<int> dec_hidden = {128, 256, 512, 512};
  double lambda_kl = 1e-6;
};

// Per-element compressor: 13 rendering-parameter tokens -> latent -> 13
// categorical heads. Each head's classes are exactly the parameter's legal
// tokens (plus an explicit pad class on the nine style heads), so any decoded
// argmax vector is valid by construction — illegal tokens never appear in a
// softmax at all.
class Vae {
 public:
  struct Head {
    RpName param;
    int lo = 0;   // first logit column of this head
    int hi = 0;   // one past the last
    bool has_pad = false;
  };

  Vae(VaeConfig config, Rng& rng,
      const Vocabulary& vocab = Vocabulary::standard());

  // Graph-building. Rows of every tensor align with the batch order.
  std::pair<nn::TensorPtr, nn::TensorPtr> encode(
      const std::vector<RpVector>& batch) const;  // (mu, logvar) [S, latent]
  nn::TensorPtr sample_latent(const nn::TensorPtr& mu,
                              const nn::TensorPtr& logvar, Rng& noise) const;
  nn::TensorPtr decode(const nn::TensorPtr& z) const;  // logits [S, classes]

  // Sum over the 13 heads of per-head mean cross-entropy against the batch.
  nn::TensorPtr reconstruction_ce(const nn::TensorPtr& logits,
                                  const std::vector<RpVector>& batch) const;

  // Mean reconstruction CE plus lambda_kl * mean KL(q || N(0,I)), one
  // Monte-Carlo latent sample per element. lambda_kl = 0 is exactly the CE.
  nn::TensorPtr loss(const std::vector<RpVector>& batch, Rng& noise) const;

  // Inference helpers.
  nn::TensorPtr encode_mean(const std::vector<RpVector>& batch) const;
  std::vector<RpVector> decode_argmax(const nn::TensorPtr& z) const;

  // Head geometry and target/class mapping.
  const std::vector<Head>& heads() const { return heads_; }
  int total_classes() const { return total_classes_; }
  int class_of(RpName param, RpTokenId token) const;
  RpTokenId token_of(RpName param, int cls) const;

  struct TrainLog {
    std::vector<double> losses;  // one entry per step
  };

  // Overfit/pretrain on sampled vectors; stops early once `stop_when`
  // returns true (checked every `check_every` steps when set).
  TrainLog pretrain(const std::function<RpVector(Rng&)>& sampler, int steps,
                    int batch_size, Rng& rng,
                    nn::OptimizerConfig opt = {},
                    const std::function<bool()>& stop_when = nullptr,
                    int check_every = 500);

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const VaeConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  void save(const std::string& path) const;
  static Vae load(const std::string& path,
                  const Vocabulary& vocab = Vocabulary::standard());

 private:
  std::vector<std::vector<int>> onehot_ids(
      const std::vector<RpVector>& batch) const;

  VaeConfig config_;
  const Vocabulary& vocab_;
  nn::ParamSet params_;
  std::vector<nn::TensorPtr> enc_w_, enc_b_, dec_w_, dec_b_;
  std::vector<Head> heads_;
  int total_classes_ = 0;
  // per param: token -> class index within its head, and the inverse
  std::vector<std::vector<int>> class_by_token_;
  std::vector<std::vector<RpTokenId>> token_by_class_;
};

}  // namespace webrpg

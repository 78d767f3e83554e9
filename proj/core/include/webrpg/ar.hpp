#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "webrpg/nn/ops.hpp"
#include "webrpg/nn/optimizer.hpp"
#include "webrpg/nn/tensor.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/vae.hpp"

namespace webrpg {

struct ArConfig {
  int d = 128;           // model width; must equal the compressor latent dim
  int enc_layers = 2;    // desk scale; the trained preset uses 6+6
  int dec_layers = 2;
  int n_heads = 4;
  int max_seq = 128;     // positional table length (max elements per page)
  int mlp_hidden = 512;  // transformer feed-forward width
  // Detach ground-truth latents on the generator paths so the generator loss
  // stops influencing the compressor (ablation; default trains jointly).
  bool stop_grad_vae = false;
  // Blend/teacher-force the posterior mean instead of a sampled latent.
  bool use_mean_latent = false;
};

// Full-scale preset: 6-layer encoder and decoder.
ArConfig full_scale_ar_config();

// Cosine-scheduled masking: ceil(cos(pi*r/2) * s) positions set to 1, chosen
// uniformly without replacement. r = 0 masks everything; r -> 1 masks the
// ceiling's minimum of one position.
std::vector<uint8_t> build_mask(int s, double r, uint64_t seed);

// Z_mask_i = m_i * mask_vector + (1 - m_i) * z_i.
nn::TensorPtr mask_latents(const nn::TensorPtr& z,
                           const std::vector<uint8_t>& mask,
                           const nn::TensorPtr& mask_vector);

// Masked-latent sequence generator. The encoder reads H + Z_mask; the causal
// decoder emits one latent prediction per element, cross-attending to the
// encoder output, and each prediction is decoded to tokens by the
// compressor's heads.
class ArModel {
 public:
  struct Example {
    nn::TensorPtr h;             // [S, d] element embeddings
    std::vector<RpVector> rps;   // ground truth, length S
  };

  ArModel(ArConfig config, Rng& rng);

  const nn::TensorPtr& mask_vector() const { return mask_; }

  // Encoder stack over h + z_mask (+ positions); returns [S, d].
  nn::TensorPtr encode_context(const nn::TensorPtr& h,
                               const nn::TensorPtr& z_mask) const;

  // Causal decoder, teacher-forced: inputs are the learned BOS followed by
  // z_teacher rows 0..S-2; output row i is the prediction for element i+1.
  nn::TensorPtr decode_teacher_forced(const nn::TensorPtr& enc_out,
                                      const nn::TensorPtr& z_teacher) const;

  // Mean over pages of [CE(decode(z_hat), P) + compressor loss on P].
  nn::TensorPtr loss(const std::vector<Example>& batch, const Vae& vae,
                     Rng& rng) const;

  // One optimizer step over whatever parameters `opt` owns.
  double train_step(const std::vector<Example>& batch, const Vae& vae,
                    nn::AdamW& opt, Rng& rng);

  // Sequential inference with every position masked. Each predicted latent
  // is decoded to tokens, committed, and re-encoded through the compressor
  // before entering the causal context, keeping the decoder on the latents
  // it was teacher-forced with. Deterministic: the argmax decode involves
  // no sampling, so the seed only tags the run.
  std::vector<RpVector> generate(const nn::TensorPtr& h, const Vae& vae,
                                 uint64_t seed = 0) const;

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const ArConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static ArModel load(const std::string& path);

 private:
  struct LnParams {
    nn::TensorPtr g, b;
  };
  struct MlpParams {
    nn::TensorPtr w1, b1, w2, b2;
  };
  struct EncLayer {
    LnParams ln1;
    nn::AttentionWeights attn;
    LnParams ln2;
    MlpParams mlp;
  };
  struct DecLayer {
    LnParams ln1;
    nn::AttentionWeights self_attn;
    LnParams lnc;
    nn::AttentionWeights cross;
    LnParams ln2;
    MlpParams mlp;
  };

  nn::TensorPtr run_decoder(const nn::TensorPtr& enc_out,
                            const nn::TensorPtr& z_in) const;
  nn::TensorPtr page_loss(const Example& page, const Vae& vae,
                          Rng& rng) const;

  ArConfig config_;
  nn::ParamSet params_;
  nn::TensorPtr mask_, bos_, pos_enc_, pos_dec_;
  std::vector<EncLayer> enc_layers_;
  std::vector<DecLayer> dec_layers_;
  LnParams enc_ln_f_, dec_ln_f_;
  nn::TensorPtr out_w_, out_b_;
  bool trained_ = false;
};

}  // namespace webrpg

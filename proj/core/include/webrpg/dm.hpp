#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "webrpg/nn/ops.hpp"
#include "webrpg/nn/optimizer.hpp"
#include "webrpg/nn/tensor.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/vae.hpp"

namespace webrpg {

// Linear-beta schedule: beta_t from 1e-4 to 0.02 across T steps, alpha_t =
// 1 - beta_t, alpha_bar_t the running product. Step indices are 1-based;
// alpha_bar(0) = 1 by definition.
struct NoiseSchedule {
  int t_steps = 0;
  std::vector<double> betas;       // betas[t-1] = beta_t
  std::vector<double> alphas;      // alphas[t-1] = alpha_t
  std::vector<double> alpha_bars;  // alpha_bars[t-1] = prod_{s<=t} alpha_s

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;  // accepts t = 0
};

NoiseSchedule make_schedule(int t_steps);

// Closed form Z_t = sqrt(abar_t) Z_0 + sqrt(1 - abar_t) eps with a fresh
// standard-normal eps; returns (Z_t, eps). Equivalent to composing the
// per-step recursion Z_t = sqrt(a_t) Z_{t-1} + sqrt(1-a_t) eps_t.
std::pair<nn::TensorPtr, nn::TensorPtr> forward_diffuse(
    const nn::TensorPtr& z0, int t, const NoiseSchedule& schedule, Rng& rng);

struct DmConfig {
  int d = 128;       // latent/model width (even, for the sinusoidal embed)
  int layers = 4;    // even: mirrored halves joined by long skips (full scale uses 12)
  int n_heads = 4;
  int max_seq = 128;
  int mlp_hidden = 512;
  int t_steps = 100;  // diffusion steps T (full scale uses 1000)
  int time_hidden = 128;
  bool stop_grad_vae = false;
  bool use_mean_latent = false;
  // Run the reverse update exactly as printed in the source formula: the
  // noise coefficient divides by sqrt(1 - alpha_t) (per-step, not
  // cumulative) and no posterior noise is added. The default instead uses
  // the standard update with sqrt(1 - alpha_bar_t) and sigma_t * xi, the
  // only self-consistent reading of the training objective.
  bool literal_update = false;
};

DmConfig full_scale_dm_config();  // 12 layers, T = 1000

// Latent denoiser conditioned on element embeddings: the noisy latents and
// H are summed elementwise, a time embedding is broadcast onto every token,
// and a transformer with long skip connections between mirrored layers
// predicts the injected noise.
class DmModel {
 public:
  struct Example {
    nn::TensorPtr h;
    std::vector<RpVector> rps;
  };

  DmModel(DmConfig config, Rng& rng);

  const NoiseSchedule& schedule() const { return schedule_; }

  // eps_psi(Z_t, t, H) as a graph over [S, d] tensors.
  nn::TensorPtr predict_noise(const nn::TensorPtr& z_t, int t,
                              const nn::TensorPtr& h) const;

  // Mean over pages of [||eps - eps_hat||^2 (mean) + compressor loss].
  nn::TensorPtr loss(const std::vector<Example>& batch, const Vae& vae,
                     Rng& rng) const;

  double train_step(const std::vector<Example>& batch, const Vae& vae,
                    nn::AdamW& opt, Rng& rng);

  // One deterministic reverse update (the sigma_t * xi term is added by the
  // caller): Z_{t-1} = (Z_t - coeff * eps_hat) / sqrt(alpha_t).
  static std::vector<nn::real> reverse_step(const std::vector<nn::real>& z,
                                            const std::vector<nn::real>& eps_hat,
                                            int t, const NoiseSchedule& schedule,
                                            bool literal_update);

  // Ancestral reverse process from Z_{t_start} down to Z_0. Pass a null rng
  // for the deterministic variant (xi = 0 at every step).
  nn::TensorPtr denoise_from(const nn::TensorPtr& z_t, int t_start,
                             const nn::TensorPtr& h, Rng* noise) const;

  // Full generation: Z_T ~ N(0, I), reverse to Z_0, decode per element.
  std::vector<RpVector> sample(const nn::TensorPtr& h, const Vae& vae,
                               uint64_t seed) const;

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const DmConfig& config() const { return config_; }

  void save(const std::string& path) const;
  static DmModel load(const std::string& path);

 private:
  struct LnParams {
    nn::TensorPtr g, b;
  };
  struct Layer {
    LnParams ln1;
    nn::AttentionWeights attn;
    LnParams ln2;
    nn::TensorPtr mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    nn::TensorPtr skip_w, skip_b;  // up-half layers only: fuse [x, skip]
  };

  nn::TensorPtr time_embedding(int t) const;
  nn::TensorPtr page_loss(const Example& page, const Vae& vae,
                          Rng& rng) const;

  DmConfig config_;
  NoiseSchedule schedule_;
  nn::ParamSet params_;
  nn::TensorPtr time_w1_, time_b1_, time_w2_, time_b2_;
  std::vector<Layer> layers_;
  LnParams ln_f_;
  nn::TensorPtr out_w_, out_b_;
  bool trained_ = false;
};

}  // namespace webrpg

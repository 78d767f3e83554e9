#include "webrpg/dm.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"
#include "webrpg/nn/checkpoint.hpp"

namespace webrpg {

using nn::TensorPtr;

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > t_steps) {
    throw BadTimestepError("schedule: t=" + std::to_string(t) +
                           " outside [1, " + std::to_string(t_steps) + "]");
  }
  return betas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  if (t < 1 || t > t_steps) {
    throw BadTimestepError("schedule: t=" + std::to_string(t) +
                           " outside [1, " + std::to_string(t_steps) + "]");
  }
  return alphas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) {
    return 1.0;
  }
  if (t < 1 || t > t_steps) {
    throw BadTimestepError("schedule: t=" + std::to_string(t) +
                           " outside [0, " + std::to_string(t_steps) + "]");
  }
  return alpha_bars[static_cast<size_t>(t - 1)];
}

NoiseSchedule make_schedule(int t_steps) {
  if (t_steps < 1) {
    throw BadConfigError("make_schedule: need at least one step");
  }
  constexpr double kBetaStart = 1e-4;
  constexpr double kBetaEnd = 0.02;
  NoiseSchedule s;
  s.t_steps = t_steps;
  double running = 1.0;
  for (int t = 1; t <= t_steps; ++t) {
    const double beta =
        t_steps == 1 ? kBetaStart
                     : kBetaStart + (kBetaEnd - kBetaStart) * (t - 1) /
                                        static_cast<double>(t_steps - 1);
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    running *= 1.0 - beta;
    s.alpha_bars.push_back(running);
  }
  return s;
}

std::pair<TensorPtr, TensorPtr> forward_diffuse(const TensorPtr& z0, int t,
                                                const NoiseSchedule& schedule,
                                                Rng& rng) {
  if (!z0) {
    throw ShapeMismatchError("forward_diffuse: null input");
  }
  if (t < 1) {
    throw BadTimestepError("forward_diffuse: t must be at least 1");
  }
  const double abar = schedule.alpha_bar(t);  // validates the upper end
  auto eps = nn::Tensor::create(z0->shape);
  nn::fill_normal(*eps, rng, 0.0, 1.0);
  auto z_t = nn::add(nn::scale(z0, std::sqrt(abar)),
                     nn::scale(eps, std::sqrt(1.0 - abar)));
  return {z_t, eps};
}

DmConfig full_scale_dm_config() {
  DmConfig cfg;
  cfg.layers = 12;
  cfg.n_heads = 8;
  cfg.t_steps = 1000;
  return cfg;
}

namespace {
constexpr double kInitSd = 0.02;
}  // namespace

DmModel::DmModel(DmConfig config, Rng& rng) : config_(config) {
  if (config_.d <= 0 || config_.d % 2 != 0) {
    throw BadConfigError("DmModel: width must be positive and even");
  }
  if (config_.layers < 2 || config_.layers % 2 != 0) {
    throw BadConfigError("DmModel: layer count must be even (mirrored skips)");
  }
  if (config_.n_heads <= 0 || config_.d % config_.n_heads != 0) {
    throw BadConfigError("DmModel: head count must divide the width");
  }
  if (config_.mlp_hidden <= 0 || config_.max_seq <= 0 ||
      config_.time_hidden <= 0) {
    throw BadConfigError("DmModel: dimensions must be positive");
  }
  schedule_ = make_schedule(config_.t_steps);  // validates t_steps

  const int d = config_.d;
  auto weight = [&](const std::string& name, int rows, int cols) {
    auto t = params_.add(name, nn::Tensor::create({rows, cols}));
    nn::fill_normal(*t, rng, 0.0, kInitSd);
    return t;
  };
  auto bias = [&](const std::string& name, int cols) {
    return params_.add(name, nn::Tensor::create({1, cols}));
  };
  auto ln = [&](const std::string& name) {
    LnParams p;
    p.g = params_.add(name + ".g", nn::Tensor::create({1, d}));
    nn::fill_const(*p.g, 1.0);
    p.b = bias(name + ".b", d);
    return p;
  };

  time_w1_ = weight("dm.time.w1", d, config_.time_hidden);
  time_b1_ = bias("dm.time.b1", config_.time_hidden);
  time_w2_ = weight("dm.time.w2", config_.time_hidden, d);
  time_b2_ = bias("dm.time.b2", d);

  for (int i = 0; i < config_.layers; ++i) {
    const std::string base = "dm." + std::to_string(i);
    Layer layer;
    layer.ln1 = ln(base + ".ln1");
    layer.attn.wq = weight(base + ".attn.wq", d, d);
    layer.attn.bq = bias(base + ".attn.bq", d);
    layer.attn.wk = weight(base + ".attn.wk", d, d);
    layer.attn.bk = bias(base + ".attn.bk", d);
    layer.attn.wv = weight(base + ".attn.wv", d, d);
    layer.attn.bv = bias(base + ".attn.bv", d);
    layer.attn.wo = weight(base + ".attn.wo", d, d);
    layer.attn.bo = bias(base + ".attn.bo", d);
    layer.ln2 = ln(base + ".ln2");
    layer.mlp_w1 = weight(base + ".mlp.w1", d, config_.mlp_hidden);
    layer.mlp_b1 = bias(base + ".mlp.b1", config_.mlp_hidden);
    layer.mlp_w2 = weight(base + ".mlp.w2", config_.mlp_hidden, d);
    layer.mlp_b2 = bias(base + ".mlp.b2", d);
    if (i >= config_.layers / 2) {
      layer.skip_w = weight(base + ".skip.w", 2 * d, d);
      layer.skip_b = bias(base + ".skip.b", d);
    }
    layers_.push_back(layer);
  }
  ln_f_ = ln("dm.ln_f");
  out_w_ = weight("dm.out.w", d, d);
  out_b_ = bias("dm.out.b", d);
}

TensorPtr DmModel::time_embedding(int t) const {
  const int d = config_.d;
  std::vector<nn::real> vals(static_cast<size_t>(d));
  const int half = d / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        std::exp(-std::log(10000.0) * k / static_cast<double>(half));
    vals[static_cast<size_t>(2 * k)] = std::sin(t * freq);
    vals[static_cast<size_t>(2 * k + 1)] = std::cos(t * freq);
  }
  auto sinusoid = nn::Tensor::from_values({1, d}, vals);
  auto hidden = nn::gelu(nn::linear(sinusoid, time_w1_, time_b1_));
  return nn::linear(hidden, time_w2_, time_b2_);
}

TensorPtr DmModel::predict_noise(const TensorPtr& z_t, int t,
                                 const TensorPtr& h) const {
  if (!z_t || !h) {
    throw ShapeMismatchError("predict_noise: null input");
  }
  if (z_t->cols() != config_.d || h->cols() != config_.d ||
      z_t->rows() != h->rows()) {
    throw ShapeMismatchError("predict_noise: latent/embedding shape mismatch");
  }
  if (z_t->rows() > config_.max_seq) {
    throw OutOfRangeError("predict_noise: page longer than max_seq");
  }
  if (t < 1 || t > config_.t_steps) {
    throw BadTimestepError("predict_noise: t outside schedule");
  }

  auto x = nn::add_broadcast_row(nn::add(z_t, h), time_embedding(t));
  std::vector<TensorPtr> saved;
  const int half = config_.layers / 2;
  for (int i = 0; i < config_.layers; ++i) {
    const auto& layer = layers_[static_cast<size_t>(i)];
    if (i >= half) {
      // Long skip from the mirrored shallow layer, fused by projection.
      const auto& skip = saved[static_cast<size_t>(config_.layers - 1 - i)];
      x = nn::linear(nn::concat_cols(x, skip), layer.skip_w, layer.skip_b);
    }
    auto normed = nn::layer_norm(x, layer.ln1.g, layer.ln1.b);
    x = nn::add(x, nn::attention(normed, normed, layer.attn, config_.n_heads,
                                 /*causal=*/false));
    auto pre_mlp = nn::layer_norm(x, layer.ln2.g, layer.ln2.b);
    auto hidden = nn::gelu(nn::linear(pre_mlp, layer.mlp_w1, layer.mlp_b1));
    x = nn::add(x, nn::linear(hidden, layer.mlp_w2, layer.mlp_b2));
    if (i < half) {
      saved.push_back(x);
    }
  }
  x = nn::layer_norm(x, ln_f_.g, ln_f_.b);
  return nn::linear(x, out_w_, out_b_);
}

TensorPtr DmModel::page_loss(const Example& page, const Vae& vae,
                             Rng& rng) const {
  const int s = static_cast<int>(page.rps.size());
  if (!page.h || page.h->rows() != s) {
    throw ShapeMismatchError("DmModel: embedding rows != element count");
  }

  auto [mu, logvar] = vae.encode(page.rps);
  auto z = config_.use_mean_latent ? mu : vae.sample_latent(mu, logvar, rng);
  auto z_gen = config_.stop_grad_vae ? nn::detach(z) : z;

  const int t = static_cast<int>(rng.uniform_int(1, config_.t_steps));
  auto [z_t, eps] = forward_diffuse(z_gen, t, schedule_, rng);
  auto eps_hat = predict_noise(z_t, t, page.h);
  auto mse_term = nn::mse(eps, eps_hat);

  auto vae_ce = vae.reconstruction_ce(vae.decode(z), page.rps);
  auto page_total = nn::add(mse_term, vae_ce);
  if (vae.config().lambda_kl > 0.0) {
    page_total = nn::add(
        page_total,
        nn::scale(nn::kl_standard_normal(mu, logvar), vae.config().lambda_kl));
  }
  return page_total;
}

TensorPtr DmModel::loss(const std::vector<Example>& batch, const Vae& vae,
                        Rng& rng) const {
  if (batch.empty()) {
    throw BadConfigError("DmModel: empty page batch");
  }
  if (vae.config().latent_dim != config_.d) {
    throw ShapeMismatchError("DmModel: latent dim != model width");
  }
  TensorPtr total;
  for (const auto& page : batch) {
    auto l = page_loss(page, vae, rng);
    total = total ? nn::add(total, l) : l;
  }
  return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
}

double DmModel::train_step(const std::vector<Example>& batch, const Vae& vae,
                           nn::AdamW& opt, Rng& rng) {
  auto l = loss(batch, vae, rng);
  const double value = l->value[0];
  if (!std::isfinite(value)) {
    throw DivergenceDetectedError("DmModel: non-finite training loss");
  }
  opt.zero_grad();
  nn::backward(l);
  opt.step();
  trained_ = true;
  return value;
}

std::vector<nn::real> DmModel::reverse_step(
    const std::vector<nn::real>& z, const std::vector<nn::real>& eps_hat,
    int t, const NoiseSchedule& schedule, bool literal_update) {
  if (z.size() != eps_hat.size()) {
    throw ShapeMismatchError("reverse_step: latent/noise size mismatch");
  }
  const double a = schedule.alpha(t);  // validates t
  const double coeff =
      literal_update
          ? (1.0 - a) / std::sqrt(1.0 - a)  // as printed in the source
          : (1.0 - a) / std::sqrt(1.0 - schedule.alpha_bar(t));  // standard
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  std::vector<nn::real> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = inv_sqrt_a * (z[i] - coeff * eps_hat[i]);
  }
  return out;
}

TensorPtr DmModel::denoise_from(const TensorPtr& z_t, int t_start,
                                const TensorPtr& h, Rng* noise) const {
  if (!z_t || !h) {
    throw ShapeMismatchError("denoise_from: null input");
  }
  if (t_start < 1 || t_start > config_.t_steps) {
    throw BadTimestepError("denoise_from: start step outside schedule");
  }
  const int s = z_t->rows();
  const int d = config_.d;
  std::vector<nn::real> z = z_t->value;
  for (int t = t_start; t >= 1; --t) {
    auto z_const = nn::Tensor::from_values({s, d}, z);
    auto eps_hat = predict_noise(z_const, t, h);
    z = reverse_step(z, eps_hat->value, t, schedule_,
                     config_.literal_update);
    if (!config_.literal_update && t > 1 && noise != nullptr) {
      // Posterior standard deviation sigma_t = sqrt(beta_tilde_t).
      const double beta_tilde = (1.0 - schedule_.alpha_bar(t - 1)) /
                                (1.0 - schedule_.alpha_bar(t)) *
                                schedule_.beta(t);
      const double sigma = std::sqrt(beta_tilde);
      for (auto& v : z) {
        v += sigma * noise->normal(0.0, 1.0);
      }
    }
  }
  return nn::Tensor::from_values({s, d}, z);
}

std::vector<RpVector> DmModel::sample(const TensorPtr& h, const Vae& vae,
                                      uint64_t seed) const {
  if (!trained_) {
    throw ModelNotTrainedError("DmModel: sample before training");
  }
  if (!h || h->rows() < 1) {
    throw ShapeMismatchError("DmModel: empty page");
  }
  Rng rng(seed);
  auto z_t = nn::Tensor::create({h->rows(), config_.d});
  nn::fill_normal(*z_t, rng, 0.0, 1.0);
  auto z0 = denoise_from(z_t, config_.t_steps, h, &rng);
  return vae.decode_argmax(z0);
}

void DmModel::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["model"] = "dm";
  cfg["d"] = config_.d;
  cfg["layers"] = config_.layers;
  cfg["n_heads"] = config_.n_heads;
  cfg["max_seq"] = config_.max_seq;
  cfg["mlp_hidden"] = config_.mlp_hidden;
  cfg["t_steps"] = config_.t_steps;
  cfg["time_hidden"] = config_.time_hidden;
  cfg["stop_grad_vae"] = config_.stop_grad_vae;
  cfg["use_mean_latent"] = config_.use_mean_latent;
  cfg["literal_update"] = config_.literal_update;
  cfg["trained"] = trained_;
  nn::save_checkpoint(path, params_.all(), cfg.dump());
}

DmModel DmModel::load(const std::string& path) {
  const auto ckpt = nn::load_checkpoint(path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("DmModel: bad config sidecar: ") +
                          e.what());
  }
  if (!cfg.contains("model") || cfg["model"] != "dm") {
    throw CheckpointError("DmModel: checkpoint is not a denoiser model");
  }
  DmConfig config;
  config.d = cfg.at("d").get<int>();
  config.layers = cfg.at("layers").get<int>();
  config.n_heads = cfg.at("n_heads").get<int>();
  config.max_seq = cfg.at("max_seq").get<int>();
  config.mlp_hidden = cfg.at("mlp_hidden").get<int>();
  config.t_steps = cfg.at("t_steps").get<int>();
  config.time_hidden = cfg.at("time_hidden").get<int>();
  config.stop_grad_vae = cfg.at("stop_grad_vae").get<bool>();
  config.use_mean_latent = cfg.at("use_mean_latent").get<bool>();
  config.literal_update = cfg.at("literal_update").get<bool>();
  Rng init(0);
  DmModel model(config, init);
  nn::restore_params(ckpt, model.params_.all());
  model.trained_ = cfg.value("trained", false);
  return model;
}

}  // namespace webrpg

#include "webrpg/ar.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"
#include "webrpg/nn/checkpoint.hpp"

namespace webrpg {

using nn::TensorPtr;

ArConfig full_scale_ar_config() {
  ArConfig cfg;
  cfg.enc_layers = 6;
  cfg.dec_layers = 6;
  cfg.n_heads = 8;
  return cfg;
}

std::vector<uint8_t> build_mask(int s, double r, uint64_t seed) {
  if (s <= 0) {
    throw BadConfigError("build_mask: sequence length must be positive");
  }
  if (!(r >= 0.0 && r < 1.0)) {
    throw BadConfigError("build_mask: ratio must lie in [0, 1)");
  }
  const int k = static_cast<int>(std::ceil(std::cos(M_PI * r / 2.0) * s));
  std::vector<uint8_t> mask(static_cast<size_t>(s), 0);
  Rng rng(seed);
  for (const int i : rng.sample_without_replacement(s, k)) {
    mask[static_cast<size_t>(i)] = 1;
  }
  return mask;
}

TensorPtr mask_latents(const TensorPtr& z, const std::vector<uint8_t>& mask,
                       const TensorPtr& mask_vector) {
  if (!z || !mask_vector) {
    throw ShapeMismatchError("mask_latents: null input");
  }
  if (static_cast<int>(mask.size()) != z->rows()) {
    throw ShapeMismatchError("mask_latents: mask length != latent rows");
  }
  if (mask_vector->rows() != 1 || mask_vector->cols() != z->cols()) {
    throw ShapeMismatchError("mask_latents: mask vector must be [1, d]");
  }
  std::vector<nn::real> m(mask.begin(), mask.end());
  return nn::row_blend(m, nn::repeat_row(mask_vector, z->rows()), z);
}

namespace {

constexpr double kInitSd = 0.02;

}  // namespace

ArModel::ArModel(ArConfig config, Rng& rng) : config_(config) {
  if (config_.d <= 0 || config_.mlp_hidden <= 0 || config_.max_seq <= 0) {
    throw BadConfigError("ArModel: dimensions must be positive");
  }
  if (config_.enc_layers <= 0 || config_.dec_layers <= 0) {
    throw BadConfigError("ArModel: layer counts must be positive");
  }
  if (config_.n_heads <= 0 || config_.d % config_.n_heads != 0) {
    throw BadConfigError("ArModel: head count must divide the width");
  }

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
  auto attn = [&](const std::string& name) {
    nn::AttentionWeights w;
    w.wq = weight(name + ".wq", d, d);
    w.bq = bias(name + ".bq", d);
    w.wk = weight(name + ".wk", d, d);
    w.bk = bias(name + ".bk", d);
    w.wv = weight(name + ".wv", d, d);
    w.bv = bias(name + ".bv", d);
    w.wo = weight(name + ".wo", d, d);
    w.bo = bias(name + ".bo", d);
    return w;
  };
  auto mlp = [&](const std::string& name) {
    MlpParams p;
    p.w1 = weight(name + ".w1", d, config_.mlp_hidden);
    p.b1 = bias(name + ".b1", config_.mlp_hidden);
    p.w2 = weight(name + ".w2", config_.mlp_hidden, d);
    p.b2 = bias(name + ".b2", d);
    return p;
  };

  mask_ = weight("ar.mask", 1, d);
  bos_ = weight("ar.bos", 1, d);
  pos_enc_ = weight("ar.enc.pos", config_.max_seq, d);
  pos_dec_ = weight("ar.dec.pos", config_.max_seq, d);

  for (int i = 0; i < config_.enc_layers; ++i) {
    const std::string base = "ar.enc." + std::to_string(i);
    EncLayer layer;
    layer.ln1 = ln(base + ".ln1");
    layer.attn = attn(base + ".attn");
    layer.ln2 = ln(base + ".ln2");
    layer.mlp = mlp(base + ".mlp");
    enc_layers_.push_back(layer);
  }
  enc_ln_f_ = ln("ar.enc.ln_f");

  for (int i = 0; i < config_.dec_layers; ++i) {
    const std::string base = "ar.dec." + std::to_string(i);
    DecLayer layer;
    layer.ln1 = ln(base + ".ln1");
    layer.self_attn = attn(base + ".self");
    layer.lnc = ln(base + ".lnc");
    layer.cross = attn(base + ".cross");
    layer.ln2 = ln(base + ".ln2");
    layer.mlp = mlp(base + ".mlp");
    dec_layers_.push_back(layer);
  }
  dec_ln_f_ = ln("ar.dec.ln_f");
  out_w_ = weight("ar.out.w", d, d);
  out_b_ = bias("ar.out.b", d);
}

TensorPtr ArModel::encode_context(const TensorPtr& h,
                                  const TensorPtr& z_mask) const {
  if (!h || !z_mask) {
    throw ShapeMismatchError("encode_context: null input");
  }
  if (h->cols() != config_.d) {
    throw ShapeMismatchError("encode_context: embedding width != model width");
  }
  const int s = h->rows();
  if (s > config_.max_seq) {
    throw OutOfRangeError("encode_context: page longer than max_seq");
  }
  auto x = nn::add(nn::add(h, z_mask), nn::slice_rows(pos_enc_, 0, s));
  for (const auto& layer : enc_layers_) {
    auto normed = nn::layer_norm(x, layer.ln1.g, layer.ln1.b);
    x = nn::add(x, nn::attention(normed, normed, layer.attn, config_.n_heads,
                                 /*causal=*/false));
    auto pre_mlp = nn::layer_norm(x, layer.ln2.g, layer.ln2.b);
    auto hidden = nn::gelu(nn::linear(pre_mlp, layer.mlp.w1, layer.mlp.b1));
    x = nn::add(x, nn::linear(hidden, layer.mlp.w2, layer.mlp.b2));
  }
  return nn::layer_norm(x, enc_ln_f_.g, enc_ln_f_.b);
}

TensorPtr ArModel::run_decoder(const TensorPtr& enc_out,
                               const TensorPtr& z_in) const {
  const int s = z_in->rows();
  if (s > config_.max_seq) {
    throw OutOfRangeError("decoder: page longer than max_seq");
  }
  auto x = nn::add(z_in, nn::slice_rows(pos_dec_, 0, s));
  for (const auto& layer : dec_layers_) {
    auto normed = nn::layer_norm(x, layer.ln1.g, layer.ln1.b);
    x = nn::add(x, nn::attention(normed, normed, layer.self_attn,
                                 config_.n_heads, /*causal=*/true));
    auto q = nn::layer_norm(x, layer.lnc.g, layer.lnc.b);
    x = nn::add(x, nn::attention(q, enc_out, layer.cross, config_.n_heads,
                                 /*causal=*/false));
    auto pre_mlp = nn::layer_norm(x, layer.ln2.g, layer.ln2.b);
    auto hidden = nn::gelu(nn::linear(pre_mlp, layer.mlp.w1, layer.mlp.b1));
    x = nn::add(x, nn::linear(hidden, layer.mlp.w2, layer.mlp.b2));
  }
  x = nn::layer_norm(x, dec_ln_f_.g, dec_ln_f_.b);
  return nn::linear(x, out_w_, out_b_);
}

TensorPtr ArModel::decode_teacher_forced(const TensorPtr& enc_out,
                                         const TensorPtr& z_teacher) const {
  if (!enc_out || !z_teacher) {
    throw ShapeMismatchError("decode_teacher_forced: null input");
  }
  const int s = z_teacher->rows();
  // Shift right: BOS, then ground-truth latents for elements 1..S-1.
  auto z_in = s > 1
                  ? nn::concat_rows(bos_, nn::slice_rows(z_teacher, 0, s - 1))
                  : nn::TensorPtr(bos_);
  return run_decoder(enc_out, z_in);
}

TensorPtr ArModel::page_loss(const Example& page, const Vae& vae,
                             Rng& rng) const {
  const int s = static_cast<int>(page.rps.size());
  if (!page.h || page.h->rows() != s) {
    throw ShapeMismatchError("ArModel: embedding rows != element count");
  }

  auto [mu, logvar] = vae.encode(page.rps);
  auto z = config_.use_mean_latent ? mu : vae.sample_latent(mu, logvar, rng);
  auto z_gen = config_.stop_grad_vae ? nn::detach(z) : z;

  const double r = rng.uniform();
  const auto mask = build_mask(s, r, rng.uniform_int(0, 1'000'000'000));
  auto z_mask = mask_latents(z_gen, mask, mask_);

  auto enc_out = encode_context(page.h, z_mask);
  auto z_hat = decode_teacher_forced(enc_out, z_gen);
  auto gen_ce = vae.reconstruction_ce(vae.decode(z_hat), page.rps);

  // Compressor term, reusing the posterior computed above.
  auto vae_ce = vae.reconstruction_ce(vae.decode(z), page.rps);
  auto page_total = nn::add(gen_ce, vae_ce);
  if (vae.config().lambda_kl > 0.0) {
    page_total = nn::add(
        page_total,
        nn::scale(nn::kl_standard_normal(mu, logvar), vae.config().lambda_kl));
  }
  return page_total;
}

TensorPtr ArModel::loss(const std::vector<Example>& batch, const Vae& vae,
                        Rng& rng) const {
  if (batch.empty()) {
    throw BadConfigError("ArModel: empty page batch");
  }
  if (vae.config().latent_dim != config_.d) {
    throw ShapeMismatchError("ArModel: latent dim != model width");
  }
  TensorPtr total;
  for (const auto& page : batch) {
    auto l = page_loss(page, vae, rng);
    total = total ? nn::add(total, l) : l;
  }
  return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
}

double ArModel::train_step(const std::vector<Example>& batch, const Vae& vae,
                           nn::AdamW& opt, Rng& rng) {
  auto l = loss(batch, vae, rng);
  const double value = l->value[0];
  if (!std::isfinite(value)) {
    throw DivergenceDetectedError("ArModel: non-finite training loss");
  }
  opt.zero_grad();
  nn::backward(l);
  opt.step();
  trained_ = true;
  return value;
}

std::vector<RpVector> ArModel::generate(const TensorPtr& h, const Vae& vae,
                                        uint64_t /*seed*/) const {
  if (!trained_) {
    throw ModelNotTrainedError("ArModel: generate before training");
  }
  if (!h || h->rows() < 1) {
    throw ShapeMismatchError("ArModel: empty page");
  }
  const int s = h->rows();
  const int d = config_.d;

  // Inference masks every position.
  auto z_mask = nn::repeat_row(mask_, s);
  auto enc_out = encode_context(h, z_mask);

  // Each prediction is decoded to tokens and committed immediately; the
  // decoder context is the compressor latent of the committed tokens, not
  // the raw prediction. Teacher forcing only ever exposed the decoder to
  // compressor latents, and a raw prediction can decode to the right
  // tokens from far outside that manifold, so feeding it back compounds
  // off-distribution drift.
  std::vector<RpVector> committed;
  committed.reserve(static_cast<size_t>(s));
  std::vector<nn::real> context;  // re-encoded rows, filled left to right
  context.reserve(static_cast<size_t>(s) * d);
  for (int i = 0; i < s; ++i) {
    TensorPtr z_in = bos_;
    if (i > 0) {
      auto prev = nn::Tensor::from_values({i, d}, context);
      z_in = nn::concat_rows(bos_, prev);
    }
    auto out = run_decoder(enc_out, z_in);
    std::vector<nn::real> row(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) {
      row[static_cast<size_t>(j)] = out->at(i, j);
    }
    committed.push_back(
        vae.decode_argmax(nn::Tensor::from_values({1, d}, row))[0]);
    const auto reenc = vae.encode_mean({committed.back()});
    for (int j = 0; j < d; ++j) {
      context.push_back(reenc->at(0, j));
    }
  }
  return committed;
}

void ArModel::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["model"] = "ar";
  cfg["d"] = config_.d;
  cfg["enc_layers"] = config_.enc_layers;
  cfg["dec_layers"] = config_.dec_layers;
  cfg["n_heads"] = config_.n_heads;
  cfg["max_seq"] = config_.max_seq;
  cfg["mlp_hidden"] = config_.mlp_hidden;
  cfg["stop_grad_vae"] = config_.stop_grad_vae;
  cfg["use_mean_latent"] = config_.use_mean_latent;
  cfg["trained"] = trained_;
  nn::save_checkpoint(path, params_.all(), cfg.dump());
}

ArModel ArModel::load(const std::string& path) {
  const auto ckpt = nn::load_checkpoint(path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("ArModel: bad config sidecar: ") +
                          e.what());
  }
  if (!cfg.contains("model") || cfg["model"] != "ar") {
    throw CheckpointError("ArModel: checkpoint is not a generator model");
  }
  ArConfig config;
  config.d = cfg.at("d").get<int>();
  config.enc_layers = cfg.at("enc_layers").get<int>();
  config.dec_layers = cfg.at("dec_layers").get<int>();
  config.n_heads = cfg.at("n_heads").get<int>();
  config.max_seq = cfg.at("max_seq").get<int>();
  config.mlp_hidden = cfg.at("mlp_hidden").get<int>();
  config.stop_grad_vae = cfg.at("stop_grad_vae").get<bool>();
  config.use_mean_latent = cfg.at("use_mean_latent").get<bool>();
  Rng init(0);
  ArModel model(config, init);
  nn::restore_params(ckpt, model.params_.all());
  model.trained_ = cfg.value("trained", false);
  return model;
}

}  // namespace webrpg

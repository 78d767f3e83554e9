#include "webrpg/vae.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"
#include "webrpg/nn/checkpoint.hpp"
#include "webrpg/nn/ops.hpp"
#include "webrpg/rp_codec.hpp"

namespace webrpg {

using nn::TensorPtr;

Vae::Vae(VaeConfig config, Rng& rng, const Vocabulary& vocab)
    : config_(std::move(config)), vocab_(vocab) {
  if (config_.latent_dim <= 0) {
    throw BadConfigError("Vae: latent dimension must be positive");
  }
  if (config_.enc_hidden.size() != 4 || config_.dec_hidden.size() != 4) {
    throw BadConfigError(
        "Vae: encoder and decoder are 5-layer MLPs (4 hidden widths each)");
  }
  for (const int w : config_.enc_hidden) {
    if (w <= 0) {
      throw BadConfigError("Vae: hidden widths must be positive");
    }
  }
  for (const int w : config_.dec_hidden) {
    if (w <= 0) {
      throw BadConfigError("Vae: hidden widths must be positive");
    }
  }
  if (config_.lambda_kl < 0.0) {
    throw BadConfigError("Vae: lambda_kl must be non-negative");
  }

  // Head geometry: one categorical head per parameter over its legal tokens;
  // the nine style heads get one extra class for pad (absent property).
  class_by_token_.assign(kParamCount, std::vector<int>(kVocabSize, -1));
  token_by_class_.assign(kParamCount, {});
  int offset = 0;
  for (const RpName param : all_params()) {
    const auto idx = static_cast<size_t>(param);
    const auto legal = vocab_.legal_tokens(param);
    Head head;
    head.param = param;
    head.lo = offset;
    head.has_pad = param_category(param) != RpCategory::kLayout;
    for (const RpTokenId tok : legal) {
      class_by_token_[idx][static_cast<size_t>(tok)] =
          static_cast<int>(token_by_class_[idx].size());
      token_by_class_[idx].push_back(tok);
    }
    if (head.has_pad) {
      class_by_token_[idx][kPadToken] =
          static_cast<int>(token_by_class_[idx].size());
      token_by_class_[idx].push_back(kPadToken);
    }
    offset += static_cast<int>(token_by_class_[idx].size());
    head.hi = offset;
    heads_.push_back(head);
  }
  total_classes_ = offset;

  const int in_rows = kParamCount * kVocabSize;
  const auto& eh = config_.enc_hidden;
  const auto& dh = config_.dec_hidden;
  const std::vector<std::pair<int, int>> enc_shapes = {
      {in_rows, eh[0]},
      {eh[0], eh[1]},
      {eh[1], eh[2]},
      {eh[2], eh[3]},
      {eh[3], 2 * config_.latent_dim}};
  const std::vector<std::pair<int, int>> dec_shapes = {
      {config_.latent_dim, dh[0]},
      {dh[0], dh[1]},
      {dh[1], dh[2]},
      {dh[2], dh[3]},
      {dh[3], total_classes_}};
  for (size_t i = 0; i < enc_shapes.size(); ++i) {
    auto w = params_.add("vae.enc.w" + std::to_string(i),
                         nn::Tensor::create({enc_shapes[i].first,
                                             enc_shapes[i].second}));
    auto b = params_.add("vae.enc.b" + std::to_string(i),
                         nn::Tensor::create({1, enc_shapes[i].second}));
    // The first layer sees a 13-hot input, so its effective fan-in is the
    // number of parameters, not the one-hot width.
    nn::fill_kaiming(*w, rng, i == 0 ? kParamCount : enc_shapes[i].first);
    enc_w_.push_back(w);
    enc_b_.push_back(b);
  }
  for (size_t i = 0; i < dec_shapes.size(); ++i) {
    auto w = params_.add("vae.dec.w" + std::to_string(i),
                         nn::Tensor::create({dec_shapes[i].first,
                                             dec_shapes[i].second}));
    auto b = params_.add("vae.dec.b" + std::to_string(i),
                         nn::Tensor::create({1, dec_shapes[i].second}));
    nn::fill_kaiming(*w, rng, dec_shapes[i].first);
    dec_w_.push_back(w);
    dec_b_.push_back(b);
  }
}

int Vae::class_of(RpName param, RpTokenId token) const {
  if (token < 0 || token >= kVocabSize) {
    throw IllegalTokenError("class_of: token " + std::to_string(token) +
                            " outside vocabulary");
  }
  return class_by_token_[static_cast<size_t>(param)][static_cast<size_t>(token)];
}

RpTokenId Vae::token_of(RpName param, int cls) const {
  const auto& table = token_by_class_[static_cast<size_t>(param)];
  if (cls < 0 || cls >= static_cast<int>(table.size())) {
    throw OutOfRangeError("token_of: class " + std::to_string(cls) +
                          " outside head");
  }
  return table[static_cast<size_t>(cls)];
}

std::vector<std::vector<int>> Vae::onehot_ids(
    const std::vector<RpVector>& batch) const {
  if (batch.empty()) {
    throw ShapeMismatchError("Vae: empty batch");
  }
  std::vector<std::vector<int>> ids;
  ids.reserve(batch.size());
  for (const auto& v : batch) {
    const auto violations = validate_vector(v, PadPolicy::kStyleOnly, vocab_);
    if (!violations.empty()) {
      throw InvalidVectorError("Vae: invalid vector: " +
                               violations.front().reason);
    }
    std::vector<int> row;
    row.reserve(kParamCount);
    for (const RpName param : all_params()) {
      row.push_back(static_cast<int>(param) * kVocabSize + v[param]);
    }
    ids.push_back(std::move(row));
  }
  return ids;
}

std::pair<TensorPtr, TensorPtr> Vae::encode(
    const std::vector<RpVector>& batch) const {
  const auto ids = onehot_ids(batch);
  auto x = nn::gelu(nn::add_broadcast_row(nn::lookup_sum(enc_w_[0], ids),
                                          enc_b_[0]));
  for (size_t i = 1; i + 1 < enc_w_.size(); ++i) {
    x = nn::gelu(nn::linear(x, enc_w_[i], enc_b_[i]));
  }
  auto out = nn::linear(x, enc_w_.back(), enc_b_.back());
  auto mu = nn::slice_cols(out, 0, config_.latent_dim);
  auto logvar = nn::slice_cols(out, config_.latent_dim,
                               2 * config_.latent_dim);
  return {mu, logvar};
}

TensorPtr Vae::sample_latent(const TensorPtr& mu, const TensorPtr& logvar,
                             Rng& noise) const {
  auto eps = nn::Tensor::create(mu->shape);
  nn::fill_normal(*eps, noise, 0.0, 1.0);
  return nn::gaussian_sample(mu, logvar, eps);
}

TensorPtr Vae::decode(const TensorPtr& z) const {
  if (!z || z->shape.size() != 2 || z->cols() != config_.latent_dim) {
    throw ShapeMismatchError("Vae::decode: expected [S, latent] input");
  }
  auto x = z;
  for (size_t i = 0; i + 1 < dec_w_.size(); ++i) {
    x = nn::gelu(nn::linear(x, dec_w_[i], dec_b_[i]));
  }
  return nn::linear(x, dec_w_.back(), dec_b_.back());
}

TensorPtr Vae::reconstruction_ce(const TensorPtr& logits,
                                 const std::vector<RpVector>& batch) const {
  if (!logits || logits->shape.size() != 2 ||
      logits->cols() != total_classes_ ||
      logits->rows() != static_cast<int>(batch.size())) {
    throw ShapeMismatchError("Vae: logits do not match the batch");
  }
  TensorPtr total;
  for (const auto& head : heads_) {
    std::vector<int> targets;
    targets.reserve(batch.size());
    for (const auto& v : batch) {
      const int cls = class_of(head.param, v[head.param]);
      if (cls < 0) {
        throw InvalidVectorError(
            "Vae: token " + std::to_string(v[head.param]) +
            " is not representable in the '" + param_name(head.param) +
            "' head");
      }
      targets.push_back(cls);
    }
    auto ce = nn::softmax_cross_entropy(
        nn::slice_cols(logits, head.lo, head.hi), targets);
    total = total ? nn::add(total, ce) : ce;
  }
  return total;
}

TensorPtr Vae::loss(const std::vector<RpVector>& batch, Rng& noise) const {
  auto [mu, logvar] = encode(batch);
  auto z = sample_latent(mu, logvar, noise);
  auto ce = reconstruction_ce(decode(z), batch);
  if (config_.lambda_kl == 0.0) {
    return ce;  // exactly the mean reconstruction CE
  }
  return nn::add(ce, nn::scale(nn::kl_standard_normal(mu, logvar),
                               config_.lambda_kl));
}

TensorPtr Vae::encode_mean(const std::vector<RpVector>& batch) const {
  return encode(batch).first;
}

std::vector<RpVector> Vae::decode_argmax(const TensorPtr& z) const {
  const auto logits = decode(nn::detach(z));
  std::vector<RpVector> out;
  out.reserve(static_cast<size_t>(logits->rows()));
  for (int row = 0; row < logits->rows(); ++row) {
    RpVector v;
    for (const auto& head : heads_) {
      const int cls = nn::argmax_row(*logits, row, head.lo, head.hi) - head.lo;
      v[head.param] = token_of(head.param, cls);
    }
    out.push_back(v);
  }
  return out;
}

Vae::TrainLog Vae::pretrain(const std::function<RpVector(Rng&)>& sampler,
                            int steps, int batch_size, Rng& rng,
                            nn::OptimizerConfig opt,
                            const std::function<bool()>& stop_when,
                            int check_every) {
  if (steps < 0 || batch_size <= 0) {
    throw BadConfigError("Vae::pretrain: bad step or batch count");
  }
  nn::AdamW optimizer(params_.all(), opt);
  TrainLog log;
  for (int step = 0; step < steps; ++step) {
    std::vector<RpVector> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      batch.push_back(sampler(rng));
    }
    optimizer.zero_grad();
    auto l = loss(batch, rng);
    if (!std::isfinite(l->value[0])) {
      throw DivergenceDetectedError("Vae::pretrain: loss became non-finite");
    }
    nn::backward(l);
    optimizer.step();
    log.losses.push_back(l->value[0]);
    if (stop_when && check_every > 0 && (step + 1) % check_every == 0 &&
        stop_when()) {
      break;
    }
  }
  return log;
}

void Vae::save(const std::string& path) const {
  nlohmann::ordered_json cfg;
  cfg["model"] = "vae";
  cfg["vocab_size"] = kVocabSize;
  cfg["latent_dim"] = config_.latent_dim;
  cfg["enc_hidden"] = config_.enc_hidden;
  cfg["dec_hidden"] = config_.dec_hidden;
  cfg["lambda_kl"] = config_.lambda_kl;
  nn::save_checkpoint(path, params_.all(), cfg.dump(2));
}

Vae Vae::load(const std::string& path, const Vocabulary& vocab) {
  const auto ckpt = nn::load_checkpoint(path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("unreadable model config: " + std::string(e.what()));
  }
  if (cfg.value("model", "") != "vae") {
    throw CheckpointError("checkpoint is not a vae model");
  }
  if (cfg.value("vocab_size", 0) != kVocabSize) {
    throw CheckpointError("checkpoint was built for a different vocabulary");
  }
  VaeConfig config;
  config.latent_dim = cfg.at("latent_dim").get<int>();
  config.enc_hidden = cfg.at("enc_hidden").get<std::vector<int>>();
  config.dec_hidden = cfg.at("dec_hidden").get<std::vector<int>>();
  config.lambda_kl = cfg.at("lambda_kl").get<double>();
  Rng init_rng(0);  // values are replaced by the checkpoint below
  Vae vae(config, init_rng, vocab);
  nn::restore_params(ckpt, vae.params_.all());
  return vae;
}

}  // namespace webrpg

#include "webrpg/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"
#include "webrpg/nn/checkpoint.hpp"

namespace webrpg {

using nn::TensorPtr;

// ---------------------------------------------------------------- layout --

BBox bbox_of(const RpVector& v) {
  const RpName parts[] = {RpName::kLeft, RpName::kTop, RpName::kWidth,
                          RpName::kHeight};
  for (const RpName p : parts) {
    if (v[p] == kPadToken) {
      throw MissingLayoutError(std::string("bbox_of: ") + param_name(p) +
                               " is pad");
    }
  }
  return BBox{v[RpName::kLeft], v[RpName::kTop], v[RpName::kWidth],
              v[RpName::kHeight]};
}

double box_iou(const BBox& a, const BBox& b) {
  const long long area_a = 1LL * a.width * a.height;
  const long long area_b = 1LL * b.width * b.height;
  if (area_a == 0 && area_b == 0) {
    return 1.0;
  }
  if (area_a == 0 || area_b == 0) {
    return 0.0;
  }
  const long long iw = std::max(
      0LL, std::min<long long>(a.left + a.width, b.left + b.width) -
               std::max<long long>(a.left, b.left));
  const long long ih = std::max(
      0LL, std::min<long long>(a.top + a.height, b.top + b.height) -
               std::max<long long>(a.top, b.top));
  const long long inter = iw * ih;
  const long long uni = area_a + area_b - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double ele_iou(const std::vector<BBox>& real, const std::vector<BBox>& gen) {
  if (real.size() != gen.size()) {
    throw LengthMismatchError("ele_iou: box counts differ");
  }
  if (real.empty()) {
    throw LengthMismatchError("ele_iou: no boxes");
  }
  double acc = 0.0;
  for (size_t i = 0; i < real.size(); ++i) {
    acc += box_iou(real[i], gen[i]);
  }
  return acc / static_cast<double>(real.size());
}

double ele_iou(const PageRps& real, const PageRps& gen) {
  if (real.size() != gen.size()) {
    throw IdMismatchError("ele_iou: element counts differ");
  }
  std::vector<BBox> a, b;
  auto it = gen.begin();
  for (const auto& [id, v] : real) {
    if (it->first != id) {
      throw IdMismatchError("ele_iou: element id sets differ");
    }
    a.push_back(bbox_of(v));
    b.push_back(bbox_of(it->second));
    ++it;
  }
  return ele_iou(a, b);
}

// ----------------------------------------------------------------- style --

StyleKey style_key(const RpVector& v) {
  StyleKey key{};
  size_t i = 0;
  for (const RpName p : all_params()) {
    if (param_category(p) == RpCategory::kLayout) {
      continue;
    }
    key[i++] = v[p];
  }
  return key;
}

std::vector<StyleSubset> style_partition(const PageRps& page) {
  std::vector<StyleSubset> subsets;
  for (const auto& [id, v] : page) {  // ascending id
    const StyleKey key = style_key(v);
    auto it = std::find_if(subsets.begin(), subsets.end(),
                           [&](const StyleSubset& s) { return s.style == key; });
    if (it == subsets.end()) {
      subsets.push_back(StyleSubset{key, {id}});
    } else {
      it->members.push_back(id);
    }
  }
  return subsets;
}

std::vector<StyleSubset> style_partition(const Page& page) {
  if (!page.rps) {
    throw MissingStyleError("style_partition: page has no rendering parameters");
  }
  PageRps rps;
  for (const auto& el : page.elements) {
    const auto it = page.rps->find(el.id);
    if (it == page.rps->end()) {
      throw MissingStyleError("style_partition: element " +
                              std::to_string(el.id) + " has no parameters");
    }
    rps.emplace(el.id, it->second);
  }
  return style_partition(rps);
}

namespace {

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(inter));
  const size_t uni = a.size() + b.size() - inter.size();
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

}  // namespace

double sc_score(const PageRps& real, const PageRps& gen) {
  if (real.size() != gen.size()) {
    throw IdMismatchError("sc_score: element counts differ");
  }
  auto it = gen.begin();
  for (const auto& [id, v] : real) {
    (void)v;
    if (it->first != id) {
      throw IdMismatchError("sc_score: element id sets differ");
    }
    ++it;
  }
  if (real.empty()) {
    throw IdMismatchError("sc_score: empty page");
  }
  const auto real_subsets = style_partition(real);
  const auto gen_subsets = style_partition(gen);
  double acc = 0.0;  // sum of |S_j| * best overlap; one divide at the end
  for (const auto& s : real_subsets) {
    double best = 0.0;
    for (const auto& g : gen_subsets) {
      best = std::max(best, jaccard(s.members, g.members));
    }
    acc += static_cast<double>(s.members.size()) * best;
  }
  return acc / static_cast<double>(real.size());
}

// ------------------------------------------------------------------- fid --

FidStats feature_stats(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) {
    throw BadConfigError("feature_stats: need at least two feature vectors");
  }
  const size_t dim = features[0].size();
  if (dim == 0) {
    throw ShapeMismatchError("feature_stats: empty feature vectors");
  }
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw ShapeMismatchError("feature_stats: ragged feature vectors");
    }
  }
  const double n = static_cast<double>(features.size());
  FidStats stats;
  stats.dim = static_cast<int>(dim);
  stats.mean.assign(dim, 0.0);
  for (const auto& f : features) {
    for (size_t i = 0; i < dim; ++i) {
      stats.mean[i] += f[i];
    }
  }
  for (auto& m : stats.mean) {
    m /= n;
  }
  stats.cov.assign(dim * dim, 0.0);
  for (const auto& f : features) {
    for (size_t i = 0; i < dim; ++i) {
      const double di = f[i] - stats.mean[i];
      for (size_t j = 0; j < dim; ++j) {
        stats.cov[i * dim + j] += di * (f[j] - stats.mean[j]);
      }
    }
  }
  for (auto& c : stats.cov) {
    c /= n - 1.0;
  }
  return stats;
}

namespace {

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw SingularCovarianceError("fid: eigendecomposition failed");
  }
  Eigen::VectorXd roots = solver.eigenvalues();
  for (int i = 0; i < roots.size(); ++i) {
    roots[i] = std::sqrt(std::max(roots[i], 0.0));
  }
  return solver.eigenvectors() * roots.asDiagonal() *
         solver.eigenvectors().transpose();
}

}  // namespace

double fid_from_stats(const FidStats& a, const FidStats& b) {
  if (a.dim != b.dim || a.dim <= 0) {
    throw ShapeMismatchError("fid_from_stats: dimension mismatch");
  }
  const int d = a.dim;
  constexpr double kJitter = 1e-10;

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      ca(a.cov.data(), d, d), cb(b.cov.data(), d, d);
  Eigen::MatrixXd sa = ca;
  Eigen::MatrixXd sb = cb;
  sa.diagonal().array() += kJitter;
  sb.diagonal().array() += kJitter;

  double mean_term = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = a.mean[static_cast<size_t>(i)] -
                        b.mean[static_cast<size_t>(i)];
    mean_term += diff * diff;
  }

  const Eigen::MatrixXd root_a = sqrtm_psd(sa);
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());  // re-symmetrize
  const Eigen::MatrixXd cross_root = sqrtm_psd(inner);

  const double value =
      mean_term + sa.trace() + sb.trace() - 2.0 * cross_root.trace();
  if (!std::isfinite(value)) {
    throw SingularCovarianceError("fid: non-finite distance");
  }
  return std::max(value, 0.0);  // roundoff can push a true zero negative
}

double fid(const std::vector<std::vector<double>>& a,
           const std::vector<std::vector<double>>& b) {
  return fid_from_stats(feature_stats(a), feature_stats(b));
}

// ------------------------------------------------------------ classifier --

namespace {
constexpr double kInitSd = 0.02;
}  // namespace

FidClassifier::FidClassifier(FidClassifierConfig config, Rng& rng)
    : config_(config) {
  if (config_.d <= 0 || config_.mlp_hidden <= 0 || config_.max_seq <= 0) {
    throw BadConfigError("FidClassifier: dimensions must be positive");
  }
  if (config_.layers <= 0) {
    throw BadConfigError("FidClassifier: layer count must be positive");
  }
  if (config_.n_heads <= 0 || config_.d % config_.n_heads != 0) {
    throw BadConfigError("FidClassifier: head count must divide the width");
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

  cls_ = weight("fid.cls", 1, d);
  pos_ = weight("fid.pos", config_.max_seq + 1, d);
  for (int i = 0; i < config_.layers; ++i) {
    const std::string base = "fid." + std::to_string(i);
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
    layers_.push_back(layer);
  }
  ln_f_ = ln("fid.ln_f");
  head_w_ = weight("fid.head.w", d, 2);
  head_b_ = bias("fid.head.b", 2);
}

RpVector FidClassifier::masked(const RpVector& v) const {
  RpVector out = v;
  switch (config_.variant) {
    case FidClassifierConfig::Variant::kOverall:
      break;
    case FidClassifierConfig::Variant::kLayout:
      for (const RpName p : all_params()) {
        if (param_category(p) != RpCategory::kLayout) {
          out[p] = kPadToken;
        }
      }
      break;
    case FidClassifierConfig::Variant::kStyle:
      out[RpName::kLeft] = 0;
      out[RpName::kTop] = 0;
      out[RpName::kWidth] = 0;
      out[RpName::kHeight] = 0;
      break;
  }
  return out;
}

TensorPtr FidClassifier::cls_representation(const TensorPtr& h,
                                            const std::vector<RpVector>& rps,
                                            const Vae& vae) const {
  if (!h || h->rows() != static_cast<int>(rps.size())) {
    throw ShapeMismatchError("FidClassifier: embedding rows != element count");
  }
  if (h->cols() != config_.d || vae.config().latent_dim != config_.d) {
    throw ShapeMismatchError("FidClassifier: width mismatch");
  }
  const int s = h->rows();
  if (s > config_.max_seq) {
    throw OutOfRangeError("FidClassifier: page longer than max_seq");
  }

  std::vector<RpVector> seen(rps.size());
  for (size_t i = 0; i < rps.size(); ++i) {
    seen[i] = masked(rps[i]);
  }
  // The compressor is frozen here: gradients stop at its latents.
  auto z = nn::detach(vae.encode_mean(seen));
  auto x = nn::concat_rows(cls_, nn::add(z, h));
  x = nn::add(x, nn::slice_rows(pos_, 0, s + 1));
  for (const auto& layer : layers_) {
    auto normed = nn::layer_norm(x, layer.ln1.g, layer.ln1.b);
    x = nn::add(x, nn::attention(normed, normed, layer.attn, config_.n_heads,
                                 /*causal=*/false));
    auto pre_mlp = nn::layer_norm(x, layer.ln2.g, layer.ln2.b);
    auto hidden = nn::gelu(nn::linear(pre_mlp, layer.mlp_w1, layer.mlp_b1));
    x = nn::add(x, nn::linear(hidden, layer.mlp_w2, layer.mlp_b2));
  }
  x = nn::layer_norm(x, ln_f_.g, ln_f_.b);
  return nn::slice_rows(x, 0, 1);
}

std::vector<double> FidClassifier::features(const TensorPtr& h,
                                            const std::vector<RpVector>& rps,
                                            const Vae& vae) const {
  const auto rep = cls_representation(h, rps, vae);
  return std::vector<double>(rep->value.begin(), rep->value.end());
}

TensorPtr FidClassifier::logits(const TensorPtr& h,
                                const std::vector<RpVector>& rps,
                                const Vae& vae) const {
  return nn::linear(cls_representation(h, rps, vae), head_w_, head_b_);
}

TensorPtr FidClassifier::loss(const std::vector<Example>& batch,
                              const Vae& vae) const {
  if (batch.empty()) {
    throw BadConfigError("FidClassifier: empty batch");
  }
  TensorPtr total;
  for (const auto& ex : batch) {
    auto l = nn::softmax_cross_entropy(logits(ex.h, ex.rps, vae), {ex.label});
    total = total ? nn::add(total, l) : l;
  }
  return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
}

double FidClassifier::train_step(const std::vector<Example>& batch,
                                 const Vae& vae, nn::AdamW& opt) {
  auto l = loss(batch, vae);
  const double value = l->value[0];
  if (!std::isfinite(value)) {
    throw DivergenceDetectedError("FidClassifier: non-finite loss");
  }
  opt.zero_grad();
  nn::backward(l);
  opt.step();
  trained_ = true;
  return value;
}

double FidClassifier::accuracy(const std::vector<Example>& batch,
                               const Vae& vae) const {
  if (batch.empty()) {
    throw BadConfigError("FidClassifier: empty batch");
  }
  int correct = 0;
  for (const auto& ex : batch) {
    const auto l = logits(ex.h, ex.rps, vae);
    const int pred = nn::argmax_row(*l, 0);
    correct += pred == ex.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

void FidClassifier::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["model"] = "fid";
  cfg["d"] = config_.d;
  cfg["layers"] = config_.layers;
  cfg["n_heads"] = config_.n_heads;
  cfg["max_seq"] = config_.max_seq;
  cfg["mlp_hidden"] = config_.mlp_hidden;
  cfg["variant"] = static_cast<int>(config_.variant);
  cfg["trained"] = trained_;
  nn::save_checkpoint(path, params_.all(), cfg.dump());
}

FidClassifier FidClassifier::load(const std::string& path) {
  const auto ckpt = nn::load_checkpoint(path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("FidClassifier: bad config sidecar: ") +
                          e.what());
  }
  if (!cfg.contains("model") || cfg["model"] != "fid") {
    throw CheckpointError("FidClassifier: checkpoint is not a classifier");
  }
  FidClassifierConfig config;
  config.d = cfg.at("d").get<int>();
  config.layers = cfg.at("layers").get<int>();
  config.n_heads = cfg.at("n_heads").get<int>();
  config.max_seq = cfg.at("max_seq").get<int>();
  config.mlp_hidden = cfg.at("mlp_hidden").get<int>();
  config.variant =
      static_cast<FidClassifierConfig::Variant>(cfg.at("variant").get<int>());
  Rng init(0);
  FidClassifier model(config, init);
  nn::restore_params(ckpt, model.params_.all());
  model.trained_ = cfg.value("trained", false);
  return model;
}

// ---------------------------------------------------------------- noisers --

namespace {

bool numeric_token(RpName param, RpTokenId token) {
  switch (param_category(param)) {
    case RpCategory::kLayout:
      return true;
    case RpCategory::kColor:
      return false;
    case RpCategory::kText:
      if (param == RpName::kFontSize) {
        return true;
      }
      if (param == RpName::kLineHeight) {
        return token <= 50;  // 1979 is the "normal" keyword
      }
      return false;
  }
  return false;
}

RpTokenId redraw(RpName param, Rng& rng, const Vocabulary& vocab) {
  const auto& legal = vocab.legal_tokens(param);
  return legal[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int64_t>(legal.size()) - 1))];
}

RpVector random_legal_vector(Rng& rng, const Vocabulary& vocab) {
  RpVector v;
  for (const RpName param : all_params()) {
    v[param] = redraw(param, rng, vocab);
  }
  return v;
}

}  // namespace

PageRps perturb_values(const PageRps& page, double intensity, uint64_t seed,
                       const NoiserConfig& cfg, const Vocabulary& vocab) {
  Rng rng(seed);
  PageRps out = page;
  for (auto& [id, v] : out) {
    for (const RpName param : all_params()) {
      RpTokenId& tok = v[param];
      if (tok == kPadToken) {
        continue;
      }
      if (numeric_token(param, tok)) {
        const double jitter = rng.normal(0.0, cfg.sigma_px * intensity);
        const long long moved = std::llround(tok + jitter);
        const long long hi = param == RpName::kLineHeight
                                 ? 50
                                 : vocab.max_pixels(param);
        tok = static_cast<RpTokenId>(std::clamp(moved, 0LL, hi));
      } else if (rng.uniform() < cfg.cat_redraw_p * intensity) {
        tok = redraw(param, rng, vocab);
      }
    }
  }
  return out;
}

PageRps substitute_elements(const PageRps& page, double intensity,
                            uint64_t seed, const NoiserConfig& cfg,
                            const Vocabulary& vocab) {
  Rng rng(seed);
  PageRps out = page;
  for (auto& [id, v] : out) {
    if (rng.uniform() < cfg.substitute_frac * intensity) {
      v = random_legal_vector(rng, vocab);
    }
  }
  return out;
}

std::vector<std::pair<int, int>> plan_swaps(const PageRps& page,
                                            double intensity, uint64_t seed,
                                            const NoiserConfig& cfg) {
  std::vector<int> ids;
  ids.reserve(page.size());
  for (const auto& [id, v] : page) {
    (void)v;
    ids.push_back(id);
  }
  const int n = static_cast<int>(ids.size());
  int k = static_cast<int>(
      std::floor(n * cfg.swap_frac * std::max(intensity, 0.0)));
  k = std::min(k, n / 2);
  Rng rng(seed);
  rng.shuffle(ids);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i) {  // disjoint pairs: each id used once
    pairs.emplace_back(ids[static_cast<size_t>(2 * i)],
                       ids[static_cast<size_t>(2 * i + 1)]);
  }
  return pairs;
}

PageRps apply_swaps(const PageRps& page,
                    const std::vector<std::pair<int, int>>& pairs) {
  PageRps out = page;
  for (const auto& [a, b] : pairs) {
    const auto ia = out.find(a);
    const auto ib = out.find(b);
    if (ia == out.end() || ib == out.end()) {
      throw IdMismatchError("apply_swaps: id not on page");
    }
    std::swap(ia->second, ib->second);
  }
  return out;
}

PageRps swap_elements(const PageRps& page, double intensity, uint64_t seed,
                      const NoiserConfig& cfg) {
  return apply_swaps(page, plan_swaps(page, intensity, seed, cfg));
}

}  // namespace webrpg

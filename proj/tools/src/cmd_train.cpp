#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "webrpg/ar.hpp"
#include "webrpg/dm.hpp"
#include "webrpg/errors.hpp"
#include "webrpg/harness.hpp"
#include "webrpg/page.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/vae.hpp"

namespace webrpg::cli {

namespace {

std::vector<Page> load_train_pages(const std::string& data_dir) {
  const auto pages = load_split(data_dir + "/manifest.json", "train");
  if (pages.empty()) {
    throw BadSpecError("train: the train split of " + data_dir + " is empty");
  }
  return pages;
}

std::vector<RpVector> pool_vectors(const std::vector<Page>& pages) {
  std::vector<RpVector> pool;
  for (const auto& page : pages) {
    for (const auto& el : page.elements) {
      pool.push_back(page.rps->at(el.id));
    }
  }
  return pool;
}

// Uniform draw over the legal tokens of every parameter; style slots fall
// back to pad with a small probability so the pad classes get coverage.
RpVector uniform_vector(Rng& rng, const Vocabulary& vocab) {
  RpVector v;
  for (const RpName p : all_params()) {
    if (param_category(p) != RpCategory::kLayout && rng.uniform() < 0.1) {
      continue;
    }
    const auto& legal = vocab.legal_tokens(p);
    v[p] = legal[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(legal.size()) - 1))];
  }
  return v;
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
}

// ------------------------------------------------------------- train-vae --

struct TrainVaeOpts {
  std::string data_dir;
  std::string out_path;
  int steps = 2000;
  int batch = 64;
  uint64_t seed = 0;
  double lr = 1.2e-4;
  int latent = 128;
  double lambda_kl = 1e-6;
  double synthetic_mix = 0.5;
  bool full_scale = false;
};

void run_train_vae(CLI::App& cmd, TrainVaeOpts& o) {
  if (o.full_scale) {
    if (cmd.count("--steps") == 0) o.steps = 1000000;
    if (cmd.count("--batch") == 0) o.batch = 300;
  }
  if (o.out_path.empty()) {
    o.out_path = cache_dir() + "/vae.ckpt";
  }
  std::cerr << "train-vae: data " << o.data_dir << ", steps " << o.steps
            << ", batch " << o.batch << ", seed " << o.seed << ", lr " << o.lr
            << ", latent " << o.latent << ", lambda_kl " << o.lambda_kl
            << ", synthetic mix " << o.synthetic_mix << "\n";

  const auto pool = pool_vectors(load_train_pages(o.data_dir));
  std::cerr << "train-vae: " << pool.size() << " corpus vector(s)\n";

  VaeConfig cfg;
  cfg.latent_dim = o.latent;
  cfg.lambda_kl = o.lambda_kl;
  Rng init(o.seed);
  Vae vae(cfg, init);

  const auto& vocab = vae.vocabulary();
  const auto sampler = [&](Rng& rng) -> RpVector {
    if (rng.uniform() < o.synthetic_mix) {
      return uniform_vector(rng, vocab);
    }
    return pool[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
  };

  nn::OptimizerConfig opt;
  opt.lr = o.lr;
  Rng rng(o.seed + 1);
  const auto log = vae.pretrain(sampler, o.steps, o.batch, rng, opt);
  if (!log.losses.empty()) {
    std::cerr << "train-vae: loss " << log.losses.front() << " -> "
              << log.losses.back() << " over " << log.losses.size()
              << " step(s)\n";
  }
  ensure_parent_dir(o.out_path);
  vae.save(o.out_path);
  std::cerr << "train-vae: checkpoint -> " << o.out_path << "\n";
}

// -------------------------------------------------- shared generator loop --

struct GenTrainIo {
  std::string data_dir;
  std::string vae_path;
  std::string out_path;
  int steps = 200;
  int batch = 2;
  uint64_t seed = 0;
  double lr = 1.2e-4;
  bool freeze_vae = false;
  bool full_scale = false;
};

struct PreparedPages {
  std::vector<Page> pages;
  Vae vae;
  HtmlEmbedder embedder;
  HashedBagEncoder encoder;
};

PreparedPages prepare(const GenTrainIo& o, int max_seq) {
  if (o.vae_path.empty()) {
    throw BadSpecError("train: --vae checkpoint path is required (run train-vae first)");
  }
  Vae vae = Vae::load(o.vae_path);
  const int d = vae.config().latent_dim;

  auto pages = load_train_pages(o.data_dir);
  const size_t before = pages.size();
  pages.erase(std::remove_if(pages.begin(), pages.end(),
                             [&](const Page& p) {
                               return p.size() > max_seq || p.size() == 0;
                             }),
              pages.end());
  if (pages.size() < before) {
    std::cerr << "train: dropped " << before - pages.size()
              << " page(s) longer than " << max_seq << " elements\n";
  }
  if (pages.empty()) {
    throw BadSpecError("train: no page fits the model's sequence limit");
  }

  EmbedderConfig ecfg;
  ecfg.d = d;
  Rng erng(o.seed + 1);
  HtmlEmbedder embedder(ecfg, erng);
  return PreparedPages{std::move(pages), std::move(vae), std::move(embedder),
                       HashedBagEncoder(ecfg.d_sem)};
}

// Seeded epoch shuffling; one batch of page indices per step.
template <typename MakeExample, typename Step>
void train_loop(const GenTrainIo& o, size_t n_pages,
                const MakeExample& make_example, const Step& step_fn) {
  Rng order_rng(o.seed + 2);
  std::vector<size_t> order(n_pages);
  std::iota(order.begin(), order.end(), size_t{0});
  order_rng.shuffle(order);
  size_t cursor = 0;

  const int log_every = std::max(1, o.steps / 10);
  for (int step = 0; step < o.steps; ++step) {
    std::vector<size_t> batch_ids;
    for (int b = 0; b < o.batch; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch_ids.push_back(order[cursor++]);
    }
    const double loss = step_fn(batch_ids, make_example);
    if (step % log_every == 0 || step + 1 == o.steps) {
      std::cerr << "train: step " << step << " loss " << loss << "\n";
    }
  }
}

void add_gen_train_flags(CLI::App* cmd, GenTrainIo& o) {
  cmd->add_option("--data", o.data_dir, "dataset directory (with manifest.json)")
      ->required();
  cmd->add_option("--vae", o.vae_path, "compressor checkpoint")
      ->capture_default_str();
  cmd->add_option("--out", o.out_path, "model checkpoint path");
  cmd->add_option("--steps", o.steps, "optimizer steps")->capture_default_str();
  cmd->add_option("--batch", o.batch, "pages per step")->capture_default_str();
  cmd->add_option("--seed", o.seed, "training seed")->capture_default_str();
  cmd->add_option("--lr", o.lr, "learning rate")->capture_default_str();
  cmd->add_flag("--freeze-vae", o.freeze_vae,
                "keep the compressor fixed instead of fine-tuning it");
  cmd->add_flag("--full-scale", o.full_scale,
                "full-scale preset: 1M steps, batch 300, full-depth model");
}

// -------------------------------------------------------------- train-ar --

struct TrainArOpts {
  GenTrainIo io;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
};

void run_train_ar(CLI::App& cmd, TrainArOpts& o) {
  if (o.io.vae_path.empty()) o.io.vae_path = cache_dir() + "/vae.ckpt";
  if (o.io.out_path.empty()) o.io.out_path = cache_dir() + "/ar.ckpt";
  if (o.io.full_scale) {
    if (cmd.count("--steps") == 0) o.io.steps = 1000000;
    if (cmd.count("--batch") == 0) o.io.batch = 300;
    const ArConfig preset = full_scale_ar_config();
    if (cmd.count("--enc-layers") == 0) o.enc_layers = preset.enc_layers;
    if (cmd.count("--dec-layers") == 0) o.dec_layers = preset.dec_layers;
    if (cmd.count("--heads") == 0) o.heads = preset.n_heads;
  }
  std::cerr << "train-ar: data " << o.io.data_dir << ", vae " << o.io.vae_path
            << ", steps " << o.io.steps << ", batch " << o.io.batch
            << ", seed " << o.io.seed << ", lr " << o.io.lr << ", layers "
            << o.enc_layers << "+" << o.dec_layers << ", heads " << o.heads
            << (o.io.freeze_vae ? ", frozen vae" : "") << "\n";

  ArConfig cfg;
  cfg.enc_layers = o.enc_layers;
  cfg.dec_layers = o.dec_layers;
  cfg.n_heads = o.heads;
  auto prep = prepare(o.io, cfg.max_seq);
  cfg.d = prep.vae.config().latent_dim;
  cfg.stop_grad_vae = o.io.freeze_vae;

  Rng init(o.io.seed + 3);
  ArModel model(cfg, init);

  std::vector<nn::TensorPtr> params = model.params().all();
  for (const auto& t : prep.embedder.params().all()) {
    params.push_back(t);
  }
  if (!o.io.freeze_vae) {
    for (const auto& t : prep.vae.params().all()) {
      params.push_back(t);
    }
  }
  nn::OptimizerConfig opt_cfg;
  opt_cfg.lr = o.io.lr;
  nn::AdamW opt(params, opt_cfg);
  Rng train_rng(o.io.seed + 4);

  const auto make_example = [&](size_t idx) {
    const Page& page = prep.pages[idx];
    ArModel::Example ex;
    ex.h = prep.embedder.embed(page, prep.encoder, std::to_string(idx));
    for (const auto& el : page.elements) {
      ex.rps.push_back(page.rps->at(el.id));
    }
    return ex;
  };
  train_loop(o.io, prep.pages.size(),
             make_example, [&](const std::vector<size_t>& ids, const auto& mk) {
               std::vector<ArModel::Example> batch;
               for (const size_t i : ids) {
                 batch.push_back(mk(i));
               }
               return model.train_step(batch, prep.vae, opt, train_rng);
             });

  ensure_parent_dir(o.io.out_path);
  model.save(o.io.out_path);
  prep.vae.save(o.io.out_path + ".vae");
  save_embedder(o.io.out_path + ".emb", prep.embedder);
  std::cerr << "train-ar: checkpoint -> " << o.io.out_path
            << " (+ .vae, .emb)\n";
}

// -------------------------------------------------------------- train-dm --

struct TrainDmOpts {
  GenTrainIo io;
  int layers = 4;
  int heads = 4;
  int t_steps = 100;
};

void run_train_dm(CLI::App& cmd, TrainDmOpts& o) {
  if (o.io.vae_path.empty()) o.io.vae_path = cache_dir() + "/vae.ckpt";
  if (o.io.out_path.empty()) o.io.out_path = cache_dir() + "/dm.ckpt";
  if (o.io.full_scale) {
    if (cmd.count("--steps") == 0) o.io.steps = 1000000;
    if (cmd.count("--batch") == 0) o.io.batch = 300;
    const DmConfig preset = full_scale_dm_config();
    if (cmd.count("--layers") == 0) o.layers = preset.layers;
    if (cmd.count("--heads") == 0) o.heads = preset.n_heads;
    if (cmd.count("--t-steps") == 0) o.t_steps = preset.t_steps;
  }
  std::cerr << "train-dm: data " << o.io.data_dir << ", vae " << o.io.vae_path
            << ", steps " << o.io.steps << ", batch " << o.io.batch
            << ", seed " << o.io.seed << ", lr " << o.io.lr << ", layers "
            << o.layers << ", heads " << o.heads << ", T " << o.t_steps
            << (o.io.freeze_vae ? ", frozen vae" : "") << "\n";

  DmConfig cfg;
  cfg.layers = o.layers;
  cfg.n_heads = o.heads;
  cfg.t_steps = o.t_steps;
  auto prep = prepare(o.io, cfg.max_seq);
  cfg.d = prep.vae.config().latent_dim;
  cfg.stop_grad_vae = o.io.freeze_vae;

  Rng init(o.io.seed + 3);
  DmModel model(cfg, init);

  std::vector<nn::TensorPtr> params = model.params().all();
  for (const auto& t : prep.embedder.params().all()) {
    params.push_back(t);
  }
  if (!o.io.freeze_vae) {
    for (const auto& t : prep.vae.params().all()) {
      params.push_back(t);
    }
  }
  nn::OptimizerConfig opt_cfg;
  opt_cfg.lr = o.io.lr;
  nn::AdamW opt(params, opt_cfg);
  Rng train_rng(o.io.seed + 4);

  const auto make_example = [&](size_t idx) {
    const Page& page = prep.pages[idx];
    DmModel::Example ex;
    ex.h = prep.embedder.embed(page, prep.encoder, std::to_string(idx));
    for (const auto& el : page.elements) {
      ex.rps.push_back(page.rps->at(el.id));
    }
    return ex;
  };
  train_loop(o.io, prep.pages.size(),
             make_example, [&](const std::vector<size_t>& ids, const auto& mk) {
               std::vector<DmModel::Example> batch;
               for (const size_t i : ids) {
                 batch.push_back(mk(i));
               }
               return model.train_step(batch, prep.vae, opt, train_rng);
             });

  ensure_parent_dir(o.io.out_path);
  model.save(o.io.out_path);
  prep.vae.save(o.io.out_path + ".vae");
  save_embedder(o.io.out_path + ".emb", prep.embedder);
  std::cerr << "train-dm: checkpoint -> " << o.io.out_path
            << " (+ .vae, .emb)\n";
}

}  // namespace

void register_train_vae(CLI::App& app) {
  auto opts = std::make_shared<TrainVaeOpts>();
  CLI::App* cmd = app.add_subcommand(
      "train-vae", "pretrain the parameter compressor on a dataset");
  cmd->add_option("--data", opts->data_dir,
                  "dataset directory (with manifest.json)")
      ->required();
  cmd->add_option("--out", opts->out_path,
                  "checkpoint path (default: cache dir)");
  cmd->add_option("--steps", opts->steps, "optimizer steps")
      ->capture_default_str();
  cmd->add_option("--batch", opts->batch, "vectors per step")
      ->capture_default_str();
  cmd->add_option("--seed", opts->seed, "training seed")
      ->capture_default_str();
  cmd->add_option("--lr", opts->lr, "learning rate")->capture_default_str();
  cmd->add_option("--latent", opts->latent, "latent width")
      ->capture_default_str();
  cmd->add_option("--lambda-kl", opts->lambda_kl, "KL weight")
      ->capture_default_str();
  cmd->add_option("--synthetic-mix", opts->synthetic_mix,
                  "fraction of uniform-legal vectors in each batch")
      ->capture_default_str();
  cmd->add_flag("--full-scale", opts->full_scale,
                "full-scale preset: 1M steps, batch 300");
  cmd->callback([opts, cmd] { run_train_vae(*cmd, *opts); });
}

void register_train_ar(CLI::App& app) {
  auto opts = std::make_shared<TrainArOpts>();
  CLI::App* cmd = app.add_subcommand(
      "train-ar", "train the masked-latent sequence generator");
  add_gen_train_flags(cmd, opts->io);
  cmd->add_option("--enc-layers", opts->enc_layers, "encoder depth")
      ->capture_default_str();
  cmd->add_option("--dec-layers", opts->dec_layers, "decoder depth")
      ->capture_default_str();
  cmd->add_option("--heads", opts->heads, "attention heads")
      ->capture_default_str();
  cmd->callback([opts, cmd] { run_train_ar(*cmd, *opts); });
}

void register_train_dm(CLI::App& app) {
  auto opts = std::make_shared<TrainDmOpts>();
  CLI::App* cmd = app.add_subcommand(
      "train-dm", "train the latent diffusion generator");
  add_gen_train_flags(cmd, opts->io);
  cmd->add_option("--layers", opts->layers, "backbone depth (even)")
      ->capture_default_str();
  cmd->add_option("--heads", opts->heads, "attention heads")
      ->capture_default_str();
  cmd->add_option("--t-steps", opts->t_steps, "diffusion steps T")
      ->capture_default_str();
  cmd->callback([opts, cmd] { run_train_dm(*cmd, *opts); });
}

}  // namespace webrpg::cli

// SPDX-License-Identifier: Apache-2.0
#include "vtcas/evalnet.hpp"

#include <algorithm>
#include <chrono>

#include "vtcas/error.hpp"
#include "vtcas/optim.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

const EvalConfig& checked(const EvalConfig& cfg) {
  validate(cfg);
  return cfg;
}

std::size_t argmax_hits(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t k = logits.shape()[1];
  std::size_t hits = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const double* row = &logits[b * k];
    hits += static_cast<int>(std::max_element(row, row + k) - row) == labels[b];
  }
  return hits;
}

void check_geometry(const EvalConfig& cfg, const ImageSet& set, const char* what) {
  if (set.size() == 0) return;
  if (set.height != cfg.image_side || set.width != cfg.image_side || set.channels != cfg.in_channels) {
    throw ConfigError(std::string(what) + ": images are " + std::to_string(set.height) + "x" +
                      std::to_string(set.width) + "x" + std::to_string(set.channels) + ", network expects " +
                      std::to_string(cfg.image_side) + "x" + std::to_string(cfg.image_side) + "x" +
                      std::to_string(cfg.in_channels));
  }
}

}  // namespace

EvalConfig full_scale_config() { return EvalConfig{}; }

EvalConfig toy_eval_config(std::size_t classes) {
  EvalConfig c;
  c.image_side = 64;
  c.dims = {16, 32, 64, 128};
  c.depths = {1, 1, 2, 1};
  c.heads = {2, 4, 8, 16};
  c.window = 2;
  c.classes = classes;
  return c;
}

std::vector<StageShape> stage_trajectory(const EvalConfig& cfg) {
  if (cfg.patch == 0 || cfg.image_side % cfg.patch != 0) {
    throw ConfigError("eval: patch " + std::to_string(cfg.patch) + " does not divide input " +
                      std::to_string(cfg.image_side));
  }
  std::vector<StageShape> out;
  std::size_t side = cfg.image_side / cfg.patch;
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) {
      if (side % 2 != 0) throw ConfigError("eval: stage " + std::to_string(s + 1) + " merges an odd grid");
      side /= 2;
    }
    StageShape st;
    st.side = side;
    st.tokens = side * side;
    st.dim = cfg.dims[s];
    st.heads = cfg.heads[s];
    st.depth = cfg.depths[s];
    st.window = std::min(cfg.window, side);
    out.push_back(st);
  }
  return out;
}

void validate(const EvalConfig& cfg) {
  if (cfg.classes < 2 || cfg.in_channels == 0 || cfg.window == 0 || cfg.mlp_ratio == 0) {
    throw ConfigError("eval: classes >= 2 and positive channels, window, mlp ratio required");
  }
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string at = "eval stage " + std::to_string(s + 1) + ": ";
    if (cfg.dims[s] == 0 || cfg.heads[s] == 0 || cfg.depths[s] == 0) throw ConfigError(at + "zero dim/head/depth");
    if (cfg.dims[s] % cfg.heads[s] != 0) throw ConfigError(at + "heads do not divide dim");
    if (s > 0 && cfg.dims[s] != 2 * cfg.dims[s - 1]) throw ConfigError(at + "dim must double");
  }
  for (const StageShape& st : stage_trajectory(cfg)) {
    if (st.side % st.window != 0) {
      throw ConfigError("eval: window " + std::to_string(st.window) + " does not divide grid " +
                        std::to_string(st.side));
    }
  }
}

GenotypeCell::GenotypeCell(const Genotype& g, const OpSettings& settings, Rng& rng) {
  for (std::size_t e = 0; e < kNumEdges; ++e) ops_[e] = make_op(g.ops[e], settings, rng);
}

TokenMap GenotypeCell::forward(const Ctx& ctx, const TokenMap& x0) {
  return cell_combine(x0, [&](std::size_t e, const TokenMap& in) { return ops_[e]->forward(ctx, in); });
}

void GenotypeCell::collect(ParamList& out) {
  for (auto& op : ops_) op->collect(out);
}

EvalNet::EvalNet(const Genotype& g, const EvalConfig& cfg, Rng& rng)
    : cfg_(checked(cfg)),
      shapes_(stage_trajectory(cfg)),
      embed_(cfg.in_channels, cfg.patch, cfg.dims[0], rng),
      norm_(cfg.dims[3]),
      head_(cfg.dims[3], cfg.classes, rng) {
  for (std::size_t s = 0; s < 4; ++s) {
    Stage stage;
    if (s > 0) stage.merge.emplace(cfg.dims[s - 1], rng);
    OpSettings os;
    os.channels = cfg.dims[s];
    os.heads = cfg.heads[s];
    os.window = shapes_[s].window;
    os.mlp_ratio = cfg.mlp_ratio;
    os.residual_from_normed = cfg.residual_from_normed;
    for (std::size_t i = 0; i < cfg.depths[s]; ++i) stage.blocks.emplace_back(g, os, rng);
    stages_.push_back(std::move(stage));
  }
}

Var EvalNet::forward(const Ctx& ctx, Var images, std::vector<TokenMap>* trace) {
  TokenMap x = embed_.forward(ctx, images);
  for (Stage& s : stages_) {
    if (s.merge) x = s.merge->forward(ctx, x);
    for (GenotypeCell& b : s.blocks) x = b.forward(ctx, x);
    if (trace) trace->push_back(x);
  }
  return head_.forward(ctx, mean_axis(norm_.forward(ctx, x.tokens()), 1));
}

ParamList EvalNet::weights() {
  ParamList out;
  embed_.collect(out);
  for (Stage& s : stages_) {
    if (s.merge) s.merge->collect(out);
    for (GenotypeCell& b : s.blocks) b.collect(out);
  }
  norm_.collect(out);
  head_.collect(out);
  return out;
}

std::unique_ptr<EvalNet> build_eval_net(const Genotype& g, const EvalConfig& cfg, Rng& rng) {
  return std::make_unique<EvalNet>(g, cfg, rng);
}

std::size_t count_params(EvalNet& net) { return count_params(net.weights()); }

EvalResult evaluate(EvalNet& net, const ImageSet& set, std::size_t batch_size) {
  if (set.size() == 0) return {};
  check_geometry(net.config(), set, "evaluate");
  const ParamList params = net.weights();
  set_trainable(params, false);
  double loss = 0.0;
  std::size_t hits = 0;
  for (const auto& idx : make_batches(set.size(), batch_size, nullptr)) {
    Graph g;
    Ctx ctx{g, false};
    const std::vector<int> labels = batch_labels(set, idx);
    Var logits = net.forward(ctx, g.input(batch_images(set, idx)));
    loss += cross_entropy(logits, labels).value().item() * static_cast<double>(idx.size());
    hits += argmax_hits(logits.value(), labels);
  }
  set_trainable(params, true);
  const double n = static_cast<double>(set.size());
  return {loss / n, static_cast<double>(hits) / n};
}

std::vector<EvalEpoch> train_eval(EvalNet& net, const ImageSet& train, const ImageSet& val, const TrainOptions& opt,
                                  const std::function<void(const EvalEpoch&)>& on_epoch) {
  if (opt.epochs == 0) throw ConfigError("train: epochs must be at least 1");
  if (train.size() == 0) throw ConfigError("train: empty training split");
  if (train.classes() > net.config().classes) throw ConfigError("train: labels exceed the class count");
  check_geometry(net.config(), train, "train");
  check_geometry(net.config(), val, "train (validation split)");
  const std::size_t warmup = opt.warmup.value_or(std::min<std::size_t>(20, opt.epochs / 10));
  const ParamList params = net.weights();
  Adam adamw(params, {.weight_decay = opt.weight_decay, .decoupled = true});
  Rng order = Rng(opt.seed).fork("batches");
  std::vector<EvalEpoch> history;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalEpoch rec;
    rec.epoch = e;
    rec.lr = cosine_lr(e, opt.epochs, opt.lr, warmup);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    zero_grad(params);
    for (const auto& idx : make_batches(train.size(), opt.batch_size, &order)) {
      Graph g;
      Ctx ctx{g, true};
      const std::vector<int> labels = batch_labels(train, idx);
      Var logits;
      Var loss;
      try {
        logits = net.forward(ctx, g.input(batch_images(train, idx)));
        loss = cross_entropy(logits, labels);
      } catch (const NumericError& err) {
        throw NumericError("train epoch " + std::to_string(e) + " aborted: " + err.what());
      }
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
      hits += argmax_hits(logits.value(), labels);
      g.backward(loss);
      if (opt.grad_clip > 0.0) clip_grad_norm(params, opt.grad_clip);
      adamw.step(rec.lr);
      zero_grad(params);
    }
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(train.size());
    if (val.size() > 0) {
      const EvalResult v = evaluate(net, val);
      rec.val_loss = v.loss;
      rec.val_acc = v.acc;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

}  // namespace vtcas

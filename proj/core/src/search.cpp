// SPDX-License-Identifier: Apache-2.0
#include "vtcas/search.hpp"

#include <chrono>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

std::size_t correct(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t k = logits.shape()[1];
  std::size_t hits = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (logits[b * k + j] > logits[b * k + best]) best = j;
    hits += static_cast<int>(best) == labels[b];
  }
  return hits;
}

struct PhaseStats {
  double loss = 0.0;
  double acc = 0.0;
};

// Runs forward/backward over every batch of `set`, calling `update` after
// each backward pass.
template <class Update>
PhaseStats run_phase(ProxyNet& net, const ImageSet& set, std::size_t batch, Rng& order, Update&& update) {
  double loss_sum = 0.0;
  std::size_t hits = 0;
  for (const auto& idx : make_batches(set.size(), batch, &order)) {
    Graph g;
    Ctx ctx{g, true};
    const std::vector<int> labels = batch_labels(set, idx);
    Var logits = net.forward(ctx, g.input(batch_images(set, idx)));
    Var loss = cross_entropy(logits, labels);
    loss_sum += loss.value().item() * static_cast<double>(idx.size());
    hits += correct(logits.value(), labels);
    g.backward(loss);
    update();
  }
  const double n = static_cast<double>(set.size());
  return {loss_sum / n, static_cast<double>(hits) / n};
}

}  // namespace

SearchSchedule reference_schedule() {
  SearchSchedule s;
  const std::size_t channels[] = {24, 72, 96};
  const std::size_t depths[] = {2, 3, 4};
  const std::size_t ops[] = {7, 5, 3};
  for (std::size_t i = 0; i < 3; ++i) {
    s.stages[i].channels = channels[i];
    s.stages[i].depth = depths[i];
    s.stages[i].ops = ops[i];
    s.stages[i].epochs = 50;
    s.stages[i].arch_start = 20;
  }
  return s;
}

SearchSchedule toy_schedule() {
  SearchSchedule s = reference_schedule();
  const std::size_t channels[] = {8, 16, 24};
  for (std::size_t i = 0; i < 3; ++i) {
    s.stages[i].channels = channels[i];
    s.stages[i].epochs = 5;
    s.stages[i].arch_start = 2;
  }
  return s;
}

void validate(const SearchSchedule& s) {
  if (s.prune == 0) throw ConfigError("schedule: prune count must be positive");
  if (s.stages[0].ops != kAllOps.size()) {
    throw ConfigError("schedule: first stage must start from all " + std::to_string(kAllOps.size()) + " ops");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const StageConfig& c = s.stages[i];
    const std::string at = "schedule stage " + std::to_string(i + 1) + ": ";
    if (c.epochs == 0 || c.arch_start >= c.epochs) throw ConfigError(at + "need arch_start < epochs");
    if (c.channels == 0 || c.depth == 0 || c.batch_size == 0) {
      throw ConfigError(at + "channels, depth and batch size must be positive");
    }
    if (c.weight_lr < 0 || c.arch_lr < 0 || c.weight_decay < 0 || c.arch_weight_decay < 0 || c.grad_clip < 0) {
      throw ConfigError(at + "rates and decays must be non-negative");
    }
    if (i > 0 && c.ops + s.prune != s.stages[i - 1].ops) {
      throw ConfigError(at + "op count must drop by " + std::to_string(s.prune) + " per stage");
    }
    ProxyConfig p = s.proxy;
    p.channels = c.channels;
    p.depth = c.depth;
    validate(p);
  }
  if (s.stages[2].ops != s.prune + 1) throw ConfigError("schedule: final pruning must leave exactly one op");
}

StageTrainer::StageTrainer(ProxyNet& net, const StageConfig& cfg, std::size_t stage)
    : net_(net),
      cfg_(cfg),
      stage_(stage),
      weights_(net.weights()),
      arch_(net.arch_params()),
      sgd_(weights_, {.momentum = cfg.weight_momentum, .weight_decay = cfg.weight_decay}),
      adam_(arch_, {.beta1 = cfg.arch_beta1, .beta2 = cfg.arch_beta2, .weight_decay = cfg.arch_weight_decay}) {}

EpochSummary StageTrainer::search_epoch(const ImageSet& train, const ImageSet& val, std::size_t epoch, Rng& order) {
  if (train.size() == 0 || val.size() == 0) throw ConfigError("search: empty train or validation split");
  const auto t0 = std::chrono::steady_clock::now();
  EpochSummary out;
  out.stage = stage_;
  out.epoch = epoch;
  out.weight_lr = cosine_lr(epoch, cfg_.epochs, cfg_.weight_lr, 0);
  try {
    set_trainable(arch_, false);
    set_trainable(weights_, true);
    zero_grad(weights_);
    PhaseStats tr = run_phase(net_, train, cfg_.batch_size, order, [&] {
      clip_grad_norm(weights_, cfg_.grad_clip);
      sgd_.step(out.weight_lr);
      zero_grad(weights_);
    });
    out.train_loss = tr.loss;
    out.train_acc = tr.acc;
    if (epoch >= cfg_.arch_start) {
      set_trainable(weights_, false);
      set_trainable(arch_, true);
      zero_grad(arch_);
      PhaseStats va = run_phase(net_, val, cfg_.batch_size, order, [&] {
        adam_.step(cfg_.arch_lr);
        zero_grad(arch_);
      });
      out.arch_updated = true;
      out.val_loss = va.loss;
      out.val_acc = va.acc;
    }
  } catch (const NumericError& e) {
    set_trainable(weights_, true);
    set_trainable(arch_, true);
    throw NumericError("search stage " + std::to_string(stage_ + 1) + " epoch " + std::to_string(epoch) +
                       " aborted: " + e.what());
  }
  set_trainable(weights_, true);
  set_trainable(arch_, true);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SearchResult run_search(const SearchSchedule& schedule, const ImageSet& train, const ImageSet& val,
                        const SearchOptions& opt) {
  validate(schedule);
  train.validate();
  val.validate();
  if (train.size() == 0 || val.size() == 0) throw ConfigError("search: empty train or validation split");
  if (train.classes() > schedule.proxy.classes || val.classes() > schedule.proxy.classes) {
    throw ConfigError("search: labels exceed the proxy class count " + std::to_string(schedule.proxy.classes));
  }
  if (train.channels != schedule.proxy.in_channels || train.height != schedule.proxy.image_side ||
      train.width != schedule.proxy.image_side) {
    throw ConfigError("search: images do not match the proxy input geometry");
  }
  const SearchObserver& obs = opt.observer;
  const Rng root = Rng(opt.seed).fork("search");
  std::array<std::vector<OpKind>, kNumEdges> live;
  live.fill(std::vector<OpKind>(kAllOps.begin(), kAllOps.end()));

  SearchResult result;
  for (std::size_t s = 0; s < 3; ++s) {
    const StageConfig& cfg = schedule.stages[s];
    ProxyConfig pc = schedule.proxy;
    pc.channels = cfg.channels;
    pc.depth = cfg.depth;
    Rng stage_rng = root.fork("stage" + std::to_string(s));
    Rng init = stage_rng.fork("init");
    Rng order = stage_rng.fork("batches");
    auto net = build_proxy(pc, live, init);
    if (obs.stage_begin) obs.stage_begin(s, cfg, *net);
    StageTrainer trainer(*net, cfg, s);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const auto before = net->alpha_values();
      EpochSummary sum = trainer.search_epoch(train, val, e, order);
      result.history.push_back(sum);
      if (obs.epoch_end) obs.epoch_end(sum, before, net->alpha_values());
    }
    const auto alpha = net->alpha_values();
    auto next = live;
    if (s < 2) {
      for (std::size_t e = 0; e < kNumEdges; ++e) next[e] = prune_lowest(live[e], alpha[e], schedule.prune);
      if (obs.pruned) obs.pruned(s, live, next);
      live = next;
    } else {
      result.genotype = discretize(alpha, live);
      for (std::size_t e = 0; e < kNumEdges; ++e) next[e] = {result.genotype.ops[e]};
      if (obs.pruned) obs.pruned(s, live, next);
    }
  }
  result.genotype.meta.seed = opt.seed;
  result.genotype.meta.schedule_hash = opt.schedule_hash;
  return result;
}

}  // namespace vtcas

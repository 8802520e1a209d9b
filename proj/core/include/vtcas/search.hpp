// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "vtcas/dataset.hpp"
#include "vtcas/genotype.hpp"
#include "vtcas/optim.hpp"
#include "vtcas/supernet.hpp"

namespace vtcas {

struct StageConfig {
  std::size_t channels = 24;
  std::size_t depth = 2;
  std::size_t ops = 7;
  std::size_t epochs = 50;
  /// Zero-based epoch index of the first alpha update.
  std::size_t arch_start = 20;
  std::size_t batch_size = 32;
  double weight_lr = 0.025;
  double weight_momentum = 0.9;
  double weight_decay = 3e-4;
  double arch_lr = 3e-4;
  double arch_weight_decay = 1e-3;
  double arch_beta1 = 0.5;
  double arch_beta2 = 0.999;
  /// Global L2 norm bound on weight gradients; 0 disables.
  double grad_clip = 5.0;
};

struct SearchSchedule {
  std::array<StageConfig, 3> stages;
  /// Ops dropped per edge after each stage; the last drop is the final
  /// discretization.
  std::size_t prune = 2;
  /// Shared proxy geometry; channels and depth come from each stage.
  ProxyConfig proxy;
};

/// Channels 24/72/96, depths 2/3/4, ops 7/5/3, 50 epochs, alpha from epoch 20.
SearchSchedule reference_schedule();
/// Channels 8/16/24, depths 2/3/4, 5 epochs per stage, alpha from epoch 2.
SearchSchedule toy_schedule();

/// Throws ConfigError on any broken schedule invariant.
void validate(const SearchSchedule& s);

struct EpochSummary {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double weight_lr = 0.0;
  bool arch_updated = false;
  double val_loss = 0.0;  // only meaningful when arch_updated
  double val_acc = 0.0;
  double seconds = 0.0;
};

/// One stage's proxy with its optimizer state.
class StageTrainer {
 public:
  StageTrainer(ProxyNet& net, const StageConfig& cfg, std::size_t stage = 0);

  /// Weight phase over `train` (alpha frozen), then, from arch_start on, an
  /// alpha phase over `val` (weights frozen) using the first-order gradient.
  EpochSummary search_epoch(const ImageSet& train, const ImageSet& val, std::size_t epoch, Rng& order);

 private:
  ProxyNet& net_;
  StageConfig cfg_;
  std::size_t stage_;
  ParamList weights_;
  ParamList arch_;
  Sgd sgd_;
  Adam adam_;
};

struct SearchObserver {
  std::function<void(std::size_t stage, const StageConfig&, ProxyNet&)> stage_begin;
  /// Called after every epoch with alpha before and after that epoch.
  std::function<void(const EpochSummary&, const std::array<Tensor, kNumEdges>& before,
                     const std::array<Tensor, kNumEdges>& after)>
      epoch_end;
  /// Called after each pruning step, including the final discretization.
  std::function<void(std::size_t stage, const std::array<std::vector<OpKind>, kNumEdges>& before,
                     const std::array<std::vector<OpKind>, kNumEdges>& after)>
      pruned;
};

struct SearchOptions {
  std::uint64_t seed = 1;
  std::string schedule_hash;
  SearchObserver observer;
};

struct SearchResult {
  Genotype genotype;
  std::vector<EpochSummary> history;
};

SearchResult run_search(const SearchSchedule& schedule, const ImageSet& train, const ImageSet& val,
                        const SearchOptions& opt);

}  // namespace vtcas

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "vtcas/dataset.hpp"
#include "vtcas/genotype.hpp"
#include "vtcas/patch.hpp"

namespace vtcas {

struct EvalConfig {
  std::size_t image_side = 224;
  std::size_t in_channels = 3;
  std::size_t patch = 4;
  std::array<std::size_t, 4> dims = {96, 192, 384, 768};
  std::array<std::size_t, 4> depths = {2, 2, 6, 2};
  std::array<std::size_t, 4> heads = {3, 6, 12, 24};
  std::size_t window = 7;
  std::size_t classes = 1000;
  std::size_t mlp_ratio = 4;
  bool residual_from_normed = true;
};

/// 224 input, dims 96/192/384/768, depths 2/2/6/2, heads 3/6/12/24, window 7.
EvalConfig full_scale_config();
/// 64 input, dims 16/32/64/128, depths 1/1/2/1, heads 2/4/8/16, window 2.
EvalConfig toy_eval_config(std::size_t classes = 3);

struct StageShape {
  std::size_t side = 0;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::size_t heads = 0;
  std::size_t depth = 0;
  std::size_t window = 0;  // clamped to the grid side
};

/// Throws ConfigError if dims do not double, heads do not divide dims, or
/// the patch/window do not tile every stage grid.
void validate(const EvalConfig& cfg);
std::vector<StageShape> stage_trajectory(const EvalConfig& cfg);

/// Cell with one fixed op per edge.
class GenotypeCell {
 public:
  GenotypeCell(const Genotype& g, const OpSettings& settings, Rng& rng);

  TokenMap forward(const Ctx& ctx, const TokenMap& x0);
  void collect(ParamList& out);
  CandidateOp& op(std::size_t edge) { return *ops_[edge]; }

 private:
  std::array<std::unique_ptr<CandidateOp>, kNumEdges> ops_;
};

class EvalNet {
 public:
  EvalNet(const Genotype& g, const EvalConfig& cfg, Rng& rng);

  /// images (B,Cin,S,S) -> logits (B,K). When `trace` is given, the token map
  /// leaving each stage is appended to it.
  Var forward(const Ctx& ctx, Var images, std::vector<TokenMap>* trace = nullptr);
  ParamList weights();

  const EvalConfig& config() const { return cfg_; }
  const std::vector<StageShape>& stages() const { return shapes_; }
  GenotypeCell& block(std::size_t stage, std::size_t i) { return stages_[stage].blocks[i]; }

 private:
  struct Stage {
    std::optional<PatchMerge> merge;
    std::vector<GenotypeCell> blocks;
  };

  EvalConfig cfg_;
  std::vector<StageShape> shapes_;
  PatchEmbed embed_;
  std::vector<Stage> stages_;
  LayerNorm norm_;
  Linear head_;
};

std::unique_ptr<EvalNet> build_eval_net(const Genotype& g, const EvalConfig& cfg, Rng& rng);

/// Learnable scalars, each counted once.
std::size_t count_params(EvalNet& net);

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 8e-4;
  double weight_decay = 0.05;
  /// Default min(20, epochs / 10).
  std::optional<std::size_t> warmup;
  /// Global gradient norm bound; 0 disables.
  double grad_clip = 0.0;
  std::uint64_t seed = 1;
};

struct EvalEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

/// AdamW with warmup + cosine decay. Validation runs in evaluation mode and
/// is skipped when `val` is empty.
std::vector<EvalEpoch> train_eval(EvalNet& net, const ImageSet& train, const ImageSet& val, const TrainOptions& opt,
                                  const std::function<void(const EvalEpoch&)>& on_epoch = {});

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
};
/// Mean loss and accuracy in evaluation mode.
EvalResult evaluate(EvalNet& net, const ImageSet& set, std::size_t batch_size = 64);

}  // namespace vtcas

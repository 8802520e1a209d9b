// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "vtcas/candidate_ops.hpp"
#include "vtcas/patch.hpp"

namespace vtcas {

/// Edges of the 4-node cell: X1 = f01(X0), X2 = f02(X0) + f12(X1), X3 = X1 + X2.
struct CellEdge {
  int from;
  int to;
};
inline constexpr std::array<CellEdge, 3> kCellEdges = {{{0, 1}, {0, 2}, {1, 2}}};
inline constexpr std::size_t kNumEdges = kCellEdges.size();

/// Cell dataflow over any per-edge callable `edge(index, input) -> TokenMap`.
template <class EdgeFn>
TokenMap cell_combine(const TokenMap& x0, EdgeFn&& edge) {
  TokenMap x1 = edge(0, x0);
  Var x2 = add(edge(1, x0).tokens(), edge(2, x1).tokens());
  return x0.with(add(x1.tokens(), x2));
}

/// softmax(alpha); throws ShapeError on an empty vector.
Tensor edge_weights(const Tensor& alpha);

/// Live candidate ops of one edge, mixed by softmax of a (possibly shared)
/// architecture parameter.
class MixedEdge {
 public:
  MixedEdge(std::vector<OpKind> live, std::shared_ptr<Parameter> alpha, const OpSettings& settings, Rng& rng);

  TokenMap forward(const Ctx& ctx, const TokenMap& x);
  /// Network weights of every live op; alpha is not included.
  void collect(ParamList& out);

  const std::vector<OpKind>& live() const { return live_; }
  const std::shared_ptr<Parameter>& alpha() const { return alpha_; }
  CandidateOp& op(std::size_t i) { return *ops_[i]; }

 private:
  std::vector<OpKind> live_;
  std::shared_ptr<Parameter> alpha_;
  std::vector<std::unique_ptr<CandidateOp>> ops_;
};

class MixedCell {
 public:
  MixedCell(const std::array<std::vector<OpKind>, kNumEdges>& live,
            const std::array<std::shared_ptr<Parameter>, kNumEdges>& alpha, const OpSettings& settings, Rng& rng);

  TokenMap forward(const Ctx& ctx, const TokenMap& x0);
  void collect(ParamList& out);
  MixedEdge& edge(std::size_t i) { return edges_[i]; }

 private:
  std::vector<MixedEdge> edges_;
};

struct ProxyConfig {
  std::size_t channels = 24;
  std::size_t depth = 2;
  std::size_t image_side = 32;
  std::size_t in_channels = 3;
  std::size_t patch = 4;
  std::size_t classes = 3;
  std::size_t window = 4;
  std::size_t head_dim = 8;
  bool residual_from_normed = true;

  std::size_t grid_side() const { return image_side / patch; }
  /// Op settings for the cell width; the window is clamped to the grid side.
  OpSettings op_settings() const;
};

/// Throws ConfigError when patch/window/head constraints are violated.
void validate(const ProxyConfig& cfg);

/// Patch stem, `depth` cells at one resolution sharing one alpha per edge,
/// global average pool and a linear classifier.
class ProxyNet {
 public:
  ProxyNet(const ProxyConfig& cfg, const std::array<std::vector<OpKind>, kNumEdges>& live, Rng& rng);

  /// images (B,Cin,S,S) -> logits (B,K).
  Var forward(const Ctx& ctx, Var images);
  /// Network weights (stem, cells, head).
  ParamList weights();
  /// One alpha per edge, shared by all cells.
  ParamList arch_params();

  const ProxyConfig& config() const { return cfg_; }
  const std::array<std::vector<OpKind>, kNumEdges>& live() const { return live_; }
  std::size_t depth() const { return cells_.size(); }
  MixedCell& cell(std::size_t i) { return cells_[i]; }
  /// Current alpha values per edge.
  std::array<Tensor, kNumEdges> alpha_values() const;

 private:
  ProxyConfig cfg_;
  std::array<std::vector<OpKind>, kNumEdges> live_;
  std::array<std::shared_ptr<Parameter>, kNumEdges> alpha_;
  PatchEmbed stem_;
  std::vector<MixedCell> cells_;
  Linear head_;
};

/// alpha of every edge starts at 0 plus N(0, noise^2) drawn from `rng`.
inline constexpr double kAlphaInitNoise = 1e-3;
std::unique_ptr<ProxyNet> build_proxy(const ProxyConfig& cfg, const std::array<std::vector<OpKind>, kNumEdges>& live,
                                      Rng& rng);

/// Drops the k ops with the smallest alpha; ties drop the earlier-declared op.
/// Returns the survivors in their original order.
std::vector<OpKind> prune_lowest(std::span<const OpKind> live, const Tensor& alpha, std::size_t k);

}  // namespace vtcas

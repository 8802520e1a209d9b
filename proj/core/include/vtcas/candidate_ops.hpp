// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "vtcas/layout.hpp"
#include "vtcas/nn.hpp"

namespace vtcas {

class Rng;

/// The search space. Declaration order is the tie-break order for pruning
/// and discretization.
enum class OpKind { kNone, kSkip, kSepConv3x3, kDilConv3x3, kEca3x3, kWMsa, kSwMsa };

inline constexpr std::array<OpKind, 7> kAllOps = {OpKind::kNone,      OpKind::kSkip,  OpKind::kSepConv3x3,
                                                  OpKind::kDilConv3x3, OpKind::kEca3x3, OpKind::kWMsa,
                                                  OpKind::kSwMsa};

/// Serialization name: none, skip, sep_conv_3x3, dil_conv_3x3, eca_3x3, w_msa, sw_msa.
std::string_view op_name(OpKind kind);
std::optional<OpKind> parse_op(std::string_view name);
inline std::size_t op_order(OpKind kind) { return static_cast<std::size_t>(kind); }

struct OpSettings {
  std::size_t channels = 0;
  std::size_t window = 7;
  std::size_t heads = 1;
  std::size_t mlp_ratio = 4;
  std::size_t eca_kernel = 3;
  bool qkv_bias = true;
  bool rel_pos_bias = true;
  /// First attention residual adds the normalized tensor (the literal block
  /// equations) rather than the raw input.
  bool residual_from_normed = true;
  /// Convolution ops end in batch norm; false bypasses it.
  bool batch_norm = true;
  /// SW-MSA shift; defaults to window/2, and 0 when the window covers the grid.
  std::optional<std::size_t> shift;
};

/// Validates channel/head/window constraints for `kind`; throws ShapeError.
void validate_settings(OpKind kind, const OpSettings& settings);

/// A candidate operation mapping (B,L,C) -> (B,L,C) on the same grid.
class CandidateOp {
 public:
  virtual ~CandidateOp() = default;
  virtual OpKind kind() const = 0;
  virtual TokenMap forward(const Ctx& ctx, const TokenMap& x) = 0;
  virtual void collect(ParamList& out) = 0;
};

std::unique_ptr<CandidateOp> make_op(OpKind kind, const OpSettings& settings, Rng& rng);

class NoneOp final : public CandidateOp {
 public:
  OpKind kind() const override { return OpKind::kNone; }
  /// All zeros; no gradient reaches the input.
  TokenMap forward(const Ctx& ctx, const TokenMap& x) override;
  void collect(ParamList&) override {}
};

class SkipOp final : public CandidateOp {
 public:
  OpKind kind() const override { return OpKind::kSkip; }
  TokenMap forward(const Ctx&, const TokenMap& x) override { return x; }
  void collect(ParamList&) override {}
};

/// relu -> depthwise 3x3 (dilation d) -> pointwise 1x1 -> batch norm.
struct ConvUnit {
  ConvUnit(std::size_t channels, std::size_t dilation, bool batch_norm, Rng& rng);

  Var forward(const Ctx& ctx, Var spatial);
  /// Output of relu + depthwise conv only.
  Var depthwise_stage(const Ctx& ctx, Var spatial);
  void collect(ParamList& out);

  Conv2d depthwise;
  Conv2d pointwise;
  std::optional<BatchNorm2d> bn;
};

class SepConv3x3 final : public CandidateOp {
 public:
  SepConv3x3(const OpSettings& s, Rng& rng);
  OpKind kind() const override { return OpKind::kSepConv3x3; }
  TokenMap forward(const Ctx& ctx, const TokenMap& x) override;
  void collect(ParamList& out) override;

  std::vector<ConvUnit> units;  // applied in order, two of them
};

class DilConv3x3 final : public CandidateOp {
 public:
  DilConv3x3(const OpSettings& s, Rng& rng);
  OpKind kind() const override { return OpKind::kDilConv3x3; }
  TokenMap forward(const Ctx& ctx, const TokenMap& x) override;
  void collect(ParamList& out) override;

  ConvUnit unit;
};

/// Depthwise 3x3 conv + BN + relu, then the efficient channel attention gate:
/// GAP per channel, zero-padded 1-D conv across channels, sigmoid, rescale.
class Eca3x3 final : public CandidateOp {
 public:
  Eca3x3(const OpSettings& s, Rng& rng);
  OpKind kind() const override { return OpKind::kEca3x3; }
  TokenMap forward(const Ctx& ctx, const TokenMap& x) override;
  void collect(ParamList& out) override;

  /// Conv branch output (B,C,H,W).
  Var conv_branch(const Ctx& ctx, Var spatial);
  /// Gate values (B,C) for a conv-branch output.
  Var gate(const Ctx& ctx, Var branch);

  Conv2d conv;
  std::optional<BatchNorm2d> bn;
  Parameter channel_kernel;  // (k)
};

/// Multi-head self-attention restricted to w x w windows, with a learned
/// relative position bias.
struct WindowAttention {
  WindowAttention(std::size_t dim, std::size_t heads, std::size_t window, bool qkv_bias, bool rel_pos_bias,
                  Rng& rng);

  /// windows: (B*nW, w*w, C). `mask`, when given, is (nW*heads, N, N) and is
  /// added to the logits. If `probs` is non-null the attention weights
  /// (B*nW, heads, N, N) are copied into it.
  Var forward(const Ctx& ctx, Var windows, const Tensor* mask, Tensor* probs = nullptr);
  void collect(ParamList& out);

  std::size_t dim, heads, window;
  Linear q, k, v, proj;
  std::optional<Parameter> rel_bias_table;  // ((2w-1)^2, heads)
  IndexMap rel_index;                        // (heads, N, N) -> table offset
};

/// Additive attention mask for a cyclically shifted grid: 0 where two tokens
/// of a window come from the same region, a large negative value otherwise.
/// Shape (nW, N, N).
Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window, std::size_t shift);

/// LN -> (shifted) window attention -> residual -> LN -> MLP -> residual.
class WindowTransformerOp final : public CandidateOp {
 public:
  WindowTransformerOp(const OpSettings& s, bool shifted, Rng& rng);
  OpKind kind() const override { return shifted_ ? OpKind::kSwMsa : OpKind::kWMsa; }
  TokenMap forward(const Ctx& ctx, const TokenMap& x) override;
  void collect(ParamList& out) override;

  /// Output after the first residual, before the MLP.
  Var attention_stage(const Ctx& ctx, const TokenMap& x, Tensor* probs = nullptr);
  std::size_t shift_for(std::size_t height, std::size_t width) const;

  LayerNorm norm1;
  WindowAttention attn;
  LayerNorm norm2;
  Linear fc1, fc2;
  bool residual_from_normed;

 private:
  bool shifted_;
  std::optional<std::size_t> shift_override_;
};

}  // namespace vtcas

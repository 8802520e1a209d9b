// SPDX-License-Identifier: Apache-2.0
#include "vtcas/candidate_ops.hpp"

#include <cmath>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

constexpr std::array<std::string_view, 7> kOpNames = {"none",    "skip",  "sep_conv_3x3", "dil_conv_3x3",
                                                      "eca_3x3", "w_msa", "sw_msa"};

// Large enough that exp(logit + kMaskValue - max) underflows to exactly 0.
constexpr double kMaskValue = -1e9;

}  // namespace

std::string_view op_name(OpKind kind) { return kOpNames[op_order(kind)]; }

std::optional<OpKind> parse_op(std::string_view name) {
  for (OpKind k : kAllOps) {
    if (op_name(k) == name) return k;
  }
  return std::nullopt;
}

void validate_settings(OpKind kind, const OpSettings& s) {
  if (s.channels == 0) throw ShapeError("op settings: channels must be positive");
  if (kind == OpKind::kWMsa || kind == OpKind::kSwMsa) {
    if (s.heads == 0 || s.channels % s.heads != 0) {
      throw ShapeError("op settings: heads " + std::to_string(s.heads) + " do not divide channels " +
                       std::to_string(s.channels));
    }
    if (s.window == 0) throw ShapeError("op settings: window must be positive");
  }
  if (kind == OpKind::kEca3x3 && (s.eca_kernel == 0 || s.eca_kernel % 2 == 0)) {
    throw ShapeError("op settings: eca kernel must be odd");
  }
}

std::unique_ptr<CandidateOp> make_op(OpKind kind, const OpSettings& settings, Rng& rng) {
  validate_settings(kind, settings);
  switch (kind) {
    case OpKind::kNone:
      return std::make_unique<NoneOp>();
    case OpKind::kSkip:
      return std::make_unique<SkipOp>();
    case OpKind::kSepConv3x3:
      return std::make_unique<SepConv3x3>(settings, rng);
    case OpKind::kDilConv3x3:
      return std::make_unique<DilConv3x3>(settings, rng);
    case OpKind::kEca3x3:
      return std::make_unique<Eca3x3>(settings, rng);
    case OpKind::kWMsa:
      return std::make_unique<WindowTransformerOp>(settings, false, rng);
    case OpKind::kSwMsa:
      return std::make_unique<WindowTransformerOp>(settings, true, rng);
  }
  throw Error("make_op: unknown kind");
}

TokenMap NoneOp::forward(const Ctx& ctx, const TokenMap& x) {
  return x.with(ctx.graph.constant(Tensor(x.tokens().shape())));
}

// --- convolutions ----------------------------------------------------------

ConvUnit::ConvUnit(std::size_t channels, std::size_t dilation, bool batch_norm, Rng& rng)
    : depthwise(channels, channels, 3,
                Conv2dOptions{.stride = 1, .pad_h = dilation, .pad_w = dilation, .dilation = dilation,
                              .groups = channels},
                rng),
      pointwise(channels, channels, 1, Conv2dOptions{}, rng) {
  if (batch_norm) bn.emplace(channels);
}

Var ConvUnit::depthwise_stage(const Ctx& ctx, Var spatial) { return depthwise.forward(ctx, relu(spatial)); }

Var ConvUnit::forward(const Ctx& ctx, Var spatial) {
  Var y = pointwise.forward(ctx, depthwise_stage(ctx, spatial));
  return bn ? bn->forward(ctx, y) : y;
}

void ConvUnit::collect(ParamList& out) {
  depthwise.collect(out);
  pointwise.collect(out);
  if (bn) bn->collect(out);
}

SepConv3x3::SepConv3x3(const OpSettings& s, Rng& rng) {
  units.reserve(2);
  units.emplace_back(s.channels, 1, s.batch_norm, rng);
  units.emplace_back(s.channels, 1, s.batch_norm, rng);
}

TokenMap SepConv3x3::forward(const Ctx& ctx, const TokenMap& x) {
  Var y = tokens_to_spatial(x).map();
  for (ConvUnit& u : units) y = u.forward(ctx, y);
  return spatial_to_tokens(SpatialMap(y));
}

void SepConv3x3::collect(ParamList& out) {
  for (ConvUnit& u : units) u.collect(out);
}

DilConv3x3::DilConv3x3(const OpSettings& s, Rng& rng) : unit(s.channels, 2, s.batch_norm, rng) {}

TokenMap DilConv3x3::forward(const Ctx& ctx, const TokenMap& x) {
  return spatial_to_tokens(SpatialMap(unit.forward(ctx, tokens_to_spatial(x).map())));
}

void DilConv3x3::collect(ParamList& out) { unit.collect(out); }

Eca3x3::Eca3x3(const OpSettings& s, Rng& rng)
    : conv(s.channels, s.channels, 3, Conv2dOptions{.pad_h = 1, .pad_w = 1, .groups = s.channels}, rng) {
  if (s.batch_norm) bn.emplace(s.channels);
  const double bound = 1.0 / std::sqrt(static_cast<double>(s.eca_kernel));
  channel_kernel = Parameter("eca.kernel", Tensor::uniform(Shape{1, 1, 1, s.eca_kernel}, rng, -bound, bound));
}

Var Eca3x3::conv_branch(const Ctx& ctx, Var spatial) {
  Var y = conv.forward(ctx, spatial);
  if (bn) y = bn->forward(ctx, y);
  return relu(y);
}

Var Eca3x3::gate(const Ctx& ctx, Var branch) {
  const Shape& s = branch.shape();
  const std::size_t b = s[0], c = s[1];
  Var pooled = mean_axis(reshape(branch, Shape{b, c, s[2] * s[3]}), 2);  // (B,C)
  const std::size_t k = channel_kernel.value.shape()[3];
  Var mixed = conv2d(reshape(pooled, Shape{b, 1, 1, c}), ctx.graph.param(channel_kernel), Var{},
                     Conv2dOptions{.pad_h = 0, .pad_w = k / 2});
  return sigmoid(reshape(mixed, Shape{b, c}));
}

TokenMap Eca3x3::forward(const Ctx& ctx, const TokenMap& x) {
  Var branch = conv_branch(ctx, tokens_to_spatial(x).map());
  return spatial_to_tokens(SpatialMap(scale_channels(branch, gate(ctx, branch))));
}

void Eca3x3::collect(ParamList& out) {
  conv.collect(out);
  if (bn) bn->collect(out);
  out.push_back(&channel_kernel);
}

// --- attention -------------------------------------------------------------

WindowAttention::WindowAttention(std::size_t dim, std::size_t heads, std::size_t window, bool qkv_bias,
                                 bool rel_pos_bias, Rng& rng)
    : dim(dim),
      heads(heads),
      window(window),
      q(dim, dim, rng, qkv_bias),
      k(dim, dim, rng, qkv_bias),
      v(dim, dim, rng, qkv_bias),
      proj(dim, dim, rng, true) {
  if (!rel_pos_bias) return;
  const std::size_t side = 2 * window - 1;
  rel_bias_table.emplace("attn.rel_bias", Tensor::randn(Shape{side * side, heads}, rng, 0.02));
  const std::size_t n = window * window;
  auto index = std::make_shared<std::vector<std::uint32_t>>(heads * n * n);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t dy = i / window + window - 1 - j / window;
        const std::size_t dx = i % window + window - 1 - j % window;
        (*index)[(h * n + i) * n + j] = static_cast<std::uint32_t>((dy * side + dx) * heads + h);
      }
  rel_index = index;
}

Var WindowAttention::forward(const Ctx& ctx, Var windows, const Tensor* mask, Tensor* probs) {
  const Shape& s = windows.shape();
  const std::size_t bw = s[0], n = s[1], c = s[2];
  if (c != dim || n != window * window) {
    throw ShapeError("WindowAttention: expected (*, " + std::to_string(window * window) + ", " +
                     std::to_string(dim) + "), got " + s.str());
  }
  const std::size_t d = dim / heads;
  const auto split_heads = [&](Var t) { return permute(reshape(t, Shape{bw, n, heads, d}), {0, 2, 1, 3}); };
  Var qh = scale(split_heads(q.forward(ctx, windows)), 1.0 / std::sqrt(static_cast<double>(d)));
  Var kh = split_heads(k.forward(ctx, windows));
  Var vh = split_heads(v.forward(ctx, windows));
  Var logits = matmul(qh, permute(kh, {0, 1, 3, 2}));  // (Bw, heads, N, N)
  if (rel_bias_table) {
    Var bias = gather(ctx.graph.param(*rel_bias_table), rel_index, Shape{heads, n, n});
    logits = add_broadcast(logits, bias);
  }
  if (mask) {
    const std::size_t nw = mask->shape()[0];
    if (mask->shape() != Shape{nw, n, n} || bw % nw != 0) throw ShapeError("WindowAttention: bad mask shape");
    Tensor expanded(Shape{nw * heads, n, n});
    for (std::size_t w = 0; w < nw; ++w)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(&(*mask)[w * n * n], n * n, &expanded[(w * heads + h) * n * n]);
    Var folded = reshape(logits, Shape{bw / nw, nw * heads, n, n});
    logits = reshape(add_broadcast(folded, ctx.graph.constant(std::move(expanded))), Shape{bw, heads, n, n});
  }
  Var attn = softmax(logits, 3);
  if (probs) *probs = attn.value();
  Var out = permute(matmul(attn, vh), {0, 2, 1, 3});  // (Bw, N, heads, d)
  return proj.forward(ctx, reshape(out, Shape{bw, n, c}));
}

void WindowAttention::collect(ParamList& out) {
  q.collect(out);
  k.collect(out);
  v.collect(out);
  proj.collect(out);
  if (rel_bias_table) out.push_back(&*rel_bias_table);
}

Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window, std::size_t shift) {
  if (window == 0 || height % window || width % window) throw ShapeError("shifted_window_mask: window must divide grid");
  // Region label per grid cell of the shifted map: three bands per axis.
  const auto band = [&](std::size_t pos, std::size_t side) -> std::size_t {
    if (pos < side - window) return 0;
    if (pos < side - shift) return 1;
    return 2;
  };
  const std::size_t nh = height / window, nw = width / window, n = window * window;
  Tensor mask(Shape{nh * nw, n, n});
  for (std::size_t wy = 0; wy < nh; ++wy)
    for (std::size_t wx = 0; wx < nw; ++wx) {
      const std::size_t widx = wy * nw + wx;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t yi = wy * window + i / window, xi = wx * window + i % window;
        const std::size_t li = band(yi, height) * 3 + band(xi, width);
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t yj = wy * window + j / window, xj = wx * window + j % window;
          const std::size_t lj = band(yj, height) * 3 + band(xj, width);
          mask[(widx * n + i) * n + j] = li == lj ? 0.0 : kMaskValue;
        }
      }
    }
  return mask;
}

WindowTransformerOp::WindowTransformerOp(const OpSettings& s, bool shifted, Rng& rng)
    : norm1(s.channels),
      attn(s.channels, s.heads, s.window, s.qkv_bias, s.rel_pos_bias, rng),
      norm2(s.channels),
      fc1(s.channels, s.channels * s.mlp_ratio, rng),
      fc2(s.channels * s.mlp_ratio, s.channels, rng),
      residual_from_normed(s.residual_from_normed),
      shifted_(shifted),
      shift_override_(s.shift) {}

std::size_t WindowTransformerOp::shift_for(std::size_t height, std::size_t width) const {
  if (!shifted_) return 0;
  if (shift_override_) return *shift_override_;
  if (attn.window >= height || attn.window >= width) return 0;
  return attn.window / 2;
}

Var WindowTransformerOp::attention_stage(const Ctx& ctx, const TokenMap& x, Tensor* probs) {
  const std::size_t b = x.batch(), h = x.height(), w = x.width(), c = x.channels();
  const std::size_t win = attn.window;
  if (h % win != 0 || w % win != 0) {
    throw ShapeError("window " + std::to_string(win) + " does not divide grid " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  const std::size_t shift = shift_for(h, w);
  if (shift >= win) throw ShapeError("shift must be smaller than the window");
  Var normed = norm1.forward(ctx, x.tokens());
  Var grid = reshape(normed, Shape{b, h, w, c});
  const long sh = static_cast<long>(shift);
  if (shift > 0) grid = roll(grid, -sh, -sh);
  Tensor mask;
  if (shift > 0) mask = shifted_window_mask(h, w, win, shift);
  Var windows = attn.forward(ctx, window_partition(grid, win), shift > 0 ? &mask : nullptr, probs);
  Var merged = window_reverse(windows, b, h, w, win);
  if (shift > 0) merged = roll(merged, sh, sh);
  Var attended = reshape(merged, Shape{b, h * w, c});
  return add(attended, residual_from_normed ? normed : x.tokens());
}

TokenMap WindowTransformerOp::forward(const Ctx& ctx, const TokenMap& x) {
  Var m1 = attention_stage(ctx, x);
  Var hidden = gelu(fc1.forward(ctx, norm2.forward(ctx, m1)));
  return x.with(add(fc2.forward(ctx, hidden), m1));
}

void WindowTransformerOp::collect(ParamList& out) {
  norm1.collect(out);
  attn.collect(out);
  norm2.collect(out);
  fc1.collect(out);
  fc2.collect(out);
}

}  // namespace vtcas

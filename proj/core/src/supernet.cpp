// SPDX-License-Identifier: Apache-2.0
#include "vtcas/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {

Tensor edge_weights(const Tensor& alpha) {
  if (alpha.size() == 0) throw ShapeError("edge_weights: empty alpha");
  Graph g;
  return softmax(g.constant(alpha.reshaped(Shape{alpha.size()})), 0).value();
}

MixedEdge::MixedEdge(std::vector<OpKind> live, std::shared_ptr<Parameter> alpha, const OpSettings& settings, Rng& rng)
    : live_(std::move(live)), alpha_(std::move(alpha)) {
  if (live_.empty()) throw ShapeError("mixed edge: no live ops");
  if (!alpha_ || alpha_->value.size() != live_.size()) throw ShapeError("mixed edge: alpha size mismatch");
  for (OpKind k : live_) ops_.push_back(make_op(k, settings, rng));
}

TokenMap MixedEdge::forward(const Ctx& ctx, const TokenMap& x) {
  Var w = softmax(ctx.graph.param(*alpha_), 0);
  Var out;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    // none contributes exactly zero to the sum; alpha still receives its
    // gradient through the softmax normalization of the other weights.
    if (live_[i] == OpKind::kNone) continue;
    Var term = mul_element(ops_[i]->forward(ctx, x).tokens(), w, i);
    out = out.valid() ? add(out, term) : term;
  }
  if (!out.valid()) return ops_[0]->forward(ctx, x);
  return x.with(out);
}

void MixedEdge::collect(ParamList& out) {
  for (auto& op : ops_) op->collect(out);
}

MixedCell::MixedCell(const std::array<std::vector<OpKind>, kNumEdges>& live,
                     const std::array<std::shared_ptr<Parameter>, kNumEdges>& alpha, const OpSettings& settings,
                     Rng& rng) {
  edges_.reserve(kNumEdges);
  for (std::size_t e = 0; e < kNumEdges; ++e) edges_.emplace_back(live[e], alpha[e], settings, rng);
}

TokenMap MixedCell::forward(const Ctx& ctx, const TokenMap& x0) {
  return cell_combine(x0, [&](std::size_t e, const TokenMap& in) { return edges_[e].forward(ctx, in); });
}

void MixedCell::collect(ParamList& out) {
  for (auto& e : edges_) e.collect(out);
}

OpSettings ProxyConfig::op_settings() const {
  OpSettings s;
  s.channels = channels;
  s.window = std::min(window, grid_side());
  s.heads = head_dim ? std::max<std::size_t>(1, channels / head_dim) : 1;
  s.residual_from_normed = residual_from_normed;
  return s;
}

void validate(const ProxyConfig& cfg) {
  if (cfg.channels == 0 || cfg.depth == 0 || cfg.classes < 2 || cfg.in_channels == 0) {
    throw ConfigError("proxy: channels, depth, in_channels must be positive and classes >= 2");
  }
  if (cfg.patch == 0 || cfg.image_side % cfg.patch != 0) {
    throw ConfigError("proxy: patch " + std::to_string(cfg.patch) + " does not divide image side " +
                      std::to_string(cfg.image_side));
  }
  const OpSettings s = cfg.op_settings();
  if (s.window == 0 || cfg.grid_side() % s.window != 0) {
    throw ConfigError("proxy: window " + std::to_string(s.window) + " does not divide token grid " +
                      std::to_string(cfg.grid_side()));
  }
  if (cfg.channels % s.heads != 0) throw ConfigError("proxy: heads do not divide channels");
}

namespace {

const ProxyConfig& checked(const ProxyConfig& cfg) {
  validate(cfg);
  return cfg;
}

}  // namespace

ProxyNet::ProxyNet(const ProxyConfig& cfg, const std::array<std::vector<OpKind>, kNumEdges>& live, Rng& rng)
    : cfg_(checked(cfg)),
      live_(live),
      stem_(cfg.in_channels, cfg.patch, cfg.channels, rng),
      head_(cfg.channels, cfg.classes, rng) {
  for (std::size_t e = 0; e < kNumEdges; ++e) {
    const std::string name = "alpha." + std::to_string(kCellEdges[e].from) + std::to_string(kCellEdges[e].to);
    alpha_[e] = std::make_shared<Parameter>(name, Tensor(Shape{std::max<std::size_t>(1, live[e].size())}));
  }
  const OpSettings s = cfg.op_settings();
  cells_.reserve(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i) cells_.emplace_back(live_, alpha_, s, rng);
}

Var ProxyNet::forward(const Ctx& ctx, Var images) {
  TokenMap x = stem_.forward(ctx, images);
  for (MixedCell& c : cells_) x = c.forward(ctx, x);
  return head_.forward(ctx, mean_axis(x.tokens(), 1));
}

ParamList ProxyNet::weights() {
  ParamList out;
  stem_.collect(out);
  for (MixedCell& c : cells_) c.collect(out);
  head_.collect(out);
  return out;
}

ParamList ProxyNet::arch_params() {
  ParamList out;
  for (auto& a : alpha_) out.push_back(a.get());
  return out;
}

std::array<Tensor, kNumEdges> ProxyNet::alpha_values() const {
  std::array<Tensor, kNumEdges> out;
  for (std::size_t e = 0; e < kNumEdges; ++e) out[e] = alpha_[e]->value;
  return out;
}

std::unique_ptr<ProxyNet> build_proxy(const ProxyConfig& cfg, const std::array<std::vector<OpKind>, kNumEdges>& live,
                                      Rng& rng) {
  Rng init = rng.fork("weights");
  auto net = std::make_unique<ProxyNet>(cfg, live, init);
  Rng noise = rng.fork("alpha");
  for (Parameter* a : net->arch_params()) {
    for (double& v : a->value.data()) v = kAlphaInitNoise * noise.normal();
  }
  return net;
}

std::vector<OpKind> prune_lowest(std::span<const OpKind> live, const Tensor& alpha, std::size_t k) {
  if (alpha.size() != live.size()) throw ShapeError("prune_lowest: alpha size mismatch");
  if (k == 0) return {live.begin(), live.end()};
  if (k >= live.size()) {
    throw ConfigError("prune_lowest: cannot drop " + std::to_string(k) + " of " + std::to_string(live.size()) +
                      " ops");
  }
  std::vector<std::size_t> order(live.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (alpha[a] != alpha[b]) return alpha[a] < alpha[b];
    return op_order(live[a]) < op_order(live[b]);
  });
  std::vector<bool> dropped(live.size(), false);
  for (std::size_t i = 0; i < k; ++i) dropped[order[i]] = true;
  std::vector<OpKind> out;
  for (std::size_t i = 0; i < live.size(); ++i)
    if (!dropped[i]) out.push_back(live[i]);
  return out;
}

}  // namespace vtcas

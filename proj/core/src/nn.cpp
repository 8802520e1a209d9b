// SPDX-License-Identifier: Apache-2.0
#include "vtcas/nn.hpp"

#include <cmath>

#include "vtcas/rng.hpp"

namespace vtcas {

// Weights start U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Parameter("linear.weight", Tensor::uniform(Shape{in, out}, rng, -bound, bound));
  if (bias) this->bias.emplace("linear.bias", Tensor::uniform(Shape{out}, rng, -bound, bound));
}

Var Linear::forward(const Ctx& ctx, Var x) {
  Var y = matmul(x, ctx.graph.param(weight));
  return bias ? add_broadcast(y, ctx.graph.param(*bias)) : y;
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

LayerNorm::LayerNorm(std::size_t dim, double eps)
    : gamma("ln.gamma", Tensor::full(Shape{dim}, 1.0)), beta("ln.beta", Tensor(Shape{dim})), eps(eps) {}

Var LayerNorm::forward(const Ctx& ctx, Var x) {
  return layer_norm(x, ctx.graph.param(gamma), ctx.graph.param(beta), eps);
}

void LayerNorm::collect(ParamList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

BatchNorm2d::BatchNorm2d(std::size_t channels, bool affine) : state(channels) {
  if (affine) {
    gamma.emplace("bn.gamma", Tensor::full(Shape{channels}, 1.0));
    beta.emplace("bn.beta", Tensor(Shape{channels}));
  }
}

Var BatchNorm2d::forward(const Ctx& ctx, Var x) {
  if (!gamma) return batch_norm(x, Var{}, Var{}, state, ctx.training);
  return batch_norm(x, ctx.graph.param(*gamma), ctx.graph.param(*beta), state, ctx.training);
}

void BatchNorm2d::collect(ParamList& out) {
  if (gamma) {
    out.push_back(&*gamma);
    out.push_back(&*beta);
  }
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, const Conv2dOptions& opt, Rng& rng,
               bool bias)
    : options(opt) {
  const std::size_t in_per_group = in / opt.groups;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_per_group * kernel * kernel));
  weight = Parameter("conv.weight", Tensor::uniform(Shape{out, in_per_group, kernel, kernel}, rng, -bound, bound));
  if (bias) this->bias.emplace("conv.bias", Tensor::uniform(Shape{out}, rng, -bound, bound));
}

Var Conv2d::forward(const Ctx& ctx, Var x) {
  return conv2d(x, ctx.graph.param(weight), bias ? ctx.graph.param(*bias) : Var{}, options);
}

void Conv2d::collect(ParamList& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

std::size_t count_params(const ParamList& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->numel();
  return n;
}

}  // namespace vtcas

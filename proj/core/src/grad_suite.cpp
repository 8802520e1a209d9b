// SPDX-License-Identifier: Apache-2.0
#include "vtcas/grad_suite.hpp"

#include <cmath>
#include <functional>
#include <memory>

#include "vtcas/candidate_ops.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

// Values bounded away from zero so relu kinks stay outside the probe step.
Tensor away_from_zero(Shape s, Rng& rng) {
  Tensor t = Tensor::randn(s, rng);
  for (double& v : t.data())
    if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
  return t;
}

struct Case {
  const char* name;
  const char* wrt;
  Shape shape;
  std::function<Var(Graph&, Var)> f;
};

std::vector<Case> primitive_cases(Rng& rng) {
  auto other = std::make_shared<Tensor>(Tensor::randn(Shape{2, 3, 4}, rng));
  auto row = std::make_shared<Tensor>(Tensor::randn(Shape{4}, rng));
  auto mat = std::make_shared<Tensor>(Tensor::randn(Shape{2, 4, 3}, rng));
  auto cw = std::make_shared<Tensor>(Tensor::randn(Shape{4, 2, 3, 3}, rng));
  auto cx = std::make_shared<Tensor>(Tensor::randn(Shape{1, 4, 5, 5}, rng));
  auto cb = std::make_shared<Tensor>(Tensor::randn(Shape{4}, rng));
  const std::uint64_t probe_seed = rng.below(1u << 30);
  // Weighted sum: every output element gets a distinct upstream gradient.
  const auto wsum = [probe_seed](Graph& g, Var y) {
    Rng r(probe_seed);
    return sum(mul(y, g.constant(Tensor::randn(y.shape(), r))));
  };
  const Shape s{2, 3, 4};
  const Conv2dOptions dil{.pad_h = 2, .pad_w = 2, .dilation = 2, .groups = 2};
  const Conv2dOptions strided{.stride = 2, .pad_h = 1, .pad_w = 1};
  return {
      {"add", "input", s, [=](Graph& g, Var v) { return wsum(g, add(v, g.constant(*other))); }},
      {"sub", "input", s, [=](Graph& g, Var v) { return wsum(g, sub(g.constant(*other), v)); }},
      {"mul", "input", s, [=](Graph& g, Var v) { return wsum(g, mul(v, v)); }},
      {"scale", "input", s, [=](Graph& g, Var v) { return wsum(g, scale(v, -2.5)); }},
      {"relu", "input", s, [=](Graph& g, Var v) { return wsum(g, relu(v)); }},
      {"gelu", "input", s, [=](Graph& g, Var v) { return wsum(g, gelu(v)); }},
      {"sigmoid", "input", s, [=](Graph& g, Var v) { return wsum(g, sigmoid(v)); }},
      {"sum", "input", s, [=](Graph&, Var v) { return sum(mul(v, v)); }},
      {"mean", "input", s, [=](Graph&, Var v) { return mean(mul(v, v)); }},
      {"mean_axis", "input", s, [=](Graph& g, Var v) { return wsum(g, mean_axis(mul(v, v), 1)); }},
      {"reshape", "input", s, [=](Graph& g, Var v) { return wsum(g, reshape(mul(v, v), Shape{6, 4})); }},
      {"permute", "input", s, [=](Graph& g, Var v) { return wsum(g, permute(mul(v, v), {2, 0, 1})); }},
      {"concat", "input", s,
       [=](Graph& g, Var v) {
         const Var parts[] = {v, mul(v, v)};
         return wsum(g, concat(parts, 1));
       }},
      {"add_broadcast", "input", s, [=](Graph& g, Var v) { return wsum(g, mul(add_broadcast(v, g.constant(*row)), v)); }},
      {"add_broadcast", "rhs", Shape{4},
       [=](Graph& g, Var v) { return wsum(g, mul(add_broadcast(g.constant(*other), v), g.constant(*other))); }},
      {"mul_element", "input", Shape{24}, [=](Graph& g, Var v) { return wsum(g, mul_element(g.constant(*other), v, 5)); }},
      {"mul_element", "rhs", s, [=](Graph& g, Var v) { return wsum(g, mul(mul_element(v, g.constant(*row), 2), v)); }},
      {"scale_channels", "input", s, [=](Graph& g, Var v) { return wsum(g, scale_channels(v, mean_axis(v, 2))); }},
      {"gather", "input", Shape{24},
       [=](Graph& g, Var v) {
         auto idx = std::make_shared<std::vector<std::uint32_t>>();
         for (std::uint32_t i = 0; i < 24; ++i) idx->push_back((i * 7) % 24);
         for (std::uint32_t i = 0; i < 6; ++i) idx->push_back(i);
         return wsum(g, mul(gather(v, idx, Shape{30}), gather(v, idx, Shape{30})));
       }},
      {"matmul", "input", Shape{2, 3, 4}, [=](Graph& g, Var v) { return wsum(g, matmul(v, g.constant(*mat))); }},
      {"matmul", "rhs", Shape{2, 4, 3}, [=](Graph& g, Var v) { return wsum(g, matmul(g.constant(*other), v)); }},
      {"softmax", "input", s, [=](Graph& g, Var v) { return wsum(g, softmax(v, 1)); }},
      {"layer_norm", "input", s,
       [=](Graph& g, Var v) { return wsum(g, layer_norm(v, g.constant(*row), g.constant(Tensor::full(Shape{4}, 0.3)))); }},
      {"layer_norm", "gamma", Shape{4},
       [=](Graph& g, Var v) { return wsum(g, layer_norm(g.constant(*other), v, g.constant(*row))); }},
      {"batch_norm", "input", s,
       [=](Graph& g, Var v) {
         BatchNormState st(3);
         return wsum(g, batch_norm(reshape(v, Shape{2, 3, 2, 2}), g.constant(Tensor::full(Shape{3}, 1.5)),
                                   g.constant(Tensor::full(Shape{3}, -0.2)), st, true));
       }},
      {"batch_norm_eval", "input", s,
       [=](Graph& g, Var v) {
         BatchNormState st(3);
         st.running_mean = Tensor(Shape{3}, {0.1, -0.2, 0.3});
         return wsum(g, batch_norm(reshape(v, Shape{2, 3, 2, 2}), Var{}, Var{}, st, false));
       }},
      {"conv2d", "input", Shape{1, 4, 5, 5},
       [=](Graph& g, Var v) { return wsum(g, conv2d(v, g.constant(*cw), g.constant(*cb), dil)); }},
      {"conv2d", "weight", Shape{4, 2, 3, 3},
       [=](Graph& g, Var v) { return wsum(g, conv2d(g.constant(*cx), v, Var{}, dil)); }},
      {"conv2d_strided", "input", Shape{1, 2, 5, 5},
       [=](Graph& g, Var v) {
         Rng r(probe_seed + 1);
         return wsum(g, conv2d(v, g.constant(Tensor::randn(Shape{3, 2, 3, 3}, r)), Var{}, strided));
       }},
      {"conv2d", "bias", Shape{4}, [=](Graph& g, Var v) { return wsum(g, conv2d(g.constant(*cx), g.constant(*cw), v, dil)); }},
      {"cross_entropy", "input", s,
       [=](Graph&, Var v) {
         const int labels[] = {0, 3, 1, 2, 2, 1};
         return cross_entropy(reshape(v, Shape{6, 4}), labels);
       }},
  };
}

void check_op(OpKind kind, std::uint64_t seed, double step, double tol, std::vector<GradSuiteEntry>& out) {
  const bool attention = kind == OpKind::kWMsa || kind == OpKind::kSwMsa;
  OpSettings os;
  os.channels = attention ? 8 : 4;
  os.window = 2;
  os.heads = 2;
  Rng rng(seed);
  auto op = make_op(kind, os, rng);
  const Shape shape{1, 16, os.channels};
  const Tensor x = away_from_zero(shape, rng);
  const Tensor w = Tensor::randn(shape, rng);
  const auto loss = [&](Graph& g, Var in) {
    Ctx ctx{g};
    return sum(mul(op->forward(ctx, TokenMap(in, 4, 4)).tokens(), g.constant(w)));
  };
  out.push_back({std::string(op_name(kind)), "input", seed, grad_check(loss, x, step, tol)});
  ParamList params;
  op->collect(params);
  for (Parameter* p : params) {
    out.push_back({std::string(op_name(kind)), p->name, seed,
                   grad_check_param([&](Graph& g) { return loss(g, g.constant(x)); }, *p, step, tol)});
  }
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::span<const std::uint64_t> seeds, double step, double tol) {
  std::vector<GradSuiteEntry> out;
  for (std::uint64_t seed : seeds) {
    Rng rng(seed);
    for (const Case& c : primitive_cases(rng)) {
      const Tensor x = away_from_zero(c.shape, rng);
      out.push_back({c.name, c.wrt, seed, grad_check(c.f, x, step, tol)});
    }
    for (OpKind k : kAllOps) check_op(k, seed, step, tol, out);
  }
  return out;
}

bool all_passed(std::span<const GradSuiteEntry> entries) {
  for (const GradSuiteEntry& e : entries)
    if (!e.report.passed) return false;
  return true;
}

}  // namespace vtcas

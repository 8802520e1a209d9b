// SPDX-License-Identifier: Apache-2.0
#include "vtcas/transform_check.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "vtcas/error.hpp"
#include "vtcas/layout.hpp"
#include "vtcas/ops.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

using Grid3 = std::array<std::array<double, 3>, 3>;
using Grid5 = std::array<std::array<double, 5>, 5>;

// Token t = 3*row + col.
Grid3 to_grid(const Tensor& t) {
  Grid3 g{};
  for (std::size_t i = 0; i < 9; ++i) g[i / 3][i % 3] = t[i];
  return g;
}

Grid5 zero_pad(const Grid3& g) {
  Grid5 p{};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) p[r + 1][c + 1] = g[r][c];
  return p;
}

// Valid 3x3 cross-correlation over a 5x5 padded grid.
Grid3 correlate(const Grid5& padded, const Grid3& k) {
  Grid3 out{};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) acc += padded[r + i][c + j] * k[i][j];
      out[r][c] = acc;
    }
  return out;
}

Grid3 rotate180(const Grid3& k) {
  Grid3 r{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) r[i][j] = k[2 - i][2 - j];
  return r;
}

double compare(const Grid3& expected, const Tensor& actual, const char* what, std::string& detail, double tol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double d = std::abs(expected[i / 3][i % 3] - actual[i]);
    if (d > tol && detail.empty()) {
      std::ostringstream os;
      os.precision(17);
      os << what << " mismatch at (" << i / 3 + 1 << "," << i % 3 + 1 << "): expected " << expected[i / 3][i % 3]
         << ", got " << actual[i];
      detail = os.str();
    }
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace

double TransformCheckReport::max_deviation() const {
  return std::max({forward_deviation, input_grad_deviation, weight_grad_deviation});
}

TransformCheckReport verify_conv_transform_example(const Tensor& tokens, const Tensor& kernel, double bias,
                                                   const Tensor& delta, double tolerance) {
  if (tokens.shape() != Shape{1, 9, 1} || delta.shape() != Shape{1, 9, 1} || kernel.size() != 9) {
    throw ShapeError("verify_conv_transform_example: expects (1,9,1) tokens/delta and a 3x3 kernel");
  }
  // Pipeline under test.
  Graph g;
  Var x = g.input(tokens);
  Var w = g.input(kernel.reshaped(Shape{1, 1, 3, 3}));
  Var b = g.input(Tensor::scalar(bias));
  SpatialMap spatial = tokens_to_spatial(TokenMap(x, 3, 3));
  Var conv = conv2d(spatial.map(), w, b, Conv2dOptions{.stride = 1, .pad_h = 1, .pad_w = 1});
  TokenMap out = spatial_to_tokens(SpatialMap(conv));
  // <out, delta> makes delta the upstream gradient of the output tokens.
  Var loss = sum(mul(out.tokens(), g.constant(delta)));
  GradMap grads = g.backward(loss);

  // Direct formulas on 3x3 grids.
  const Grid3 xg = to_grid(tokens);
  const Grid3 kg = to_grid(kernel);
  const Grid3 dg = to_grid(delta);
  Grid3 fwd = correlate(zero_pad(xg), kg);
  for (auto& row : fwd)
    for (double& v : row) v += bias;
  const Grid3 dx = correlate(zero_pad(dg), rotate180(kg));
  const Grid3 dw = correlate(zero_pad(xg), dg);

  TransformCheckReport r;
  r.tolerance = tolerance;
  r.forward_deviation = compare(fwd, out.tokens().value(), "forward", r.detail, tolerance);
  r.input_grad_deviation = compare(dx, grads[x], "input gradient", r.detail, tolerance);
  r.weight_grad_deviation = compare(dw, grads[w], "weight gradient", r.detail, tolerance);
  r.passed = r.max_deviation() <= tolerance;
  return r;
}

TransformCheckReport verify_conv_transform_example(Rng& rng, double tolerance) {
  Tensor tokens = Tensor::randn(Shape{1, 9, 1}, rng);
  Tensor kernel = Tensor::randn(Shape{3, 3}, rng);
  const double bias = rng.normal();
  Tensor delta = Tensor::randn(Shape{1, 9, 1}, rng);
  return verify_conv_transform_example(tokens, kernel, bias, delta, tolerance);
}

}  // namespace vtcas

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "vtcas/graph.hpp"
#include "vtcas/ops.hpp"

namespace vtcas {

class Rng;

using ParamList = std::vector<Parameter*>;

/// Per-forward settings shared by every layer.
struct Ctx {
  Graph& graph;
  bool training = true;
};

/// y = x W + b over the last axis; W is (in, out).
struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  Var forward(const Ctx& ctx, Var x);
  void collect(ParamList& out);

  Parameter weight;
  std::optional<Parameter> bias;
};

struct LayerNorm {
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim, double eps = 1e-5);

  Var forward(const Ctx& ctx, Var x);
  void collect(ParamList& out);

  Parameter gamma;
  Parameter beta;
  double eps = 1e-5;
};

struct BatchNorm2d {
  explicit BatchNorm2d(std::size_t channels, bool affine = true);

  Var forward(const Ctx& ctx, Var x);
  void collect(ParamList& out);

  std::optional<Parameter> gamma;
  std::optional<Parameter> beta;
  BatchNormState state;
};

struct Conv2d {
  Conv2d() = default;
  /// Square kernel; weight is (out, in/groups, k, k).
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, const Conv2dOptions& opt, Rng& rng,
         bool bias = false);

  Var forward(const Ctx& ctx, Var x);
  void collect(ParamList& out);

  Parameter weight;
  std::optional<Parameter> bias;
  Conv2dOptions options;
};

std::size_t count_params(const ParamList& params);

}  // namespace vtcas

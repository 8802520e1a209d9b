// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vtcas/layout.hpp"
#include "vtcas/nn.hpp"

namespace vtcas {

class Rng;

/// Non-overlapping p x p patches of a (B,Cin,S,S) image, each flattened and
/// projected to `dim`, then layer-normalized. Produces (S/p)^2 tokens.
struct PatchEmbed {
  PatchEmbed(std::size_t in_channels, std::size_t patch, std::size_t dim, Rng& rng, bool norm = true);

  TokenMap forward(const Ctx& ctx, Var images);
  void collect(ParamList& out);

  std::size_t patch;
  Conv2d proj;  // kernel = stride = patch
  std::optional<LayerNorm> norm;
};

/// Concatenates each 2x2 token neighbourhood (4C), layer-norms it and
/// projects to 2C. Halves H and W.
struct PatchMerge {
  PatchMerge(std::size_t dim, Rng& rng);

  TokenMap forward(const Ctx& ctx, const TokenMap& x);
  void collect(ParamList& out);

  std::size_t dim;
  LayerNorm norm;
  Linear reduction;  // 4C -> 2C, no bias
};

}  // namespace vtcas

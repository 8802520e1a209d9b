// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vtcas/graph.hpp"
#include "vtcas/ops.hpp"

// Token (B,L,C) and spatial (B,C,H,W) views of one feature map, and the
// rearrangements between them. All transforms are pure index permutations,
// so round trips are bitwise exact and gradients are the inverse permutation.
namespace vtcas {

/// (B, L, C) with the grid it came from; L = height * width, row-major.
class TokenMap {
 public:
  TokenMap(Var tokens, std::size_t height, std::size_t width);

  Var tokens() const { return tokens_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t batch() const { return tokens_.shape()[0]; }
  std::size_t length() const { return tokens_.shape()[1]; }
  std::size_t channels() const { return tokens_.shape()[2]; }

  /// Same grid, new token tensor of identical shape.
  TokenMap with(Var tokens) const { return TokenMap(tokens, height_, width_); }

 private:
  Var tokens_;
  std::size_t height_;
  std::size_t width_;
};

/// (B, C, H, W).
class SpatialMap {
 public:
  explicit SpatialMap(Var map);

  Var map() const { return map_; }
  std::size_t batch() const { return map_.shape()[0]; }
  std::size_t channels() const { return map_.shape()[1]; }
  std::size_t height() const { return map_.shape()[2]; }
  std::size_t width() const { return map_.shape()[3]; }

 private:
  Var map_;
};

/// (B,L,C) -> (B,C,L) -> (B,C,H,W); element (b,c,h,w) = input (b, h*W+w, c).
SpatialMap tokens_to_spatial(const TokenMap& x);
/// Exact inverse of tokens_to_spatial.
TokenMap spatial_to_tokens(const SpatialMap& x);

/// Token map viewed as a channels-last grid (B,H,W,C); no data movement.
Var token_grid(const TokenMap& x);

/// (B,H,W,C) -> (B*(H/w)*(W/w), w*w, C). Windows are ordered row-major over
/// the grid, tokens row-major within a window.
Var window_partition(Var grid, std::size_t window);
/// (B*nW, w*w, C) -> (B,H,W,C); exact inverse of window_partition.
Var window_reverse(Var windows, std::size_t batch, std::size_t height, std::size_t width, std::size_t window);

/// out(b,h,w,c) = in(b,(h-dh) mod H,(w-dw) mod W,c) on a (B,H,W,C) grid.
Var roll(Var grid, long shift_h, long shift_w);

}  // namespace vtcas

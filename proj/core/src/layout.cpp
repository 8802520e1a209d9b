// SPDX-License-Identifier: Apache-2.0
#include "vtcas/layout.hpp"

#include <memory>

#include "vtcas/error.hpp"

namespace vtcas {

TokenMap::TokenMap(Var tokens, std::size_t height, std::size_t width)
    : tokens_(tokens), height_(height), width_(width) {
  const Shape& s = tokens.shape();
  if (s.rank() != 3) throw ShapeError("TokenMap: expected (B,L,C), got " + s.str());
  if (height == 0 || width == 0) throw ShapeError("TokenMap: grid sides must be positive");
  if (s[1] != height * width) {
    throw ShapeError("TokenMap: L=" + std::to_string(s[1]) + " but H*W=" + std::to_string(height * width));
  }
}

SpatialMap::SpatialMap(Var map) : map_(map) {
  if (map.shape().rank() != 4) throw ShapeError("SpatialMap: expected (B,C,H,W), got " + map.shape().str());
}

SpatialMap tokens_to_spatial(const TokenMap& x) {
  Var t = permute(x.tokens(), {0, 2, 1});
  return SpatialMap(reshape(t, Shape{x.batch(), x.channels(), x.height(), x.width()}));
}

TokenMap spatial_to_tokens(const SpatialMap& x) {
  const std::size_t l = x.height() * x.width();
  Var t = reshape(x.map(), Shape{x.batch(), x.channels(), l});
  return TokenMap(permute(t, {0, 2, 1}), x.height(), x.width());
}

Var token_grid(const TokenMap& x) {
  return reshape(x.tokens(), Shape{x.batch(), x.height(), x.width(), x.channels()});
}

namespace {

void require_grid(const char* op, const Shape& s) {
  if (s.rank() != 4) throw ShapeError(std::string(op) + ": expected (B,H,W,C), got " + s.str());
}

}  // namespace

Var window_partition(Var grid, std::size_t window) {
  const Shape& s = grid.shape();
  require_grid("window_partition", s);
  const std::size_t b = s[0], h = s[1], w = s[2], c = s[3];
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw ShapeError("window_partition: window " + std::to_string(window) + " does not divide grid " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t nh = h / window, nw = w / window;
  auto index = std::make_shared<std::vector<std::uint32_t>>();
  index->reserve(s.numel());
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t wy = 0; wy < nh; ++wy)
      for (std::size_t wx = 0; wx < nw; ++wx)
        for (std::size_t ty = 0; ty < window; ++ty)
          for (std::size_t tx = 0; tx < window; ++tx) {
            const std::size_t src = ((bi * h + wy * window + ty) * w + wx * window + tx) * c;
            for (std::size_t ci = 0; ci < c; ++ci) index->push_back(static_cast<std::uint32_t>(src + ci));
          }
  return gather(grid, index, Shape{b * nh * nw, window * window, c});
}

Var window_reverse(Var windows, std::size_t batch, std::size_t height, std::size_t width, std::size_t window) {
  const Shape& s = windows.shape();
  if (window == 0 || height % window != 0 || width % window != 0 || s.rank() != 3 ||
      s[0] != batch * (height / window) * (width / window) || s[1] != window * window) {
    throw ShapeError("window_reverse: windows " + s.str() + " do not tile a " + std::to_string(height) + "x" +
                     std::to_string(width) + " grid with window " + std::to_string(window));
  }
  const std::size_t c = s[2], nh = height / window, nw = width / window;
  auto index = std::make_shared<std::vector<std::uint32_t>>(s.numel());
  std::size_t src = 0;
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t wy = 0; wy < nh; ++wy)
      for (std::size_t wx = 0; wx < nw; ++wx)
        for (std::size_t ty = 0; ty < window; ++ty)
          for (std::size_t tx = 0; tx < window; ++tx) {
            const std::size_t dst = ((bi * height + wy * window + ty) * width + wx * window + tx) * c;
            for (std::size_t ci = 0; ci < c; ++ci) (*index)[dst + ci] = static_cast<std::uint32_t>(src++);
          }
  return gather(windows, index, Shape{batch, height, width, c});
}

Var roll(Var grid, long shift_h, long shift_w) {
  const Shape& s = grid.shape();
  require_grid("roll", s);
  const long b = static_cast<long>(s[0]), h = static_cast<long>(s[1]), w = static_cast<long>(s[2]);
  const long c = static_cast<long>(s[3]);
  auto index = std::make_shared<std::vector<std::uint32_t>>();
  index->reserve(s.numel());
  for (long bi = 0; bi < b; ++bi)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        const long sy = ((y - shift_h) % h + h) % h;
        const long sx = ((x - shift_w) % w + w) % w;
        const long src = ((bi * h + sy) * w + sx) * c;
        for (long ci = 0; ci < c; ++ci) index->push_back(static_cast<std::uint32_t>(src + ci));
      }
  return gather(grid, index, s);
}

}  // namespace vtcas

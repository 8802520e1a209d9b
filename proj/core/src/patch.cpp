// SPDX-License-Identifier: Apache-2.0
#include "vtcas/patch.hpp"

#include "vtcas/error.hpp"

namespace vtcas {

PatchEmbed::PatchEmbed(std::size_t in_channels, std::size_t patch, std::size_t dim, Rng& rng, bool norm)
    : patch(patch), proj(in_channels, dim, patch, Conv2dOptions{.stride = patch}, rng, true) {
  if (patch == 0) throw ShapeError("patch embed: patch size must be positive");
  if (norm) this->norm.emplace(dim);
}

TokenMap PatchEmbed::forward(const Ctx& ctx, Var images) {
  const Shape& s = images.shape();
  if (s.rank() != 4 || s[2] % patch != 0 || s[3] % patch != 0) {
    throw ShapeError("patch embed: patch " + std::to_string(patch) + " does not tile " + s.str());
  }
  TokenMap t = spatial_to_tokens(SpatialMap(proj.forward(ctx, images)));
  return norm ? t.with(norm->forward(ctx, t.tokens())) : t;
}

void PatchEmbed::collect(ParamList& out) {
  proj.collect(out);
  if (norm) norm->collect(out);
}

PatchMerge::PatchMerge(std::size_t dim, Rng& rng) : dim(dim), norm(4 * dim), reduction(4 * dim, 2 * dim, rng, false) {}

TokenMap PatchMerge::forward(const Ctx& ctx, const TokenMap& x) {
  const std::size_t b = x.batch(), h = x.height(), w = x.width(), c = x.channels();
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("patch merge: grid " + std::to_string(h) + "x" + std::to_string(w) + " is not even");
  }
  if (c != dim) throw ShapeError("patch merge: expected " + std::to_string(dim) + " channels");
  const std::size_t oh = h / 2, ow = w / 2;
  // Neighbour order (0,0), (1,0), (0,1), (1,1).
  constexpr std::size_t dy[4] = {0, 1, 0, 1};
  constexpr std::size_t dx[4] = {0, 0, 1, 1};
  auto index = std::make_shared<std::vector<std::uint32_t>>(b * oh * ow * 4 * c);
  std::size_t o = 0;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t k = 0; k < 4; ++k) {
          const std::size_t src = ((n * h + 2 * i + dy[k]) * w + 2 * j + dx[k]) * c;
          for (std::size_t ch = 0; ch < c; ++ch) (*index)[o++] = static_cast<std::uint32_t>(src + ch);
        }
  Var merged = gather(x.tokens(), index, Shape{b, oh * ow, 4 * c});
  return TokenMap(reduction.forward(ctx, norm.forward(ctx, merged)), oh, ow);
}

void PatchMerge::collect(ParamList& out) {
  norm.collect(out);
  reduction.collect(out);
}

}  // namespace vtcas

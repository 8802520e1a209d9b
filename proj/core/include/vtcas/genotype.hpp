// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vtcas/supernet.hpp"

namespace vtcas {

/// One concrete op per cell edge, in kCellEdges order, plus provenance.
struct Genotype {
  struct EdgeAlpha {
    std::vector<OpKind> ops;
    std::vector<double> values;
    bool operator==(const EdgeAlpha&) const = default;
  };
  struct Meta {
    std::uint64_t seed = 0;
    std::string schedule_hash;
    std::array<EdgeAlpha, kNumEdges> alpha;
    bool operator==(const Meta&) const = default;
  };

  std::array<OpKind, kNumEdges> ops{};
  Meta meta;

  bool operator==(const Genotype&) const = default;
};

/// Per edge, the op with the largest alpha, skipping `none` unless it is the
/// only survivor; ties go to the earlier-declared op.
Genotype discretize(const std::array<Tensor, kNumEdges>& alpha, const std::array<std::vector<OpKind>, kNumEdges>& live);

/// {(0,1): sep_conv_3x3, (0,2): eca_3x3, (1,2): sw_msa}.
Genotype reference_genotype();

/// The same op on every edge.
Genotype uniform_genotype(OpKind op);

inline constexpr int kGenotypeVersion = 1;

/// JSON with `version`, `edges` [{from, to, op}] and `meta`.
std::string genotype_encode(const Genotype& g);
/// Throws FormatError on unknown op names, missing or duplicate edges.
Genotype genotype_decode(std::string_view text);

}  // namespace vtcas

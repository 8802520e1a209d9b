// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vtcas/gradcheck.hpp"

namespace vtcas {

struct GradSuiteEntry {
  std::string name;  // primitive or op name
  std::string wrt;   // "input", "rhs" or a parameter name
  std::uint64_t seed = 0;
  GradCheckReport report;
};

/// Central-difference checks of every differentiable primitive and every
/// candidate op (input and each parameter), once per seed.
std::vector<GradSuiteEntry> run_gradient_suite(std::span<const std::uint64_t> seeds, double step = 1e-6,
                                               double tol = 1e-5);

bool all_passed(std::span<const GradSuiteEntry> entries);

}  // namespace vtcas

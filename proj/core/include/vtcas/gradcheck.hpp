// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "vtcas/graph.hpp"

namespace vtcas {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  bool passed = true;
};

/// Builds the scalar to differentiate on a fresh Graph from input `x`.
using ScalarFn = std::function<Var(Graph&, Var)>;

/// Compares backward() against central differences elementwise, with
/// relative error |a - fd| / max(1, |fd|). Throws NumericError if f is not
/// finite at a probe point.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double step = 1e-6, double tol = 1e-5);

/// Same, differentiating with respect to a parameter the function binds.
/// The parameter's value is restored afterwards; its grad is left untouched.
GradCheckReport grad_check_param(const std::function<Var(Graph&)>& f, Parameter& p, double step = 1e-6,
                                 double tol = 1e-5);

}  // namespace vtcas

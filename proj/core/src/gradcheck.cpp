// SPDX-License-Identifier: Apache-2.0
#include "vtcas/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vtcas/error.hpp"

namespace vtcas {
namespace {

double checked_scalar(Var v) {
  if (v.value().size() != 1) throw ShapeError("grad_check: function must return a scalar");
  const double s = v.value()[0];
  if (!std::isfinite(s)) throw NumericError("grad_check: function is not finite at a probe point");
  return s;
}

void compare(GradCheckReport& r, std::size_t i, double analytic, double numeric, double tol) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
  if (i == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_index = i;
    r.analytic = analytic;
    r.numeric = numeric;
  }
  r.passed = r.max_rel_error <= tol;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double step, double tol) {
  Tensor analytic;
  {
    Graph g;
    Var in = g.input(x);
    Var out = f(g, in);
    checked_scalar(out);
    analytic = g.backward(out)[in];
  }
  const auto eval = [&](const Tensor& probe) {
    Graph g;
    return checked_scalar(f(g, g.input(probe)));
  };
  GradCheckReport report;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = eval(probe);
    probe[i] = orig - step;
    const double fm = eval(probe);
    probe[i] = orig;
    compare(report, i, analytic[i], (fp - fm) / (2.0 * step), tol);
  }
  return report;
}

GradCheckReport grad_check_param(const std::function<Var(Graph&)>& f, Parameter& p, double step, double tol) {
  const Tensor saved_grad = p.grad;
  p.zero_grad();
  {
    Graph g;
    Var out = f(g);
    checked_scalar(out);
    g.backward(out);
  }
  const Tensor analytic = p.grad;
  p.grad = saved_grad;
  const auto eval = [&] {
    Graph g;
    return checked_scalar(f(g));
  };
  GradCheckReport report;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double orig = p.value[i];
    p.value[i] = orig + step;
    const double fp = eval();
    p.value[i] = orig - step;
    const double fm = eval();
    p.value[i] = orig;
    compare(report, i, analytic[i], (fp - fm) / (2.0 * step), tol);
  }
  return report;
}

}  // namespace vtcas

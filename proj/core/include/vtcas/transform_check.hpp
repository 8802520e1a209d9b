// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vtcas/tensor.hpp"

namespace vtcas {

class Rng;

/// Outcome of running a 3x3 single-channel convolution through the
/// token -> spatial -> conv -> token pipeline and comparing against direct
/// loop formulas for the forward map, input gradient and weight gradient.
struct TransformCheckReport {
  double forward_deviation = 0.0;
  double input_grad_deviation = 0.0;
  double weight_grad_deviation = 0.0;
  double tolerance = 1e-12;
  bool passed = false;
  std::string detail;  // offending element on failure

  double max_deviation() const;
};

/// tokens: (1,9,1) on a 3x3 grid; kernel: (3,3); delta: upstream gradient
/// (1,9,1) of the output tokens. Bias is added in the forward pass.
TransformCheckReport verify_conv_transform_example(const Tensor& tokens, const Tensor& kernel, double bias,
                                                   const Tensor& delta, double tolerance = 1e-12);

/// Draws tokens, kernel, bias and delta from `rng`.
TransformCheckReport verify_conv_transform_example(Rng& rng, double tolerance = 1e-12);

}  // namespace vtcas

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "vtcas/graph.hpp"

// Differentiable primitives. Every function records one node on the operands'
// Graph and is covered by a finite-difference check in tests/.
namespace vtcas {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// a + b where b's shape equals the trailing dims of a (bias, position tables).
Var add_broadcast(Var a, Var b);

/// x * w[index]: scales a whole tensor by one element of a vector.
Var mul_element(Var x, Var w, std::size_t index);

/// x(B,C,...) * gate(B,C), broadcast over the trailing axes.
Var scale_channels(Var x, Var gate);

/// Subgradient at 0 is 0.
Var relu(Var x);
/// tanh approximation.
Var gelu(Var x);
Var sigmoid(Var x);

Var sum(Var x);
Var mean(Var x);
/// Mean over one axis; the axis is removed (a rank-1 input yields shape (1)).
Var mean_axis(Var x, std::size_t axis);

Var reshape(Var x, Shape shape);
/// out.dims[i] = in.dims[perm[i]].
Var permute(Var x, std::initializer_list<std::size_t> perm);
Var concat(std::span<const Var> parts, std::size_t axis);

/// out[i] = x[index[i]]; the backward pass scatter-adds. Any pure
/// rearrangement (rolls, window partitions, patch extraction) is expressed
/// through this.
using IndexMap = std::shared_ptr<const std::vector<std::uint32_t>>;
Var gather(Var x, IndexMap index, Shape out_shape);

/// a(..., m, k) x b(..., k, n). Batch dims must match, or b is rank 2 and is
/// shared across all of a's leading dims.
Var matmul(Var a, Var b);

/// Max-subtracted softmax along `axis`.
Var softmax(Var x, std::size_t axis);

/// Normalizes over the last axis with population variance, then gamma*x+beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

struct BatchNormState {
  explicit BatchNormState(std::size_t channels)
      : running_mean(Shape{channels}), running_var(Tensor::full(Shape{channels}, 1.0)) {}
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel (axis 1) normalization. Training mode uses batch statistics
/// and updates the running estimates; evaluation mode uses the running ones.
/// gamma/beta may be invalid Vars (no affine transform).
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool training);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

/// Zero-padded cross-correlation. x(B,Cin,H,W), w(Cout,Cin/groups,kh,kw),
/// optional bias(Cout).
Var conv2d(Var x, Var w, Var bias, const Conv2dOptions& opt);

/// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const int> labels);

/// Output spatial size of a convolution, 0 if the window does not fit.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t pad, std::size_t stride,
                          std::size_t dilation);

}  // namespace vtcas

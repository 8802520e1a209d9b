// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vtcas/nn.hpp"

namespace vtcas {

/// v <- mu v + g;  p <- p - lr (v + wd p).
class Sgd {
 public:
  struct Options {
    double momentum = 0.9;
    double weight_decay = 0.0;
  };

  Sgd(ParamList params, Options opt);
  void step(double lr);
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  Options opt_;
  std::vector<Tensor> velocity_;
};

/// Bias-corrected Adam. With `decoupled` the weight decay is applied to the
/// parameter directly (AdamW); otherwise it is added to the gradient.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    bool decoupled = false;
  };

  Adam(ParamList params, Options opt);
  void step(double lr);
  std::size_t steps() const { return t_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  Options opt_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

void zero_grad(const ParamList& params);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

/// Linear ramp 0 -> base over `warmup` epochs, then half-cosine decay to 0.
double cosine_lr(std::size_t epoch, std::size_t total, double base, std::size_t warmup);

/// Sets requires_grad on every parameter of the list.
void set_trainable(const ParamList& params, bool trainable);

}  // namespace vtcas

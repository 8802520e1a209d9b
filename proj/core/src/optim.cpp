// SPDX-License-Identifier: Apache-2.0
#include "vtcas/optim.hpp"

#include <cmath>
#include <numbers>

#include "vtcas/error.hpp"

namespace vtcas {
namespace {

void check_grad(const Parameter& p) {
  if (p.grad.shape() != p.value.shape()) throw ShapeError("optimizer: gradient shape mismatch for " + p.name);
}

}  // namespace

Sgd::Sgd(ParamList params, Options opt) : params_(std::move(params)), opt_(opt) {
  for (const Parameter* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    check_grad(p);
    auto v = velocity_[i].data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = opt_.momentum * v[j] + g[j];
      w[j] -= lr * (v[j] + opt_.weight_decay * w[j]);
    }
  }
}

Adam::Adam(ParamList params, Options opt) : params_(std::move(params)), opt_(opt) {
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    check_grad(p);
    auto m = m_[i].data();
    auto v = v_[i].data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      double gj = g[j];
      if (opt_.decoupled) {
        w[j] -= lr * opt_.weight_decay * w[j];
      } else {
        gj += opt_.weight_decay * w[j];
      }
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * gj;
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * gj * gj;
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt_.eps);
    }
  }
}

void zero_grad(const ParamList& params) {
  for (Parameter* p : params) p->zero_grad();
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

double cosine_lr(std::size_t epoch, std::size_t total, double base, std::size_t warmup) {
  if (total == 0 || epoch >= total || warmup >= total) {
    throw ConfigError("cosine_lr: need epoch < total and warmup < total");
  }
  if (epoch < warmup) return base * static_cast<double>(epoch) / static_cast<double>(warmup);
  const double t = static_cast<double>(epoch - warmup) / static_cast<double>(total - warmup);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void set_trainable(const ParamList& params, bool trainable) {
  for (Parameter* p : params) p->requires_grad = trainable;
}

}  // namespace vtcas

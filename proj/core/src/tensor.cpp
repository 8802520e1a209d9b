// SPDX-License-Identifier: Apache-2.0
#include "vtcas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.empty() || dims.size() > kMaxRank) {
    throw ShapeError("shape rank must be 1..4, got " + std::to_string(dims.size()));
  }
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) throw ShapeError("shape dims must be positive");
    dims_[i] = dims[i];
  }
  rank_ = dims.size();
}

std::size_t Shape::numel() const { return rank_ == 0 ? 0 : product(0, rank_); }

std::size_t Shape::product(std::size_t first, std::size_t last) const {
  std::size_t n = 1;
  for (std::size_t i = first; i < last; ++i) n *= dims_[i];
  return n;
}

bool Shape::operator==(const Shape& other) const {
  return rank_ == other.rank_ && std::equal(dims_.begin(), dims_.begin() + rank_, other.dims_.begin());
}

std::string Shape::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) s += ",";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape) : shape_(shape), values_(shape.numel(), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.numel()) {
    throw ShapeError("tensor of shape " + shape_.str() + " given " + std::to_string(values_.size()) +
                     " values");
  }
}

Tensor Tensor::full(Shape shape, double value) {
  return Tensor(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(shape);
  for (double& v : t.values_) v = stddev * rng.normal();
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.values_) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const& { return Tensor(*this).reshaped(shape); }

Tensor Tensor::reshaped(Shape shape) && {
  if (shape.numel() != shape_.numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  shape_ = shape;
  return std::move(*this);
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace vtcas

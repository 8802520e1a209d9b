// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vtcas {

class Rng;

/// Dimensions of a dense row-major array, rank 1 to 4.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::span<const std::size_t> dims);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  std::size_t numel() const;
  /// Last dim, second to last, ... (axis counted from the back, 1-based).
  std::size_t back(std::size_t k = 1) const { return dims_[rank_ - k]; }

  /// Product of dims in [first, last).
  std::size_t product(std::size_t first, std::size_t last) const;

  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }

  bool operator==(const Shape& other) const;
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const;

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Dense 64-bit array. Values are laid out row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return full(Shape{1}, value); }
  /// i.i.d. N(0, stddev^2).
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> data() const { return values_; }
  std::span<double> data() { return values_; }
  const std::vector<double>& values() const { return values_; }

  const double& operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double item() const;

  /// Same values under a new shape with equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Largest |a[i] - b[i]|; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace vtcas

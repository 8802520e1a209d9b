// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vtcas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible shapes, ranks or divisibility constraints.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by an operation, or a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed files and documents (TIMG, genotype JSON, config).
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vtcas

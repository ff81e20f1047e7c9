// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace isonn {

enum class ErrorKind {
  kDimension,
  kCapacity,
  kDomain,
  kIndex,
  kNumerical,
  kState,
  kIo,
  kParse,
  kConfig,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures are reported as isonn::Error; the kind lets callers
// (the CLI in particular) map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(ErrorKind::kNumerical, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace isonn

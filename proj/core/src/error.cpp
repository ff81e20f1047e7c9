// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/error.hpp"

namespace isonn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kCapacity: return "capacity error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace isonn

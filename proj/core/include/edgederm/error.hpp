// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace edgederm {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or parameter dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN / Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad or unreadable input data: manifests, images, splits.
class DataError : public Error {
 public:
  enum class Kind {
    kMissingFile,
    kUnknownCode,
    kDuplicateId,
    kMalformed,
    kMissingClass,
    kDecode,
  };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A frame source that stopped delivering frames (unplugged camera, vanished file).
class SourceError : public Error {
 public:
  using Error::Error;
};

// Problems reading or validating a serialized model bundle.
class FormatError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kTruncated,
    kVersionMismatch,
    kChecksum,
    kShapeInconsistency,
    kPrecision,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace edgederm

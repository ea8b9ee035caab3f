// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rvesurr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, malformed configuration, bad sizes.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (log of a
/// non-positive eigenvalue, det F <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated binary/JSON artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was asked to run before the stage producing its inputs.
class MissingArtifact : public Error {
 public:
  MissingArtifact(const std::string& what, std::string upstream_stage)
      : Error(what), upstream_stage_(std::move(upstream_stage)) {}
  const std::string& upstream_stage() const noexcept { return upstream_stage_; }

 private:
  std::string upstream_stage_;
};

}  // namespace rvesurr

// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace otr {

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input outside the mathematical domain of an operation (e.g. log of a non-positive value).
class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An operation produced NaN or Inf from finite inputs.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, std::string what)
      : std::runtime_error(std::move(what)), op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Invalid configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file. `offset` is the byte offset (binary formats) or line number (CSV).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, std::uint64_t offset, const std::string& msg, bool is_line = false)
      : std::runtime_error(path + (is_line ? ": line " : ": offset ") + std::to_string(offset) + ": " + msg),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Training diverged or otherwise could not continue.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otr

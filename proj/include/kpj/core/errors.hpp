#pragma once

#include <stdexcept>
#include <string>

namespace kpj {

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-parseable class name used by the command-line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message) : Error("contract", message) {}
};

/// Tensor shapes do not agree.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

/// NaN / Inf appeared where finite numbers are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

/// Bad or inconsistent run configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Malformed file contents (cache, checkpoint, predictions).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace kpj

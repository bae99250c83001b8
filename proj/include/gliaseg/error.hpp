#pragma once

#include <stdexcept>
#include <string>

namespace gliaseg {

/// Base class for all errors raised by the toolkit. `category()` is a short,
/// stable, machine-parseable tag used by the CLI on failure.
class Error : public std::runtime_error {
public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

private:
  std::string category_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& what) : Error("degenerate-input", what) {}
};

struct EmptySeedError : Error {
  explicit EmptySeedError(const std::string& what) : Error("empty-seed", what) {}
};

struct UndefinedMetricError : Error {
  explicit UndefinedMetricError(const std::string& what) : Error("undefined-metric", what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

struct PayloadLengthError : Error {
  explicit PayloadLengthError(const std::string& what) : Error("payload-length", what) {}
};

struct InputNotFoundError : Error {
  explicit InputNotFoundError(const std::string& what) : Error("input-not-found", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace gliaseg

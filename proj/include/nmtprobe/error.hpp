#pragma once

#include <stdexcept>
#include <string>

namespace nmtprobe {

/// Base of every error thrown by the toolkit. `kind()` is a short stable tag
/// used by the CLI for its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Operand shapes do not fit the op; always a graph construction bug.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

/// A non-stable op produced inf/nan, or a training loss went non-finite.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

/// Malformed input file. Carries the 1-based line number when known.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : Error("format", path + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid argument or configuration value.
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error("value", what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& reason)
      : Error("config", field + ": " + reason), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Training diverged (non-finite loss). `epoch()` is 1-based.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error("divergence", "epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace nmtprobe

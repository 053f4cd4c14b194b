#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nlsql {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input (empty question text, out-of-range attempt number, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Configuration that cannot be honoured (unknown db_id, unbound role, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Illegal pipeline transition. Indicates a programming bug, not user error.
class StateMachineError : public Error {
 public:
  using Error::Error;
};

/// Backend unreachable or timed out. Callers may retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Backend answered with something we cannot interpret.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Database could not be opened or introspected.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Decomposition plan text rejected by the parser. Keeps the raw model output.
class PlanParseError : public Error {
 public:
  PlanParseError(const std::string& message, std::string raw)
      : Error(message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Benchmark input file malformed.
class LoadError : public Error {
 public:
  using Error::Error;
};

class MeasurementError : public Error {
 public:
  using Error::Error;
};

/// Argument outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlsql

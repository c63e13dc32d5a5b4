#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace decoupler {

enum class ErrorKind {
  Syntax,
  UnknownSymbol,
  Domain,
  Schema,
  NotInverse,
  SingularJacobian,
  IllConditioned,
  MismatchedSignature,
  HintInconsistent,
  TooLarge,
  SingularCandidate,
  ShootingFailed,
  CflViolation,
  BlowupDetected,
  GridMismatch,
  RetryExhausted,
  NotApplicable,
  PreconditionViolation,
  InvalidPartition,
  DegenerateSample,
};

const char* errorKindName(ErrorKind kind);

/// Base of every error raised by the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& message)
      : Error(ErrorKind::Syntax,
              message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnknownSymbolError : public Error {
 public:
  explicit UnknownSymbolError(const std::string& name)
      : Error(ErrorKind::UnknownSymbol, "unknown symbol '" + name + "'"),
        name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  explicit DomainError(const std::string& message, std::size_t output = npos)
      : Error(ErrorKind::Domain, message), output_(output) {}
  /// Index of the batch output whose evaluation failed, if known.
  std::size_t output() const noexcept { return output_; }

 private:
  std::size_t output_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace decoupler

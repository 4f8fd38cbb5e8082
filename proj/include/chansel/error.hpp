#pragma once

#include <stdexcept>
#include <string>

namespace chansel {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  validation = 2,
  evaluator = 3,
  format = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::validation; }
};

// Input violates a documented invariant (NaN payload, bad mask, unknown channel...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// On-disk bytes or manifest cannot be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::format; }
};

class EvaluatorError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::evaluator; }
};

// External evaluator answered, but not with a valid response record.
class ProtocolError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class TimeoutError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

}  // namespace chansel

#pragma once

#include <stdexcept>
#include <string>

namespace promptablate {

enum class ErrorKind {
  Configuration,
  Validation,
  Unsupported,
  Infeasible,
  InsufficientData,
  Transport,
  Backend,
  Timeout,
  Io,
};

const char* to_string(ErrorKind kind);

/// Base error for the library. Every failure surfaced by the harness carries
/// a kind so callers (the experiment runner in particular) can decide whether
/// to retry, record, or abort.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& m) : Error(ErrorKind::Configuration, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorKind::Validation, m) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& m) : Error(ErrorKind::Unsupported, m) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& m) : Error(ErrorKind::Infeasible, m) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& m) : Error(ErrorKind::InsufficientData, m) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& m) : Error(ErrorKind::Transport, m) {}
};

class BackendError : public Error {
 public:
  BackendError(int status, const std::string& body)
      : Error(ErrorKind::Backend, "backend returned status " + std::to_string(status) + ": " + body),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& m) : Error(ErrorKind::Timeout, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

}  // namespace promptablate

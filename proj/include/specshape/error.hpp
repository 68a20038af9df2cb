#pragma once

#include <stdexcept>
#include <string>

namespace specshape {

// Failure categories. The CLI maps them to exit codes, the server to HTTP
// status codes.
enum class ErrorKind {
  config,     // bad arguments, unknown keys, dimension mismatches
  data,       // unreadable or invalid shapes/files
  numerical,  // factorization failure, divergence, non-convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

// Thrown by parsers; carries the 1-based line of the offending record.
struct ParseError : DataError {
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : DataError(file + ":" + std::to_string(line) + ": " + msg), line(line) {}
  std::size_t line;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

}  // namespace specshape

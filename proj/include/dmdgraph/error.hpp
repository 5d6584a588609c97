#pragma once

#include <stdexcept>
#include <string>

namespace dmdgraph {

enum class ErrorKind {
  Domain,     // argument outside the mathematical domain of an operation
  Config,     // invalid configuration or infeasible rank request
  Data,       // malformed or insufficient input data
  Numerical,  // rank deficiency or solver failure
  Io
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code used by the command line tool for each error kind.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain:
    case ErrorKind::Config:
      return 1;
    case ErrorKind::Data:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Numerical:
      return 3;
  }
  return 2;
}

}  // namespace dmdgraph

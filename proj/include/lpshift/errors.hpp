#pragma once

#include <stdexcept>
#include <string>

namespace lpshift {

enum class ErrorCode {
  validation,   // malformed or inconsistent input
  depth,        // cylinder-depth mismatch in an operator construction
  convergence,  // an iterative solver failed to converge
  singularity,  // division by / logarithm of a structural zero
  resource,     // working size exceeds the configured state cap
  unsupported,  // no exact method for the requested quantity
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace lpshift

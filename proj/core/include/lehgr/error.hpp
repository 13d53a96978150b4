#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lehgr {

// Error taxonomy used across the pipeline. The CLI maps Usage to exit
// code 1 and everything else to exit code 2.
enum class ErrorCode {
  InvalidInput,
  Schema,
  Logic,
  StreamOrder,
  WindowUnderflow,
  Config,
  NumericInput,
  Script,
  CannotSplit,
  Io,
  Usage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Thrown when a feature window asks for more history than a trace holds.
class WindowUnderflowError : public Error {
 public:
  WindowUnderflowError(std::size_t needed, std::size_t available,
                       const std::string& message)
      : Error(ErrorCode::WindowUnderflow, message),
        needed_(needed),
        available_(available) {}

  std::size_t needed() const noexcept { return needed_; }
  std::size_t available() const noexcept { return available_; }
  std::size_t shortfall() const noexcept { return needed_ - available_; }

 private:
  std::size_t needed_;
  std::size_t available_;
};

}  // namespace lehgr

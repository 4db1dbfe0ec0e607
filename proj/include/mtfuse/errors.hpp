#pragma once

#include <stdexcept>
#include <string>

namespace mtfuse {

// Error taxonomy shared by the whole toolkit. The C API maps these kinds
// onto status codes one-to-one.
enum class ErrorKind {
  validation,  // caller passed inconsistent arguments
  config,      // bad configuration value
  data,        // corpus/dataset problem
  format,      // unparseable or corrupt file
  length,      // sequence exceeds a model limit
  vocab,       // unknown token id or language code
  io,          // filesystem failure
  transport,   // backend/network failure after retries
  internal,    // invariant broken inside the library
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mtfuse

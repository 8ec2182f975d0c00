#pragma once

#include <stdexcept>
#include <string>

namespace dsan {

enum class ErrorKind {
  kUsage,    // bad arguments / configuration
  kData,     // malformed input files or corpora
  kNumeric,  // NaN/Inf detected in a computation
  kIo,       // filesystem failures
  kLogic,    // broken internal contract
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dsan

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace graphrouter {

// Error taxonomy shared by the whole library. The CLI maps Validation to
// exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
public:
  enum class Kind { Validation, Numeric, Io };

  Error(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

inline Error validation_error(std::string message) {
  return Error(Error::Kind::Validation, std::move(message));
}

inline Error numeric_error(std::string message) {
  return Error(Error::Kind::Numeric, std::move(message));
}

inline Error io_error(std::string message) {
  return Error(Error::Kind::Io, std::move(message));
}

}  // namespace graphrouter

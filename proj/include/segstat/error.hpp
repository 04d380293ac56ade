#pragma once

#include <stdexcept>
#include <string>

namespace segstat {

// Bad or inconsistent user input. The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A broken internal invariant. The CLI maps this to exit code 2.
class InvariantError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

inline void ensure(bool condition, const std::string& message) {
  if (!condition) throw InvariantError(message);
}

}  // namespace segstat

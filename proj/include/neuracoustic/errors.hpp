#pragma once

#include <stdexcept>
#include <string>

namespace neuracoustic {

// Raised for malformed user input (bad files, invalid parameters, broken
// invariants on data coming from outside). The CLI maps this to exit code 2;
// everything else that escapes maps to exit code 1.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_input(bool cond, const std::string& what) {
  if (!cond) throw InputError(what);
}

}  // namespace neuracoustic

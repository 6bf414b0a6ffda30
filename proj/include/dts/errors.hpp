#pragma once

#include <stdexcept>
#include <string>

namespace dts {

// Bad user input: unknown flags, malformed files, inconsistent configs.
// The CLI maps this to exit code 1; other exceptions mean a runtime failure
// and map to exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dts

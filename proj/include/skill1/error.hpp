#pragma once

#include <stdexcept>
#include <string>

namespace skill1 {

// Invalid or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything that goes wrong once a run is underway (corrupt files, NaN
// parameters, library invariant violations). CLI exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skill1

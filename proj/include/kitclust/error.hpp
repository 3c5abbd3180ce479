#pragma once

#include <stdexcept>
#include <string>

namespace kitclust {

// Malformed or inconsistent input data. CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameters that cannot be realized (infeasible synth targets, a window
// whose distance matrix exceeds the memory budget). CLI exit code 2.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kitclust

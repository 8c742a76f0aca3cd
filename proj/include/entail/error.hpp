#pragma once

#include <stdexcept>
#include <string>

namespace entail {

// Thrown for contract violations on user-supplied data (bad labels, infeasible
// batch specs, malformed files). Internal invariants use assert().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace entail

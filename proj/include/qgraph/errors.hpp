#pragma once

#include <stdexcept>
#include <string>

namespace qgraph {

// Input or structural constraint violated (bad graph, non-unitary matrix,
// out-of-range parameter). The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not deliver its guarantee (branch matching
// failed, root not bracketed, residual too large). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qgraph

#pragma once

#include <stdexcept>
#include <string>

namespace qsim {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Adaptive refinement exhausted its budget without meeting tolerance and
// without recognizing a divergent endpoint singularity.
class NonconvergentQuadrature : public std::runtime_error {
 public:
  explicit NonconvergentQuadrature(const std::string& what) : std::runtime_error(what) {}
};

// A root bracket with the required sign change could not be established.
class BracketFailure : public std::runtime_error {
 public:
  explicit BracketFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qsim

#ifndef OIM_ERRORS_HPP_
#define OIM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace oim {

// Thrown when a vector with L2 norm below the zero-norm guard (1e-12)
// would have to be normalized.
class ZeroNormError : public std::runtime_error {
 public:
  explicit ZeroNormError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a matching probability that must be strictly positive
// (e.g. the target-class probability of a loss) is exactly zero.
class DegenerateProbabilityError : public std::runtime_error {
 public:
  explicit DegenerateProbabilityError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace oim

#endif  // OIM_ERRORS_HPP_

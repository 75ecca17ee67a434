#ifndef OIM_GRADCHECK_HPP_
#define OIM_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oim {

struct GradCheckOptions {
  std::size_t oim_cases = 100;
  std::size_t composite_cases = 20;
  std::size_t classifier_cases = 20;
  double fd_step = 1e-6;
  double oim_tolerance = 1e-6;
  double composite_tolerance = 1e-5;
  double classifier_tolerance = 1e-6;
  std::uint64_t seed = 7;
  // test hook: offset added to the first analytic gradient entry, so a
  // deliberately wrong gradient demonstrably fails the check
  double corrupt = 0.0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t cases = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  bool all_passed() const;
};

// Compares every analytic gradient against central finite differences of
// the corresponding loss over randomized configurations.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace oim

#endif  // OIM_GRADCHECK_HPP_

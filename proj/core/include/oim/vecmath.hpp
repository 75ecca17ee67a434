#ifndef OIM_VECMATH_HPP_
#define OIM_VECMATH_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace oim {

using Vec = std::vector<double>;

// Norms below this threshold are treated as exact cancellation; dividing by
// them is an error, never a silent operation.
inline constexpr double kZeroNormEps = 1e-12;

// Tolerance for the unit-norm invariant of stored feature vectors.
inline constexpr double kUnitNormTol = 1e-9;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// v <- v / ||v||. Throws ZeroNormError if ||v|| < kZeroNormEps.
void normalize(Vec& v);
Vec normalized(Vec v);

// y += scale * x
void axpy(double scale, std::span<const double> x, Vec& y);

bool is_unit(std::span<const double> v, double tol = kUnitNormTol);
bool all_finite(std::span<const double> v);

}  // namespace oim

#endif  // OIM_VECMATH_HPP_

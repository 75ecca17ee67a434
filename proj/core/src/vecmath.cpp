#include "oim/vecmath.hpp"

#include <cmath>
#include <stdexcept>

#include "oim/errors.hpp"

namespace oim {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: size mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) {
  return std::sqrt(dot(v, v));
}

void normalize(Vec& v) {
  const double n = l2_norm(v);
  if (n < kZeroNormEps) {
    throw ZeroNormError("normalize: vector norm below 1e-12");
  }
  for (double& x : v) x /= n;
}

Vec normalized(Vec v) {
  normalize(v);
  return v;
}

void axpy(double scale, std::span<const double> x, Vec& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: size mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

bool is_unit(std::span<const double> v, double tol) {
  return std::fabs(l2_norm(v) - 1.0) <= tol;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace oim

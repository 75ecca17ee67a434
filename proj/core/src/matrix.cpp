#include "oim/matrix.hpp"

#include <stdexcept>

namespace oim {

Vec matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw std::invalid_argument("matvec: dimension mismatch");
  }
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    const double* row = m.data().data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec matvec_transposed(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.rows()) {
    throw std::invalid_argument("matvec_transposed: dimension mismatch");
  }
  Vec y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.data().data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += row[c] * x[r];
  }
  return y;
}

void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v,
               double scale) {
  if (u.size() != m.rows() || v.size() != m.cols()) {
    throw std::invalid_argument("add_outer: dimension mismatch");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.data().data() + r * m.cols();
    const double su = scale * u[r];
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += su * v[c];
  }
}

}  // namespace oim

#ifndef OIM_MATRIX_HPP_
#define OIM_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "oim/vecmath.hpp"

namespace oim {

// Dense row-major matrix of doubles. Just enough linear algebra for the
// embedding projection and the classifier baseline.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols_, cols_);
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// m * x
Vec matvec(const Matrix& m, std::span<const double> x);
// m^T * x
Vec matvec_transposed(const Matrix& m, std::span<const double> x);
// m += scale * u v^T
void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v,
               double scale = 1.0);

}  // namespace oim

#endif  // OIM_MATRIX_HPP_

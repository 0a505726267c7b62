#include "loster/matrix.hpp"

#include <cmath>
#include <utility>

namespace loster {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: " + std::to_string(values_.size()) + " values for " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return DenseMatrix(1, n, std::move(values));
}

DenseMatrix DenseMatrix::col_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return DenseMatrix(n, 1, std::move(values));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::is_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void DenseMatrix::fill(double value) {
  for (double& v : values_) v = value;
}

std::string shape_string(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::size_t argmax(const double* row, std::size_t len) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < len; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace loster

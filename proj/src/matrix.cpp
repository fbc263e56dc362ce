#include "transdet/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace transdet {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> v) {
  if (v.size() != rows_) throw std::invalid_argument("Matrix::set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

FeatureGrid::FeatureGrid(std::size_t height, std::size_t width, std::size_t depth, double fill)
    : height_(height), width_(width), depth_(depth), data_(height * width * depth, fill) {
  if (height == 0 || width == 0 || depth == 0) {
    throw std::invalid_argument("FeatureGrid: height, width and depth must be >= 1");
  }
}

bool FeatureGrid::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace transdet

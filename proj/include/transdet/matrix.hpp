#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace transdet {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> v);

  bool all_finite() const noexcept;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// H x W grid of D-dimensional cell vectors, stored cell-major. Used both for
/// raw observations and for backbone activations.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t height, std::size_t width, std::size_t depth, double fill = 0.0);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t cell_count() const noexcept { return height_ * width_; }

  std::span<double> cell(std::size_t index) { return {data_.data() + index * depth_, depth_}; }
  std::span<const double> cell(std::size_t index) const {
    return {data_.data() + index * depth_, depth_};
  }
  std::span<double> cell(std::size_t i, std::size_t j) { return cell(i * width_ + j); }
  std::span<const double> cell(std::size_t i, std::size_t j) const { return cell(i * width_ + j); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  bool operator==(const FeatureGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t depth_ = 0;
  std::vector<double> data_;
};

}  // namespace transdet

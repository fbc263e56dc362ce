#pragma once

// Per-proposal score matrices. Rows are classes with the background class in
// the LAST row; columns are proposals.

#include <cstddef>

#include "transdet/matrix.hpp"

namespace transdet {

/// Column-stochastic (classes x proposals) matrix: every column nonnegative
/// and summing to 1 within 1e-9.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  /// Throws std::invalid_argument when a column is not a probability vector.
  explicit ScoreMatrix(Matrix probabilities);

  static ScoreMatrix from_logits(const Matrix& logits);

  const Matrix& values() const noexcept { return values_; }
  std::size_t classes() const noexcept { return values_.rows(); }
  std::size_t proposals() const noexcept { return values_.cols(); }
  double operator()(std::size_t c, std::size_t k) const { return values_(c, k); }

 private:
  Matrix values_;
};

/// Pseudo labels mined for a ROL classifier: every column is all-zero or has
/// exactly one nonzero entry in (0, 1].
class PseudoLabelMatrix {
 public:
  PseudoLabelMatrix() = default;
  PseudoLabelMatrix(std::size_t classes, std::size_t proposals) : values_(classes, proposals) {}
  /// Throws std::invalid_argument if the column invariant is violated.
  explicit PseudoLabelMatrix(Matrix values);

  /// Replaces column k with a single label. weight must lie in (0, 1].
  void assign(std::size_t k, std::size_t cls, double weight);
  void clear_column(std::size_t k);

  const Matrix& values() const noexcept { return values_; }
  std::size_t classes() const noexcept { return values_.rows(); }
  std::size_t proposals() const noexcept { return values_.cols(); }
  double operator()(std::size_t c, std::size_t k) const { return values_(c, k); }

  bool column_is_zero(std::size_t k) const;
  /// Class index of the nonzero entry of column k; classes() when zero.
  std::size_t label_of(std::size_t k) const;
  double weight_of(std::size_t k) const;

  bool operator==(const PseudoLabelMatrix&) const = default;

 private:
  Matrix values_;
};

}  // namespace transdet

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace transdet {

/// Image-level class indicator over the object classes of one domain.
class ImageLabel {
 public:
  ImageLabel() = default;
  explicit ImageLabel(std::size_t classes) : present_(classes, 0) {}
  ImageLabel(std::initializer_list<int> indicator);

  std::size_t size() const noexcept { return present_.size(); }
  bool present(std::size_t c) const { return present_.at(c) != 0; }
  void set(std::size_t c, bool on = true) { present_.at(c) = on ? 1 : 0; }
  bool any() const noexcept;
  double value(std::size_t c) const { return present(c) ? 1.0 : 0.0; }

  bool operator==(const ImageLabel&) const = default;

 private:
  std::vector<std::uint8_t> present_;
};

}  // namespace transdet

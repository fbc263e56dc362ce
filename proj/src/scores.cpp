#include "transdet/scores.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "transdet/numerics.hpp"

namespace transdet {

ScoreMatrix::ScoreMatrix(Matrix probabilities) : values_(std::move(probabilities)) {
  for (std::size_t k = 0; k < values_.cols(); ++k) {
    double sum = 0.0;
    for (std::size_t c = 0; c < values_.rows(); ++c) {
      const double p = values_(c, k);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("ScoreMatrix: column " + std::to_string(k) +
                                    " has a negative or non-finite entry");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("ScoreMatrix: column " + std::to_string(k) +
                                  " does not sum to 1");
    }
  }
}

ScoreMatrix ScoreMatrix::from_logits(const Matrix& logits) {
  return ScoreMatrix(softmax_columns(logits));
}

PseudoLabelMatrix::PseudoLabelMatrix(Matrix values) : values_(std::move(values)) {
  for (std::size_t k = 0; k < values_.cols(); ++k) {
    std::size_t nonzero = 0;
    for (std::size_t c = 0; c < values_.rows(); ++c) {
      const double w = values_(c, k);
      if (w < 0.0 || !std::isfinite(w)) {
        throw std::invalid_argument("PseudoLabelMatrix: negative or non-finite entry in column " +
                                    std::to_string(k));
      }
      if (w > 1.0) {
        throw std::invalid_argument("PseudoLabelMatrix: entry above 1 in column " +
                                    std::to_string(k));
      }
      if (w > 0.0) ++nonzero;
    }
    if (nonzero > 1) {
      throw std::invalid_argument("PseudoLabelMatrix: column " + std::to_string(k) +
                                  " carries more than one label");
    }
  }
}

void PseudoLabelMatrix::assign(std::size_t k, std::size_t cls, double weight) {
  if (!(weight > 0.0 && weight <= 1.0)) {
    throw std::invalid_argument("PseudoLabelMatrix::assign: weight must lie in (0, 1]");
  }
  clear_column(k);
  values_(cls, k) = weight;
}

void PseudoLabelMatrix::clear_column(std::size_t k) {
  for (std::size_t c = 0; c < values_.rows(); ++c) values_(c, k) = 0.0;
}

bool PseudoLabelMatrix::column_is_zero(std::size_t k) const {
  return label_of(k) == values_.rows();
}

std::size_t PseudoLabelMatrix::label_of(std::size_t k) const {
  for (std::size_t c = 0; c < values_.rows(); ++c) {
    if (values_(c, k) > 0.0) return c;
  }
  return values_.rows();
}

double PseudoLabelMatrix::weight_of(std::size_t k) const {
  const std::size_t c = label_of(k);
  return c == values_.rows() ? 0.0 : values_(c, k);
}

}  // namespace transdet

namespace transdet {

ImageLabel::ImageLabel(std::initializer_list<int> indicator) {
  for (int v : indicator) {
    if (v != 0 && v != 1) throw std::invalid_argument("ImageLabel: entries must be 0 or 1");
    present_.push_back(static_cast<std::uint8_t>(v));
  }
}

bool ImageLabel::any() const noexcept {
  for (auto v : present_) {
    if (v != 0) return true;
  }
  return false;
}

}  // namespace transdet

#pragma once

// Value-and-gradient losses for both transfer stages. Every gradient is
// closed-form; tests check each one against central differences.
//
// Matrix layout follows scores.hpp: rows are classes (background last),
// columns are proposals.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "transdet/geometry.hpp"
#include "transdet/matrix.hpp"
#include "transdet/scores.hpp"

namespace transdet {

struct LossWeights {
  // low-shot stage
  double lambda_main = 1.0;
  double lambda_bd = 0.5;
  double lambda_sdk = 0.5;
  // weakly supervised stage
  double lambda_wstd_sdk = 150.0;
  double lambda_wstd_rol = 50.0;

  /// Throws ConfigError naming the first negative or non-finite weight.
  void validate() const;
};

/// H x W indicator of background cells (true = background).
class BackgroundMask {
 public:
  BackgroundMask() = default;
  BackgroundMask(std::size_t height, std::size_t width, bool fill = true)
      : height_(height), width_(width), cells_(height * width, fill ? 1 : 0) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool background(std::size_t i, std::size_t j) const { return cells_[i * width_ + j] != 0; }
  bool background(std::size_t cell) const { return cells_[cell] != 0; }
  void set(std::size_t i, std::size_t j, bool bg) { cells_[i * width_ + j] = bg ? 1 : 0; }
  std::size_t background_count() const noexcept;

  bool operator==(const BackgroundMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct GridLoss {
  double value = 0.0;
  FeatureGrid grad;
};

struct MatrixLoss {
  double value = 0.0;
  Matrix grad;
};

struct VectorLoss {
  double value = 0.0;
  std::vector<double> grad;
};

/// A cell is background iff its center lies inside none of `gt_boxes`.
BackgroundMask bd_mask(std::size_t grid_height, std::size_t grid_width,
                       std::span<const BBox> gt_boxes);

/// Background depression: sum of squared activations over background cells
/// (all channels). Gradient 2*F on background cells, exactly 0 elsewhere.
GridLoss bd_loss(const FeatureGrid& grid, const BackgroundMask& mask);

/// Distillation cross-entropy -sum_k sum_c w(c,k) t(c,k) log softmax(z)(c,k)
/// with w = 1, or w = t when `weighted`.
MatrixLoss sdk_loss(const ScoreMatrix& teacher, const Matrix& student_logits, bool weighted);

/// sigmoid(sum_k logits(c, k)) for each object row c (background row excluded).
std::vector<double> image_score(const Matrix& classifier_logits);

/// Binary cross-entropy over object classes; p is clamped to [1e-12, 1 - 1e-12].
VectorLoss multilabel_loss(std::span<const double> p_img, const ImageLabel& y_img);

/// multilabel_loss(image_score(logits), y) differentiated straight through to
/// the logits, evaluated in log-sigmoid form.
MatrixLoss image_multilabel_loss(const Matrix& classifier_logits, const ImageLabel& y_img);

/// -sum_k sum_c pseudo(c,k) log softmax(z)(c,k). Zero pseudo columns add nothing.
MatrixLoss rol_classifier_loss(const Matrix& student_logits, const PseudoLabelMatrix& pseudo);

/// Hard-label softmax cross-entropy summed over proposals; labels[k] is a row index.
MatrixLoss proposal_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

double rol_total(std::span<const double> per_classifier_losses);
double lstd_total(double main, double bd, double sdk, const LossWeights& w);
double wstd_total(double sdk, double rol, const LossWeights& w);

}  // namespace transdet

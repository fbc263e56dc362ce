#include "transdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "transdet/errors.hpp"
#include "transdet/kernels.hpp"
#include "transdet/numerics.hpp"

namespace transdet {

namespace {

constexpr double kProbClamp = 1e-12;

void check_weight(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ConfigError(std::string("loss weight '") + name + "' must be finite and >= 0");
  }
}

// -sum a(c,k) log softmax(z_k)(c); gradient s * sum_c a - a, column by column.
MatrixLoss weighted_cross_entropy(const Matrix& targets, const Matrix& logits) {
  MatrixLoss out{0.0, Matrix(logits.rows(), logits.cols())};
  std::vector<double> z(logits.rows());
  for (std::size_t k = 0; k < logits.cols(); ++k) {
    double mass = 0.0;
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      z[c] = logits(c, k);
      mass += targets(c, k);
    }
    if (mass == 0.0) continue;
    const double lse = log_sum_exp(z);
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      const double a = targets(c, k);
      const double log_p = z[c] - lse;
      if (a != 0.0) out.value -= a * log_p;
      out.grad(c, k) = std::exp(log_p) * mass - a;
    }
  }
  return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

void LossWeights::validate() const {
  check_weight(lambda_main, "lambda_main");
  check_weight(lambda_bd, "lambda_bd");
  check_weight(lambda_sdk, "lambda_sdk");
  check_weight(lambda_wstd_sdk, "lambda_wstd_sdk");
  check_weight(lambda_wstd_rol, "lambda_wstd_rol");
}

std::size_t BackgroundMask::background_count() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

BackgroundMask bd_mask(std::size_t grid_height, std::size_t grid_width,
                       std::span<const BBox> gt_boxes) {
  if (grid_height == 0 || grid_width == 0) {
    throw std::invalid_argument("bd_mask: grid dimensions must be >= 1");
  }
  BackgroundMask mask(grid_height, grid_width, true);
  for (std::size_t i = 0; i < grid_height; ++i) {
    for (std::size_t j = 0; j < grid_width; ++j) {
      for (const BBox& b : gt_boxes) {
        if (cell_in_box(b, i, j, grid_height, grid_width)) {
          mask.set(i, j, false);
          break;
        }
      }
    }
  }
  return mask;
}

GridLoss bd_loss(const FeatureGrid& grid, const BackgroundMask& mask) {
  if (grid.height() != mask.height() || grid.width() != mask.width()) {
    throw std::invalid_argument("bd_loss: mask dimensions do not match the feature grid");
  }
  GridLoss out{0.0, FeatureGrid(grid.height(), grid.width(), grid.depth())};
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    if (!mask.background(cell)) continue;
    const auto f = grid.cell(cell);
    out.value += kernels::sum_squares(f);
    kernels::axpy(2.0, f, out.grad.cell(cell));
  }
  return out;
}

MatrixLoss sdk_loss(const ScoreMatrix& teacher, const Matrix& student_logits, bool weighted) {
  require_same_shape(teacher.values(), student_logits, "sdk_loss");
  if (!weighted) return weighted_cross_entropy(teacher.values(), student_logits);
  Matrix targets = teacher.values();
  for (double& v : targets.values()) v *= v;
  return weighted_cross_entropy(targets, student_logits);
}

std::vector<double> image_score(const Matrix& classifier_logits) {
  if (classifier_logits.cols() == 0) throw std::invalid_argument("image_score: no proposals");
  if (classifier_logits.rows() < 2) {
    throw std::invalid_argument("image_score: need at least one object row plus background");
  }
  if (!classifier_logits.all_finite()) throw std::domain_error("image_score: non-finite logits");
  const std::size_t objects = classifier_logits.rows() - 1;
  std::vector<double> p(objects);
  for (std::size_t c = 0; c < objects; ++c) {
    double s = 0.0;
    for (double v : classifier_logits.row(c)) s += v;
    p[c] = sigmoid(s);
  }
  return p;
}

VectorLoss multilabel_loss(std::span<const double> p_img, const ImageLabel& y_img) {
  if (p_img.size() != y_img.size()) {
    throw std::invalid_argument("multilabel_loss: score and label lengths differ");
  }
  VectorLoss out{0.0, std::vector<double>(p_img.size())};
  for (std::size_t c = 0; c < p_img.size(); ++c) {
    const double p = std::clamp(p_img[c], kProbClamp, 1.0 - kProbClamp);
    const double y = y_img.value(c);
    out.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad[c] = -y / p + (1.0 - y) / (1.0 - p);
  }
  return out;
}

MatrixLoss image_multilabel_loss(const Matrix& classifier_logits, const ImageLabel& y_img) {
  if (classifier_logits.cols() == 0) {
    throw std::invalid_argument("image_multilabel_loss: no proposals");
  }
  if (classifier_logits.rows() != y_img.size() + 1) {
    throw std::invalid_argument("image_multilabel_loss: label length must equal object rows");
  }
  MatrixLoss out{0.0, Matrix(classifier_logits.rows(), classifier_logits.cols())};
  for (std::size_t c = 0; c < y_img.size(); ++c) {
    double s = 0.0;
    for (double v : classifier_logits.row(c)) s += v;
    const double y = y_img.value(c);
    out.value += y * softplus(-s) + (1.0 - y) * softplus(s);
    const double g = sigmoid(s) - y;
    for (double& v : out.grad.row(c)) v = g;
  }
  return out;
}

MatrixLoss rol_classifier_loss(const Matrix& student_logits, const PseudoLabelMatrix& pseudo) {
  require_same_shape(pseudo.values(), student_logits, "rol_classifier_loss");
  for (double w : pseudo.values().values()) {
    if (w < 0.0) throw std::invalid_argument("rol_classifier_loss: negative pseudo label");
  }
  return weighted_cross_entropy(pseudo.values(), student_logits);
}

MatrixLoss proposal_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.cols()) {
    throw std::invalid_argument("proposal_cross_entropy: one label per proposal required");
  }
  Matrix targets(logits.rows(), logits.cols());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] >= logits.rows()) {
      throw std::invalid_argument("proposal_cross_entropy: label out of range");
    }
    targets(labels[k], k) = 1.0;
  }
  return weighted_cross_entropy(targets, logits);
}

double rol_total(std::span<const double> per_classifier_losses) {
  if (per_classifier_losses.empty()) throw std::invalid_argument("rol_total: empty loss list");
  double s = 0.0;
  for (double v : per_classifier_losses) s += v;
  return s;
}

double lstd_total(double main, double bd, double sdk, const LossWeights& w) {
  return w.lambda_main * main + w.lambda_bd * bd + w.lambda_sdk * sdk;
}

double wstd_total(double sdk, double rol, const LossWeights& w) {
  return w.lambda_wstd_sdk * sdk + w.lambda_wstd_rol * rol;
}

}  // namespace transdet

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "transdet/matrix.hpp"

namespace transdet {

/// Throws std::domain_error on non-finite input.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

/// Column-wise softmax of a (classes x proposals) logit matrix.
Matrix softmax_columns(const Matrix& logits);

double sigmoid(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  bool passed = true;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Compares `analytic_grad` against central differences of `f` at `point`.
/// Per-coordinate error is |a - n| / max(1, |a| + |n|); passed iff the max is
/// <= tolerance. Throws std::domain_error naming the coordinate if f returns
/// a non-finite value.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic_grad,
                           std::span<const double> point, double step = 1e-5,
                           double tolerance = 1e-6);

}  // namespace transdet

#include "transdet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace transdet {
namespace {
void require_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::domain_error("softmax: invalid (non-finite) logits");
  }
}
}  // namespace

double log_sum_exp(std::span<const double> logits) {
  require_finite(logits);
  if (logits.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double x : logits) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  require_finite(logits);
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t k = 0; k < logits.cols(); ++k) out.set_column(k, softmax(logits.column(k)));
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const double> analytic_grad,
                           std::span<const double> point, double step, double tolerance) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");
  if (analytic_grad.size() != point.size()) {
    throw std::invalid_argument("grad_check: gradient and point differ in length");
  }
  std::vector<double> x(point.begin(), point.end());
  GradCheckReport report;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("grad_check: non-finite function value at coordinate " +
                              std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic_grad[i];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_coordinate = i;
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace transdet

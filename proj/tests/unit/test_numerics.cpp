#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "transdet/numerics.hpp"

using namespace transdet;

TEST(Softmax, SymmetricPair) {
  const auto p = softmax(std::vector<double>{0, 0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, ConstantLogitsAreUniform) {
  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    const auto p = softmax(std::vector<double>{c, c, c});
    for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax(std::vector<double>{1000, 0});
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(log_sum_exp(std::vector<double>{1000, 999})));
}

TEST(Softmax, ShiftInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(5), shifted(5);
    const double s = n(rng) * 10;
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = n(rng);
      shifted[i] = z[i] + s;
    }
    const auto a = softmax(z), b = softmax(shifted);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{0, NAN}), std::domain_error);
  EXPECT_THROW(softmax(std::vector<double>{INFINITY, 0}), std::domain_error);
}

TEST(Softmax, LogSoftmaxMatchesLog) {
  const std::vector<double> z{0.3, -1.2, 2.0};
  const auto p = softmax(z), lp = log_softmax(z);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(std::log(p[i]), lp[i], 1e-14);
}

TEST(Sigmoid, Basics) {
  EXPECT_DOUBLE_EQ(sigmoid(0), 0.5);
  for (double x : {0.1, 2.0, 37.0}) EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
  EXPECT_GE(sigmoid(-1000), 0.0);
  EXPECT_LT(sigmoid(-1000), 1e-300);
  EXPECT_NEAR(softplus(1000), 1000, 1e-12);
  EXPECT_NEAR(softplus(0), std::log(2.0), 1e-15);
}

TEST(GradCheck, CorrectGradientPasses) {
  const auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> point{3.0}, grad{6.0};
  const auto r = grad_check(f, grad, point);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(GradCheck, WrongGradientFailsWithExpectedError) {
  const auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> point{3.0}, grad{5.0};
  const auto r = grad_check(f, grad, point);
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_relative_error, 1.0 / 11.0, 1e-8);
  EXPECT_EQ(r.worst_coordinate, 0u);
}

TEST(GradCheck, SoftmaxCrossEntropyAtRandomLogits) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(6);
    for (double& v : z) v = n(rng);
    const std::size_t label = static_cast<std::size_t>(t) % z.size();
    auto grad = softmax(z);
    grad[label] -= 1.0;
    const auto f = [label](std::span<const double> x) { return -log_softmax(x)[label]; };
    EXPECT_TRUE(grad_check(f, grad, z, 1e-5, 1e-6).passed);
  }
}

TEST(GradCheck, RejectsBadArguments) {
  const auto f = [](std::span<const double> x) { return x[0]; };
  const std::vector<double> one{1.0}, two{1.0, 2.0};
  EXPECT_THROW(grad_check(f, two, one), std::invalid_argument);
  EXPECT_THROW(grad_check(f, one, one, 0.0), std::invalid_argument);
  const auto bad = [](std::span<const double>) { return NAN; };
  EXPECT_THROW(grad_check(bad, one, one), std::domain_error);
}

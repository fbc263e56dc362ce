#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "transdet/errors.hpp"
#include "transdet/gradcheck.hpp"
#include "transdet/losses.hpp"
#include "transdet/numerics.hpp"

using namespace transdet;

namespace {
const double kLn2 = std::log(2.0);

Matrix random_logits(Rng& rng, std::size_t c, std::size_t k) {
  std::normal_distribution<double> n(0, 2);
  Matrix m(c, k);
  for (double& v : m.values()) v = n(rng);
  return m;
}
}  // namespace

TEST(BdMask, FullCoverAndEmpty) {
  const auto full = bd_mask(2, 2, std::vector<BBox>{BBox(0, 0, 1, 1)});
  EXPECT_EQ(full.background_count(), 0u);
  const auto none = bd_mask(2, 2, {});
  EXPECT_EQ(none.background_count(), 4u);
}

TEST(BdMask, RightColumnIsBackground) {
  const auto m = bd_mask(2, 2, std::vector<BBox>{BBox(0, 0, 0.5, 1)});
  EXPECT_FALSE(m.background(0, 0));
  EXPECT_FALSE(m.background(1, 0));
  EXPECT_TRUE(m.background(0, 1));
  EXPECT_TRUE(m.background(1, 1));
}

TEST(BdLoss, Examples) {
  const auto right = bd_mask(2, 2, std::vector<BBox>{BBox(0, 0, 0.5, 1)});
  EXPECT_DOUBLE_EQ(bd_loss(FeatureGrid(2, 2, 1, 0.0), right).value, 0.0);
  EXPECT_DOUBLE_EQ(bd_loss(FeatureGrid(2, 2, 1, 1.0), right).value, 2.0);
  const auto all_fg = BackgroundMask(2, 2, false);
  const auto l = bd_loss(FeatureGrid(2, 2, 3, 4.0), all_fg);
  EXPECT_DOUBLE_EQ(l.value, 0.0);
  for (double g : l.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(BdLoss, GradientIsExactlyZeroOnForeground) {
  Rng rng(2);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 50; ++t) {
    FeatureGrid g(4, 5, 3);
    for (double& v : g.values()) v = n(rng);
    const auto mask = bd_mask(4, 5, std::vector<BBox>{oracle::random_box(rng, 0.2)});
    const auto l = bd_loss(g, mask);
    for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
      for (std::size_t d = 0; d < 3; ++d) {
        if (!mask.background(cell)) {
          EXPECT_EQ(l.grad.cell(cell)[d], 0.0);
        } else {
          EXPECT_DOUBLE_EQ(l.grad.cell(cell)[d], 2.0 * g.cell(cell)[d]);
        }
      }
    }
  }
}

TEST(SdkLoss, Examples) {
  const ScoreMatrix onehot(Matrix::from_rows({{1.0}, {0.0}}));
  EXPECT_NEAR(sdk_loss(onehot, Matrix::from_rows({{800.0}, {0.0}}), false).value, 0.0, 1e-12);
  const ScoreMatrix half(Matrix::from_rows({{0.5}, {0.5}}));
  const Matrix even = Matrix::from_rows({{0.0}, {0.0}});
  EXPECT_NEAR(sdk_loss(half, even, false).value, kLn2, 1e-12);
  EXPECT_NEAR(sdk_loss(half, even, true).value, 0.5 * kLn2, 1e-12);
}

TEST(SdkLoss, GradientVanishesWhenStudentMatchesTeacher) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Matrix z = random_logits(rng, 4, 5);
    const auto teacher = ScoreMatrix::from_logits(z);
    const auto l = sdk_loss(teacher, z, false);
    double norm = 0.0;
    for (double g : l.grad.values()) norm += g * g;
    EXPECT_LT(std::sqrt(norm), 1e-8);
  }
}

TEST(SdkLoss, ShapeMismatchThrows) {
  const ScoreMatrix half(Matrix::from_rows({{0.5}, {0.5}}));
  EXPECT_THROW(sdk_loss(half, Matrix(3, 1), false), std::invalid_argument);
}

TEST(ImageScore, Examples) {
  for (double p : image_score(Matrix(4, 3))) EXPECT_DOUBLE_EQ(p, 0.5);
  EXPECT_NEAR(image_score(Matrix::from_rows({{2.5}, {0.0}}))[0], sigmoid(2.5), 1e-15);
  const auto p = image_score(Matrix::from_rows({{1.0, 2.0}, {0.0, 0.0}}));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0], sigmoid(3.0), 1e-15);
}

TEST(MultilabelLoss, Examples) {
  EXPECT_NEAR(multilabel_loss(std::vector<double>{1.0, 0.0}, ImageLabel{1, 0}).value, 0.0, 1e-9);
  std::vector<double> half(20, 0.5);
  EXPECT_NEAR(multilabel_loss(half, ImageLabel(20)).value, 20 * kLn2, 1e-12);
  EXPECT_NEAR(multilabel_loss(std::vector<double>{0.5}, ImageLabel{1}).value, kLn2, 1e-12);
}

TEST(MultilabelLoss, LogitFormMatchesComposition) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Matrix z = random_logits(rng, 4, 3);
    const ImageLabel y{1, 0, 1};
    EXPECT_NEAR(image_multilabel_loss(z, y).value, multilabel_loss(image_score(z), y).value, 1e-9);
  }
}

TEST(MultilabelLoss, LeavesBackgroundRowUntouched) {
  Rng rng(8);
  const Matrix z = random_logits(rng, 3, 4);
  const auto l = image_multilabel_loss(z, ImageLabel{0, 1});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(l.grad(2, k), 0.0);
}

TEST(RolClassifierLoss, Examples) {
  PseudoLabelMatrix zero(3, 2);
  const Matrix z = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const auto l0 = rol_classifier_loss(z, zero);
  EXPECT_EQ(l0.value, 0.0);
  for (double g : l0.grad.values()) EXPECT_EQ(g, 0.0);

  PseudoLabelMatrix one(2, 1);
  one.assign(0, 0, 0.8);
  EXPECT_NEAR(rol_classifier_loss(Matrix(2, 1), one).value, 0.8 * kLn2, 1e-12);

  PseudoLabelMatrix sure(2, 1);
  sure.assign(0, 1, 1.0);
  EXPECT_NEAR(rol_classifier_loss(Matrix::from_rows({{0.0}, {900.0}}), sure).value, 0.0, 1e-12);
}

TEST(RolClassifierLoss, PermutationInvariant) {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const std::size_t c = 4, k = 6;
    const Matrix z = random_logits(rng, c, k);
    PseudoLabelMatrix p(c, k);
    for (std::size_t j = 0; j < k; j += 2) p.assign(j, j % c, 0.3 + 0.1 * static_cast<double>(j));
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix zp(c, k);
    PseudoLabelMatrix pp(c, k);
    for (std::size_t j = 0; j < k; ++j) {
      zp.set_column(j, z.column(perm[j]));
      if (!p.column_is_zero(perm[j])) pp.assign(j, p.label_of(perm[j]), p.weight_of(perm[j]));
    }
    EXPECT_NEAR(rol_classifier_loss(z, p).value, rol_classifier_loss(zp, pp).value, 1e-12);
  }
}

TEST(ProposalCrossEntropy, MatchesLogSoftmax) {
  const Matrix z = Matrix::from_rows({{0.0, 1.0}, {0.0, -1.0}});
  const std::vector<std::size_t> labels{0, 1};
  const double expected = kLn2 - log_softmax(std::vector<double>{1.0, -1.0})[1];
  EXPECT_NEAR(proposal_cross_entropy(z, labels).value, expected, 1e-12);
  const std::vector<std::size_t> bad{0, 2};
  EXPECT_THROW(proposal_cross_entropy(z, bad), std::invalid_argument);
}

TEST(Totals, Examples) {
  EXPECT_DOUBLE_EQ(rol_total(std::vector<double>{1.0}), 1.0);
  EXPECT_DOUBLE_EQ(rol_total(std::vector<double>{0.5, 0.25, 0.25}), 1.0);
  EXPECT_DOUBLE_EQ(rol_total(std::vector<double>{0, 0, 0}), 0.0);

  LossWeights w{1.0, 0.5, 0.5, 150.0, 50.0};
  EXPECT_DOUBLE_EQ(lstd_total(1, 2, 3, w), 3.5);
  EXPECT_DOUBLE_EQ(lstd_total(1, 2, 3, LossWeights{0, 0, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(lstd_total(1.25, 2, 3, LossWeights{1, 0, 0, 0, 0}), 1.25);

  EXPECT_DOUBLE_EQ(wstd_total(1, 1, w), 200.0);
  LossWeights no_sdk = w;
  no_sdk.lambda_wstd_sdk = 0.0;
  EXPECT_DOUBLE_EQ(wstd_total(7, 2, no_sdk), 100.0);
  EXPECT_DOUBLE_EQ(wstd_total(0, 0, w), 0.0);
}

TEST(Totals, LinearInEachTerm) {
  const LossWeights w{0.7, 0.3, 1.9, 5.0, 2.0};
  EXPECT_NEAR(lstd_total(2, 4, 6, w), 2 * lstd_total(1, 2, 3, w), 1e-12);
  EXPECT_NEAR(lstd_total(1 + 2, 1 + 3, 1 + 4, w), lstd_total(1, 1, 1, w) + lstd_total(2, 3, 4, w),
              1e-12);
  EXPECT_NEAR(wstd_total(3, 4, w), wstd_total(3, 0, w) + wstd_total(0, 4, w), 1e-12);
}

TEST(LossWeights, ValidateRejectsNegative) {
  LossWeights w;
  w.lambda_bd = -1;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Losses, NonNegativeOnRandomInputs) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const Matrix z = random_logits(rng, 5, 4);
    EXPECT_GE(sdk_loss(oracle::random_scores(rng, 5, 4), z, t % 2 == 0).value, 0.0);
    EXPECT_GE(image_multilabel_loss(z, ImageLabel{1, 0, 0, 1}).value, 0.0);
    PseudoLabelMatrix p(5, 4);
    p.assign(1, 4, 0.5);
    EXPECT_GE(rol_classifier_loss(z, p).value, 0.0);
  }
}

TEST(Losses, GradientsPassCentralDifferences) {
  GradSuiteConfig cfg;
  cfg.instances = 100;
  for (const char* name : {"bd", "sdk", "sdk_weighted", "multilabel", "rol_classifier",
                           "proposal_ce"}) {
    const auto r = run_grad_suite(name, cfg);
    EXPECT_TRUE(r.passed) << name << " max error " << r.max_relative_error;
  }
}

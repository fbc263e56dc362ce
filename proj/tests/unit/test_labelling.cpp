#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "transdet/errors.hpp"
#include "transdet/labelling.hpp"

using namespace transdet;

namespace {

// Boxes A..D span the full height, so IoU is a 1-D interval ratio: A = [0, 0.4]
// and a shifted copy [b, b + 0.4] has IoU (0.4 - b) / (0.4 + b).
std::vector<BBox> strip_boxes() {
  const auto shifted = [](double b) { return BBox(b, 0, b + 0.4, 1); };
  return {shifted(0.0), shifted(0.1), shifted(6.0 / 35.0), shifted(0.36 / 1.1)};
}

ScoreMatrix strip_scores() {
  // One object class plus background; class 0 peaks at A with 0.8.
  return ScoreMatrix(Matrix::from_rows({{0.8, 0.5, 0.3, 0.1}, {0.2, 0.5, 0.7, 0.9}}));
}

const ROLConfig kCfg{};

}  // namespace

TEST(StripFixture, HasTheIntendedOverlaps) {
  const auto b = strip_boxes();
  EXPECT_NEAR(iou(b[0], b[1]), 0.6, 1e-12);
  EXPECT_NEAR(iou(b[0], b[2]), 0.4, 1e-12);
  EXPECT_NEAR(iou(b[0], b[3]), 0.1, 1e-12);
}

TEST(TopProposal, Examples) {
  EXPECT_EQ(top_proposal(ScoreMatrix(Matrix::from_rows({{0.1, 0.9, 0.3}, {0.9, 0.1, 0.7}})), 0),
            1u);
  EXPECT_EQ(top_proposal(ScoreMatrix(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}})), 0), 0u);
  EXPECT_EQ(top_proposal(ScoreMatrix(Matrix::from_rows({{0.01}, {0.99}})), 0), 0u);
  EXPECT_THROW(top_proposal(ScoreMatrix(Matrix::from_rows({{0.5}, {0.5}})), 1),
               std::invalid_argument);
}

TEST(MineSupport, StripInstance) {
  const auto p = mine_support(strip_scores(), strip_boxes(), ImageLabel{1}, kCfg);
  EXPECT_EQ(p.label_of(0), 0u);
  EXPECT_DOUBLE_EQ(p.weight_of(0), 0.8);
  EXPECT_EQ(p.label_of(1), 0u);
  EXPECT_DOUBLE_EQ(p.weight_of(1), 0.8);
  EXPECT_EQ(p.label_of(2), 1u);
  EXPECT_DOUBLE_EQ(p.weight_of(2), 0.8);
  EXPECT_TRUE(p.column_is_zero(3));
}

TEST(MineSupport, SingleProposal) {
  const ScoreMatrix s(Matrix::from_rows({{0.37}, {0.63}}));
  const std::vector<BBox> b{BBox(0.1, 0.1, 0.3, 0.3)};
  const auto p = mine_support(s, b, ImageLabel{1}, kCfg);
  EXPECT_EQ(p.label_of(0), 0u);
  EXPECT_DOUBLE_EQ(p.weight_of(0), 0.37);
  EXPECT_EQ(oicr_label(s, b, ImageLabel{1}, kCfg), p);
}

TEST(MineSupport, ConflictKeepsLargerWeight) {
  // Both classes peak at proposal 0, with scores 0.45 and 0.35.
  const ScoreMatrix s(Matrix::from_rows({{0.45, 0.1}, {0.35, 0.1}, {0.2, 0.8}}));
  const std::vector<BBox> b{BBox(0, 0, 0.3, 0.3), BBox(0.6, 0.6, 0.9, 0.9)};
  const auto p = mine_support(s, b, ImageLabel{1, 1}, kCfg);
  EXPECT_EQ(p.label_of(0), 0u);
  EXPECT_DOUBLE_EQ(p.weight_of(0), 0.45);
  EXPECT_TRUE(p.column_is_zero(1));
}

TEST(MineSupport, ShapeMismatchThrows) {
  const std::vector<BBox> three{BBox(0, 0, 1, 1), BBox(0, 0, 0.5, 0.5), BBox(0, 0, 0.2, 0.2)};
  EXPECT_THROW(mine_support(strip_scores(), three, ImageLabel{1}, kCfg), std::invalid_argument);
  EXPECT_THROW(mine_support(strip_scores(), strip_boxes(), ImageLabel{1, 0}, kCfg),
               std::invalid_argument);
}

TEST(OicrLabel, StripInstance) {
  const auto p = oicr_label(strip_scores(), strip_boxes(), ImageLabel{1}, kCfg);
  EXPECT_EQ(p.label_of(0), 0u);
  EXPECT_EQ(p.label_of(1), 0u);
  EXPECT_EQ(p.label_of(2), 1u);
  EXPECT_EQ(p.label_of(3), 1u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p.weight_of(k), 0.8);
}

TEST(OicrLabel, DisjointProposalsAllBackgroundButTop) {
  std::vector<BBox> b;
  for (int i = 0; i < 5; ++i) b.emplace_back(0.2 * i, 0, 0.2 * i + 0.1, 0.1);
  const ScoreMatrix s(Matrix::from_rows({{0.3, 0.6, 0.2, 0.1, 0.4}, {0.7, 0.4, 0.8, 0.9, 0.6}}));
  const auto p = oicr_label(s, b, ImageLabel{1}, kCfg);
  std::size_t objects = 0, background = 0;
  for (std::size_t k = 0; k < 5; ++k) (p.label_of(k) == 0 ? objects : background)++;
  EXPECT_EQ(objects, 1u);
  EXPECT_EQ(background, 4u);

  const auto r = mine_support(s, b, ImageLabel{1}, kCfg);
  EXPECT_EQ(r.label_of(1), 0u);
  for (std::size_t k : {0u, 2u, 3u, 4u}) EXPECT_TRUE(r.column_is_zero(k));
}

TEST(RolConfig, Validation) {
  EXPECT_THROW((ROLConfig{0.3, 0.3, 3}).validate(), ConfigError);
  EXPECT_THROW((ROLConfig{0.5, 0.3, 1}).validate(), ConfigError);
  EXPECT_THROW((ROLConfig{1.2, 0.3, 3}).validate(), ConfigError);
  EXPECT_NO_THROW((ROLConfig{1.0, 0.0, 2}).validate());
  EXPECT_EQ(parse_labeller("oicr"), Labeller::oicr);
  EXPECT_EQ(to_string(Labeller::rol), "rol");
  EXPECT_THROW(parse_labeller("mil"), ConfigError);
}

// Randomized agreement with the from-scratch reference plus invariants checked
// by recomputation.
TEST(Labelling, MatchesReferenceAndInvariants) {
  Rng rng(31);
  std::uniform_int_distribution<int> kd(1, 10), cd(1, 4);
  for (int t = 0; t < 300; ++t) {
    const std::size_t classes = static_cast<std::size_t>(cd(rng));
    const std::size_t k = static_cast<std::size_t>(kd(rng));
    std::vector<BBox> boxes;
    for (std::size_t i = 0; i < k; ++i) boxes.push_back(oracle::random_box_on_lattice(rng, 5));
    const auto scores = oracle::random_scores(rng, classes + 1, k);
    ImageLabel y(classes);
    y.set(static_cast<std::size_t>(rng() % classes));
    for (std::size_t c = 0; c < classes; ++c) {
      if (rng() % 2) y.set(c);
    }
    const auto rol = mine_support(scores, boxes, y, kCfg);
    const auto oicr = oicr_label(scores, boxes, y, kCfg);
    ASSERT_EQ(rol, oracle::label(scores, boxes, y, kCfg, false)) << "trial " << t;
    ASSERT_EQ(oicr, oracle::label(scores, boxes, y, kCfg, true)) << "trial " << t;
    for (std::size_t c = 0; c < classes; ++c) {
      if (!y.present(c)) continue;
      const std::size_t j = top_proposal(scores, c);
      EXPECT_NE(rol.label_of(j), classes);
      EXPECT_NE(rol.label_of(j), classes + 1);
    }
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_FALSE(oicr.column_is_zero(j));
      const bool rol_obj = !rol.column_is_zero(j) && rol.label_of(j) < classes;
      const bool oicr_obj = oicr.label_of(j) < classes;
      EXPECT_EQ(rol_obj, oicr_obj);
    }
  }
}

TEST(Labelling, JointPermutationEquivariance) {
  Rng rng(37);
  for (int t = 0; t < 100; ++t) {
    const std::size_t classes = 3, k = 7;
    std::vector<BBox> boxes;
    for (std::size_t i = 0; i < k; ++i) boxes.push_back(oracle::random_box_on_lattice(rng, 4));
    const auto scores = oracle::random_scores(rng, classes + 1, k);
    const ImageLabel y{1, 0, 1};
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<BBox> pboxes;
    Matrix pv(classes + 1, k);
    for (std::size_t j = 0; j < k; ++j) {
      pboxes.push_back(boxes[perm[j]]);
      pv.set_column(j, scores.values().column(perm[j]));
    }
    const ScoreMatrix pscores(pv);
    for (Labeller l : {Labeller::rol, Labeller::oicr}) {
      const auto a = label_proposals(l, scores, boxes, y, kCfg);
      const auto b = label_proposals(l, pscores, pboxes, y, kCfg);
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_EQ(b.label_of(j), a.label_of(perm[j]));
        EXPECT_DOUBLE_EQ(b.weight_of(j), a.weight_of(perm[j]));
      }
    }
  }
}

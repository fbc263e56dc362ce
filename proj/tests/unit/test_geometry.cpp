#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "transdet/geometry.hpp"

using namespace transdet;

TEST(Iou, IdenticalBoxesGiveOne) { EXPECT_DOUBLE_EQ(iou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 1)), 1.0); }

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(BBox(0, 0, 0.2, 0.2), BBox(0.5, 0.5, 0.7, 0.7)), 0.0);
}

TEST(Iou, HalfOverlapGivesOneThird) {
  EXPECT_NEAR(iou(BBox(0, 0, 0.2, 0.2), BBox(0.1, 0, 0.3, 0.2)), 1.0 / 3.0, 1e-12);
}

TEST(Iou, TouchingEdgesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(BBox(0, 0, 0.5, 1), BBox(0.5, 0, 1, 1)), 0.0);
}

TEST(BBox, RejectsDegenerateAndOutOfRange) {
  EXPECT_THROW(BBox(0.3, 0.1, 0.3, 0.5), std::invalid_argument);
  EXPECT_THROW(BBox(0.1, 0.5, 0.3, 0.4), std::invalid_argument);
  EXPECT_THROW(BBox(-0.1, 0, 0.3, 0.4), std::invalid_argument);
  EXPECT_THROW(BBox(0, 0, 1.1, 0.4), std::invalid_argument);
}

TEST(Nms, SingleBoxIsKept) {
  ScoredBoxSet s{{BBox(0.1, 0.1, 0.4, 0.4)}, {0.3}};
  EXPECT_EQ(nms(s, 0.0, 10), (std::vector<std::size_t>{0}));
}

TEST(Nms, DuplicateSuppressedDistantKept) {
  ScoredBoxSet s{{BBox(0, 0, 1, 1), BBox(0, 0, 1, 1), BBox(0.8, 0.8, 1, 1)}, {0.9, 0.8, 0.5}};
  EXPECT_EQ(nms(s, 0.75, 10), (std::vector<std::size_t>{0, 2}));
}

TEST(Nms, DisjointBoxesBothKept) {
  ScoredBoxSet s{{BBox(0, 0, 0.2, 0.2), BBox(0.5, 0.5, 0.9, 0.9)}, {0.4, 0.6}};
  EXPECT_EQ(nms(s, 0.75, 10), (std::vector<std::size_t>{1, 0}));
}

TEST(Nms, EqualScoresKeepLowerIndexFirst) {
  ScoredBoxSet s{{BBox(0, 0, 0.5, 0.5), BBox(0, 0, 0.5, 0.5)}, {0.5, 0.5}};
  EXPECT_EQ(nms(s, 0.5, 10), (std::vector<std::size_t>{0}));
}

TEST(Nms, MaxKeepTruncates) {
  ScoredBoxSet s{{BBox(0, 0, 0.1, 0.1), BBox(0.2, 0.2, 0.3, 0.3), BBox(0.5, 0.5, 0.6, 0.6)},
                 {0.1, 0.3, 0.2}};
  EXPECT_EQ(nms(s, 0.5, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(Nms, ValidatesScores) {
  ScoredBoxSet s{{BBox(0, 0, 0.1, 0.1)}, {1.5}};
  EXPECT_THROW(nms(s, 0.5, 1), std::invalid_argument);
  ScoredBoxSet mismatch{{BBox(0, 0, 0.1, 0.1)}, {}};
  EXPECT_THROW(nms(mismatch, 0.5, 1), std::invalid_argument);
}

TEST(Nms, MatchesBruteForceOracleAndIsIdempotent) {
  Rng rng(7);
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    ScoredBoxSet s;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      s.boxes.push_back(oracle::random_box_on_lattice(rng, 6));
      s.scores.push_back(std::round(u(rng) * 4) / 4);
    }
    const double thr = std::round(u(rng) * 10) / 10;
    const auto kept = nms(s, thr, 8);
    ASSERT_EQ(kept, oracle::nms(s.boxes, s.scores, thr, 8)) << "trial " << trial;
    ScoredBoxSet again;
    for (std::size_t k : kept) {
      again.boxes.push_back(s.boxes[k]);
      again.scores.push_back(s.scores[k]);
    }
    const auto twice = nms(again, thr, 8);
    ASSERT_EQ(twice.size(), kept.size());
    for (std::size_t i = 0; i < twice.size(); ++i) EXPECT_EQ(twice[i], i);
  }
}

TEST(Iou, SymmetricAndBoundedOnRandomPairs) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = oracle::random_box(rng), b = oracle::random_box(rng);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, oracle::iou(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
}

TEST(Cells, CenterMembershipIsClosed) {
  // 2x2 grid: centers at 0.25 and 0.75.
  const BBox left(0, 0, 0.5, 1);
  EXPECT_TRUE(cell_in_box(left, 0, 0, 2, 2));
  EXPECT_TRUE(cell_in_box(left, 1, 0, 2, 2));
  EXPECT_FALSE(cell_in_box(left, 0, 1, 2, 2));
  EXPECT_TRUE(cell_in_box(BBox(0.25, 0.25, 0.5, 0.5), 0, 0, 2, 2));
  EXPECT_EQ(cells_in_box(left, 2, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_DOUBLE_EQ(cell_center_x(1, 4), 0.375);
  EXPECT_DOUBLE_EQ(cell_center_y(3, 4), 0.875);
}

TEST(Cells, NearestCellFallback) {
  const BBox tiny(0.6, 0.1, 0.65, 0.15);
  EXPECT_TRUE(cells_in_box(tiny, 2, 2).empty());
  EXPECT_EQ(nearest_cell(tiny, 2, 2), 1u);
}

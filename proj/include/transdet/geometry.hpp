#pragma once

// Axis-aligned boxes in normalized [0,1] scene coordinates: area, IoU,
// greedy NMS, and the cell-center membership rule shared by the BD mask,
// scene rendering and ROI pooling.

#include <cstddef>
#include <vector>

namespace transdet {

class BBox {
 public:
  /// Throws std::invalid_argument unless 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
  BBox(double x1, double y1, double x2, double y2);

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }
  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x1_ + x2_); }
  double center_y() const noexcept { return 0.5 * (y1_ + y2_); }

  /// Closed-interval containment.
  bool contains(double x, double y) const noexcept {
    return x >= x1_ && x <= x2_ && y >= y1_ && y <= y2_;
  }

  bool operator==(const BBox&) const = default;

 private:
  double x1_, y1_, x2_, y2_;
};

double iou(const BBox& a, const BBox& b) noexcept;

struct ScoredBoxSet {
  std::vector<BBox> boxes;
  std::vector<double> scores;

  /// Throws std::invalid_argument on length mismatch or a score outside [0,1].
  void validate() const;
};

/// Greedy suppression in descending score order (equal scores: lower index
/// first). A box is dropped when its IoU with an already kept box exceeds
/// `overlap_threshold`. Returns at most `max_keep` indices, best first.
std::vector<std::size_t> nms(const ScoredBoxSet& set, double overlap_threshold,
                             std::size_t max_keep);

// Grid cells: cell (i, j) is row i (y axis), column j (x axis); its center is
// ((j + 0.5) / W, (i + 0.5) / H).
double cell_center_x(std::size_t j, std::size_t width) noexcept;
double cell_center_y(std::size_t i, std::size_t height) noexcept;
bool cell_in_box(const BBox& box, std::size_t i, std::size_t j, std::size_t height,
                 std::size_t width) noexcept;

/// Row-major indices (i * W + j) of the cells whose centers lie in `box`.
std::vector<std::size_t> cells_in_box(const BBox& box, std::size_t height, std::size_t width);

/// Index of the cell whose center is nearest the box center (lowest index on ties).
std::size_t nearest_cell(const BBox& box, std::size_t height, std::size_t width) noexcept;

}  // namespace transdet

namespace transdet {

/// A box tagged with a zero-based class index within its domain.
struct LabeledBox {
  std::size_t cls;
  BBox box;

  bool operator==(const LabeledBox&) const = default;
};

}  // namespace transdet

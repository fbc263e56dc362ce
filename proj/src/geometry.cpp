#include "transdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace transdet {

BBox::BBox(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  const bool ok = std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
                  std::isfinite(y2) && x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 &&
                  x1 < x2 && y1 < y2;
  if (!ok) {
    std::ostringstream msg;
    msg << "BBox(" << x1 << ", " << y1 << ", " << x2 << ", " << y2
        << ") violates 0 <= x1 < x2 <= 1, 0 <= y1 < y2 <= 1";
    throw std::invalid_argument(msg.str());
  }
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

void ScoredBoxSet::validate() const {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("ScoredBoxSet: boxes and scores differ in length");
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("ScoredBoxSet: score outside [0,1]");
  }
}

std::vector<std::size_t> nms(const ScoredBoxSet& set, double overlap_threshold,
                             std::size_t max_keep) {
  set.validate();
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0)) {
    throw std::invalid_argument("nms: overlap_threshold must lie in [0,1]");
  }
  if (max_keep == 0) throw std::invalid_argument("nms: max_keep must be >= 1");

  std::vector<std::size_t> order(set.boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_keep) break;
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(set.boxes[idx], set.boxes[k]) > overlap_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

double cell_center_x(std::size_t j, std::size_t width) noexcept {
  return (static_cast<double>(j) + 0.5) / static_cast<double>(width);
}

double cell_center_y(std::size_t i, std::size_t height) noexcept {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(height);
}

bool cell_in_box(const BBox& box, std::size_t i, std::size_t j, std::size_t height,
                 std::size_t width) noexcept {
  return box.contains(cell_center_x(j, width), cell_center_y(i, height));
}

std::vector<std::size_t> cells_in_box(const BBox& box, std::size_t height, std::size_t width) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      if (cell_in_box(box, i, j, height, width)) cells.push_back(i * width + j);
    }
  }
  return cells;
}

std::size_t nearest_cell(const BBox& box, std::size_t height, std::size_t width) noexcept {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double dx = cell_center_x(j, width) - box.center_x();
      const double dy = cell_center_y(i, height) - box.center_y();
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = i * width + j;
      }
    }
  }
  return best;
}

}  // namespace transdet

#pragma once

// PASCAL-VOC-style detection evaluation: greedy matching in descending score
// order, per-class average precision, and the mean over classes.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "transdet/geometry.hpp"

namespace transdet {

struct Detection {
  std::size_t scene_id = 0;
  std::size_t cls = 0;
  BBox box;
  double score = 0.0;
};

enum class ApMethod { voc07_11point, all_points };
std::string_view to_string(ApMethod m) noexcept;
ApMethod parse_ap_method(std::string_view s);

struct EvalConfig {
  double iou_threshold = 0.5;
  ApMethod ap_method = ApMethod::voc07_11point;

  void validate() const;
};

/// Ground truth indexed by scene id.
using GroundTruth = std::vector<std::vector<LabeledBox>>;

struct MatchFlag {
  std::size_t detection;  // index into the input list
  bool true_positive;
};

/// Processes `dets` (one class) by descending score, ties in input order. A
/// detection is a TP iff the best-IoU still-unmatched GT box in its scene has
/// IoU > threshold; that box is then consumed. `gts[s]` are the class's boxes
/// in scene s. Returned flags are in processing order.
std::vector<MatchFlag> match_detections(std::span<const Detection> dets,
                                        const std::vector<std::vector<BBox>>& gts,
                                        const EvalConfig& cfg);

/// AP from flags in processing order. nullopt when total_gt == 0 (the class
/// is then excluded from the mean).
std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t total_gt,
                                        const EvalConfig& cfg);

/// Mean of the included classes; throws std::invalid_argument if none is.
double mean_ap(std::span<const std::optional<double>> per_class_aps);

struct EvalReport {
  std::vector<std::optional<double>> per_class_ap;
  double map = 0.0;
};

EvalReport evaluate(std::span<const Detection> dets, const GroundTruth& gt,
                    std::size_t num_classes, const EvalConfig& cfg);

/// CSV with header `scene,class,x1,y1,x2,y2,score`.
std::string detections_to_csv(std::span<const Detection> dets);
/// Skips `#` comment lines and accepts an optional header line. Throws
/// MalformedDataError with the line number.
std::vector<Detection> detections_from_csv(std::string_view text);

/// `class,ap` rows (`excluded` for classes without GT) then `mAP,<value>`.
std::string eval_report_to_csv(const EvalReport& report);

}  // namespace transdet

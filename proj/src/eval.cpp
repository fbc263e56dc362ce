#include "transdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "transdet/errors.hpp"
#include "transdet/textio.hpp"

namespace transdet {

std::string_view to_string(ApMethod m) noexcept {
  return m == ApMethod::voc07_11point ? "voc07_11point" : "all_points";
}

ApMethod parse_ap_method(std::string_view s) {
  if (s == "voc07_11point") return ApMethod::voc07_11point;
  if (s == "all_points") return ApMethod::all_points;
  throw ConfigError("ap_method must be voc07_11point or all_points, got '" + std::string(s) + "'");
}

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("iou_threshold must lie in (0, 1]");
  }
}

std::vector<MatchFlag> match_detections(std::span<const Detection> dets,
                                        const std::vector<std::vector<BBox>>& gts,
                                        const EvalConfig& cfg) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) used[s].assign(gts[s].size(), false);

  std::vector<MatchFlag> flags;
  flags.reserve(dets.size());
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    bool tp = false;
    if (d.scene_id < gts.size()) {
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < gts[d.scene_id].size(); ++g) {
        if (used[d.scene_id][g]) continue;
        const double o = iou(d.box, gts[d.scene_id][g]);
        if (o > best) {
          best = o;
          best_g = g;
        }
      }
      if (best > cfg.iou_threshold) {
        used[d.scene_id][best_g] = true;
        tp = true;
      }
    }
    flags.push_back({idx, tp});
  }
  return flags;
}

std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t total_gt,
                                        const EvalConfig& cfg) {
  if (total_gt == 0) return std::nullopt;
  std::vector<double> recall(flags.size()), precision(flags.size());
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    (flags[i] ? tp : fp) += 1.0;
    recall[i] = tp / static_cast<double>(total_gt);
    precision[i] = tp / (tp + fp);
  }

  if (cfg.ap_method == ApMethod::voc07_11point) {
    double ap = 0.0;
    for (int step = 0; step <= 10; ++step) {
      const double t = step / 10.0;
      double p = 0.0;
      for (std::size_t i = 0; i < flags.size(); ++i) {
        if (recall[i] >= t) p = std::max(p, precision[i]);
      }
      ap += p / 11.0;
    }
    return ap;
  }

  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return ap;
}

double mean_ap(std::span<const std::optional<double>> per_class_aps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ap : per_class_aps) {
    if (ap) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("mean_ap: every class was excluded (no ground truth)");
  return sum / static_cast<double>(n);
}

EvalReport evaluate(std::span<const Detection> dets, const GroundTruth& gt,
                    std::size_t num_classes, const EvalConfig& cfg) {
  cfg.validate();
  EvalReport report;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::vector<BBox>> boxes(gt.size());
    std::size_t total = 0;
    for (std::size_t s = 0; s < gt.size(); ++s) {
      for (const auto& g : gt[s]) {
        if (g.cls == c) {
          boxes[s].push_back(g.box);
          ++total;
        }
      }
    }
    std::vector<Detection> mine;
    for (const auto& d : dets) {
      if (d.cls == c) mine.push_back(d);
    }
    const auto matched = match_detections(mine, boxes, cfg);
    std::vector<bool> flags;
    flags.reserve(matched.size());
    for (const auto& m : matched) flags.push_back(m.true_positive);
    report.per_class_ap.push_back(average_precision(flags, total, cfg));
  }
  report.map = mean_ap(report.per_class_ap);
  return report;
}

std::string detections_to_csv(std::span<const Detection> dets) {
  std::string out = "scene,class,x1,y1,x2,y2,score\n";
  for (const auto& d : dets) {
    out += std::to_string(d.scene_id) + "," + std::to_string(d.cls) + ",";
    const double v[5] = {d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2(), d.score};
    textio::append_doubles(out, v, ',');
    out += "\n";
  }
  return out;
}

std::vector<Detection> detections_from_csv(std::string_view text) {
  std::vector<Detection> out;
  const auto lines = textio::split(text, '\n', false);
  bool first = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = textio::trim(lines[i]);
    if (line.empty() || line.starts_with('#')) continue;
    const bool header = first && line.starts_with("scene");
    first = false;
    if (header) continue;
    const auto f = textio::split(line, ',', false);
    if (f.size() != 7) {
      throw MalformedDataError("detections row needs 7 fields, found " + std::to_string(f.size()),
                               i + 1);
    }
    try {
      const double score = textio::parse_double(f[6]);
      if (!std::isfinite(score)) throw std::invalid_argument("non-finite score");
      out.push_back({static_cast<std::size_t>(textio::parse_uint(f[0])),
                     static_cast<std::size_t>(textio::parse_uint(f[1])),
                     BBox(textio::parse_double(f[2]), textio::parse_double(f[3]),
                          textio::parse_double(f[4]), textio::parse_double(f[5])),
                     score});
    } catch (const std::invalid_argument& e) {
      throw MalformedDataError(e.what(), i + 1);
    }
  }
  return out;
}

std::string eval_report_to_csv(const EvalReport& report) {
  std::string out = "class,ap\n";
  for (std::size_t c = 0; c < report.per_class_ap.size(); ++c) {
    out += std::to_string(c) + ",";
    out += report.per_class_ap[c] ? textio::format_double(*report.per_class_ap[c]) : "excluded";
    out += "\n";
  }
  out += "mAP," + textio::format_double(report.map) + "\n";
  return out;
}

}  // namespace transdet

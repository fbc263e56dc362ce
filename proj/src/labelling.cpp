#include "transdet/labelling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "transdet/errors.hpp"

namespace transdet {

std::string_view to_string(Labeller l) noexcept { return l == Labeller::rol ? "rol" : "oicr"; }

Labeller parse_labeller(std::string_view s) {
  if (s == "rol") return Labeller::rol;
  if (s == "oicr") return Labeller::oicr;
  throw ConfigError("unknown labeller '" + std::string(s) + "' (expected rol or oicr)");
}

namespace {

struct Seed {
  std::size_t cls;
  std::size_t proposal;
  double score;
};

void check_shapes(const ScoreMatrix& scores, std::span<const BBox> boxes,
                  const ImageLabel& y_img) {
  if (scores.proposals() != boxes.size()) {
    throw std::invalid_argument("labelling: " + std::to_string(boxes.size()) + " boxes but " +
                                std::to_string(scores.proposals()) + " score columns");
  }
  if (scores.classes() != y_img.size() + 1) {
    throw std::invalid_argument("labelling: score rows must equal image-label length + 1");
  }
  if (scores.proposals() == 0) throw std::invalid_argument("labelling: no proposals");
}

std::vector<Seed> top_seeds(const ScoreMatrix& scores, const ImageLabel& y_img) {
  std::vector<Seed> seeds;
  for (std::size_t c = 0; c < y_img.size(); ++c) {
    if (!y_img.present(c)) continue;
    const std::size_t j = top_proposal(scores, c);
    seeds.push_back({c, j, scores(c, j)});
  }
  return seeds;
}

// Object labels: IoU > phi_obj with a seed. Larger weight wins; on equal
// weight the seed seen first (lower class index) is kept.
PseudoLabelMatrix object_labels(const std::vector<Seed>& seeds, std::span<const BBox> boxes,
                                std::size_t classes, const ROLConfig& cfg) {
  PseudoLabelMatrix out(classes, boxes.size());
  for (const Seed& s : seeds) {
    if (!(s.score > 0.0)) continue;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (iou(boxes[k], boxes[s.proposal]) > cfg.phi_obj && s.score > out.weight_of(k)) {
        out.assign(k, s.cls, s.score);
      }
    }
  }
  return out;
}

}  // namespace

void ROLConfig::validate() const {
  if (!(phi_bg >= 0.0 && phi_bg < phi_obj && phi_obj <= 1.0)) {
    throw ConfigError("rol thresholds must satisfy 0 <= phi_bg < phi_obj <= 1");
  }
  if (num_classifiers < 2) throw ConfigError("rol num_classifiers must be >= 2");
}

std::size_t top_proposal(const ScoreMatrix& scores, std::size_t class_index) {
  if (scores.proposals() == 0) throw std::invalid_argument("top_proposal: no proposals");
  if (class_index + 1 >= scores.classes()) {
    throw std::invalid_argument("top_proposal: class " + std::to_string(class_index) +
                                " is the background row or out of range");
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.proposals(); ++k) {
    if (scores(class_index, k) > scores(class_index, best)) best = k;
  }
  return best;
}

PseudoLabelMatrix mine_support(const ScoreMatrix& prev_scores, std::span<const BBox> boxes,
                               const ImageLabel& y_img, const ROLConfig& cfg) {
  check_shapes(prev_scores, boxes, y_img);
  const std::size_t background = y_img.size();
  const auto seeds = top_seeds(prev_scores, y_img);
  PseudoLabelMatrix out = object_labels(seeds, boxes, prev_scores.classes(), cfg);

  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (!out.column_is_zero(k) && out.label_of(k) != background) continue;
    for (const Seed& s : seeds) {
      if (!(s.score > 0.0)) continue;
      const double o = iou(boxes[k], boxes[s.proposal]);
      if (o > cfg.phi_bg && o < cfg.phi_obj && s.score > out.weight_of(k)) {
        out.assign(k, background, s.score);
      }
    }
  }
  return out;
}

PseudoLabelMatrix oicr_label(const ScoreMatrix& prev_scores, std::span<const BBox> boxes,
                             const ImageLabel& y_img, const ROLConfig& cfg) {
  check_shapes(prev_scores, boxes, y_img);
  const auto seeds = top_seeds(prev_scores, y_img);
  PseudoLabelMatrix out = object_labels(seeds, boxes, prev_scores.classes(), cfg);

  double bg_weight = 0.0;
  for (const Seed& s : seeds) bg_weight = std::max(bg_weight, s.score);
  if (!(bg_weight > 0.0)) return out;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (out.column_is_zero(k)) out.assign(k, y_img.size(), bg_weight);
  }
  return out;
}

PseudoLabelMatrix label_proposals(Labeller labeller, const ScoreMatrix& prev_scores,
                                  std::span<const BBox> boxes, const ImageLabel& y_img,
                                  const ROLConfig& cfg) {
  return labeller == Labeller::rol ? mine_support(prev_scores, boxes, y_img, cfg)
                                   : oicr_label(prev_scores, boxes, y_img, cfg);
}

}  // namespace transdet

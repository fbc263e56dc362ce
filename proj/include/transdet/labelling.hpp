#pragma once

// Recurrent object labelling: mines pseudo labels for classifier i from the
// detached scores of classifier i-1. Two labellers share the object rule:
//
//   * mine_support: background only for proposals in the moderate-overlap
//     band (phi_bg, phi_obj) around a class's top proposal; everything else
//     stays unlabelled (zero column).
//   * oicr_label: baseline that marks every proposal not labelled as an
//     object as background.

#include <cstddef>
#include <span>
#include <string_view>

#include "transdet/geometry.hpp"
#include "transdet/scores.hpp"

namespace transdet {

struct ROLConfig {
  double phi_obj = 0.5;
  double phi_bg = 0.3;
  std::size_t num_classifiers = 3;

  /// Throws ConfigError unless 0 <= phi_bg < phi_obj <= 1 and R >= 2.
  void validate() const;
};

enum class Labeller { rol, oicr };
std::string_view to_string(Labeller l) noexcept;
/// Throws ConfigError for names other than rol and oicr.
Labeller parse_labeller(std::string_view s);

/// Argmax over proposals of object row `class_index` (lowest index on ties).
/// Throws std::invalid_argument for the background row or an empty matrix.
std::size_t top_proposal(const ScoreMatrix& scores, std::size_t class_index);

PseudoLabelMatrix mine_support(const ScoreMatrix& prev_scores, std::span<const BBox> boxes,
                               const ImageLabel& y_img, const ROLConfig& cfg);

PseudoLabelMatrix oicr_label(const ScoreMatrix& prev_scores, std::span<const BBox> boxes,
                             const ImageLabel& y_img, const ROLConfig& cfg);

PseudoLabelMatrix label_proposals(Labeller labeller, const ScoreMatrix& prev_scores,
                                  std::span<const BBox> boxes, const ImageLabel& y_img,
                                  const ROLConfig& cfg);

}  // namespace transdet

#pragma once

// Three-stage transfer procedure:
//   1. train_source  - fully supervised training on source-domain scenes;
//   2. lstd_finetune - low-shot fine-tuning on target scenes regularized by
//                      background depression and source-knowledge distillation;
//   3. wstd_train    - weakly supervised training with warm-up distillation and
//                      the recurrent labelling classifier stack.
//
// Each stage is single-threaded and deterministic given StageConfig::seed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "transdet/eval.hpp"
#include "transdet/labelling.hpp"
#include "transdet/losses.hpp"
#include "transdet/model.hpp"
#include "transdet/synthworld.hpp"

namespace transdet {

struct StageConfig {
  // data
  std::size_t source_scenes = 200;
  std::size_t shots_per_class = 1;
  std::size_t weak_scenes_per_class = 40;
  std::size_t test_scenes = 100;
  // schedule
  std::size_t source_epochs = 30;
  std::size_t lstd_epochs = 800;
  // Caps LSTD at ceil(budget / scenes) epochs so larger shot counts do not
  // multiply the step count; 0 disables the cap.
  std::size_t lstd_step_budget = 3200;
  std::size_t wstd_epochs = 10;
  OptimizerConfig source_opt{2e-3};
  OptimizerConfig lstd_opt{2e-3};
  OptimizerConfig wstd_opt{1e-3};
  // model
  std::size_t feature_dim = 64;
  double head_init_scale = 0.01;
  // objectives
  LossWeights weights{1.0, 0.05, 1.0, 150.0, 50.0};
  ROLConfig rol;
  bool enable_bd = true;
  bool enable_sdk = true;
  bool sdk_weighted = false;   // weakly supervised stage only
  Labeller labeller = Labeller::rol;
  bool freeze_backbone = false;
  std::size_t wstd_proposals = 8;
  double detection_nms = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  /// Sets one field by name; unknown names or bad values throw ConfigError.
  void set(const std::string& key, const std::string& value);
};

/// Per-epoch means of each loss component.
struct LossBreakdown {
  double total = 0.0;
  double main = 0.0;
  double bd = 0.0;
  double sdk = 0.0;
  std::vector<double> rol;  // one entry per ROL classifier
};

struct ObjectiveResult {
  LossBreakdown loss;
  DetectorModel grad;
};

/// Proposal k gets class c when its best-IoU GT box has class c and IoU > 0.5;
/// otherwise the background index `num_classes`.
std::vector<std::size_t> proposal_labels(std::span<const BBox> proposals,
                                         std::span<const LabeledBox> gt, std::size_t num_classes);

/// Softmax cross-entropy of the main head against proposal labels.
ObjectiveResult source_objective(const DetectorModel& model, const FeatureGrid& raw_grid,
                                 std::span<const BBox> proposals,
                                 std::span<const std::size_t> labels);

struct LstdSample {
  const FeatureGrid* raw_grid = nullptr;
  std::span<const BBox> proposals;
  std::vector<std::size_t> labels;
  BackgroundMask mask;
  ScoreMatrix teacher;  // frozen source-model scores over `proposals`
};

/// lambda_main * main + lambda_bd * BD + lambda_sdk * SDK. A disabled term is
/// skipped entirely.
ObjectiveResult lstd_objective(const DetectorModel& model, const LstdSample& sample,
                               const LossWeights& w, bool enable_bd, bool enable_sdk);

struct WstdSample {
  const FeatureGrid* raw_grid = nullptr;
  std::vector<BBox> proposals;  // selected by the frozen warm-up model
  ImageLabel label;
  ScoreMatrix teacher;          // warm-up SDK-branch scores over `proposals`
};

/// lambda_wstd_sdk * SDK + lambda_wstd_rol * sum_i L_i. Pseudo labels for
/// classifier i > 1 are mined from classifier i-1's detached scores; when
/// `pseudo` is non-null and non-empty those labels are used verbatim, and
/// when it is non-null and empty the mined labels are stored into it.
ObjectiveResult wstd_objective(const DetectorModel& model, const WstdSample& sample,
                               const StageConfig& cfg,
                               std::vector<PseudoLabelMatrix>* pseudo = nullptr);

struct StageResult {
  DetectorModel model;
  std::vector<LossBreakdown> loss_curve;
};

DetectorModel init_source_model(const World& world, const StageConfig& cfg);

StageResult train_source(const World& world, const StageConfig& cfg);
/// Requires a source model. Returns the warm-up detector (main + SDK heads).
StageResult lstd_finetune(const DetectorModel& source, const World& world, const StageConfig& cfg);
/// Requires a warm-up model with an SDK branch. Returns the target detector.
/// With weak scenes and epochs to train on, every ROL head is re-initialized
/// from the "wstd/init" stream; otherwise the result is init_target_model().
StageResult wstd_train(const DetectorModel& warmup, const World& world, const StageConfig& cfg);

/// Target detector initialized from the warm-up: every ROL head starts as the
/// warm-up main head.
DetectorModel init_target_model(const DetectorModel& warmup, const StageConfig& cfg);

/// Top `keep` proposals by warm-up objectness (1 - background probability)
/// after NMS at 0.75.
std::vector<BBox> select_proposals(const DetectorModel& warmup, const FeatureGrid& raw_grid,
                                   std::span<const BBox> proposals, std::size_t keep);

/// Training samples for the weakly supervised stage (proposal selection and
/// warm-up distillation targets, both from the frozen warm-up).
std::vector<WstdSample> make_wstd_samples(const DetectorModel& warmup,
                                          std::span<const Scene> scenes, const StageConfig& cfg);

/// Head used for final detections: the last ROL head when present.
const Head& inference_head(const DetectorModel& model);

/// Per-class NMS'd detections of `head` over every scene's proposals.
std::vector<Detection> detect(const DetectorModel& model, const Head& head,
                              std::span<const Scene> scenes, double nms_threshold);

GroundTruth ground_truth(std::span<const Scene> scenes);

EvalReport evaluate_head(const DetectorModel& model, const Head& head,
                         std::span<const Scene> scenes, const StageConfig& cfg,
                         const EvalConfig& eval_cfg = {});

/// Fraction of proposals whose argmax class equals proposal_labels().
double proposal_accuracy(const DetectorModel& model, std::span<const Scene> scenes);

/// Held-out target test scenes for `cfg.seed`.
std::vector<Scene> target_test_scenes(const World& world, const StageConfig& cfg);

}  // namespace transdet

#pragma once

// Linear detector stand-in: a per-cell linear backbone over the raw grid,
// mean ROI pooling, and affine per-proposal classifier heads. All gradients
// are closed-form; see the *_backward helpers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transdet/geometry.hpp"
#include "transdet/matrix.hpp"
#include "transdet/rng.hpp"
#include "transdet/scores.hpp"

namespace transdet {

/// D x D0 map applied to every cell.
struct Backbone {
  Matrix map;

  std::size_t out_dim() const noexcept { return map.rows(); }
  std::size_t in_dim() const noexcept { return map.cols(); }
  bool operator==(const Backbone&) const = default;
};

/// (C+1) x (D+1) affine classifier; last column is the bias, last row background.
struct Head {
  Matrix weights;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t in_dim() const noexcept { return weights.cols() == 0 ? 0 : weights.cols() - 1; }
  bool operator==(const Head&) const = default;
};

enum class ModelKind { source, warmup, target };
std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

struct DetectorModel {
  ModelKind kind = ModelKind::source;
  Backbone backbone;
  Head main_head;                 // C_s+1 for a source model, C_t+1 otherwise
  std::optional<Head> sdk_head;   // C_s+1 distillation branch
  std::vector<Head> rol_heads;    // C_t+1 each

  /// Throws std::invalid_argument when head shapes disagree with the backbone
  /// or with their roles.
  void validate() const;

  /// Same structure, all parameters zero. Used as a gradient accumulator.
  DetectorModel zeros_like() const;

  struct ParamRef {
    std::string name;
    Matrix* values;
  };
  struct ConstParamRef {
    std::string name;
    const Matrix* values;
  };
  /// Fixed-order parameter blocks: backbone, main_head, sdk_head, rol_head.<i>.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  bool operator==(const DetectorModel&) const = default;
};

Backbone init_backbone(std::size_t out_dim, std::size_t in_dim, Rng& rng);
Head init_head(std::size_t classes, std::size_t in_dim, double scale, Rng& rng);

// --- forward -------------------------------------------------------------

FeatureGrid forward_grid(const Backbone& backbone, const FeatureGrid& raw_grid);

/// Cells pooled for `box`: those whose centers lie inside, else the nearest one.
std::vector<std::size_t> roi_cells(const BBox& box, std::size_t height, std::size_t width);
std::vector<double> roi_pool(const FeatureGrid& grid, const BBox& box);

struct ProposalScores {
  Matrix logits;
  ScoreMatrix probabilities;
};

ProposalScores score_proposals(const Head& head, std::span<const std::vector<double>> pooled);

/// Pools every proposal after running the backbone once.
struct PooledFeatures {
  FeatureGrid features;
  std::vector<std::vector<std::size_t>> cells;
  std::vector<std::vector<double>> pooled;
};
PooledFeatures pool_proposals(const Backbone& backbone, const FeatureGrid& raw_grid,
                              std::span<const BBox> proposals);

/// Source-knowledge scores of a frozen teacher: its SDK branch when present,
/// otherwise the main head of a source model. Throws std::invalid_argument
/// when the model carries no source head.
ScoreMatrix extract_sdk(const DetectorModel& teacher, const FeatureGrid& raw_grid,
                        std::span<const BBox> proposals);
const Head& source_head(const DetectorModel& model);

// --- backward ------------------------------------------------------------

/// Accumulates d(loss)/d(head) into head_grad and d(loss)/d(pooled_k) into
/// pooled_grads given d(loss)/d(logits).
void head_backward(const Head& head, std::span<const std::vector<double>> pooled,
                   const Matrix& dlogits, Head& head_grad,
                   std::vector<std::vector<double>>& pooled_grads);

/// Scatters pooled-feature gradients back onto the feature grid.
void pool_backward(const PooledFeatures& pf, std::span<const std::vector<double>> pooled_grads,
                   FeatureGrid& feature_grad);

/// d(loss)/d(map) += sum_cells dF_cell (x) raw_cell.
void backbone_backward(const FeatureGrid& raw_grid, const FeatureGrid& feature_grad,
                       Backbone& backbone_grad);

// --- optimization --------------------------------------------------------

struct OptimizerConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-4;
  double lr_decay_factor = 0.1;
  double epsilon = 1e-8;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

struct ParamBlock {
  std::string_view name;
  std::span<double> values;
  std::span<const double> grads;
};

/// Bias-corrected Adam; weight decay enters as an added gradient term
/// weight_decay * param. `lr_scale` multiplies the learning rate (schedules).
/// Throws std::domain_error naming the block on a non-finite gradient.
void adam_step(std::span<const ParamBlock> blocks, AdamState& state, const OptimizerConfig& cfg,
               double lr_scale = 1.0);
void adam_step(DetectorModel& model, const DetectorModel& grads, AdamState& state,
               const OptimizerConfig& cfg, double lr_scale = 1.0);

/// Learning-rate multiplier: 1 before 2/3 of the run, lr_decay_factor after.
double lr_schedule(std::size_t step, std::size_t total_steps, const OptimizerConfig& cfg);

// --- checkpoints ---------------------------------------------------------

struct Checkpoint {
  DetectorModel model;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // echo, in order
};

std::string checkpoint_to_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_text(std::string_view text);

}  // namespace transdet

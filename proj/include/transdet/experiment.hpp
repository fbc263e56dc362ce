#pragma once

// Seed-paired experiment suites. Every seed gets its own world and source
// model; all cells of one seed share them, so per-seed differences between
// cells are paired comparisons.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transdet/eval.hpp"
#include "transdet/pipeline.hpp"
#include "transdet/synthworld.hpp"

namespace transdet {

/// Registered experiment names, in a fixed order.
const std::vector<std::string>& experiment_names();

struct ExperimentSpec {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> shots;  // LSTD shot grid (table3, table5)
  WorldConfig world;
  StageConfig stage;
  EvalConfig eval;

  /// Defaults for a registered name: 20 seeds starting at `base_seed`.
  /// Throws UnknownExperimentError listing the registered names.
  static ExperimentSpec defaults(const std::string& name, std::uint64_t base_seed = 0);

  /// Throws ConfigError on an empty seed or shot list or invalid configs.
  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_kv() const;
};

/// Parses `key = value` lines (`#` starts a comment). Keys: experiment,
/// seeds (comma list), shots (comma list), world.<field>, eval.iou_threshold,
/// eval.ap_method, and any StageConfig field. Missing keys keep the
/// defaults of the named experiment. Throws MalformedDataError with the line
/// number for a line without `=`, ConfigError for bad keys or values.
ExperimentSpec parse_experiment_spec(std::string_view text, std::uint64_t base_seed = 0);

/// Applies a world.<field>, eval.<field> or StageConfig key.
void apply_setting(WorldConfig& world, StageConfig& stage, EvalConfig& eval,
                   const std::string& key, const std::string& value);

/// Applies one override to a spec, with the same keys as the spec file.
void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value);

struct CellResult {
  std::string cell;
  std::uint64_t seed = 0;
  std::string stage;
  std::size_t shots = 0;
  std::size_t weak_scenes = 0;
  std::string labeller;
  EvalReport report;
};

struct CellSummary {
  std::string cell;
  std::size_t runs = 0;
  double mean_map = 0.0;
  double stddev_map = 0.0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<CellResult> rows;  // seed-major, cells in registration order
  double wall_seconds = 0.0;
};

/// Runs every (cell, seed). Seeds are distributed over `threads` workers;
/// results do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t threads = 1);

/// Cells in first-appearance order with mean and sample standard deviation.
std::vector<CellSummary> summarize(const std::vector<CellResult>& rows);

/// Columns: experiment,cell,seed,stage,shots,weak_scenes,labeller,mAP,ap_0..
std::string experiment_to_csv(const ExperimentResult& result);
std::string summary_to_csv(const ExperimentResult& result);

/// World used for `seed` in experiments.
World experiment_world(const WorldConfig& base, std::uint64_t seed);

}  // namespace transdet

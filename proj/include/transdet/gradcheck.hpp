#pragma once

// Central-difference checks of every closed-form gradient: the individual
// losses and the end-to-end objectives of the three training stages.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace transdet {

/// bd, sdk, sdk_weighted, multilabel, rol_classifier, proposal_ce,
/// model_source, model_lstd, model_wstd.
const std::vector<std::string>& gradcheck_suite_names();

struct GradSuiteConfig {
  std::size_t instances = 100;
  double tolerance = 1e-6;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

struct GradSuiteResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t coordinates = 0;       // checked across all instances
  double max_relative_error = 0.0;
  std::size_t worst_instance = 0;
  bool passed = false;
};

/// Instance i of suite `name` is drawn from derive_seed(seed, "gradcheck/<name>", i).
/// Throws ConfigError for an unknown suite name.
GradSuiteResult run_grad_suite(const std::string& name, const GradSuiteConfig& cfg);

/// Runs `names` in order; an empty list means every suite.
std::vector<GradSuiteResult> run_grad_suites(std::span<const std::string> names,
                                             const GradSuiteConfig& cfg);

}  // namespace transdet

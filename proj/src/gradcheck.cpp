#include "transdet/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <random>

#include "transdet/errors.hpp"
#include "transdet/losses.hpp"
#include "transdet/model.hpp"
#include "transdet/numerics.hpp"
#include "transdet/pipeline.hpp"
#include "transdet/rng.hpp"
#include "transdet/synthworld.hpp"

namespace transdet {
namespace {

// One instance: the point, its analytic gradient, and the function itself.
struct Instance {
  std::vector<double> point;
  std::vector<double> grad;
  ScalarFunction f;
};

using Generator = std::function<Instance(Rng&)>;

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

std::vector<double> to_vector(std::span<const double> v) { return {v.begin(), v.end()}; }

Matrix reshape(std::span<const double> x, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::copy(x.begin(), x.end(), m.values().begin());
  return m;
}

ImageLabel random_image_label(Rng& rng, std::size_t classes) {
  ImageLabel y(classes);
  for (std::size_t c = 0; c < classes; ++c) y.set(c, uniform(rng, 0.0, 1.0) < 0.5);
  return y;
}

Instance bd_instance(Rng& rng) {
  const std::size_t h = uniform_index(rng, 2, 5);
  const std::size_t w = uniform_index(rng, 2, 5);
  const std::size_t d = uniform_index(rng, 1, 4);
  BackgroundMask mask(h, w, false);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) mask.set(i, j, uniform(rng, 0.0, 1.0) < 0.5);
  }
  FeatureGrid grid(h, w, d);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : grid.values()) v = n(rng);
  const auto loss = bd_loss(grid, mask);
  return {to_vector(grid.values()), to_vector(loss.grad.values()),
          [h, w, d, mask](std::span<const double> x) {
            FeatureGrid g(h, w, d);
            std::copy(x.begin(), x.end(), g.values().begin());
            return bd_loss(g, mask).value;
          }};
}

Instance sdk_instance(Rng& rng, bool weighted) {
  const std::size_t c = uniform_index(rng, 2, 6);
  const std::size_t k = uniform_index(rng, 1, 6);
  const ScoreMatrix teacher = ScoreMatrix::from_logits(random_matrix(rng, c, k, 2.0));
  const Matrix z = random_matrix(rng, c, k, 2.0);
  const auto loss = sdk_loss(teacher, z, weighted);
  return {to_vector(z.values()), to_vector(loss.grad.values()),
          [c, k, teacher, weighted](std::span<const double> x) {
            return sdk_loss(teacher, reshape(x, c, k), weighted).value;
          }};
}

Instance multilabel_instance(Rng& rng) {
  const std::size_t c = uniform_index(rng, 2, 6);
  const std::size_t k = uniform_index(rng, 1, 6);
  const ImageLabel y = random_image_label(rng, c - 1);
  const Matrix z = random_matrix(rng, c, k, 1.5);
  const auto loss = image_multilabel_loss(z, y);
  return {to_vector(z.values()), to_vector(loss.grad.values()),
          [c, k, y](std::span<const double> x) {
            return image_multilabel_loss(reshape(x, c, k), y).value;
          }};
}

Instance rol_instance(Rng& rng) {
  const std::size_t c = uniform_index(rng, 2, 6);
  const std::size_t k = uniform_index(rng, 1, 8);
  PseudoLabelMatrix pseudo(c, k);
  for (std::size_t j = 0; j < k; ++j) {
    if (uniform(rng, 0.0, 1.0) < 0.7) {
      pseudo.assign(j, uniform_index(rng, 0, c - 1), uniform(rng, 0.05, 1.0));
    }
  }
  const Matrix z = random_matrix(rng, c, k, 2.0);
  const auto loss = rol_classifier_loss(z, pseudo);
  return {to_vector(z.values()), to_vector(loss.grad.values()),
          [c, k, pseudo](std::span<const double> x) {
            return rol_classifier_loss(reshape(x, c, k), pseudo).value;
          }};
}

Instance proposal_ce_instance(Rng& rng) {
  const std::size_t c = uniform_index(rng, 2, 6);
  const std::size_t k = uniform_index(rng, 1, 8);
  std::vector<std::size_t> labels(k);
  for (auto& l : labels) l = uniform_index(rng, 0, c - 1);
  const Matrix z = random_matrix(rng, c, k, 2.0);
  const auto loss = proposal_cross_entropy(z, labels);
  return {to_vector(z.values()), to_vector(loss.grad.values()),
          [c, k, labels](std::span<const double> x) {
            return proposal_cross_entropy(reshape(x, c, k), labels).value;
          }};
}

// --- end-to-end model paths --------------------------------------------------

struct ModelFixture {
  std::shared_ptr<const World> world;
  std::shared_ptr<const Scene> scene;
  DetectorModel model;
};

ModelFixture model_fixture(Rng& rng, ModelKind kind, AnnotationMode mode) {
  WorldConfig wc;
  wc.num_source_classes = 3;
  wc.num_target_classes = 2;
  wc.raw_dim = 8;
  wc.grid_height = 4;
  wc.grid_width = 4;
  wc.proposals_per_scene = 8;
  wc.max_objects = 2;
  wc.seed = rng();
  auto world = std::make_shared<const World>(make_world(wc));
  const Domain domain = kind == ModelKind::source ? Domain::source : Domain::target;
  auto scene = std::make_shared<const Scene>(sample_scene(*world, domain, mode, rng));

  const std::size_t dim = uniform_index(rng, 2, 5);
  const double head_scale = 0.7;
  ModelFixture fx{world, scene, {}};
  fx.model.kind = kind;
  fx.model.backbone = init_backbone(dim, wc.raw_dim, rng);
  const std::size_t main_classes =
      kind == ModelKind::source ? wc.num_source_classes + 1 : wc.num_target_classes + 1;
  fx.model.main_head = init_head(main_classes, dim, head_scale, rng);
  if (kind != ModelKind::source) {
    fx.model.sdk_head = init_head(wc.num_source_classes + 1, dim, head_scale, rng);
  }
  if (kind == ModelKind::target) {
    fx.model.rol_heads.clear();
    for (std::size_t i = 0; i < 3; ++i) {
      fx.model.rol_heads.push_back(init_head(wc.num_target_classes + 1, dim, head_scale, rng));
    }
  }
  return fx;
}

using Objective = std::function<ObjectiveResult(const DetectorModel&)>;

Instance model_instance(const DetectorModel& model, Objective objective) {
  const auto at = objective(model);
  return {model.flatten(), at.grad.flatten(), [model, objective](std::span<const double> x) {
            DetectorModel m = model;
            m.unflatten(x);
            return objective(m).loss.total;
          }};
}

LossWeights random_weights(Rng& rng) {
  LossWeights w;
  w.lambda_main = uniform(rng, 0.1, 2.0);
  w.lambda_bd = uniform(rng, 0.1, 2.0);
  w.lambda_sdk = uniform(rng, 0.1, 2.0);
  w.lambda_wstd_sdk = uniform(rng, 0.1, 2.0);
  w.lambda_wstd_rol = uniform(rng, 0.1, 2.0);
  return w;
}

Instance model_source_instance(Rng& rng) {
  const auto fx = model_fixture(rng, ModelKind::source, AnnotationMode::full);
  const auto labels = proposal_labels(fx.scene->proposals, fx.scene->gt,
                                      fx.world->config().num_source_classes);
  const auto scene = fx.scene;
  return model_instance(fx.model, [scene, labels](const DetectorModel& m) {
    return source_objective(m, scene->raw_grid, scene->proposals, labels);
  });
}

Instance model_lstd_instance(Rng& rng) {
  const auto fx = model_fixture(rng, ModelKind::warmup, AnnotationMode::full);
  const auto& wc = fx.world->config();
  DetectorModel teacher;
  teacher.kind = ModelKind::source;
  teacher.backbone = init_backbone(fx.model.backbone.out_dim(), wc.raw_dim, rng);
  teacher.main_head = init_head(wc.num_source_classes + 1, teacher.backbone.out_dim(), 0.7, rng);

  auto sample = std::make_shared<LstdSample>();
  sample->raw_grid = &fx.scene->raw_grid;
  sample->proposals = fx.scene->proposals;
  sample->labels = proposal_labels(fx.scene->proposals, fx.scene->gt, wc.num_target_classes);
  sample->mask = bd_mask(wc.grid_height, wc.grid_width, fx.scene->gt_boxes());
  sample->teacher = extract_sdk(teacher, fx.scene->raw_grid, fx.scene->proposals);
  const LossWeights w = random_weights(rng);
  const auto scene = fx.scene;
  return model_instance(fx.model, [scene, sample, w](const DetectorModel& m) {
    return lstd_objective(m, *sample, w, true, true);
  });
}

Instance model_wstd_instance(Rng& rng) {
  const auto fx = model_fixture(rng, ModelKind::target, AnnotationMode::weak);
  const auto& wc = fx.world->config();
  auto sample = std::make_shared<WstdSample>();
  sample->raw_grid = &fx.scene->raw_grid;
  sample->proposals = fx.scene->proposals;
  sample->label = fx.scene->image_label;
  sample->teacher = ScoreMatrix::from_logits(
      random_matrix(rng, wc.num_source_classes + 1, fx.scene->proposals.size(), 2.0));
  StageConfig cfg;
  cfg.weights = random_weights(rng);
  cfg.sdk_weighted = uniform(rng, 0.0, 1.0) < 0.5;
  cfg.labeller = uniform(rng, 0.0, 1.0) < 0.5 ? Labeller::rol : Labeller::oicr;
  // Pseudo labels mined at the base point are held fixed under perturbation.
  std::vector<PseudoLabelMatrix> mined;
  wstd_objective(fx.model, *sample, cfg, &mined);
  const auto scene = fx.scene;
  return model_instance(fx.model, [scene, sample, cfg, mined](const DetectorModel& m) {
    auto pseudo = mined;
    return wstd_objective(m, *sample, cfg, &pseudo);
  });
}

const std::map<std::string, Generator>& generators() {
  static const std::map<std::string, Generator> g{
      {"bd", bd_instance},
      {"sdk", [](Rng& r) { return sdk_instance(r, false); }},
      {"sdk_weighted", [](Rng& r) { return sdk_instance(r, true); }},
      {"multilabel", multilabel_instance},
      {"rol_classifier", rol_instance},
      {"proposal_ce", proposal_ce_instance},
      {"model_source", model_source_instance},
      {"model_lstd", model_lstd_instance},
      {"model_wstd", model_wstd_instance},
  };
  return g;
}

}  // namespace

const std::vector<std::string>& gradcheck_suite_names() {
  static const std::vector<std::string> names{"bd",          "sdk",          "sdk_weighted",
                                              "multilabel",  "rol_classifier", "proposal_ce",
                                              "model_source", "model_lstd",   "model_wstd"};
  return names;
}

GradSuiteResult run_grad_suite(const std::string& name, const GradSuiteConfig& cfg) {
  const auto it = generators().find(name);
  if (it == generators().end()) {
    std::string known;
    for (const auto& n : gradcheck_suite_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown gradcheck suite '" + name + "' (known: " + known + ")");
  }
  if (cfg.instances == 0) throw ConfigError("gradcheck: instances must be > 0");
  GradSuiteResult result;
  result.name = name;
  result.instances = cfg.instances;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    Rng rng = make_stream(cfg.seed, "gradcheck/" + name, i);
    const Instance inst = it->second(rng);
    const auto report = grad_check(inst.f, inst.grad, inst.point, cfg.step, cfg.tolerance);
    result.coordinates += inst.point.size();
    if (i == 0 || report.max_relative_error > result.max_relative_error) {
      result.max_relative_error = report.max_relative_error;
      result.worst_instance = i;
    }
  }
  result.passed = result.max_relative_error <= cfg.tolerance;
  return result;
}

std::vector<GradSuiteResult> run_grad_suites(std::span<const std::string> names,
                                             const GradSuiteConfig& cfg) {
  const std::vector<std::string> all = gradcheck_suite_names();
  const std::span<const std::string> chosen = names.empty() ? std::span<const std::string>(all) : names;
  std::vector<GradSuiteResult> out;
  for (const auto& n : chosen) out.push_back(run_grad_suite(n, cfg));
  return out;
}

}  // namespace transdet

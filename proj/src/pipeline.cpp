#include "transdet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "transdet/errors.hpp"
#include "transdet/numerics.hpp"
#include "transdet/textio.hpp"

namespace transdet {

namespace {

constexpr double kLabelIou = 0.5;
constexpr double kSelectionNms = 0.75;

// --- StageConfig field table ------------------------------------------------

struct Field {
  const char* name;
  std::function<std::string(const StageConfig&)> get;
  std::function<void(StageConfig&, const std::string&)> set;
};

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    return static_cast<std::size_t>(textio::parse_uint(v));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config field '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return textio::parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config field '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config field '" + key + "' expects true/false, got '" + v + "'");
}

#define TD_SIZE(key, member)                                                   \
  Field{key, [](const StageConfig& c) { return std::to_string(c.member); },    \
        [](StageConfig& c, const std::string& v) { c.member = to_size(key, v); }}
#define TD_DOUBLE(key, member)                                                       \
  Field{key, [](const StageConfig& c) { return textio::format_double(c.member); },   \
        [](StageConfig& c, const std::string& v) { c.member = to_double(key, v); }}
#define TD_BOOL(key, member)                                                        \
  Field{key, [](const StageConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](StageConfig& c, const std::string& v) { c.member = to_bool(key, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TD_SIZE("source_scenes", source_scenes),
      TD_SIZE("shots_per_class", shots_per_class),
      TD_SIZE("weak_scenes_per_class", weak_scenes_per_class),
      TD_SIZE("test_scenes", test_scenes),
      TD_SIZE("source_epochs", source_epochs),
      TD_SIZE("lstd_epochs", lstd_epochs),
      TD_SIZE("lstd_step_budget", lstd_step_budget),
      TD_SIZE("wstd_epochs", wstd_epochs),
      TD_DOUBLE("source_lr", source_opt.learning_rate),
      TD_DOUBLE("lstd_lr", lstd_opt.learning_rate),
      TD_DOUBLE("wstd_lr", wstd_opt.learning_rate),
      TD_DOUBLE("beta1", source_opt.beta1),
      TD_DOUBLE("beta2", source_opt.beta2),
      TD_DOUBLE("weight_decay", source_opt.weight_decay),
      TD_DOUBLE("lr_decay_factor", source_opt.lr_decay_factor),
      TD_SIZE("feature_dim", feature_dim),
      TD_DOUBLE("head_init_scale", head_init_scale),
      TD_DOUBLE("lambda_main", weights.lambda_main),
      TD_DOUBLE("lambda_bd", weights.lambda_bd),
      TD_DOUBLE("lambda_sdk", weights.lambda_sdk),
      TD_DOUBLE("lambda_wstd_sdk", weights.lambda_wstd_sdk),
      TD_DOUBLE("lambda_wstd_rol", weights.lambda_wstd_rol),
      TD_DOUBLE("phi_obj", rol.phi_obj),
      TD_DOUBLE("phi_bg", rol.phi_bg),
      TD_SIZE("num_classifiers", rol.num_classifiers),
      TD_BOOL("enable_bd", enable_bd),
      TD_BOOL("enable_sdk", enable_sdk),
      TD_BOOL("sdk_weighted", sdk_weighted),
      Field{"labeller", [](const StageConfig& c) { return std::string(to_string(c.labeller)); },
            [](StageConfig& c, const std::string& v) { c.labeller = parse_labeller(v); }},
      TD_BOOL("freeze_backbone", freeze_backbone),
      TD_SIZE("wstd_proposals", wstd_proposals),
      TD_DOUBLE("detection_nms", detection_nms),
      Field{"seed", [](const StageConfig& c) { return std::to_string(c.seed); },
            [](StageConfig& c, const std::string& v) {
              try {
                c.seed = textio::parse_uint(v);
              } catch (const std::invalid_argument&) {
                throw ConfigError("config field 'seed' expects an unsigned integer");
              }
            }},
  };
  return table;
}

#undef TD_SIZE
#undef TD_DOUBLE
#undef TD_BOOL

// Optimizer hyperparameters other than the rate are shared across stages and
// live in source_opt; the per-stage configs only differ in learning_rate.
OptimizerConfig stage_optimizer(const StageConfig& cfg, const OptimizerConfig& stage) {
  OptimizerConfig o = cfg.source_opt;
  o.learning_rate = stage.learning_rate;
  return o;
}

// --- backprop helpers --------------------------------------------------------

void scale(Matrix& m, double s) {
  for (double& v : m.values()) v *= s;
}

// Propagates pooled-feature gradients into grad.backbone.
void finish_backbone(const FeatureGrid& raw_grid, const PooledFeatures& pf,
                     const std::vector<std::vector<double>>& pooled_grads, FeatureGrid& feature_grad,
                     DetectorModel& grad) {
  pool_backward(pf, pooled_grads, feature_grad);
  backbone_backward(raw_grid, feature_grad, grad.backbone);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.total += x.total;
  acc.main += x.main;
  acc.bd += x.bd;
  acc.sdk += x.sdk;
  if (acc.rol.size() < x.rol.size()) acc.rol.resize(x.rol.size(), 0.0);
  for (std::size_t i = 0; i < x.rol.size(); ++i) acc.rol[i] += x.rol[i];
}

void divide(LossBreakdown& acc, double n) {
  acc.total /= n;
  acc.main /= n;
  acc.bd /= n;
  acc.sdk /= n;
  for (double& r : acc.rol) r /= n;
}

// Per-sample Adam over shuffled epochs, single ×decay step at 2/3 of the run.
std::vector<LossBreakdown> optimize(DetectorModel& model, std::size_t samples, std::size_t epochs,
                                    const OptimizerConfig& opt,
                                    const std::vector<std::string>& frozen, Rng& order_rng,
                                    const std::function<ObjectiveResult(std::size_t)>& objective) {
  std::vector<LossBreakdown> curve;
  if (samples == 0 || epochs == 0) return curve;
  AdamState state;
  const std::size_t total_steps = samples * epochs;
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), order_rng);
    LossBreakdown epoch_loss;
    for (std::size_t idx : order) {
      ObjectiveResult r = objective(idx);
      accumulate(epoch_loss, r.loss);
      auto params = model.parameters();
      const auto grads = r.grad.parameters();
      std::vector<ParamBlock> blocks;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (std::find(frozen.begin(), frozen.end(), params[i].name) != frozen.end()) continue;
        blocks.push_back({params[i].name, params[i].values->values(), grads[i].values->values()});
      }
      adam_step(blocks, state, opt, lr_schedule(step, total_steps, opt));
      ++step;
    }
    divide(epoch_loss, static_cast<double>(samples));
    curve.push_back(std::move(epoch_loss));
  }
  return curve;
}

}  // namespace

// --- StageConfig ---------------------------------------------------------------

void StageConfig::validate() const {
  weights.validate();
  rol.validate();
  source_opt.validate();
  stage_optimizer(*this, lstd_opt).validate();
  stage_optimizer(*this, wstd_opt).validate();
  if (feature_dim == 0) throw ConfigError("feature_dim must be >= 1");
  if (!(head_init_scale >= 0.0)) throw ConfigError("head_init_scale must be >= 0");
  if (wstd_proposals == 0) throw ConfigError("wstd_proposals must be >= 1");
  if (!(detection_nms >= 0.0 && detection_nms <= 1.0)) {
    throw ConfigError("detection_nms must lie in [0, 1]");
  }
}

std::vector<std::pair<std::string, std::string>> StageConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& f : fields()) kv.emplace_back(f.name, f.get(*this));
  return kv;
}

void StageConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown stage config field '" + key + "'");
}

// --- objectives ------------------------------------------------------------------

std::vector<std::size_t> proposal_labels(std::span<const BBox> proposals,
                                         std::span<const LabeledBox> gt,
                                         std::size_t num_classes) {
  std::vector<std::size_t> labels(proposals.size(), num_classes);
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    double best = 0.0;
    for (const auto& g : gt) {
      const double o = iou(proposals[k], g.box);
      if (o > best) {
        best = o;
        labels[k] = o > kLabelIou ? g.cls : num_classes;
      }
    }
  }
  return labels;
}

ObjectiveResult source_objective(const DetectorModel& model, const FeatureGrid& raw_grid,
                                 std::span<const BBox> proposals,
                                 std::span<const std::size_t> labels) {
  ObjectiveResult out{{}, model.zeros_like()};
  const auto pf = pool_proposals(model.backbone, raw_grid, proposals);
  const auto sc = score_proposals(model.main_head, pf.pooled);
  const auto ce = proposal_cross_entropy(sc.logits, labels);
  out.loss.main = ce.value;
  out.loss.total = ce.value;

  std::vector<std::vector<double>> pooled_grads;
  head_backward(model.main_head, pf.pooled, ce.grad, out.grad.main_head, pooled_grads);
  FeatureGrid feature_grad(raw_grid.height(), raw_grid.width(), model.backbone.out_dim());
  finish_backbone(raw_grid, pf, pooled_grads, feature_grad, out.grad);
  return out;
}

ObjectiveResult lstd_objective(const DetectorModel& model, const LstdSample& sample,
                               const LossWeights& w, bool enable_bd, bool enable_sdk) {
  const FeatureGrid& raw = *sample.raw_grid;
  ObjectiveResult out{{}, model.zeros_like()};
  const auto pf = pool_proposals(model.backbone, raw, sample.proposals);
  std::vector<std::vector<double>> pooled_grads;
  FeatureGrid feature_grad(raw.height(), raw.width(), model.backbone.out_dim());

  const auto sc = score_proposals(model.main_head, pf.pooled);
  auto ce = proposal_cross_entropy(sc.logits, sample.labels);
  out.loss.main = ce.value;
  scale(ce.grad, w.lambda_main);
  head_backward(model.main_head, pf.pooled, ce.grad, out.grad.main_head, pooled_grads);

  if (enable_sdk) {
    if (!model.sdk_head) throw std::invalid_argument("lstd_objective: model has no SDK branch");
    const auto ss = score_proposals(*model.sdk_head, pf.pooled);
    auto sdk = sdk_loss(sample.teacher, ss.logits, false);
    out.loss.sdk = sdk.value;
    scale(sdk.grad, w.lambda_sdk);
    head_backward(*model.sdk_head, pf.pooled, sdk.grad, *out.grad.sdk_head, pooled_grads);
  }
  if (enable_bd) {
    const auto bd = bd_loss(pf.features, sample.mask);
    out.loss.bd = bd.value;
    const auto src = bd.grad.values();
    auto dst = feature_grad.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w.lambda_bd * src[i];
  }
  out.loss.total = lstd_total(out.loss.main, out.loss.bd, out.loss.sdk, w);
  finish_backbone(raw, pf, pooled_grads, feature_grad, out.grad);
  return out;
}

ObjectiveResult wstd_objective(const DetectorModel& model, const WstdSample& sample,
                               const StageConfig& cfg, std::vector<PseudoLabelMatrix>* pseudo) {
  if (!model.sdk_head) throw std::invalid_argument("wstd_objective: model has no SDK branch");
  if (model.rol_heads.empty()) throw std::invalid_argument("wstd_objective: no ROL classifiers");
  const FeatureGrid& raw = *sample.raw_grid;
  const LossWeights& w = cfg.weights;
  ObjectiveResult out{{}, model.zeros_like()};
  const auto pf = pool_proposals(model.backbone, raw, sample.proposals);
  std::vector<std::vector<double>> pooled_grads;
  FeatureGrid feature_grad(raw.height(), raw.width(), model.backbone.out_dim());

  const auto ss = score_proposals(*model.sdk_head, pf.pooled);
  auto sdk = sdk_loss(sample.teacher, ss.logits, cfg.sdk_weighted);
  out.loss.sdk = sdk.value;
  scale(sdk.grad, w.lambda_wstd_sdk);
  head_backward(*model.sdk_head, pf.pooled, sdk.grad, *out.grad.sdk_head, pooled_grads);

  const bool reuse = pseudo != nullptr && !pseudo->empty();
  const std::size_t heads = model.rol_heads.size();
  if (reuse && pseudo->size() != heads - 1) {
    throw std::invalid_argument("wstd_objective: frozen pseudo labels do not match the heads");
  }
  ProposalScores prev;
  for (std::size_t i = 0; i < heads; ++i) {
    auto cur = score_proposals(model.rol_heads[i], pf.pooled);
    MatrixLoss li;
    if (i == 0) {
      li = image_multilabel_loss(cur.logits, sample.label);
    } else {
      const PseudoLabelMatrix labels =
          reuse ? (*pseudo)[i - 1]
                : label_proposals(cfg.labeller, prev.probabilities, sample.proposals, sample.label,
                                  cfg.rol);
      if (pseudo != nullptr && !reuse) pseudo->push_back(labels);
      li = rol_classifier_loss(cur.logits, labels);
    }
    out.loss.rol.push_back(li.value);
    scale(li.grad, w.lambda_wstd_rol);
    head_backward(model.rol_heads[i], pf.pooled, li.grad, out.grad.rol_heads[i], pooled_grads);
    prev = std::move(cur);
  }
  out.loss.total = wstd_total(out.loss.sdk, rol_total(out.loss.rol), w);
  finish_backbone(raw, pf, pooled_grads, feature_grad, out.grad);
  return out;
}

// --- stages ----------------------------------------------------------------------

DetectorModel init_source_model(const World& world, const StageConfig& cfg) {
  Rng rng = make_stream(cfg.seed, "source/init");
  DetectorModel m;
  m.kind = ModelKind::source;
  m.backbone = init_backbone(cfg.feature_dim, world.config().raw_dim, rng);
  m.main_head = init_head(world.config().num_source_classes + 1, cfg.feature_dim,
                          cfg.head_init_scale, rng);
  return m;
}

StageResult train_source(const World& world, const StageConfig& cfg) {
  cfg.validate();
  StageResult result{init_source_model(world, cfg), {}};
  if (cfg.source_epochs == 0 || cfg.source_scenes == 0) return result;

  const auto scenes = sample_scenes(world, Domain::source, AnnotationMode::full,
                                    cfg.source_scenes, cfg.seed, "source/train");
  std::vector<std::vector<std::size_t>> labels;
  labels.reserve(scenes.size());
  for (const auto& s : scenes) {
    labels.push_back(proposal_labels(s.proposals, s.gt, world.config().num_source_classes));
  }
  Rng order = make_stream(cfg.seed, "source/order");
  result.loss_curve = optimize(
      result.model, scenes.size(), cfg.source_epochs, stage_optimizer(cfg, cfg.source_opt), {},
      order, [&](std::size_t i) {
        return source_objective(result.model, scenes[i].raw_grid, scenes[i].proposals, labels[i]);
      });
  return result;
}

StageResult lstd_finetune(const DetectorModel& source, const World& world, const StageConfig& cfg) {
  cfg.validate();
  if (source.kind != ModelKind::source) {
    throw std::invalid_argument("lstd_finetune: a trained source model is required");
  }
  source.validate();
  if (source.main_head.classes() != world.config().num_source_classes + 1) {
    throw std::invalid_argument("lstd_finetune: source model does not match the world");
  }
  if (cfg.shots_per_class == 0) throw ConfigError("shots_per_class must be >= 1 for LSTD");

  const std::size_t ct = world.config().num_target_classes;
  const std::size_t d = source.backbone.out_dim();
  Rng init = make_stream(cfg.seed, "lstd/init");
  StageResult result;
  result.model.kind = ModelKind::warmup;
  result.model.backbone = source.backbone;
  result.model.main_head = init_head(ct + 1, d, cfg.head_init_scale, init);
  result.model.sdk_head = init_head(source.main_head.classes(), d, cfg.head_init_scale, init);

  const auto shots = sample_scene_set(world, Domain::target, AnnotationMode::full,
                                      cfg.shots_per_class, cfg.seed, "lstd/shots");
  std::vector<LstdSample> samples;
  samples.reserve(shots.size());
  for (const auto& s : shots) {
    const auto boxes = s.gt_boxes();
    samples.push_back({&s.raw_grid, s.proposals, proposal_labels(s.proposals, s.gt, ct),
                       bd_mask(s.raw_grid.height(), s.raw_grid.width(), boxes),
                       extract_sdk(source, s.raw_grid, s.proposals)});
  }
  std::size_t epochs = cfg.lstd_epochs;
  if (cfg.lstd_step_budget > 0) {
    epochs = std::min(epochs, (cfg.lstd_step_budget + samples.size() - 1) / samples.size());
  }
  Rng order = make_stream(cfg.seed, "lstd/order");
  result.loss_curve = optimize(result.model, samples.size(), epochs,
                               stage_optimizer(cfg, cfg.lstd_opt), {}, order, [&](std::size_t i) {
                                 return lstd_objective(result.model, samples[i], cfg.weights,
                                                       cfg.enable_bd, cfg.enable_sdk);
                               });
  return result;
}

DetectorModel init_target_model(const DetectorModel& warmup, const StageConfig& cfg) {
  if (!warmup.sdk_head) throw std::invalid_argument("wstd: warm-up model has no SDK branch");
  DetectorModel target;
  target.kind = ModelKind::target;
  target.backbone = warmup.backbone;
  target.main_head = warmup.main_head;
  target.sdk_head = warmup.sdk_head;
  target.rol_heads.assign(cfg.rol.num_classifiers, warmup.main_head);
  return target;
}

std::vector<BBox> select_proposals(const DetectorModel& warmup, const FeatureGrid& raw_grid,
                                   std::span<const BBox> proposals, std::size_t keep) {
  const auto pf = pool_proposals(warmup.backbone, raw_grid, proposals);
  const auto sc = score_proposals(warmup.main_head, pf.pooled);
  const std::size_t bg = sc.probabilities.classes() - 1;
  ScoredBoxSet set;
  set.boxes.assign(proposals.begin(), proposals.end());
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    set.scores.push_back(std::clamp(1.0 - sc.probabilities(bg, k), 0.0, 1.0));
  }
  std::vector<BBox> out;
  for (std::size_t k : nms(set, kSelectionNms, keep)) out.push_back(proposals[k]);
  return out;
}

std::vector<WstdSample> make_wstd_samples(const DetectorModel& warmup,
                                          std::span<const Scene> scenes, const StageConfig& cfg) {
  std::vector<WstdSample> samples;
  samples.reserve(scenes.size());
  for (const Scene& s : scenes) {
    const WeakView view = s.weak_view();
    WstdSample sample;
    sample.raw_grid = &view.raw_grid;
    sample.proposals = select_proposals(warmup, view.raw_grid, view.proposals, cfg.wstd_proposals);
    sample.label = view.image_label;
    sample.teacher = extract_sdk(warmup, view.raw_grid, sample.proposals);
    samples.push_back(std::move(sample));
  }
  return samples;
}

StageResult wstd_train(const DetectorModel& warmup, const World& world, const StageConfig& cfg) {
  cfg.validate();
  warmup.validate();
  StageResult result{init_target_model(warmup, cfg), {}};
  if (cfg.weak_scenes_per_class == 0 || cfg.wstd_epochs == 0) return result;

  Rng init = make_stream(cfg.seed, "wstd/init");
  for (Head& h : result.model.rol_heads) {
    h = init_head(warmup.main_head.classes(), warmup.backbone.out_dim(), cfg.head_init_scale, init);
  }

  const auto scenes = sample_scene_set(world, Domain::target, AnnotationMode::weak,
                                       cfg.weak_scenes_per_class, cfg.seed, "wstd/weak");
  const auto samples = make_wstd_samples(warmup, scenes, cfg);
  std::vector<std::string> frozen{"main_head"};
  if (cfg.freeze_backbone) frozen.push_back("backbone");
  Rng order = make_stream(cfg.seed, "wstd/order");
  result.loss_curve = optimize(
      result.model, samples.size(), cfg.wstd_epochs, stage_optimizer(cfg, cfg.wstd_opt), frozen,
      order, [&](std::size_t i) { return wstd_objective(result.model, samples[i], cfg); });
  return result;
}

// --- inference -------------------------------------------------------------------

const Head& inference_head(const DetectorModel& model) {
  return model.rol_heads.empty() ? model.main_head : model.rol_heads.back();
}

std::vector<Detection> detect(const DetectorModel& model, const Head& head,
                              std::span<const Scene> scenes, double nms_threshold) {
  std::vector<Detection> dets;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    const auto pf = pool_proposals(model.backbone, scene.raw_grid, scene.proposals);
    const auto sc = score_proposals(head, pf.pooled);
    const std::size_t objects = head.classes() - 1;
    for (std::size_t c = 0; c < objects; ++c) {
      ScoredBoxSet set;
      set.boxes = scene.proposals;
      const auto row = sc.probabilities.values().row(c);
      set.scores.assign(row.begin(), row.end());
      for (std::size_t k : nms(set, nms_threshold, set.boxes.size())) {
        dets.push_back({s, c, scene.proposals[k], set.scores[k]});
      }
    }
  }
  return dets;
}

GroundTruth ground_truth(std::span<const Scene> scenes) {
  GroundTruth gt;
  gt.reserve(scenes.size());
  for (const auto& s : scenes) gt.push_back(s.gt);
  return gt;
}

EvalReport evaluate_head(const DetectorModel& model, const Head& head,
                         std::span<const Scene> scenes, const StageConfig& cfg,
                         const EvalConfig& eval_cfg) {
  const auto dets = detect(model, head, scenes, cfg.detection_nms);
  return evaluate(dets, ground_truth(scenes), head.classes() - 1, eval_cfg);
}

double proposal_accuracy(const DetectorModel& model, std::span<const Scene> scenes) {
  std::size_t correct = 0, total = 0;
  const std::size_t classes = model.main_head.classes() - 1;
  for (const auto& s : scenes) {
    const auto labels = proposal_labels(s.proposals, s.gt, classes);
    const auto pf = pool_proposals(model.backbone, s.raw_grid, s.proposals);
    const auto sc = score_proposals(model.main_head, pf.pooled);
    for (std::size_t k = 0; k < s.proposals.size(); ++k) {
      const auto col = sc.probabilities.values().column(k);
      const auto arg = static_cast<std::size_t>(
          std::distance(col.begin(), std::max_element(col.begin(), col.end())));
      correct += arg == labels[k] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<Scene> target_test_scenes(const World& world, const StageConfig& cfg) {
  return sample_scenes(world, Domain::target, AnnotationMode::full, cfg.test_scenes, cfg.seed,
                       "target/test");
}

}  // namespace transdet

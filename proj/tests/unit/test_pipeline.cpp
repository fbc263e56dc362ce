#include <gtest/gtest.h>

#include "transdet/errors.hpp"
#include "transdet/experiment.hpp"
#include "transdet/pipeline.hpp"

using namespace transdet;

namespace {

StageConfig quick_config(std::uint64_t seed = 1) {
  StageConfig c;
  c.source_scenes = 40;
  c.source_epochs = 4;
  c.lstd_epochs = 20;
  c.wstd_epochs = 2;
  c.weak_scenes_per_class = 4;
  c.test_scenes = 20;
  c.feature_dim = 16;
  c.seed = seed;
  return c;
}

const World& quick_world() {
  static const World w = experiment_world(WorldConfig{}, 1);
  return w;
}

}  // namespace

TEST(ProposalLabels, AssignsBestGtAboveHalf) {
  const std::vector<LabeledBox> gt{{2, BBox(0, 0, 0.5, 0.5)}, {0, BBox(0.5, 0.5, 1, 1)}};
  const std::vector<BBox> props{BBox(0, 0, 0.5, 0.5), BBox(0.5, 0.5, 0.9, 0.9),
                                BBox(0, 0, 0.2, 0.5), BBox(0.4, 0.4, 0.6, 0.6)};
  EXPECT_EQ(proposal_labels(props, gt, 3), (std::vector<std::size_t>{2, 0, 3, 3}));
}

TEST(StageConfig, KeyValueRoundTrip) {
  StageConfig c;
  StageConfig d;
  d.set("lstd_lr", "0.004");
  d.set("labeller", "oicr");
  d.set("enable_bd", "false");
  d.set("phi_obj", "0.6");
  for (const auto& [k, v] : d.to_kv()) c.set(k, v);
  EXPECT_EQ(c.to_kv(), d.to_kv());
  EXPECT_EQ(c.labeller, Labeller::oicr);
  EXPECT_FALSE(c.enable_bd);
  EXPECT_THROW(c.set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.set("lstd_lr", "abc"), ConfigError);
  c.set("phi_obj", "0.1");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainSource, ZeroEpochsReturnsInitialization) {
  StageConfig c = quick_config();
  c.source_epochs = 0;
  const auto r = train_source(quick_world(), c);
  EXPECT_EQ(r.model, init_source_model(quick_world(), c));
  EXPECT_TRUE(r.loss_curve.empty());
}

TEST(TrainSource, DeterministicForFixedSeed) {
  const auto a = train_source(quick_world(), quick_config());
  const auto b = train_source(quick_world(), quick_config());
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.loss_curve.size(), b.loss_curve.size());
  for (std::size_t e = 0; e < a.loss_curve.size(); ++e) {
    EXPECT_EQ(a.loss_curve[e].total, b.loss_curve[e].total);
  }
}

TEST(TrainSource, DefaultScheduleClassifiesHeldOutProposals) {
  StageConfig c;
  c.seed = 3;
  const World w = experiment_world(WorldConfig{}, 3);
  const auto model = train_source(w, c).model;
  const auto held_out = sample_scenes(w, Domain::source, AnnotationMode::full, 100, 3, "held-out");
  EXPECT_GT(proposal_accuracy(model, held_out), 0.9);
}

TEST(LstdFinetune, ZeroWeightsMatchDisabledTerms) {
  const auto source = train_source(quick_world(), quick_config()).model;
  StageConfig off = quick_config();
  off.enable_bd = false;
  off.enable_sdk = false;
  StageConfig zero = quick_config();
  zero.weights.lambda_bd = 0.0;
  zero.weights.lambda_sdk = 0.0;
  const auto a = lstd_finetune(source, quick_world(), off).model;
  const auto b = lstd_finetune(source, quick_world(), zero).model;
  EXPECT_EQ(a.backbone, b.backbone);
  EXPECT_EQ(a.main_head, b.main_head);
}

TEST(LstdFinetune, RequiresASourceModel) {
  const auto source = train_source(quick_world(), quick_config()).model;
  const auto warm = lstd_finetune(source, quick_world(), quick_config()).model;
  EXPECT_EQ(warm.kind, ModelKind::warmup);
  ASSERT_TRUE(warm.sdk_head.has_value());
  EXPECT_THROW(lstd_finetune(warm, quick_world(), quick_config()), std::invalid_argument);
}

TEST(LstdFinetune, SdkLossFallsOverTheFirstEpochs) {
  double first = 0.0, second = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    StageConfig c = quick_config(seed);
    c.lstd_epochs = 2;
    const World w = experiment_world(WorldConfig{}, seed);
    const auto source = train_source(w, c).model;
    const auto r = lstd_finetune(source, w, c);
    ASSERT_EQ(r.loss_curve.size(), 2u);
    first += r.loss_curve[0].sdk;
    second += r.loss_curve[1].sdk;
  }
  EXPECT_LE(second, first);
}

class Wstd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    source_ = new DetectorModel(train_source(quick_world(), quick_config()).model);
    warm_ = new DetectorModel(lstd_finetune(*source_, quick_world(), quick_config()).model);
  }
  static void TearDownTestSuite() {
    delete source_;
    delete warm_;
  }
  static DetectorModel* source_;
  static DetectorModel* warm_;
};
DetectorModel* Wstd::source_ = nullptr;
DetectorModel* Wstd::warm_ = nullptr;

TEST_F(Wstd, NoWeakScenesReproducesWarmupMap) {
  StageConfig c = quick_config();
  c.weak_scenes_per_class = 0;
  const auto target = wstd_train(*warm_, quick_world(), c).model;
  const auto test = target_test_scenes(quick_world(), c);
  EXPECT_EQ(evaluate_head(target, inference_head(target), test, c).map,
            evaluate_head(*warm_, warm_->main_head, test, c).map);
}

TEST_F(Wstd, LeavesWarmupUntouchedAndIsDeterministic) {
  const DetectorModel before = *warm_;
  const auto a = wstd_train(*warm_, quick_world(), quick_config());
  EXPECT_EQ(*warm_, before);
  const auto b = wstd_train(*warm_, quick_world(), quick_config());
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.model.kind, ModelKind::target);
  EXPECT_EQ(a.model.rol_heads.size(), 3u);
  EXPECT_EQ(a.model.main_head, warm_->main_head);
  ASSERT_EQ(a.loss_curve.size(), 2u);
  EXPECT_EQ(a.loss_curve[0].rol.size(), 3u);
}

TEST_F(Wstd, OicrLabellerRuns) {
  StageConfig c = quick_config();
  c.labeller = Labeller::oicr;
  const auto r = wstd_train(*warm_, quick_world(), c);
  EXPECT_NE(r.model, wstd_train(*warm_, quick_world(), quick_config()).model);
}

TEST_F(Wstd, RequiresWarmupWithSdkBranch) {
  EXPECT_THROW(wstd_train(*source_, quick_world(), quick_config()), std::invalid_argument);
}

TEST_F(Wstd, PseudoLabelsAreDetachedFromThePreviousClassifier) {
  // The gradient reaching classifier 1 is the multi-label term alone: the
  // later classifiers' losses do not flow back through their pseudo labels.
  const StageConfig c = quick_config();
  DetectorModel target = init_target_model(*warm_, c);
  Rng rng(4);
  for (auto& h : target.rol_heads) h = init_head(h.classes(), h.in_dim(), 0.5, rng);
  const auto scenes = sample_scenes(quick_world(), Domain::target, AnnotationMode::weak, 3, 2, "x");
  const auto samples = make_wstd_samples(*warm_, scenes, c);
  DetectorModel first_only = target;
  first_only.rol_heads.resize(1);
  for (const auto& s : samples) {
    const auto full = wstd_objective(target, s, c);
    const auto alone = wstd_objective(first_only, s, c);
    EXPECT_EQ(full.grad.rol_heads[0], alone.grad.rol_heads[0]);
  }
}

TEST_F(Wstd, ProposalSelectionKeepsTopObjectness) {
  Rng rng3(3);
  const Scene s = sample_scene(quick_world(), Domain::target, AnnotationMode::weak, rng3);
  const auto kept = select_proposals(*warm_, s.raw_grid, s.proposals, 5);
  EXPECT_LE(kept.size(), 5u);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(kept[i], kept[j]), 0.75);
  }
}

TEST_F(Wstd, DetectionsAreNmsFilteredPerClass) {
  const auto test = target_test_scenes(quick_world(), quick_config());
  const auto dets = detect(*warm_, warm_->main_head, test, 0.5);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (dets[i].scene_id == dets[j].scene_id && dets[i].cls == dets[j].cls) {
        EXPECT_LE(iou(dets[i].box, dets[j].box), 0.5);
      }
    }
  }
}

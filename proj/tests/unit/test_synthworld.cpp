#include <gtest/gtest.h>

#include <cmath>

#include "transdet/errors.hpp"
#include "transdet/kernels.hpp"
#include "transdet/model.hpp"
#include "transdet/synthworld.hpp"

using namespace transdet;

namespace {

WorldConfig small_config() {
  WorldConfig c;
  c.num_source_classes = 3;
  c.num_target_classes = 2;
  c.raw_dim = 8;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(MakeWorld, Deterministic) {
  EXPECT_EQ(make_world(small_config()), make_world(small_config()));
  WorldConfig other = small_config();
  other.seed = 6;
  EXPECT_NE(make_world(small_config()).prototypes(), make_world(other).prototypes());
}

TEST(MakeWorld, PrototypesAreUnitAndNearlyOrthogonal) {
  const World w = make_world(small_config());
  const Matrix& p = w.prototypes();
  ASSERT_EQ(p.rows(), 6u);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double norm = 0.0;
    for (double v : p.row(r)) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    for (std::size_t q = r + 1; q < p.rows(); ++q) {
      double ip = 0.0;
      for (std::size_t d = 0; d < p.cols(); ++d) ip += p(r, d) * p(q, d);
      EXPECT_LT(ip, 0.5);
    }
  }
}

TEST(MakeWorld, InfeasibleDimensionIsRejected) {
  WorldConfig c;
  c.num_source_classes = 1;
  c.num_target_classes = 1;
  c.raw_dim = 2;
  EXPECT_THROW(make_world(c), ConfigError);
}

TEST(WorldConfig, ValidationNamesTheField) {
  WorldConfig c;
  c.jitter = 0.9;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("jitter"), std::string::npos);
  }
  WorldConfig d;
  d.repeat_class = 0.7;
  d.companion_class = 0.4;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(WorldConfig, KeyValueRoundTrip) {
  WorldConfig c = small_config();
  c.noise_sigma = 0.123;
  EXPECT_EQ(WorldConfig::from_kv(c.to_kv()), c);
  std::vector<std::pair<std::string, std::string>> bad{{"no_such_field", "1"}};
  EXPECT_THROW(WorldConfig::from_kv(bad), ConfigError);
}

TEST(SampleScene, FixedSeedReproduces) {
  const World w = make_world(small_config());
  Rng a(9), b(9);
  const Scene s1 = sample_scene(w, Domain::target, AnnotationMode::full, a);
  const Scene s2 = sample_scene(w, Domain::target, AnnotationMode::full, b);
  EXPECT_EQ(s1, s2);
  const Scene s3 = sample_scene(w, Domain::target, AnnotationMode::full, a);
  EXPECT_NE(s1, s3);
}

TEST(SampleScene, NoiselessFullCoverIsThePrototype) {
  WorldConfig c = small_config();
  c.noise_sigma = 0.0;
  c.clutter_sigma = 0.0;
  const World w = make_world(c);
  const std::vector<LabeledBox> objects{{1, BBox(0, 0, 1, 1)}};
  Rng rng(1);
  const FeatureGrid g = render_grid(w, Domain::source, objects, rng);
  const auto proto = w.prototype(Domain::source, 1);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    for (std::size_t d = 0; d < c.raw_dim; ++d) EXPECT_EQ(g.cell(cell)[d], proto[d]);
  }
}

TEST(SampleScene, ZeroJitterGivesExactGroundTruthProposals) {
  WorldConfig c = small_config();
  c.jitter = 0.0;
  const World w = make_world(c);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Scene s = sample_scene(w, Domain::target, AnnotationMode::full, rng);
    ASSERT_GE(s.proposals.size(), s.gt.size());
    for (std::size_t i = 0; i < s.gt.size(); ++i) {
      EXPECT_DOUBLE_EQ(iou(s.proposals[i], s.gt[i].box), 1.0);
    }
  }
}

TEST(SampleScene, ImageLabelMatchesGroundTruth) {
  const World w = make_world(small_config());
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Scene s = sample_scene(w, Domain::source, AnnotationMode::weak, rng);
    for (std::size_t c = 0; c < w.classes(Domain::source); ++c) {
      bool any = false;
      for (const auto& g : s.gt) any = any || g.cls == c;
      EXPECT_EQ(s.image_label.present(c), any);
    }
    EXPECT_LE(s.proposals.size(), small_config().proposals_per_scene);
    const WeakView v = s.weak_view();
    EXPECT_EQ(&v.raw_grid, &s.raw_grid);
    EXPECT_EQ(v.proposals.size(), s.proposals.size());
  }
}

TEST(SampleScene, RequiredClassComesFirst) {
  const World w = make_world(small_config());
  Rng rng(8);
  for (std::size_t c = 0; c < 2; ++c) {
    const Scene s = sample_scene(w, Domain::target, AnnotationMode::full, rng, c);
    EXPECT_EQ(s.gt.front().cls, c);
  }
  EXPECT_THROW(sample_scene(w, Domain::target, AnnotationMode::full, rng, 2),
               std::invalid_argument);
}

TEST(SampleScene, NoiselessWorldIsLearnable) {
  WorldConfig c = small_config();
  c.jitter = 0.0;
  c.noise_sigma = 0.0;
  c.clutter_sigma = 0.0;
  c.max_objects = 1;
  c.min_box_side = 0.3;
  c.max_box_side = 0.6;
  const World w = make_world(c);
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const Scene s = sample_scene(w, Domain::target, AnnotationMode::full, rng);
    const auto pooled = roi_pool(s.raw_grid, s.proposals[0]);
    std::size_t best = 0;
    double best_ip = -1e9;
    for (std::size_t k = 0; k < w.classes(Domain::target); ++k) {
      const double ip = kernels::dot(pooled, w.prototype(Domain::target, k));
      if (ip > best_ip) {
        best_ip = ip;
        best = k;
      }
    }
    EXPECT_EQ(best, s.gt[0].cls);
  }
}

TEST(SceneSets, PerClassSetsContainTheirClass) {
  const World w = make_world(small_config());
  const auto scenes = sample_scene_set(w, Domain::target, AnnotationMode::weak, 3, 7, "test");
  ASSERT_EQ(scenes.size(), 6u);
  for (std::size_t i = 0; i < scenes.size(); ++i) EXPECT_TRUE(scenes[i].image_label.present(i % 2));
  EXPECT_EQ(scenes, sample_scene_set(w, Domain::target, AnnotationMode::weak, 3, 7, "test"));
  EXPECT_EQ(sample_scenes(w, Domain::source, AnnotationMode::full, 4, 7, "x").size(), 4u);
}

TEST(Serialization, WorldAndScenesRoundTripBitExactly) {
  const World w = make_world(small_config());
  EXPECT_EQ(world_from_text(world_to_text(w)), w);
  const auto scenes = sample_scenes(w, Domain::target, AnnotationMode::weak, 5, 3, "io");
  const SceneFile f = scenes_from_text(scenes_to_text(3, scenes));
  EXPECT_EQ(f.seed, 3u);
  EXPECT_EQ(f.scenes, scenes);
}

TEST(Serialization, MalformedScenesReportLine) {
  EXPECT_THROW(scenes_from_text("garbage\n"), MalformedDataError);
  EXPECT_THROW(world_from_text("garbage\n"), MalformedDataError);
}

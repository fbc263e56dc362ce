#pragma once

// Seeded synthetic detection scenes. A world fixes one unit prototype per
// class (source classes, then target classes, then background). A scene
// paints object prototypes into the cells whose centers fall inside each
// object box, fills the rest with scaled background clutter, adds Gaussian
// noise, and generates proposals around objects and at random.

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

struct WorldConfig {
  std::size_t num_source_classes = 6;
  std::size_t num_target_classes = 4;
  std::size_t raw_dim = 16;
  std::size_t grid_height = 8;
  std::size_t grid_width = 8;
  double noise_sigma = 0.3;
  double clutter_sigma = 0.5;
  double jitter = 0.15;
  std::size_t proposals_per_scene = 32;
  std::size_t min_objects = 1;
  std::size_t max_objects = 3;
  std::uint64_t seed = 0;

  // Shape of the generator beyond the core parameters above.
  double relatedness = 0.4;          // inner product of a target prototype with its source relative
  double target_similarity = 0.0;    // weight of a direction shared by all target prototypes
  double min_box_side = 0.1;         // object box side range, fraction of the scene
  double max_box_side = 0.25;
  std::size_t context_proposals = 3; // loosely jittered proposals per object
  double context_jitter = 0.25;
  double repeat_class = 0.5;         // chance an object reuses the previous object's class
  double companion_class = 0.0;      // chance an object takes the class after the previous one

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::vector<std::pair<std::string, std::string>> to_kv() const;
  /// Unknown keys throw ConfigError; missing keys keep their defaults.
  static WorldConfig from_kv(std::span<const std::pair<std::string, std::string>> kv);

  bool operator==(const WorldConfig&) const = default;
};

enum class Domain { source, target };
enum class AnnotationMode { full, weak };

std::string_view to_string(Domain d) noexcept;
std::string_view to_string(AnnotationMode m) noexcept;
Domain parse_domain(std::string_view s);
AnnotationMode parse_mode(std::string_view s);

class World {
 public:
  World(WorldConfig config, Matrix prototypes);

  const WorldConfig& config() const noexcept { return config_; }
  /// (C_s + C_t + 1) x D0, one unit prototype per row, background last.
  const Matrix& prototypes() const noexcept { return prototypes_; }

  std::size_t classes(Domain d) const noexcept;
  std::span<const double> prototype(Domain d, std::size_t cls) const;
  std::span<const double> background_prototype() const;

  bool operator==(const World&) const = default;

 private:
  WorldConfig config_;
  Matrix prototypes_;
};

World make_world(const WorldConfig& config);

/// Read-only view handed to weakly supervised training: no boxes.
struct WeakView {
  const FeatureGrid& raw_grid;
  std::span<const BBox> proposals;
  const ImageLabel& image_label;
};

struct Scene {
  Domain domain = Domain::target;
  AnnotationMode mode = AnnotationMode::full;
  FeatureGrid raw_grid;
  std::vector<LabeledBox> gt;
  std::vector<BBox> proposals;
  ImageLabel image_label;

  WeakView weak_view() const { return {raw_grid, proposals, image_label}; }
  std::vector<BBox> gt_boxes() const;

  bool operator==(const Scene&) const = default;
};

/// Observation grid for a fixed set of objects (noise drawn from `rng`).
FeatureGrid render_grid(const World& world, Domain domain, std::span<const LabeledBox> objects,
                        Rng& rng);

/// Proposals for a fixed set of objects: jittered GT boxes first (in object
/// order), then context and random boxes deduplicated at IoU 0.75.
std::vector<BBox> generate_proposals(const World& world, std::span<const LabeledBox> objects,
                                     Rng& rng);

/// Draws a scene. When `required_class` is set, the first object has that class.
Scene sample_scene(const World& world, Domain domain, AnnotationMode mode, Rng& rng,
                   std::optional<std::size_t> required_class = std::nullopt);

/// `per_class` scenes for every class of `domain`, each containing that class.
/// Scene s * classes + c contains class c and is drawn from sub-stream
/// s * classes + c of `seed`.
std::vector<Scene> sample_scene_set(const World& world, Domain domain, AnnotationMode mode,
                                    std::size_t per_class, std::uint64_t seed,
                                    std::string_view stream);

/// `count` scenes with uniformly drawn classes.
std::vector<Scene> sample_scenes(const World& world, Domain domain, AnnotationMode mode,
                                 std::size_t count, std::uint64_t seed, std::string_view stream);

// Line-oriented text formats; doubles round-trip bit-exactly.
std::string world_to_text(const World& world);
World world_from_text(std::string_view text);
std::string scenes_to_text(std::uint64_t seed, std::span<const Scene> scenes);
struct SceneFile {
  std::uint64_t seed = 0;
  std::vector<Scene> scenes;
};
SceneFile scenes_from_text(std::string_view text);

}  // namespace transdet

#include "transdet/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "transdet/errors.hpp"
#include "transdet/kernels.hpp"
#include "transdet/textio.hpp"

namespace transdet {

namespace {

constexpr double kProposalDedupIou = 0.75;
constexpr double kRandomBoxMin = 0.25;
constexpr double kRandomBoxMax = 0.6;
constexpr std::size_t kMaxProposalAttempts = 100000;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

BBox random_box(Rng& rng, double min_side, double max_side) {
  const double w = uniform(rng, min_side, max_side);
  const double h = uniform(rng, min_side, max_side);
  const double x = uniform(rng, 0.0, 1.0 - w);
  const double y = uniform(rng, 0.0, 1.0 - h);
  return BBox(x, y, std::min(1.0, x + w), std::min(1.0, y + h));
}

// Perturbs every corner by up to `amount` of the box side; falls back to the
// original box if clamping made it degenerate.
BBox jitter_box(const BBox& b, double amount, Rng& rng) {
  if (amount <= 0.0) return b;
  const double w = b.width();
  const double h = b.height();
  const double x1 = std::clamp(b.x1() + uniform(rng, -amount, amount) * w, 0.0, 1.0);
  const double y1 = std::clamp(b.y1() + uniform(rng, -amount, amount) * h, 0.0, 1.0);
  const double x2 = std::clamp(b.x2() + uniform(rng, -amount, amount) * w, 0.0, 1.0);
  const double y2 = std::clamp(b.y2() + uniform(rng, -amount, amount) * h, 0.0, 1.0);
  if (x2 - x1 < 1e-3 || y2 - y1 < 1e-3) return b;
  return BBox(x1, y1, x2, y2);
}

std::size_t as_size(const std::string& key, const std::string& v) {
  try {
    return static_cast<std::size_t>(textio::parse_uint(v));
  } catch (const std::invalid_argument&) {
    throw ConfigError("world config field '" + key + "' expects a nonnegative integer");
  }
}

double as_double(const std::string& key, const std::string& v) {
  try {
    return textio::parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError("world config field '" + key + "' expects a number");
  }
}

template <typename Visitor>
void visit_fields(WorldConfig& c, Visitor&& v) {
  v("num_source_classes", c.num_source_classes);
  v("num_target_classes", c.num_target_classes);
  v("raw_dim", c.raw_dim);
  v("grid_height", c.grid_height);
  v("grid_width", c.grid_width);
  v("noise_sigma", c.noise_sigma);
  v("clutter_sigma", c.clutter_sigma);
  v("jitter", c.jitter);
  v("proposals_per_scene", c.proposals_per_scene);
  v("min_objects", c.min_objects);
  v("max_objects", c.max_objects);
  v("seed", c.seed);
  v("relatedness", c.relatedness);
  v("target_similarity", c.target_similarity);
  v("min_box_side", c.min_box_side);
  v("max_box_side", c.max_box_side);
  v("context_proposals", c.context_proposals);
  v("context_jitter", c.context_jitter);
  v("repeat_class", c.repeat_class);
  v("companion_class", c.companion_class);
}

std::string field_to_string(double v) { return textio::format_double(v); }
std::string field_to_string(std::size_t v) { return std::to_string(v); }

}  // namespace

void WorldConfig::validate() const {
  require(num_source_classes >= 1, "num_source_classes must be >= 1");
  require(num_target_classes >= 1, "num_target_classes must be >= 1");
  require(raw_dim >= num_source_classes + num_target_classes + 1,
          "raw_dim must be >= num_source_classes + num_target_classes + 1");
  require(grid_height >= 1, "grid_height must be >= 1");
  require(grid_width >= 1, "grid_width must be >= 1");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(std::isfinite(clutter_sigma) && clutter_sigma >= 0.0, "clutter_sigma must be >= 0");
  require(jitter >= 0.0 && jitter < 0.5, "jitter must satisfy 0 <= jitter < 0.5");
  require(min_objects >= 1, "min_objects must be >= 1");
  require(max_objects >= min_objects, "max_objects must be >= min_objects");
  require(proposals_per_scene >= max_objects,
          "proposals_per_scene must be >= max_objects (the objects_per_scene upper bound)");
  require(relatedness >= 0.0 && relatedness < 0.5, "relatedness must satisfy 0 <= r < 0.5");
  require(target_similarity >= 0.0 && target_similarity < std::sqrt(0.5),
          "target_similarity must satisfy 0 <= s < sqrt(0.5)");
  require(target_similarity == 0.0 || raw_dim >= num_source_classes + num_target_classes + 2,
          "raw_dim must be >= num_source_classes + num_target_classes + 2 when target_similarity > 0");
  require(min_box_side > 0.0 && min_box_side <= max_box_side && max_box_side <= 1.0,
          "box sides must satisfy 0 < min_box_side <= max_box_side <= 1");
  require(context_jitter >= 0.0 && context_jitter < 0.5,
          "context_jitter must satisfy 0 <= context_jitter < 0.5");
  require(repeat_class >= 0.0 && companion_class >= 0.0 && repeat_class + companion_class <= 1.0,
          "repeat_class and companion_class must be >= 0 with a sum <= 1");
}

std::vector<std::pair<std::string, std::string>> WorldConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  WorldConfig copy = *this;
  visit_fields(copy, [&](const char* key, auto& field) {
    kv.emplace_back(key, field_to_string(field));
  });
  return kv;
}

WorldConfig WorldConfig::from_kv(std::span<const std::pair<std::string, std::string>> kv) {
  WorldConfig c;
  for (const auto& [key, value] : kv) {
    bool found = false;
    visit_fields(c, [&](const char* name, auto& field) {
      if (key != name) return;
      found = true;
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_same_v<T, double>) {
        field = as_double(key, value);
      } else {
        field = static_cast<T>(as_size(key, value));
      }
    });
    if (!found) throw ConfigError("unknown world config field '" + key + "'");
  }
  return c;
}

std::string_view to_string(Domain d) noexcept { return d == Domain::source ? "source" : "target"; }

std::string_view to_string(AnnotationMode m) noexcept {
  return m == AnnotationMode::full ? "full" : "weak";
}

Domain parse_domain(std::string_view s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw std::invalid_argument("unknown domain '" + std::string(s) + "'");
}

AnnotationMode parse_mode(std::string_view s) {
  if (s == "full") return AnnotationMode::full;
  if (s == "weak") return AnnotationMode::weak;
  throw std::invalid_argument("unknown annotation mode '" + std::string(s) + "'");
}

World::World(WorldConfig config, Matrix prototypes)
    : config_(std::move(config)), prototypes_(std::move(prototypes)) {
  const std::size_t count = config_.num_source_classes + config_.num_target_classes + 1;
  if (prototypes_.rows() != count || prototypes_.cols() != config_.raw_dim) {
    throw std::invalid_argument("World: prototype matrix shape does not match config");
  }
}

std::size_t World::classes(Domain d) const noexcept {
  return d == Domain::source ? config_.num_source_classes : config_.num_target_classes;
}

std::span<const double> World::prototype(Domain d, std::size_t cls) const {
  if (cls >= classes(d)) throw std::out_of_range("World::prototype: class out of range");
  return prototypes_.row(d == Domain::source ? cls : config_.num_source_classes + cls);
}

std::span<const double> World::background_prototype() const {
  return prototypes_.row(prototypes_.rows() - 1);
}

World make_world(const WorldConfig& config) {
  config.validate();
  const std::size_t cs = config.num_source_classes;
  const std::size_t ct = config.num_target_classes;
  const std::size_t count = cs + ct + 1;
  const std::size_t dim = config.raw_dim;
  const double b = config.target_similarity;
  const std::size_t basis_rows = b > 0.0 ? count + 1 : count;

  // Orthonormal basis by Gram-Schmidt over Gaussian draws.
  Rng rng = make_stream(config.seed, "world/prototypes");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix basis(basis_rows, dim);
  for (std::size_t r = 0; r < basis_rows; ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100) throw ConfigError("raw_dim too small to orthogonalize prototypes");
      auto v = basis.row(r);
      for (double& x : v) x = normal(rng);
      for (std::size_t q = 0; q < r; ++q) kernels::axpy(-kernels::dot(v, basis.row(q)), basis.row(q), v);
      const double norm = std::sqrt(kernels::sum_squares(v));
      if (norm < 1e-6) continue;
      for (double& x : v) x /= norm;
      break;
    }
  }

  // Each target class leans towards one random source class and, with
  // target_similarity > 0, towards a direction shared by the target classes.
  Matrix protos(count, dim);
  for (std::size_t r = 0; r < count; ++r) std::copy_n(basis.row(r).begin(), dim, protos.row(r).begin());
  const double a = config.relatedness;
  const double own = std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
  for (std::size_t t = 0; t < ct; ++t) {
    const std::size_t relative = uniform_index(rng, 0, cs - 1);
    auto row = protos.row(cs + t);
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] = own * basis(cs + t, d) + a * basis(relative, d);
      if (b > 0.0) row[d] += b * basis(count, d);
    }
    const double norm = std::sqrt(kernels::sum_squares(row));
    for (double& x : row) x /= norm;
  }

  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t q = p + 1; q < count; ++q) {
      if (!(kernels::dot(protos.row(p), protos.row(q)) < 0.5)) {
        throw ConfigError("prototype inner-product invariant (< 0.5) could not be met");
      }
    }
  }
  return World(config, std::move(protos));
}

std::vector<BBox> Scene::gt_boxes() const {
  std::vector<BBox> out;
  out.reserve(gt.size());
  for (const auto& g : gt) out.push_back(g.box);
  return out;
}

FeatureGrid render_grid(const World& world, Domain domain, std::span<const LabeledBox> objects,
                        Rng& rng) {
  const WorldConfig& cfg = world.config();
  FeatureGrid grid(cfg.grid_height, cfg.grid_width, cfg.raw_dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < cfg.grid_height; ++i) {
    for (std::size_t j = 0; j < cfg.grid_width; ++j) {
      auto cell = grid.cell(i, j);
      double max_cover = 0.0;
      for (const LabeledBox& o : objects) {
        if (cell_in_box(o.box, i, j, cfg.grid_height, cfg.grid_width)) {
          kernels::axpy(1.0, world.prototype(domain, o.cls), cell);
          max_cover = 1.0;
        }
      }
      kernels::axpy((1.0 - max_cover) * cfg.clutter_sigma, world.background_prototype(), cell);
      if (cfg.noise_sigma > 0.0) {
        for (double& v : cell) v += cfg.noise_sigma * noise(rng);
      }
    }
  }
  return grid;
}

std::vector<BBox> generate_proposals(const World& world, std::span<const LabeledBox> objects,
                                     Rng& rng) {
  const WorldConfig& cfg = world.config();
  const std::size_t k_total = cfg.proposals_per_scene;
  std::vector<BBox> kept;
  kept.reserve(k_total);
  for (const LabeledBox& o : objects) kept.push_back(jitter_box(o.box, cfg.jitter, rng));

  // Remaining candidates compete at uniform score in random order, so the
  // greedy pass below is NMS with a random tie order.
  std::vector<BBox> candidates;
  for (const LabeledBox& o : objects) {
    for (std::size_t c = 0; c < cfg.context_proposals; ++c) {
      candidates.push_back(jitter_box(o.box, cfg.context_jitter, rng));
    }
  }
  while (candidates.size() + kept.size() < k_total) {
    candidates.push_back(random_box(rng, kRandomBoxMin, kRandomBoxMax));
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);

  // A candidate is also redundant when it pools exactly the cells of a kept box.
  auto pooled_cells = [&](const BBox& b) {
    auto cells = cells_in_box(b, cfg.grid_height, cfg.grid_width);
    if (cells.empty()) cells.push_back(nearest_cell(b, cfg.grid_height, cfg.grid_width));
    return cells;
  };
  std::vector<std::vector<std::size_t>> kept_cells;
  for (const BBox& k : kept) kept_cells.push_back(pooled_cells(k));
  auto try_keep = [&](const BBox& b) {
    for (const BBox& k : kept) {
      if (iou(b, k) > kProposalDedupIou) return;
    }
    auto cells = pooled_cells(b);
    if (std::find(kept_cells.begin(), kept_cells.end(), cells) != kept_cells.end()) return;
    kept.push_back(b);
    kept_cells.push_back(std::move(cells));
  };
  for (const BBox& b : candidates) {
    if (kept.size() >= k_total) break;
    try_keep(b);
  }
  for (std::size_t attempt = 0; kept.size() < k_total; ++attempt) {
    const BBox b = random_box(rng, kRandomBoxMin, kRandomBoxMax);
    if (attempt >= kMaxProposalAttempts) {
      kept.push_back(b);
    } else {
      try_keep(b);
    }
  }
  return kept;
}

Scene sample_scene(const World& world, Domain domain, AnnotationMode mode, Rng& rng,
                   std::optional<std::size_t> required_class) {
  const WorldConfig& cfg = world.config();
  const std::size_t classes = world.classes(domain);
  if (required_class && *required_class >= classes) {
    throw std::invalid_argument("sample_scene: required class out of range");
  }
  Scene scene;
  scene.domain = domain;
  scene.mode = mode;
  const std::size_t n = uniform_index(rng, cfg.min_objects, cfg.max_objects);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t cls = 0;
    if (o == 0 && required_class) {
      cls = *required_class;
    } else {
      const double u = o > 0 ? uniform(rng, 0.0, 1.0) : 1.0;
      if (u < cfg.repeat_class) {
        cls = scene.gt.back().cls;
      } else if (u < cfg.repeat_class + cfg.companion_class) {
        cls = (scene.gt.back().cls + 1) % classes;
      } else {
        cls = uniform_index(rng, 0, classes - 1);
      }
    }
    scene.gt.push_back({cls, random_box(rng, cfg.min_box_side, cfg.max_box_side)});
  }
  scene.raw_grid = render_grid(world, domain, scene.gt, rng);
  scene.proposals = generate_proposals(world, scene.gt, rng);
  scene.image_label = ImageLabel(classes);
  for (const auto& g : scene.gt) scene.image_label.set(g.cls);
  return scene;
}

std::vector<Scene> sample_scene_set(const World& world, Domain domain, AnnotationMode mode,
                                    std::size_t per_class, std::uint64_t seed,
                                    std::string_view stream) {
  std::vector<Scene> scenes;
  const std::size_t classes = world.classes(domain);
  scenes.reserve(per_class * classes);
  for (std::size_t s = 0; s < per_class; ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      Rng rng = make_stream(seed, stream, s * classes + c);
      scenes.push_back(sample_scene(world, domain, mode, rng, c));
    }
  }
  return scenes;
}

std::vector<Scene> sample_scenes(const World& world, Domain domain, AnnotationMode mode,
                                 std::size_t count, std::uint64_t seed, std::string_view stream) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_stream(seed, stream, i);
    scenes.push_back(sample_scene(world, domain, mode, rng));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Text formats

namespace {

std::map<std::string, std::string> parse_header_fields(std::string_view line, std::size_t lineno) {
  std::map<std::string, std::string> out;
  for (auto tok : textio::split(line, ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
  }
  if (out.empty()) throw MalformedDataError("header carries no key=value fields", lineno);
  return out;
}

const std::string& field(const std::map<std::string, std::string>& m, const std::string& key,
                         std::size_t lineno) {
  auto it = m.find(key);
  if (it == m.end()) throw MalformedDataError("missing field '" + key + "'", lineno);
  return it->second;
}

std::vector<double> parse_numbers(std::string_view s, std::size_t lineno) {
  std::vector<double> out;
  for (auto tok : textio::split(s, ' ')) {
    try {
      out.push_back(textio::parse_double(tok));
    } catch (const std::invalid_argument& e) {
      throw MalformedDataError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace

std::string world_to_text(const World& world) {
  std::string out = "# transdet world v1 seed=" + std::to_string(world.config().seed) + "\n";
  for (const auto& [k, v] : world.config().to_kv()) out += "config " + k + "=" + v + "\n";
  const Matrix& p = world.prototypes();
  for (std::size_t r = 0; r < p.rows(); ++r) {
    out += "prototype " + std::to_string(r) + " ";
    textio::append_doubles(out, p.row(r));
    out += "\n";
  }
  return out;
}

World world_from_text(std::string_view text) {
  const auto lines = textio::split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("# transdet world v1")) {
    throw MalformedDataError("not a transdet world file", 1);
  }
  std::vector<std::pair<std::string, std::string>> kv;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = textio::trim(lines[i]);
    if (line.empty()) continue;
    if (line.starts_with("config ")) {
      const auto body = line.substr(7);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw MalformedDataError("config line without '='", i + 1);
      kv.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
    } else if (line.starts_with("prototype ")) {
      auto nums = parse_numbers(line.substr(10), i + 1);
      if (nums.empty() || nums.front() != static_cast<double>(rows.size())) {
        throw MalformedDataError("prototype rows out of order", i + 1);
      }
      nums.erase(nums.begin());
      rows.push_back(std::move(nums));
    } else {
      throw MalformedDataError("unrecognized line", i + 1);
    }
  }
  const WorldConfig cfg = WorldConfig::from_kv(kv);
  cfg.validate();
  Matrix protos(rows.size(), cfg.raw_dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cfg.raw_dim) throw MalformedDataError("prototype length mismatch");
    std::copy(rows[r].begin(), rows[r].end(), protos.row(r).begin());
  }
  return World(cfg, std::move(protos));
}

std::string scenes_to_text(std::uint64_t seed, std::span<const Scene> scenes) {
  std::string out = "# transdet scenes v1 seed=" + std::to_string(seed) +
                    " count=" + std::to_string(scenes.size()) + "\n";
  for (const Scene& s : scenes) {
    out += "scene domain=";
    out += to_string(s.domain);
    out += " mode=";
    out += to_string(s.mode);
    out += " H=" + std::to_string(s.raw_grid.height()) + " W=" + std::to_string(s.raw_grid.width()) +
           " D=" + std::to_string(s.raw_grid.depth()) + " K=" + std::to_string(s.proposals.size()) +
           " C=" + std::to_string(s.image_label.size()) + " N=" + std::to_string(s.gt.size());
    out += " | grid ";
    textio::append_doubles(out, s.raw_grid.values());
    out += " | gt";
    for (const auto& g : s.gt) {
      out += " " + std::to_string(g.cls) + " ";
      const double b[4] = {g.box.x1(), g.box.y1(), g.box.x2(), g.box.y2()};
      textio::append_doubles(out, b);
    }
    out += " | proposals";
    for (const auto& p : s.proposals) {
      out += " ";
      const double b[4] = {p.x1(), p.y1(), p.x2(), p.y2()};
      textio::append_doubles(out, b);
    }
    out += " | label";
    for (std::size_t c = 0; c < s.image_label.size(); ++c) {
      out += s.image_label.present(c) ? " 1" : " 0";
    }
    out += "\n";
  }
  return out;
}

SceneFile scenes_from_text(std::string_view text) {
  const auto lines = textio::split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("# transdet scenes v1")) {
    throw MalformedDataError("not a transdet scene file", 1);
  }
  SceneFile file;
  const auto header = parse_header_fields(lines[0], 1);
  std::size_t expected = 0;
  try {
    file.seed = textio::parse_uint(field(header, "seed", 1));
    expected = textio::parse_uint(field(header, "count", 1));
  } catch (const std::invalid_argument& e) {
    throw MalformedDataError(e.what(), 1);
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto line = textio::trim(lines[i]);
    if (line.empty()) continue;
    if (!line.starts_with("scene ")) throw MalformedDataError("expected a scene record", lineno);
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const auto bar = line.find(" | ", start);
      parts.push_back(line.substr(start, bar == std::string_view::npos ? std::string_view::npos
                                                                       : bar - start));
      if (bar == std::string_view::npos) break;
      start = bar + 3;
    }
    if (parts.size() != 5 || !parts[1].starts_with("grid") || !parts[2].starts_with("gt") ||
        !parts[3].starts_with("proposals") || !parts[4].starts_with("label")) {
      throw MalformedDataError("scene record must have grid|gt|proposals|label sections", lineno);
    }
    const auto h = parse_header_fields(parts[0], lineno);
    Scene s;
    std::size_t H = 0, W = 0, D = 0, K = 0, C = 0, N = 0;
    try {
      s.domain = parse_domain(field(h, "domain", lineno));
      s.mode = parse_mode(field(h, "mode", lineno));
      H = textio::parse_uint(field(h, "H", lineno));
      W = textio::parse_uint(field(h, "W", lineno));
      D = textio::parse_uint(field(h, "D", lineno));
      K = textio::parse_uint(field(h, "K", lineno));
      C = textio::parse_uint(field(h, "C", lineno));
      N = textio::parse_uint(field(h, "N", lineno));
    } catch (const std::invalid_argument& e) {
      throw MalformedDataError(e.what(), lineno);
    }
    const auto grid = parse_numbers(parts[1].substr(4), lineno);
    const auto gt = parse_numbers(parts[2].substr(2), lineno);
    const auto props = parse_numbers(parts[3].substr(9), lineno);
    const auto label = parse_numbers(parts[4].substr(5), lineno);
    if (grid.size() != H * W * D || gt.size() != 5 * N || props.size() != 4 * K ||
        label.size() != C) {
      throw MalformedDataError("section lengths disagree with the record header", lineno);
    }
    try {
      s.raw_grid = FeatureGrid(H, W, D);
      std::copy(grid.begin(), grid.end(), s.raw_grid.values().begin());
      for (std::size_t o = 0; o < N; ++o) {
        const double* g = gt.data() + 5 * o;
        s.gt.push_back({static_cast<std::size_t>(g[0]), BBox(g[1], g[2], g[3], g[4])});
      }
      for (std::size_t k = 0; k < K; ++k) {
        const double* p = props.data() + 4 * k;
        s.proposals.emplace_back(p[0], p[1], p[2], p[3]);
      }
      s.image_label = ImageLabel(C);
      for (std::size_t c = 0; c < C; ++c) s.image_label.set(c, label[c] != 0.0);
    } catch (const std::invalid_argument& e) {
      throw MalformedDataError(e.what(), lineno);
    }
    file.scenes.push_back(std::move(s));
  }
  if (file.scenes.size() != expected) {
    throw MalformedDataError("header count disagrees with the number of scene records");
  }
  return file;
}

}  // namespace transdet

#include "transdet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "transdet/errors.hpp"
#include "transdet/textio.hpp"

namespace transdet {

namespace {

std::string join_names() {
  std::string out;
  for (const auto& n : experiment_names()) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (auto part : textio::split(value, ',')) {
    const auto item = textio::trim(part);
    if (item.empty()) continue;
    try {
      out.push_back(static_cast<T>(parse(item)));
    } catch (const std::invalid_argument&) {
      throw ConfigError("'" + key + "' has a bad entry '" + std::string(item) + "'");
    }
  }
  return out;
}

std::string join_list(const auto& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += std::to_string(v);
  }
  return out;
}

struct SeedContext {
  const ExperimentSpec& spec;
  World world;
  StageConfig base;
  std::vector<Scene> test;
  DetectorModel source;

  SeedContext(const ExperimentSpec& s, std::uint64_t seed)
      : spec(s), world(experiment_world(s.world, seed)), base(s.stage) {
    base.seed = seed;
    test = target_test_scenes(world, base);
    source = train_source(world, base).model;
  }

  EvalReport eval(const DetectorModel& m, const Head& h) const {
    return evaluate_head(m, h, test, base, spec.eval);
  }

  CellResult row(std::string cell, std::string stage, const StageConfig& cfg, std::size_t weak,
                 EvalReport report) const {
    return {std::move(cell), base.seed,  std::move(stage),
            cfg.shots_per_class, weak, std::string(to_string(cfg.labeller)),
            std::move(report)};
  }

  DetectorModel warmup(const StageConfig& cfg) const {
    return lstd_finetune(source, world, cfg).model;
  }
};

void run_table3(const SeedContext& ctx, std::vector<CellResult>& out) {
  struct Ablation {
    const char* name;
    bool sdk;
    bool bd;
  };
  constexpr Ablation kRows[] = {{"FT", false, false}, {"FT+SDK", true, false}, {"FT+SDK+BD", true, true}};
  for (std::size_t shots : ctx.spec.shots) {
    for (const auto& a : kRows) {
      StageConfig cfg = ctx.base;
      cfg.shots_per_class = shots;
      cfg.enable_sdk = a.sdk;
      cfg.enable_bd = a.bd;
      const auto m = ctx.warmup(cfg);
      out.push_back(ctx.row(std::string(a.name) + "/" + std::to_string(shots) + "shot", "lstd",
                            cfg, 0, ctx.eval(m, m.main_head)));
    }
  }
}

void run_table5(const SeedContext& ctx, std::vector<CellResult>& out) {
  for (std::size_t shots : ctx.spec.shots) {
    StageConfig cfg = ctx.base;
    cfg.shots_per_class = shots;
    const auto warm = ctx.warmup(cfg);
    const std::string suffix = "/" + std::to_string(shots) + "shot";
    out.push_back(ctx.row("lstd" + suffix, "lstd", cfg, 0, ctx.eval(warm, warm.main_head)));
    const auto target = wstd_train(warm, ctx.world, cfg).model;
    out.push_back(ctx.row("wstd" + suffix, "wstd", cfg, cfg.weak_scenes_per_class,
                          ctx.eval(target, inference_head(target))));
  }
}

void run_table6(const SeedContext& ctx, std::vector<CellResult>& out) {
  const auto warm = ctx.warmup(ctx.base);
  for (Labeller l : {Labeller::rol, Labeller::oicr}) {
    StageConfig cfg = ctx.base;
    cfg.labeller = l;
    const auto target = wstd_train(warm, ctx.world, cfg).model;
    for (std::size_t i = 0; i < target.rol_heads.size(); ++i) {
      out.push_back(ctx.row(std::string(to_string(l)) + "/c" + std::to_string(i + 1),
                            "wstd.c" + std::to_string(i + 1), cfg, cfg.weak_scenes_per_class,
                            ctx.eval(target, target.rol_heads[i])));
    }
  }
}

void run_wstd_cell(const SeedContext& ctx, const DetectorModel& warm, const std::string& cell,
                   const StageConfig& cfg, std::vector<CellResult>& out) {
  const auto target = wstd_train(warm, ctx.world, cfg).model;
  out.push_back(ctx.row(cell, "wstd", cfg, cfg.weak_scenes_per_class,
                        ctx.eval(target, inference_head(target))));
}

void run_fig7(const SeedContext& ctx, std::vector<CellResult>& out) {
  const auto warm = ctx.warmup(ctx.base);
  StageConfig without = ctx.base;
  without.weights.lambda_wstd_sdk = 0.0;
  run_wstd_cell(ctx, warm, "sdk_without", without, out);
  StageConfig unweighted = ctx.base;
  unweighted.sdk_weighted = false;
  run_wstd_cell(ctx, warm, "sdk_unweighted", unweighted, out);
  StageConfig weighted = ctx.base;
  weighted.sdk_weighted = true;
  run_wstd_cell(ctx, warm, "sdk_weighted", weighted, out);
}

void run_fig9(const SeedContext& ctx, std::vector<CellResult>& out) {
  const auto warm = ctx.warmup(ctx.base);
  for (double phi : {0.4, 0.5, 0.6, 0.7, 0.8}) {
    StageConfig cfg = ctx.base;
    cfg.rol.phi_obj = phi;
    cfg.rol.phi_bg = std::min(cfg.rol.phi_bg, phi - 0.1);
    run_wstd_cell(ctx, warm, "phi_obj=" + textio::format_double(phi), cfg, out);
  }
  for (double phi : {0.1, 0.2, 0.3, 0.4}) {
    StageConfig cfg = ctx.base;
    cfg.rol.phi_bg = phi;
    cfg.rol.phi_obj = std::max(cfg.rol.phi_obj, phi + 0.1);
    run_wstd_cell(ctx, warm, "phi_bg=" + textio::format_double(phi), cfg, out);
  }
  for (std::size_t n : {4, 8, 16, 32}) {
    StageConfig cfg = ctx.base;
    cfg.wstd_proposals = n;
    run_wstd_cell(ctx, warm, "proposals=" + std::to_string(n), cfg, out);
  }
}

std::vector<CellResult> run_seed(const ExperimentSpec& spec, std::uint64_t seed) {
  const SeedContext ctx(spec, seed);
  std::vector<CellResult> out;
  if (spec.name == "table3") {
    run_table3(ctx, out);
  } else if (spec.name == "table5") {
    run_table5(ctx, out);
  } else if (spec.name == "table6") {
    run_table6(ctx, out);
  } else if (spec.name == "fig7") {
    run_fig7(ctx, out);
  } else {
    run_fig9(ctx, out);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"table3", "table5", "table6", "fig7", "fig9"};
  return names;
}

ExperimentSpec ExperimentSpec::defaults(const std::string& name, std::uint64_t base_seed) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw UnknownExperimentError("unknown experiment '" + name + "'; registered: " + join_names());
  }
  ExperimentSpec spec;
  spec.name = name;
  for (std::uint64_t i = 0; i < 20; ++i) spec.seeds.push_back(base_seed + i);
  if (name == "table5") {
    spec.shots = {1, 30};
  } else {
    spec.shots = {1};
  }
  return spec;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (shots.empty()) throw ConfigError("shots must list at least one shot count");
  for (std::size_t s : shots) {
    if (s == 0) throw ConfigError("shots entries must be >= 1");
  }
  world.validate();
  stage.validate();
  eval.validate();
}

std::vector<std::pair<std::string, std::string>> ExperimentSpec::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("experiment", name);
  kv.emplace_back("seeds", join_list(seeds));
  kv.emplace_back("shots", join_list(shots));
  for (auto& [k, v] : world.to_kv()) kv.emplace_back("world." + k, v);
  kv.emplace_back("eval.iou_threshold", textio::format_double(eval.iou_threshold));
  kv.emplace_back("eval.ap_method", std::string(to_string(eval.ap_method)));
  for (auto& [k, v] : stage.to_kv()) kv.emplace_back(k, v);
  return kv;
}

void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  if (key == "seeds") {
    spec.seeds = parse_list<std::uint64_t>(key, value, textio::parse_uint);
  } else if (key == "shots") {
    spec.shots = parse_list<std::size_t>(key, value, textio::parse_uint);
  } else {
    apply_setting(spec.world, spec.stage, spec.eval, key, value);
  }
}

void apply_setting(WorldConfig& world, StageConfig& stage, EvalConfig& eval,
                   const std::string& key, const std::string& value) {
  if (key.rfind("world.", 0) == 0) {
    auto kv = world.to_kv();
    const std::string field = key.substr(6);
    auto it = std::find_if(kv.begin(), kv.end(), [&](const auto& p) { return p.first == field; });
    if (it == kv.end()) throw ConfigError("unknown world field '" + field + "'");
    it->second = value;
    world = WorldConfig::from_kv(kv);
  } else if (key == "eval.iou_threshold") {
    try {
      eval.iou_threshold = textio::parse_double(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("eval.iou_threshold expects a number");
    }
  } else if (key == "eval.ap_method") {
    try {
      eval.ap_method = parse_ap_method(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    stage.set(key, value);
  }
}

ExperimentSpec parse_experiment_spec(std::string_view text, std::uint64_t base_seed) {
  const auto entries = textio::parse_key_values(text);
  std::string name;
  for (const auto& e : entries) {
    if (e.key == "experiment") name = e.value;
  }
  if (name.empty()) throw ConfigError("experiment spec does not name an experiment");
  ExperimentSpec spec = ExperimentSpec::defaults(name, base_seed);
  for (const auto& e : entries) {
    if (e.key != "experiment") apply_override(spec, e.key, e.value);
  }
  return spec;
}

World experiment_world(const WorldConfig& base, std::uint64_t seed) {
  WorldConfig cfg = base;
  cfg.seed = derive_seed(seed, "experiment/world");
  return make_world(cfg);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t threads) {
  ExperimentSpec::defaults(spec.name);  // rejects unknown names
  spec.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::vector<CellResult>> per_seed(spec.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= spec.seeds.size()) return;
      try {
        per_seed[i] = run_seed(spec, spec.seeds[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, spec.seeds.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result{spec, {}, 0.0};
  for (auto& rows : per_seed) {
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<CellSummary> summarize(const std::vector<CellResult>& rows) {
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const CellSummary& c) { return c.cell == r.cell; });
    if (it == cells.end()) {
      cells.push_back({r.cell, 0, 0.0, 0.0});
      values.emplace_back();
      it = cells.end() - 1;
    }
    values[static_cast<std::size_t>(it - cells.begin())].push_back(r.report.map);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& v = values[i];
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    cells[i].runs = v.size();
    cells[i].mean_map = mean;
    cells[i].stddev_map = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return cells;
}

std::string experiment_to_csv(const ExperimentResult& result) {
  std::size_t classes = 0;
  for (const auto& r : result.rows) classes = std::max(classes, r.report.per_class_ap.size());
  std::string out = "experiment,cell,seed,stage,shots,weak_scenes,labeller,mAP";
  for (std::size_t c = 0; c < classes; ++c) out += ",ap_" + std::to_string(c);
  out += '\n';
  for (const auto& r : result.rows) {
    out += result.spec.name + ',' + r.cell + ',' + std::to_string(r.seed) + ',' + r.stage + ',' +
           std::to_string(r.shots) + ',' + std::to_string(r.weak_scenes) + ',' + r.labeller + ',' +
           textio::format_double(r.report.map);
    for (std::size_t c = 0; c < classes; ++c) {
      out += ',';
      if (c < r.report.per_class_ap.size() && r.report.per_class_ap[c]) {
        out += textio::format_double(*r.report.per_class_ap[c]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string summary_to_csv(const ExperimentResult& result) {
  std::string out = "experiment,cell,runs,mean_mAP,std_mAP\n";
  for (const auto& c : summarize(result.rows)) {
    out += result.spec.name + ',' + c.cell + ',' + std::to_string(c.runs) + ',' +
           textio::format_double(c.mean_map) + ',' + textio::format_double(c.stddev_map) + '\n';
  }
  return out;
}

}  // namespace transdet

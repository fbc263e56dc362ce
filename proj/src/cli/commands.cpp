#include "transdet/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "transdet/errors.hpp"
#include "transdet/eval.hpp"
#include "transdet/experiment.hpp"
#include "transdet/gradcheck.hpp"
#include "transdet/model.hpp"
#include "transdet/pipeline.hpp"
#include "transdet/synthworld.hpp"
#include "transdet/textio.hpp"

#ifndef TRANSDET_VERSION
#define TRANSDET_VERSION "0.0.0"
#endif

namespace transdet::cli {
namespace {

using Clock = std::chrono::steady_clock;
using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::size_t threads = 1;
  std::vector<std::string> sets;
};

struct Settings {
  WorldConfig world;
  StageConfig stage;
  EvalConfig eval;

  KeyValues to_kv() const {
    KeyValues kv;
    for (auto& [k, v] : world.to_kv()) kv.emplace_back("world." + k, v);
    kv.emplace_back("eval.iou_threshold", textio::format_double(eval.iou_threshold));
    kv.emplace_back("eval.ap_method", std::string(to_string(eval.ap_method)));
    for (auto& [k, v] : stage.to_kv()) kv.emplace_back(k, v);
    return kv;
  }
};

std::pair<std::string, std::string> split_set(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + s + "'");
  }
  return {std::string(textio::trim(s.substr(0, eq))), std::string(textio::trim(s.substr(eq + 1)))};
}

std::vector<textio::KeyValueLine> config_entries(const Globals& g) {
  if (g.config_path.empty()) return {};
  return textio::parse_key_values(textio::read_file(g.config_path));
}

Settings load_settings(const Globals& g) {
  Settings s;
  auto apply = [&](const std::string& k, const std::string& v) {
    if (k == "experiment" || k == "seeds" || k == "shots") {
      throw ConfigError("'" + k + "' is only valid for the experiment command");
    }
    apply_setting(s.world, s.stage, s.eval, k, v);
  };
  for (const auto& e : config_entries(g)) apply(e.key, e.value);
  for (const auto& set : g.sets) {
    const auto [k, v] = split_set(set);
    apply(k, v);
  }
  s.world.validate();
  s.stage.validate();
  s.eval.validate();
  return s;
}

std::uint64_t resolve_seed(const Globals& g, std::ostream& out) {
  if (g.seed) {
    out << "seed=" << *g.seed << '\n';
    return *g.seed;
  }
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  out << "seed=" << seed << " (drawn)\n";
  return seed;
}

std::string digest(const KeyValues& kv) {
  std::string text;
  for (const auto& [k, v] : kv) text += k + '=' + v + '\n';
  return textio::hex64(textio::fnv1a64(text));
}

class Run {
 public:
  Run(std::string name, const std::vector<std::string>& args, const Globals& g)
      : name_(std::move(name)), args_(args), dir_(g.out_dir), start_(Clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& file, std::string_view contents) {
    const auto path = (dir_ / file).string();
    textio::write_file(path, contents);
    outputs_.push_back(path);
  }

  void finish(const KeyValues& config, const std::vector<std::uint64_t>& seeds) {
    nlohmann::ordered_json m;
    m["command"] = name_;
    m["command_line"] = args_;
    m["config_digest"] = digest(config);
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    m["config"] = cfg;
    m["seeds"] = seeds;
    m["version"] = TRANSDET_VERSION;
    auto outputs = outputs_;
    const auto manifest = (dir_ / (name_ + ".manifest.json")).string();
    outputs.push_back(manifest);
    m["outputs"] = outputs;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    textio::write_file(manifest, m.dump(2) + "\n");
  }

 private:
  std::string name_;
  std::vector<std::string> args_;
  std::filesystem::path dir_;
  Clock::time_point start_;
  std::vector<std::string> outputs_;
};

std::string seed_line(std::uint64_t seed) { return "# seed=" + std::to_string(seed) + "\n"; }

std::string loss_curve_csv(std::uint64_t seed, const std::vector<LossBreakdown>& curve) {
  std::size_t heads = 0;
  for (const auto& l : curve) heads = std::max(heads, l.rol.size());
  std::string out = seed_line(seed) + "epoch,total,main,bd,sdk";
  for (std::size_t i = 0; i < heads; ++i) out += ",rol_" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t e = 0; e < curve.size(); ++e) {
    const auto& l = curve[e];
    out += std::to_string(e + 1) + ',' + textio::format_double(l.total) + ',' +
           textio::format_double(l.main) + ',' + textio::format_double(l.bd) + ',' +
           textio::format_double(l.sdk);
    for (std::size_t i = 0; i < heads; ++i) {
      out += ',';
      if (i < l.rol.size()) out += textio::format_double(l.rol[i]);
    }
    out += '\n';
  }
  return out;
}

World load_or_make_world(const std::string& path, const Settings& s, std::uint64_t seed) {
  if (!path.empty()) return world_from_text(textio::read_file(path));
  return experiment_world(s.world, seed);
}

Checkpoint load_checkpoint(const std::string& path, ModelKind expected, const char* stage) {
  if (path.empty()) {
    throw MissingInputError(std::string(stage) + " training requires --init <" +
                            std::string(to_string(expected)) + " checkpoint>");
  }
  Checkpoint ckpt = checkpoint_from_text(textio::read_file(path));
  if (ckpt.model.kind != expected) {
    throw ConfigError("--init '" + path + "' holds a " + std::string(to_string(ckpt.model.kind)) +
                      " model; " + stage + " needs a " + std::string(to_string(expected)) +
                      " model");
  }
  return ckpt;
}

// --- world -------------------------------------------------------------------

struct WorldOptions {
  bool dump = false;
};

int cmd_world(const Globals& g, const WorldOptions& o, const std::vector<std::string>& args,
              std::ostream& out) {
  Settings s = load_settings(g);
  const std::uint64_t seed = resolve_seed(g, out);
  s.stage.seed = seed;
  Run run("world", args, g);
  const World world = experiment_world(s.world, seed);
  const std::string text = world_to_text(world);
  run.write("world.txt", text);
  run.write("source_train.scenes",
            scenes_to_text(seed, sample_scenes(world, Domain::source, AnnotationMode::full,
                                               s.stage.source_scenes, seed, "source/train")));
  run.write("target_test.scenes", scenes_to_text(seed, target_test_scenes(world, s.stage)));
  if (o.dump) out << text;
  run.finish(s.to_kv(), {seed});
  return kOk;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  std::string stage;
  std::string init;
  std::string world;
  std::string labeller;
  std::optional<std::size_t> epochs;
};

int cmd_train(const Globals& g, const TrainOptions& o, const std::vector<std::string>& args,
              std::ostream& out) {
  Settings s = load_settings(g);
  if (!o.labeller.empty()) s.stage.labeller = parse_labeller(o.labeller);
  if (o.epochs) {
    if (o.stage == "source") s.stage.source_epochs = *o.epochs;
    if (o.stage == "lstd") s.stage.lstd_epochs = *o.epochs;
    if (o.stage == "wstd") s.stage.wstd_epochs = *o.epochs;
  }
  std::optional<Checkpoint> input;
  if (o.stage == "lstd") input = load_checkpoint(o.init, ModelKind::source, "lstd");
  if (o.stage == "wstd") input = load_checkpoint(o.init, ModelKind::warmup, "wstd");

  const std::uint64_t seed = resolve_seed(g, out);
  s.stage.seed = seed;
  const World world = load_or_make_world(o.world, s, seed);
  Run run("train-" + o.stage, args, g);

  StageResult result;
  if (input && o.epochs && *o.epochs == 0) {
    result.model = input->model;
  } else if (o.stage == "source") {
    result = train_source(world, s.stage);
  } else if (o.stage == "lstd") {
    result = lstd_finetune(input->model, world, s.stage);
  } else {
    result = wstd_train(input->model, world, s.stage);
  }

  const KeyValues config = s.to_kv();
  run.write(o.stage + ".ckpt", checkpoint_to_text({result.model, seed, config}));
  run.write(o.stage + "_loss.csv", loss_curve_csv(seed, result.loss_curve));
  if (result.model.kind != ModelKind::source) {
    const auto test = target_test_scenes(world, s.stage);
    const auto report =
        evaluate_head(result.model, inference_head(result.model), test, s.stage, s.eval);
    run.write(o.stage + "_eval.csv", seed_line(seed) + eval_report_to_csv(report));
    out << "mAP=" << textio::format_double(report.map) << '\n';
  }
  run.finish(config, {seed});
  return kOk;
}

// --- eval --------------------------------------------------------------------

struct EvalOptions {
  std::string scenes;
  std::string detections;
  std::string checkpoint;
  std::string ap_method;
  std::optional<double> iou;
};

int cmd_eval(const Globals& g, const EvalOptions& o, const std::vector<std::string>& args,
             std::ostream& out) {
  Settings s = load_settings(g);
  if (!o.ap_method.empty()) s.eval.ap_method = parse_ap_method(o.ap_method);
  if (o.iou) s.eval.iou_threshold = *o.iou;
  s.eval.validate();
  if (o.detections.empty() == o.checkpoint.empty()) {
    throw ConfigError("eval needs exactly one of --detections or --checkpoint");
  }
  const SceneFile scenes = scenes_from_text(textio::read_file(o.scenes));
  const std::uint64_t seed = scenes.seed;
  out << "seed=" << seed << '\n';

  Run run("eval", args, g);
  std::vector<Detection> dets;
  std::size_t classes = 0;
  if (!o.checkpoint.empty()) {
    const Checkpoint ckpt = checkpoint_from_text(textio::read_file(o.checkpoint));
    dets = detect(ckpt.model, inference_head(ckpt.model), scenes.scenes, s.stage.detection_nms);
    classes = inference_head(ckpt.model).classes() - 1;
    run.write("detections.csv", seed_line(seed) + detections_to_csv(dets));
  } else {
    dets = detections_from_csv(textio::read_file(o.detections));
    const bool source = !scenes.scenes.empty() && scenes.scenes.front().domain == Domain::source;
    classes = source ? s.world.num_source_classes : s.world.num_target_classes;
  }
  for (const auto& d : dets) {
    if (d.scene_id >= scenes.scenes.size()) {
      throw MalformedDataError("detection refers to scene " + std::to_string(d.scene_id) +
                               " but the scene file holds " +
                               std::to_string(scenes.scenes.size()));
    }
  }
  const auto report = evaluate(dets, ground_truth(scenes.scenes), classes, s.eval);
  run.write("eval.csv", seed_line(seed) + eval_report_to_csv(report));
  out << "mAP=" << textio::format_double(report.map) << '\n';
  run.finish(s.to_kv(), {seed});
  return kOk;
}

// --- experiment ----------------------------------------------------------------

int cmd_experiment(const Globals& g, const std::string& name,
                   const std::vector<std::string>& args, std::ostream& out) {
  ExperimentSpec::defaults(name);  // unknown names fail before any other work
  const std::uint64_t base = resolve_seed(g, out);
  ExperimentSpec spec = ExperimentSpec::defaults(name, base);
  for (const auto& e : config_entries(g)) {
    if (e.key == "experiment") {
      if (e.value != name) {
        throw ConfigError("config file names experiment '" + e.value + "' but '" + name +
                          "' was requested");
      }
      continue;
    }
    apply_override(spec, e.key, e.value);
  }
  for (const auto& set : g.sets) {
    const auto [k, v] = split_set(set);
    apply_override(spec, k, v);
  }
  spec.validate();

  Run run("experiment-" + name, args, g);
  const auto result = run_experiment(spec, g.threads);
  run.write(name + ".csv", experiment_to_csv(result));
  std::string seeds_comment = "# seeds=";
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    seeds_comment += (i ? "," : "") + std::to_string(spec.seeds[i]);
  }
  run.write(name + "_summary.csv", seeds_comment + "\n" + summary_to_csv(result));
  for (const auto& c : summarize(result.rows)) {
    out << c.cell << " mean_mAP=" << textio::format_double(c.mean_map)
        << " std=" << textio::format_double(c.stddev_map) << " runs=" << c.runs << '\n';
  }
  run.finish(spec.to_kv(), spec.seeds);
  return kOk;
}

// --- gradcheck ---------------------------------------------------------------------

struct GradOptions {
  double tolerance = 1e-6;
  std::vector<std::string> only;
  std::size_t instances = 100;
  double step = 1e-5;
};

int cmd_gradcheck(const Globals& g, const GradOptions& o, const std::vector<std::string>& args,
                  std::ostream& out, std::ostream& err) {
  GradSuiteConfig cfg;
  cfg.tolerance = o.tolerance;
  cfg.instances = o.instances;
  cfg.step = o.step;
  if (!(cfg.tolerance > 0.0)) throw ConfigError("--tolerance must be > 0");
  if (!(cfg.step > 0.0)) throw ConfigError("--step must be > 0");
  cfg.seed = resolve_seed(g, out);

  Run run("gradcheck", args, g);
  const auto results = run_grad_suites(o.only, cfg);
  std::string csv = seed_line(cfg.seed) + "suite,instances,coordinates,max_relative_error,passed\n";
  std::vector<std::string> failed;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " max_rel_err="
        << textio::format_double(r.max_relative_error) << " instances=" << r.instances
        << " worst_instance=" << r.worst_instance << '\n';
    csv += r.name + ',' + std::to_string(r.instances) + ',' + std::to_string(r.coordinates) + ',' +
           textio::format_double(r.max_relative_error) + ',' + (r.passed ? "1" : "0") + '\n';
    if (!r.passed) failed.push_back(r.name);
  }
  run.write("gradcheck.csv", csv);
  run.finish({{"tolerance", textio::format_double(cfg.tolerance)},
              {"instances", std::to_string(cfg.instances)},
              {"step", textio::format_double(cfg.step)}},
             {cfg.seed});
  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    err << "gradcheck failed for: " << names << " (tolerance "
        << textio::format_double(cfg.tolerance) << ")\n";
    return kGradcheckFailure;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive transfer detection on synthetic scenes", "transdet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TRANSDET_VERSION);

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "key = value config file");
  auto* seed_opt = app.add_option("--seed", seed, "base seed (drawn and printed when omitted)");
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for experiments")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--set", g.sets, "override one config key (key=value); repeatable");

  WorldOptions wo;
  auto* world = app.add_subcommand("world", "generate a world and its scene sets");
  world->add_flag("--dump-world", wo.dump, "also print the world file to stdout");
  world->fallthrough();

  TrainOptions to;
  auto* train = app.add_subcommand("train", "run one training stage");
  train->add_option("--stage", to.stage, "source | lstd | wstd")
      ->required()
      ->check(CLI::IsMember({"source", "lstd", "wstd"}));
  train->add_option("--init", to.init, "input checkpoint (lstd: source, wstd: warm-up)");
  train->add_option("--world", to.world, "world file (default: generated from config and seed)");
  train->add_option("--labeller", to.labeller, "rol | oicr");
  train->add_option("--epochs", to.epochs, "epochs for this stage");
  train->fallthrough();

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "evaluate detections against a scene set");
  eval->add_option("--scenes", eo.scenes, "scene-set file with ground truth")->required();
  eval->add_option("--detections", eo.detections, "detections CSV");
  eval->add_option("--checkpoint", eo.checkpoint, "detect with this checkpoint instead");
  eval->add_option("--ap-method", eo.ap_method, "voc07_11point | all_points");
  eval->add_option("--iou", eo.iou, "IoU threshold for a true positive");
  eval->fallthrough();

  std::string exp_name;
  auto* experiment = app.add_subcommand("experiment", "run a registered experiment suite");
  experiment->add_option("name", exp_name, "table3 | table5 | table6 | fig7 | fig9")->required();
  experiment->fallthrough();

  GradOptions go;
  auto* grad = app.add_subcommand("gradcheck", "run the gradient-check suite");
  grad->add_option("--tolerance", go.tolerance, "max relative error")->capture_default_str();
  grad->add_option("--only", go.only, "restrict to these suites; repeatable");
  grad->add_option("--instances", go.instances, "random instances per suite")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--step", go.step, "central-difference step")->capture_default_str();
  grad->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*world) return cmd_world(g, wo, args, out);
    if (*train) return cmd_train(g, to, args, out);
    if (*eval) return cmd_eval(g, eo, args, out);
    if (*experiment) return cmd_experiment(g, exp_name, args, out);
    return cmd_gradcheck(g, go, args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MissingInputError& e) {
    err << "missing input: " << e.what() << '\n';
    return kMissingInput;
  } catch (const MalformedDataError& e) {
    err << "malformed data: " << e.what() << '\n';
    return kMalformedData;
  } catch (const UnknownExperimentError& e) {
    err << e.what() << '\n';
    return kUnknownExperiment;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace transdet::cli

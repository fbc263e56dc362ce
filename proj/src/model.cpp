#include "transdet/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "transdet/errors.hpp"
#include "transdet/kernels.hpp"
#include "transdet/numerics.hpp"
#include "transdet/textio.hpp"

namespace transdet {

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::source: return "source";
    case ModelKind::warmup: return "warmup";
    case ModelKind::target: return "target";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "source") return ModelKind::source;
  if (s == "warmup") return ModelKind::warmup;
  if (s == "target") return ModelKind::target;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

void DetectorModel::validate() const {
  const std::size_t d = backbone.out_dim();
  auto check = [&](const Head& h, const std::string& name) {
    if (h.in_dim() != d) {
      throw std::invalid_argument(name + ": expects " + std::to_string(h.in_dim()) +
                                  " features, backbone yields " + std::to_string(d));
    }
    if (h.classes() < 2) throw std::invalid_argument(name + ": needs >= 2 rows");
    if (!h.weights.all_finite()) throw std::invalid_argument(name + ": non-finite weights");
  };
  if (!backbone.map.all_finite()) throw std::invalid_argument("backbone: non-finite entries");
  check(main_head, "main_head");
  if (sdk_head) check(*sdk_head, "sdk_head");
  for (std::size_t i = 0; i < rol_heads.size(); ++i) {
    check(rol_heads[i], "rol_head." + std::to_string(i));
    if (rol_heads[i].classes() != main_head.classes()) {
      throw std::invalid_argument("rol heads must share the main head's class count");
    }
  }
}

DetectorModel DetectorModel::zeros_like() const {
  DetectorModel z = *this;
  for (auto& p : z.parameters()) {
    for (double& v : p.values->values()) v = 0.0;
  }
  return z;
}

std::vector<DetectorModel::ParamRef> DetectorModel::parameters() {
  std::vector<ParamRef> out{{"backbone", &backbone.map}, {"main_head", &main_head.weights}};
  if (sdk_head) out.push_back({"sdk_head", &sdk_head->weights});
  for (std::size_t i = 0; i < rol_heads.size(); ++i) {
    out.push_back({"rol_head." + std::to_string(i), &rol_heads[i].weights});
  }
  return out;
}

std::vector<DetectorModel::ConstParamRef> DetectorModel::parameters() const {
  std::vector<ConstParamRef> out{{"backbone", &backbone.map}, {"main_head", &main_head.weights}};
  if (sdk_head) out.push_back({"sdk_head", &sdk_head->weights});
  for (std::size_t i = 0; i < rol_heads.size(); ++i) {
    out.push_back({"rol_head." + std::to_string(i), &rol_heads[i].weights});
  }
  return out;
}

std::size_t DetectorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.values->size();
  return n;
}

std::vector<double> DetectorModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& p : parameters()) {
    flat.insert(flat.end(), p.values->values().begin(), p.values->values().end());
  }
  return flat;
}

void DetectorModel::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("unflatten: parameter count mismatch");
  }
  std::size_t off = 0;
  for (auto& p : parameters()) {
    auto dst = p.values->values();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  }
}

Backbone init_backbone(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  Backbone b{Matrix(out_dim, in_dim)};
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  for (double& v : b.map.values()) v = n(rng);
  return b;
}

Head init_head(std::size_t classes, std::size_t in_dim, double scale, Rng& rng) {
  Head h{Matrix(classes, in_dim + 1)};
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : h.weights.values()) v = n(rng);
  return h;
}

FeatureGrid forward_grid(const Backbone& backbone, const FeatureGrid& raw_grid) {
  if (raw_grid.depth() != backbone.in_dim()) {
    throw std::invalid_argument("forward_grid: raw depth " + std::to_string(raw_grid.depth()) +
                                " does not match backbone input " +
                                std::to_string(backbone.in_dim()));
  }
  FeatureGrid out(raw_grid.height(), raw_grid.width(), backbone.out_dim());
  for (std::size_t c = 0; c < raw_grid.cell_count(); ++c) {
    kernels::gemv(backbone.map.values(), backbone.out_dim(), backbone.in_dim(), raw_grid.cell(c),
                  out.cell(c));
  }
  return out;
}

std::vector<std::size_t> roi_cells(const BBox& box, std::size_t height, std::size_t width) {
  auto cells = cells_in_box(box, height, width);
  if (cells.empty()) cells.push_back(nearest_cell(box, height, width));
  return cells;
}

std::vector<double> roi_pool(const FeatureGrid& grid, const BBox& box) {
  const auto cells = roi_cells(box, grid.height(), grid.width());
  std::vector<double> out(grid.depth(), 0.0);
  const double w = 1.0 / static_cast<double>(cells.size());
  for (std::size_t c : cells) kernels::axpy(w, grid.cell(c), out);
  return out;
}

ProposalScores score_proposals(const Head& head, std::span<const std::vector<double>> pooled) {
  const std::size_t d = head.in_dim();
  Matrix logits(head.classes(), pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    if (pooled[k].size() != d) {
      throw std::invalid_argument("score_proposals: feature length " +
                                  std::to_string(pooled[k].size()) + " != head input " +
                                  std::to_string(d));
    }
    for (std::size_t c = 0; c < head.classes(); ++c) {
      const auto w = head.weights.row(c);
      logits(c, k) = kernels::dot(w.first(d), pooled[k]) + w[d];
    }
  }
  ScoreMatrix probs = ScoreMatrix::from_logits(logits);
  return {std::move(logits), std::move(probs)};
}

PooledFeatures pool_proposals(const Backbone& backbone, const FeatureGrid& raw_grid,
                              std::span<const BBox> proposals) {
  PooledFeatures pf;
  pf.features = forward_grid(backbone, raw_grid);
  pf.cells.reserve(proposals.size());
  pf.pooled.reserve(proposals.size());
  for (const BBox& b : proposals) {
    pf.cells.push_back(roi_cells(b, raw_grid.height(), raw_grid.width()));
    std::vector<double> v(pf.features.depth(), 0.0);
    const double w = 1.0 / static_cast<double>(pf.cells.back().size());
    for (std::size_t c : pf.cells.back()) kernels::axpy(w, pf.features.cell(c), v);
    pf.pooled.push_back(std::move(v));
  }
  return pf;
}

const Head& source_head(const DetectorModel& model) {
  if (model.sdk_head) return *model.sdk_head;
  if (model.kind == ModelKind::source) return model.main_head;
  throw std::invalid_argument("extract_sdk: teacher model has no source-domain head");
}

ScoreMatrix extract_sdk(const DetectorModel& teacher, const FeatureGrid& raw_grid,
                        std::span<const BBox> proposals) {
  const Head& head = source_head(teacher);
  const auto pf = pool_proposals(teacher.backbone, raw_grid, proposals);
  return score_proposals(head, pf.pooled).probabilities;
}

void head_backward(const Head& head, std::span<const std::vector<double>> pooled,
                   const Matrix& dlogits, Head& head_grad,
                   std::vector<std::vector<double>>& pooled_grads) {
  const std::size_t d = head.in_dim();
  pooled_grads.resize(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    auto& pg = pooled_grads[k];
    if (pg.size() != d) pg.assign(d, 0.0);
    for (std::size_t c = 0; c < head.classes(); ++c) {
      const double g = dlogits(c, k);
      if (g == 0.0) continue;
      auto grow = head_grad.weights.row(c);
      kernels::axpy(g, pooled[k], grow.first(d));
      grow[d] += g;
      kernels::axpy(g, head.weights.row(c).first(d), pg);
    }
  }
}

void pool_backward(const PooledFeatures& pf, std::span<const std::vector<double>> pooled_grads,
                   FeatureGrid& feature_grad) {
  for (std::size_t k = 0; k < pf.cells.size(); ++k) {
    if (pooled_grads[k].empty()) continue;
    const double w = 1.0 / static_cast<double>(pf.cells[k].size());
    for (std::size_t c : pf.cells[k]) kernels::axpy(w, pooled_grads[k], feature_grad.cell(c));
  }
}

void backbone_backward(const FeatureGrid& raw_grid, const FeatureGrid& feature_grad,
                       Backbone& backbone_grad) {
  for (std::size_t cell = 0; cell < raw_grid.cell_count(); ++cell) {
    const auto df = feature_grad.cell(cell);
    const auto x = raw_grid.cell(cell);
    for (std::size_t r = 0; r < df.size(); ++r) {
      if (df[r] != 0.0) kernels::axpy(df[r], x, backbone_grad.map.row(r));
    }
  }
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("lr_decay_factor must lie in (0, 1]");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

void adam_step(std::span<const ParamBlock> blocks, AdamState& state, const OptimizerConfig& cfg,
               double lr_scale) {
  for (const auto& b : blocks) {
    if (b.values.size() != b.grads.size()) {
      throw std::invalid_argument("adam_step: block '" + std::string(b.name) +
                                  "' has mismatched gradient shape");
    }
    for (double g : b.grads) {
      if (!std::isfinite(g)) {
        throw std::domain_error("adam_step: non-finite gradient in block '" +
                                std::string(b.name) + "'");
      }
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& b : blocks) {
      state.first_moment.emplace_back(b.values.size(), 0.0);
      state.second_moment.emplace_back(b.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != blocks.size()) {
    throw std::invalid_argument("adam_step: optimizer state has a different block layout");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double lr = cfg.learning_rate * lr_scale;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    auto& m = state.first_moment[bi];
    auto& v = state.second_moment[bi];
    const auto& b = blocks[bi];
    if (m.size() != b.values.size()) {
      throw std::invalid_argument("adam_step: optimizer state shape mismatch for '" +
                                  std::string(b.name) + "'");
    }
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      const double g = b.grads[i] + cfg.weight_decay * b.values[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      b.values[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

void adam_step(DetectorModel& model, const DetectorModel& grads, AdamState& state,
               const OptimizerConfig& cfg, double lr_scale) {
  auto params = model.parameters();
  const auto gparams = grads.parameters();
  if (params.size() != gparams.size()) {
    throw std::invalid_argument("adam_step: gradient model has a different structure");
  }
  std::vector<ParamBlock> blocks;
  blocks.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    blocks.push_back({params[i].name, params[i].values->values(), gparams[i].values->values()});
  }
  adam_step(blocks, state, cfg, lr_scale);
}

double lr_schedule(std::size_t step, std::size_t total_steps, const OptimizerConfig& cfg) {
  return 3 * step >= 2 * total_steps && total_steps > 0 ? cfg.lr_decay_factor : 1.0;
}

// ---------------------------------------------------------------------------

std::string checkpoint_to_text(const Checkpoint& ckpt) {
  std::string out = "# transdet checkpoint v1\n";
  out += "kind=" + std::string(to_string(ckpt.model.kind)) + "\n";
  out += "seed=" + std::to_string(ckpt.seed) + "\n";
  for (const auto& [k, v] : ckpt.config) out += "config " + k + "=" + v + "\n";
  for (const auto& p : ckpt.model.parameters()) {
    out += "block " + p.name + " " + std::to_string(p.values->rows()) + " " +
           std::to_string(p.values->cols()) + "\n";
    textio::append_doubles(out, p.values->values());
    out += "\n";
  }
  out += "end\n";
  return out;
}

Checkpoint checkpoint_from_text(std::string_view text) {
  const auto lines = textio::split(text, '\n');
  if (lines.empty() || textio::trim(lines[0]) != "# transdet checkpoint v1") {
    throw MalformedDataError("not a transdet checkpoint", 1);
  }
  Checkpoint ckpt;
  bool ended = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto line = textio::trim(lines[i]);
    if (line.empty()) continue;
    try {
      if (line == "end") {
        ended = true;
        break;
      } else if (line.starts_with("kind=")) {
        ckpt.model.kind = parse_model_kind(line.substr(5));
      } else if (line.starts_with("seed=")) {
        ckpt.seed = textio::parse_uint(line.substr(5));
      } else if (line.starts_with("config ")) {
        const auto body = line.substr(7);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw MalformedDataError("config without '='", lineno);
        ckpt.config.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
      } else if (line.starts_with("block ")) {
        const auto toks = textio::split(line, ' ');
        if (toks.size() != 4 || i + 1 >= lines.size()) {
          throw MalformedDataError("block header must be 'block <name> <rows> <cols>'", lineno);
        }
        const std::string name(toks[1]);
        Matrix m(textio::parse_uint(toks[2]), textio::parse_uint(toks[3]));
        const auto vals = textio::split(lines[++i], ' ');
        if (vals.size() != m.size()) throw MalformedDataError("block value count mismatch", i + 1);
        for (std::size_t v = 0; v < vals.size(); ++v) m.values()[v] = textio::parse_double(vals[v]);
        if (name == "backbone") {
          ckpt.model.backbone.map = std::move(m);
        } else if (name == "main_head") {
          ckpt.model.main_head.weights = std::move(m);
        } else if (name == "sdk_head") {
          ckpt.model.sdk_head = Head{std::move(m)};
        } else if (name.starts_with("rol_head.")) {
          if (textio::parse_uint(std::string_view(name).substr(9)) != ckpt.model.rol_heads.size()) {
            throw MalformedDataError("rol heads out of order", lineno);
          }
          ckpt.model.rol_heads.push_back(Head{std::move(m)});
        } else {
          throw MalformedDataError("unknown parameter block '" + name + "'", lineno);
        }
      } else {
        throw MalformedDataError("unrecognized line", lineno);
      }
    } catch (const std::invalid_argument& e) {
      throw MalformedDataError(e.what(), lineno);
    }
  }
  if (!ended) throw MalformedDataError("checkpoint is truncated (no 'end' line)");
  try {
    ckpt.model.validate();
  } catch (const std::invalid_argument& e) {
    throw MalformedDataError(e.what());
  }
  return ckpt;
}

}  // namespace transdet

#include "analogy/model.hpp"

#include <cmath>

namespace analogy::model {

namespace {

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Tensor y = matmul(x, w);
  return y.rank() == 1 ? y + b : y + repeat_rows(b, y.dim(0));
}

Tensor param(const ParamStore& params, const char* name) { return params.get(name); }

// Row j averages the 8 context rows and candidate row 8+j, i.e. the
// 9-panel context completed with candidate j.
Tensor completion_matrix() {
  constexpr std::size_t rows = rpm::kPanels, cols = 2 * rpm::kPanels;
  std::vector<double> m(rows * cols, 0.0);
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < rpm::kPanels; ++i) m[j * cols + i] = 1.0 / kContextPanels;
    m[j * cols + rpm::kPanels + j] = 1.0 / kContextPanels;
  }
  return Tensor::matrix(rows, cols, std::move(m));
}

Variational finish_variational(const ParamStore& params, const Tensor& embedding,
                               std::span<const double> epsilon) {
  Variational out;
  out.mu = dense(embedding, param(params, "var.mu.w"), param(params, "var.mu.b"));
  out.sigma = sigmoid(dense(embedding, param(params, "var.sigma.w"), param(params, "var.sigma.b")));
  if (epsilon.size() != out.mu.numel()) {
    throw DimensionError("variational_encode: expected " + std::to_string(out.mu.numel()) +
                         " noise values, got " + std::to_string(epsilon.size()));
  }
  const Tensor eps(out.mu.shape(), std::vector<double>(epsilon.begin(), epsilon.end()));
  out.z = out.mu + out.sigma * eps;
  return out;
}

}  // namespace

std::string_view to_string(InputMode m) {
  return m == InputMode::symbolic ? "symbolic" : "raster";
}

InputMode parse_input_mode(std::string_view s) {
  if (s == "symbolic") return InputMode::symbolic;
  if (s == "raster") return InputMode::raster;
  throw std::invalid_argument("unknown input mode '" + std::string(s) + "'");
}

EncoderConfig make_encoder_config(rpm::Config config, InputMode mode, int raster_height,
                                  int raster_width) {
  EncoderConfig cfg;
  cfg.input_mode = mode;
  cfg.panel_config = config;
  if (mode == InputMode::raster) {
    if (raster_height <= 0 || raster_width <= 0) {
      throw DimensionError("raster input needs a positive height and width");
    }
    cfg.raster_height = raster_height;
    cfg.raster_width = raster_width;
    cfg.panel_dim = static_cast<std::size_t>(raster_height) * static_cast<std::size_t>(raster_width);
  } else {
    cfg.panel_dim = kSlotWidth * static_cast<std::size_t>(rpm::slot_count(config));
  }
  return cfg;
}

void check_config(const EncoderConfig& cfg) {
  if (!cfg.panel_dim || !cfg.embed_dim || !cfg.attribute_slots || !cfg.rule_slots ||
      !cfg.task_dim || !cfg.latent_dim) {
    throw DimensionError("encoder dimensions must be positive");
  }
  const EncoderConfig ref = make_encoder_config(cfg.panel_config, cfg.input_mode,
                                                cfg.raster_height, cfg.raster_width);
  if (ref.panel_dim != cfg.panel_dim) {
    throw DimensionError("panel_dim " + std::to_string(cfg.panel_dim) + " does not match " +
                         std::to_string(ref.panel_dim) + " for this input mode");
  }
}

ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  Rng rng(derive_seed(seed, {0x1417}));
  ParamStore store;
  auto layer = [&](const std::string& name, std::size_t in, std::size_t out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (double& v : w) v = (2.0 * rng.uniform01() - 1.0) * limit;
    store.add(name + ".w", {in, out}, std::move(w));
    store.add(name + ".b", {out}, std::vector<double>(out, 0.0));
  };
  const std::size_t d = cfg.embed_dim;
  layer("enc.l1", cfg.panel_dim, d);
  layer("enc.l2", d, d);
  layer("inf.l1", d, cfg.attribute_slots * cfg.rule_slots);
  layer("inf.l2", cfg.rule_slots, cfg.task_dim);
  layer("var.mu", d, cfg.latent_dim);
  layer("var.sigma", d, cfg.latent_dim);
  layer("dec", d, kContextPanels * cfg.panel_dim);
  layer("score.l1", d, d);
  layer("score.l2", d, 1);
  return store;
}

std::vector<double> panel_features(const rpm::Panel& panel, const EncoderConfig& cfg) {
  if (cfg.input_mode == InputMode::raster) {
    if (!panel.raster || panel.raster->height != cfg.raster_height ||
        panel.raster->width != cfg.raster_width) {
      throw DimensionError("panel has no raster of " + std::to_string(cfg.raster_height) + "x" +
                           std::to_string(cfg.raster_width));
    }
    return panel.raster->pixels;
  }
  std::vector<double> f(cfg.panel_dim, 0.0);
  const int slots = rpm::slot_count(cfg.panel_config);
  for (const rpm::Entity& e : panel.entities) {
    if (e.position < 0 || e.position >= slots || e.type < 0 || e.type >= rpm::kShapeCount ||
        e.size < 0 || e.size >= rpm::kSizeLevels || e.color < 0 || e.color >= rpm::kColorLevels) {
      throw DimensionError("entity outside the encodable range");
    }
    double* slot = f.data() + static_cast<std::size_t>(e.position) * kSlotWidth;
    slot[0] = 1.0;
    slot[1 + e.type] = 1.0;
    slot[1 + rpm::kShapeCount + e.size] = 1.0;
    slot[1 + rpm::kShapeCount + rpm::kSizeLevels + e.color] = 1.0;
  }
  return f;
}

Tensor panel_matrix(std::span<const rpm::Panel* const> panels, const EncoderConfig& cfg) {
  if (panels.empty()) throw DimensionError("panel_matrix: no panels");
  std::vector<double> data;
  data.reserve(panels.size() * cfg.panel_dim);
  for (const rpm::Panel* p : panels) {
    const auto f = panel_features(*p, cfg);
    data.insert(data.end(), f.begin(), f.end());
  }
  return Tensor::matrix(panels.size(), cfg.panel_dim, std::move(data));
}

Tensor panel_hidden(const ParamStore& params, const Tensor& features) {
  return relu(dense(features, param(params, "enc.l1.w"), param(params, "enc.l1.b")));
}

Tensor encode_context(const EncoderConfig& cfg, const ParamStore& params,
                      std::span<const rpm::Panel> panels) {
  if (panels.size() != rpm::kPanels && panels.size() != kContextPanels) {
    throw DimensionError("encode_context: expected 8 or 9 panels, got " +
                         std::to_string(panels.size()));
  }
  std::vector<const rpm::Panel*> ptrs;
  for (const rpm::Panel& p : panels) ptrs.push_back(&p);
  const Tensor pooled = mean(panel_hidden(params, panel_matrix(ptrs, cfg)), 0);
  return relu(dense(pooled, param(params, "enc.l2.w"), param(params, "enc.l2.b")));
}

Tensor infer_task_scores(const EncoderConfig& cfg, const ParamStore& params,
                         const Tensor& embedding, Tensor* rule_probs) {
  if (embedding.rank() != 1 || embedding.numel() != cfg.embed_dim) {
    throw DimensionError("infer_task_scores: embedding shape " + shape_str(embedding.shape()));
  }
  const Tensor logits = dense(embedding, param(params, "inf.l1.w"), param(params, "inf.l1.b"));
  const Tensor probs = softmax(reshape(logits, {cfg.attribute_slots, cfg.rule_slots}), 1);
  if (rule_probs) *rule_probs = probs;
  return sum(dense(probs, param(params, "inf.l2.w"), param(params, "inf.l2.b")), 0);
}

Variational variational_encode(const EncoderConfig& cfg, const ParamStore& params,
                               const Tensor& embedding, Rng& rng) {
  std::vector<double> eps(cfg.latent_dim);
  for (double& e : eps) e = rng.normal();
  return finish_variational(params, embedding, eps);
}

Variational variational_encode(const EncoderConfig&, const ParamStore& params,
                               const Tensor& embedding, std::span<const double> epsilon) {
  return finish_variational(params, embedding, epsilon);
}

Tensor decode_context(const EncoderConfig& cfg, const ParamStore& params,
                      const Tensor& embedding) {
  const Tensor flat = sigmoid(dense(embedding, param(params, "dec.w"), param(params, "dec.b")));
  return reshape(flat, {kContextPanels, cfg.panel_dim});
}

Tensor reconstruction_target(const EncoderConfig& cfg,
                             std::span<const rpm::Panel, rpm::kPanels> context,
                             const rpm::Panel& answer) {
  std::vector<const rpm::Panel*> ptrs;
  for (const rpm::Panel& p : context) ptrs.push_back(&p);
  ptrs.push_back(&answer);
  return panel_matrix(ptrs, cfg);
}

Tensor score_choices(const EncoderConfig& cfg, const ParamStore& params,
                     std::span<const rpm::Panel, rpm::kPanels> context,
                     std::span<const rpm::Panel, rpm::kPanels> choices) {
  static const Tensor completion = completion_matrix();
  std::vector<const rpm::Panel*> ptrs;
  for (const rpm::Panel& p : context) ptrs.push_back(&p);
  for (const rpm::Panel& p : choices) ptrs.push_back(&p);
  const Tensor hidden = panel_hidden(params, panel_matrix(ptrs, cfg));
  const Tensor completed = relu(dense(matmul(completion, hidden), param(params, "enc.l2.w"),
                                      param(params, "enc.l2.b")));
  const Tensor contrast = completed - repeat_rows(mean(completed, 0), rpm::kPanels);
  const Tensor h = relu(dense(contrast, param(params, "score.l1.w"), param(params, "score.l1.b")));
  return reshape(dense(h, param(params, "score.l2.w"), param(params, "score.l2.b")),
                 {rpm::kPanels});
}

int argmax(std::span<const double> scores) {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

int predict(const EncoderConfig& cfg, const ParamStore& params, const rpm::RpmProblem& problem) {
  return argmax(score_choices(cfg, params, problem.context, problem.choices).data());
}

}  // namespace analogy::model

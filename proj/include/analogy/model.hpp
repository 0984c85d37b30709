#pragma once

// The reasoner. A shared dense panel encoder feeds a mean aggregator, a
// contrast-style choice scorer and three analogy heads: task inference e(·),
// a variational encoder v(·) and a dense context decoder d(·).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "analogy/param_store.hpp"
#include "analogy/rng.hpp"
#include "analogy/rpm.hpp"
#include "analogy/tensor.hpp"

namespace analogy::model {

enum class InputMode { symbolic, raster };

std::string_view to_string(InputMode m);
InputMode parse_input_mode(std::string_view s);

// Per-slot symbolic width: [present, type one-hot, size one-hot, color one-hot].
inline constexpr std::size_t kSlotWidth = 1 + rpm::kShapeCount + rpm::kSizeLevels + rpm::kColorLevels;
inline constexpr std::size_t kContextPanels = 9;

struct EncoderConfig {
  InputMode input_mode = InputMode::symbolic;
  rpm::Config panel_config = rpm::Config::center;
  int raster_height = 0;
  int raster_width = 0;
  std::size_t panel_dim = kSlotWidth;
  std::size_t embed_dim = 64;
  std::size_t attribute_slots = 10;  // a
  std::size_t rule_slots = 6;        // r
  std::size_t task_dim = 64;
  std::size_t latent_dim = 256;      // p

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Fills panel_dim from the configuration and input mode.
EncoderConfig make_encoder_config(rpm::Config config, InputMode mode = InputMode::symbolic,
                                  int raster_height = 0, int raster_width = 0);

// Throws DimensionError when a size is zero or panel_dim is inconsistent.
void check_config(const EncoderConfig& cfg);

// Glorot-uniform weights, zero biases.
ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed);

std::vector<double> panel_features(const rpm::Panel& panel, const EncoderConfig& cfg);
// Rows of panel features; a constant tensor.
Tensor panel_matrix(std::span<const rpm::Panel* const> panels, const EncoderConfig& cfg);

// First encoder layer on each row: relu(X W1 + b1).
Tensor panel_hidden(const ParamStore& params, const Tensor& features);

// Mean over panels of the first layer, then the second layer:
// relu(W2 · mean_i relu(W1 x_i + b1) + b2). Accepts 8 or 9 panels.
Tensor encode_context(const EncoderConfig& cfg, const ParamStore& params,
                      std::span<const rpm::Panel> panels);

// MLP1 -> reshape a×r -> softmax over r -> MLP2 per row -> sum over rows.
// When `rule_probs` is given it receives the a×r softmax.
Tensor infer_task_scores(const EncoderConfig& cfg, const ParamStore& params,
                         const Tensor& embedding, Tensor* rule_probs = nullptr);

struct Variational {
  Tensor mu;
  Tensor sigma;
  Tensor z;
};

Variational variational_encode(const EncoderConfig& cfg, const ParamStore& params,
                               const Tensor& embedding, Rng& rng);
// Same, with the reparameterization noise supplied (e.g. zeros).
Variational variational_encode(const EncoderConfig& cfg, const ParamStore& params,
                               const Tensor& embedding, std::span<const double> epsilon);

// Sigmoid reconstruction of the 9 panels, shape 9×panel_dim.
Tensor decode_context(const EncoderConfig& cfg, const ParamStore& params,
                      const Tensor& embedding);

// Reconstruction target: the 8 context panels followed by the answer panel.
Tensor reconstruction_target(const EncoderConfig& cfg,
                             std::span<const rpm::Panel, rpm::kPanels> context,
                             const rpm::Panel& answer);

// For each candidate j, h_j is the encoding of the context completed with
// c_j; the scorer sees h_j minus the mean over candidates. Raw scores, shape 8.
Tensor score_choices(const EncoderConfig& cfg, const ParamStore& params,
                     std::span<const rpm::Panel, rpm::kPanels> context,
                     std::span<const rpm::Panel, rpm::kPanels> choices);

// Argmax; ties go to the lowest index.
int argmax(std::span<const double> scores);
int predict(const EncoderConfig& cfg, const ParamStore& params, const rpm::RpmProblem& problem);

}  // namespace analogy::model

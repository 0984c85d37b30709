#pragma once

// Epoch loop, evaluation, checkpointing and the first-order meta-learning
// variant. Every random choice is drawn from a stream derived from
// (seed, epoch, batch), so runs and resumed runs are bit-reproducible.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "analogy/checkpoint.hpp"
#include "analogy/episodes.hpp"
#include "analogy/losses.hpp"
#include "analogy/model.hpp"
#include "analogy/param_store.hpp"
#include "analogy/rpm.hpp"

namespace analogy::training {

enum class TrainMode { baseline, analogy, meta_contrast, maml };

inline constexpr std::array<std::size_t, 2> kBatchPresets{2, 32};

struct RunConfig {
  TrainMode mode = TrainMode::baseline;
  losses::KernelMode kernel = losses::KernelMode::inference;
  std::size_t batch_size = 32;
  int epochs = 50;
  double lr = kDefaultLearningRate;
  std::uint64_t seed = kDefaultSeed;
  int queries = episodes::kDefaultQueries;
  double pull_margin = losses::kDefaultPullMargin;
  double push_margin = losses::kDefaultPushMargin;
  losses::LossWeights weights;
  int eval_every = 1;
  AdamConfig adam;

  // Meta-learning.
  double inner_lr = 0.01;
  int n_ways = 2;
  int k_shot = 1;
  bool maml_analogy = true;
  std::size_t meta_batches = 0;  // per epoch; 0 = one pass over the train corpus

  // Model widths; the input width comes from the data.
  std::size_t embed_dim = 64;
  std::size_t attribute_slots = 10;
  std::size_t rule_slots = 6;
  std::size_t task_dim = 64;
  std::size_t latent_dim = 256;
};

// Command-line mode names: baseline, analogy, analogy-inf, analogy-var,
// analogy-gen, meta-contrast, maml.
std::string mode_name(const RunConfig& cfg);
void apply_mode_name(std::string_view name, RunConfig& cfg);

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Throws std::invalid_argument for non-positive sizes and similar.
void check_run_config(const RunConfig& cfg);

struct Corpora {
  std::vector<rpm::RpmProblem> train;
  std::vector<rpm::RpmProblem> val;
  std::vector<rpm::RpmProblem> test;
  // Domain that query noise panels are drawn from.
  rpm::AttributeDomain noise_domain = rpm::AttributeDomain::full();
  // Free-form description of how the data were prepared (split, subsample).
  nlohmann::json data_record = nlohmann::json::object();
};

struct DataPlan {
  // Train on SplitSpec train shapes; eval-shape problems are halved into
  // validation and test. Otherwise a 6/2/2 fold split.
  bool cross_shapes = false;
  // Few-shot training size; 0 keeps the full training split.
  std::size_t subsample = 0;
  std::uint64_t seed = kDefaultSeed;
};

// Splits `corpus` and fills data_record with the split summary. Throws
// episodes::ConfigurationError if any of the three parts ends up empty.
Corpora prepare_corpora(const std::vector<rpm::RpmProblem>& corpus, const DataPlan& plan);

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

model::EncoderConfig encoder_for(const RunConfig& cfg, const std::vector<rpm::RpmProblem>& data);

// Scores for the 8 choices of a problem.
using Scorer = std::function<std::vector<double>(const rpm::RpmProblem&)>;
Scorer model_scorer(const model::EncoderConfig& cfg, const ParamStore& params);

struct EvalRecord {
  std::int64_t id = 0;
  int predicted = 0;
  int answer = 0;
  double best_score = 0.0;
  bool correct = false;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<EvalRecord> records;
};

EvalResult evaluate(const Scorer& scorer, const std::vector<rpm::RpmProblem>& corpus);
EvalResult evaluate(const model::EncoderConfig& cfg, const ParamStore& params,
                    const std::vector<rpm::RpmProblem>& corpus);

struct BatchStats {
  losses::LossBundle bundle;
  std::size_t correct = 0;
  std::size_t count = 0;
};

// Loss of one minibatch under `run.mode`. Does not call backward.
BatchStats batch_loss(const RunConfig& run, const model::EncoderConfig& cfg,
                      const ParamStore& params, const std::vector<rpm::RpmProblem>& batch,
                      const std::vector<rpm::RpmProblem>& pair_pool,
                      const rpm::AttributeDomain& noise_domain, Rng& rng);

struct TrainOptions {
  // Artifacts (manifest, CSVs, checkpoints) go here when set.
  std::optional<std::filesystem::path> out_dir;
  // Continue from a checkpoint written by a previous run of the same config.
  std::optional<std::filesystem::path> resume_from;
  bool verbose = false;
};

struct TrainResult {
  nlohmann::json manifest;
  model::EncoderConfig encoder;
  ParamStore final_params;
  ParamStore best_params;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::string steps_csv;
  std::string epochs_csv;
};

// Dispatches to the meta-learning loop for TrainMode::maml.
TrainResult train(const RunConfig& run, const Corpora& data, const TrainOptions& options = {});

// Meta-test accuracy: for each task signature with at least k_shot + 1
// problems, adapt a copy of `params` with one inner step on k_shot support
// problems and score the remaining ones.
EvalResult evaluate_adapted(const RunConfig& run, const model::EncoderConfig& cfg,
                            const ParamStore& params, const std::vector<rpm::RpmProblem>& corpus,
                            const rpm::AttributeDomain& noise_domain);

// Loss used for inner adaptation and the outer query step.
Tensor task_loss(const RunConfig& run, const model::EncoderConfig& cfg, const ParamStore& params,
                 const std::vector<const rpm::RpmProblem*>& problems,
                 const rpm::AttributeDomain& noise_domain, Rng& rng, bool with_analogy);

// One SGD step on a clone: params - lr * grad(task_loss).
ParamStore adapt(const RunConfig& run, const model::EncoderConfig& cfg, const ParamStore& params,
                 const std::vector<const rpm::RpmProblem*>& support,
                 const rpm::AttributeDomain& noise_domain, Rng& rng);

}  // namespace analogy::training

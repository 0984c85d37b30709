#pragma once

// Training objectives: NCE answer scoring, the three analogy kernels, soft
// task similarity, the meta-contrastive loss and the weighted total.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "analogy/tensor.hpp"

namespace analogy::losses {

enum class KernelMode { none, inference, variational, generative };

std::string_view to_string(KernelMode m);
KernelMode parse_kernel_mode(std::string_view s);

inline constexpr double kDefaultPullMargin = 0.1;  // p
inline constexpr double kDefaultPushMargin = 0.4;  // n

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// softplus(-s_y) + sum_{j != y} softplus(s_j), i.e. binary cross-entropy of
// sigmoid scores against the one-hot answer.
Tensor nce_loss(const Tensor& scores, int answer);

// Cross-entropy -sum_k p_k log q_k with p = softmax(score_s), q = softmax(score_q).
Tensor analogy_inference(const Tensor& score_s, const Tensor& score_q);

// KL(N(mu_s, sigma_s^2) || N(mu_q, sigma_q^2)) for diagonal Gaussians.
// Throws ContractError if any sigma is not positive.
Tensor analogy_variational(const Tensor& mu_s, const Tensor& sigma_s, const Tensor& mu_q,
                           const Tensor& sigma_q);

// Mean binary cross-entropy of each reconstruction against the target, summed.
Tensor analogy_generative(const Tensor& recon_s, const Tensor& recon_q, const Tensor& target);

// Whatever heads were evaluated for one context (support or a query).
struct HeadOutputs {
  std::optional<Tensor> embedding;
  std::optional<Tensor> task_scores;
  std::optional<Tensor> mu;
  std::optional<Tensor> sigma;
  std::optional<Tensor> recon;
};

struct EpisodeOutputs {
  HeadOutputs support;
  std::vector<HeadOutputs> queries;
  std::optional<Tensor> target;  // 9-panel reconstruction target
};

// Sum over queries of the selected kernel between support and query. Mode
// `none` uses squared embedding distance. Throws ContractError when the mode
// needs a head output that is missing.
Tensor analogy_loss(const EpisodeOutputs& outputs, KernelMode mode);

// |a/|a| - b/|b||, in [0, 2].
double normalized_distance(const Tensor& a, const Tensor& b);

// CReLU(-D + p) - CReLU(D - n) with CReLU(x) = min(max(0, x), 1).
double soft_similarity_from_distance(double distance, double p, double n);
double soft_similarity(const Tensor& score_s, const Tensor& score_t,
                       double p = kDefaultPullMargin, double n = kDefaultPushMargin);

// Task scores of both views (support, then queries) of each problem in a pair.
struct PairScores {
  std::vector<Tensor> source;
  std::vector<Tensor> target;
};

// Sum over pairs and every (source view, target view) combination of
// analogy_inference weighted by the detached soft similarity.
Tensor meta_contrastive_loss(const std::vector<PairScores>& pairs,
                             double p = kDefaultPullMargin, double n = kDefaultPushMargin);

struct LossWeights {
  double analogy = 1.0;
  double contrastive = 1.0;
};

struct LossBundle {
  Tensor total;
  double nce = 0.0;
  double analogy = 0.0;
  double contrastive = 0.0;
  double total_value = 0.0;
  KernelMode kernel_mode = KernelMode::none;
  LossWeights weights;
};

// total = nce + w_a * analogy + w_c * contrastive. Throws NonFiniteLoss naming
// the offending component.
LossBundle total_loss(const Tensor& nce, const Tensor& analogy, const Tensor& contrastive,
                      const LossWeights& weights, KernelMode mode);

}  // namespace analogy::losses

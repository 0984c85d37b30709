#include "analogy/losses.hpp"

#include <algorithm>
#include <cmath>

namespace analogy::losses {

namespace {

constexpr double kProbFloor = 1e-12;

const Tensor& need(const std::optional<Tensor>& t, const char* what, KernelMode mode) {
  if (!t) {
    throw ContractError(std::string("analogy_loss: mode '") + std::string(to_string(mode)) +
                        "' needs " + what);
  }
  return *t;
}

Tensor mean_bce(const Tensor& recon, const Tensor& target) {
  if (recon.shape() != target.shape()) {
    throw DimensionError("analogy_generative: reconstruction " + shape_str(recon.shape()) +
                         " vs target " + shape_str(target.shape()));
  }
  for (double t : target.data()) {
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("analogy_generative: target outside [0,1]");
  }
  const Tensor r = clamp(recon, kProbFloor, 1.0 - kProbFloor);
  const Tensor one_minus_t = add_scalar(neg(target), 1.0);
  return neg(mean(target * log(r) + one_minus_t * log(add_scalar(neg(r), 1.0))));
}

double crelu(double x) { return std::min(std::max(0.0, x), 1.0); }

void check_margins(double p, double n) {
  if (!(p >= 0.0 && p <= 0.5 && n >= 0.0 && n <= 0.5)) {
    throw ContractError("soft_similarity: margins must lie in [0, 0.5]");
  }
}

}  // namespace

std::string_view to_string(KernelMode m) {
  switch (m) {
    case KernelMode::none: return "none";
    case KernelMode::inference: return "inference";
    case KernelMode::variational: return "variational";
    case KernelMode::generative: return "generative";
  }
  return "none";
}

KernelMode parse_kernel_mode(std::string_view s) {
  for (KernelMode m : {KernelMode::none, KernelMode::inference, KernelMode::variational,
                       KernelMode::generative}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown kernel mode '" + std::string(s) + "'");
}

Tensor nce_loss(const Tensor& scores, int answer) {
  if (answer < 0 || static_cast<std::size_t>(answer) >= scores.numel()) {
    throw std::out_of_range("nce_loss: answer " + std::to_string(answer) + " out of range");
  }
  std::vector<double> signs(scores.numel(), 1.0);
  signs[static_cast<std::size_t>(answer)] = -1.0;
  return sum(softplus(scores * Tensor(scores.shape(), std::move(signs))));
}

Tensor analogy_inference(const Tensor& score_s, const Tensor& score_q) {
  if (score_s.shape() != score_q.shape() || score_s.rank() != 1) {
    throw DimensionError("analogy_inference: score shapes " + shape_str(score_s.shape()) + " and " +
                         shape_str(score_q.shape()));
  }
  return neg(sum(softmax(score_s, 0) * log_softmax(score_q, 0)));
}

Tensor analogy_variational(const Tensor& mu_s, const Tensor& sigma_s, const Tensor& mu_q,
                           const Tensor& sigma_q) {
  for (const Tensor* s : {&sigma_s, &sigma_q}) {
    for (double v : s->data()) {
      if (!(v > 0.0)) throw ContractError("analogy_variational: sigma must be positive");
    }
  }
  const Tensor diff = mu_s - mu_q;
  const Tensor var_q = sigma_q * sigma_q;
  const Tensor quad = (sigma_s * sigma_s + diff * diff) / scale(var_q, 2.0);
  return sum(add_scalar(log(sigma_q) - log(sigma_s) + quad, -0.5));
}

Tensor analogy_generative(const Tensor& recon_s, const Tensor& recon_q, const Tensor& target) {
  return mean_bce(recon_s, target) + mean_bce(recon_q, target);
}

Tensor analogy_loss(const EpisodeOutputs& out, KernelMode mode) {
  Tensor total = Tensor::scalar(0.0);
  for (const HeadOutputs& q : out.queries) {
    Tensor term;
    switch (mode) {
      case KernelMode::none: {
        const Tensor d = need(out.support.embedding, "embeddings", mode) -
                         need(q.embedding, "embeddings", mode);
        term = sum(d * d);
        break;
      }
      case KernelMode::inference:
        term = analogy_inference(need(out.support.task_scores, "task scores", mode),
                                 need(q.task_scores, "task scores", mode));
        break;
      case KernelMode::variational:
        term = analogy_variational(need(out.support.mu, "mu", mode),
                                   need(out.support.sigma, "sigma", mode), need(q.mu, "mu", mode),
                                   need(q.sigma, "sigma", mode));
        break;
      case KernelMode::generative:
        term = analogy_generative(need(out.support.recon, "reconstructions", mode),
                                  need(q.recon, "reconstructions", mode),
                                  need(out.target, "a reconstruction target", mode));
        break;
    }
    total = total + term;
  }
  return total;
}

double normalized_distance(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw DimensionError("normalized_distance: size mismatch");
  double na = 0.0, nb = 0.0;
  for (double v : a.data()) na += v * v;
  for (double v : b.data()) nb += v * v;
  if (na == 0.0 || nb == 0.0) throw ContractError("normalized_distance: zero-norm vector");
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double diff = a.at(i) / na - b.at(i) / nb;
    d2 += diff * diff;
  }
  return std::sqrt(d2);
}

double soft_similarity_from_distance(double distance, double p, double n) {
  check_margins(p, n);
  return crelu(-distance + p) - crelu(distance - n);
}

double soft_similarity(const Tensor& score_s, const Tensor& score_t, double p, double n) {
  check_margins(p, n);
  return soft_similarity_from_distance(normalized_distance(score_s, score_t), p, n);
}

Tensor meta_contrastive_loss(const std::vector<PairScores>& pairs, double p, double n) {
  Tensor total = Tensor::scalar(0.0);
  for (const PairScores& pair : pairs) {
    for (const Tensor& es : pair.source) {
      for (const Tensor& et : pair.target) {
        const double weight = soft_similarity(es, et, p, n);
        if (weight == 0.0) continue;
        total = total + scale(analogy_inference(es, et), weight);
      }
    }
  }
  return total;
}

LossBundle total_loss(const Tensor& nce, const Tensor& analogy, const Tensor& contrastive,
                      const LossWeights& weights, KernelMode mode) {
  if (weights.analogy < 0.0 || weights.contrastive < 0.0) {
    throw ContractError("total_loss: weights must be nonnegative");
  }
  LossBundle b;
  b.nce = nce.item();
  b.analogy = analogy.item();
  b.contrastive = contrastive.item();
  b.kernel_mode = mode;
  b.weights = weights;
  for (auto [name, v] : {std::pair{"nce", b.nce}, std::pair{"analogy", b.analogy},
                         std::pair{"contrastive", b.contrastive}}) {
    if (!std::isfinite(v)) {
      throw NonFiniteLoss(std::string("non-finite ") + name + " loss (" + std::to_string(v) + ")");
    }
  }
  b.total = nce;
  if (weights.analogy != 0.0) b.total = b.total + scale(analogy, weights.analogy);
  if (weights.contrastive != 0.0) b.total = b.total + scale(contrastive, weights.contrastive);
  b.total_value = b.total.item();
  if (!std::isfinite(b.total_value)) throw NonFiniteLoss("non-finite total loss");
  return b;
}

}  // namespace analogy::losses

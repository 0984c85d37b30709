#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "analogy/losses.hpp"
#include "analogy/rng.hpp"
#include "support/gradcheck.hpp"

using namespace analogy;
using namespace analogy::losses;
using analogy::testing::check_gradients;

namespace {

Tensor random_vector(Rng& rng, std::size_t n, double scale = 1.0, bool grad = false) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return Tensor::vector(std::move(v), grad);
}

Tensor random_sigma(Rng& rng, std::size_t n, bool grad = false) {
  std::vector<double> v(n);
  for (double& x : v) x = 0.2 + 0.7 * rng.uniform01();
  return Tensor::vector(std::move(v), grad);
}

double entropy(const Tensor& s) {
  double mx = s.at(0);
  for (double v : s.data()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : s.data()) z += std::exp(v - mx);
  double h = 0.0;
  for (double v : s.data()) {
    const double p = std::exp(v - mx) / z;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

TEST(Nce, AllZeroScores) {
  EXPECT_NEAR(nce_loss(Tensor::zeros({8}), 3).item(), 8.0 * std::numbers::ln2, 1e-9);
}

TEST(Nce, PerfectSeparationApproachesZero) {
  std::vector<double> s(8, -40.0);
  s[5] = 40.0;
  const double loss = nce_loss(Tensor::vector(s), 5).item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-15);
  EXPECT_GT(nce_loss(Tensor::vector(s), 4).item(), 79.0);
}

TEST(Nce, MatchesDirectFormulaAndGradients) {
  Rng rng(1);
  Tensor s = random_vector(rng, 8, 2.0, true);
  double expected = 0.0;
  for (int j = 0; j < 8; ++j) {
    const double sig = 1.0 / (1.0 + std::exp(-s.at(j)));
    expected -= j == 2 ? std::log(sig) : std::log(1.0 - sig);
  }
  EXPECT_NEAR(nce_loss(s, 2).item(), expected, 1e-12);
  const auto r = check_gradients([&] { return nce_loss(s, 2); }, {s});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_THROW(nce_loss(s, 8), std::out_of_range);
  EXPECT_THROW(nce_loss(s, -1), std::out_of_range);
}

TEST(Inference, IdenticalInputsGiveEntropy) {
  Rng rng(2);
  const Tensor s = random_vector(rng, 64);
  EXPECT_NEAR(analogy_inference(s, s).item(), entropy(s), 1e-12);
}

TEST(Inference, MatchingOneHotsApproachZero) {
  std::vector<double> v(64, -30.0);
  v[7] = 30.0;
  const Tensor s = Tensor::vector(v);
  EXPECT_LT(analogy_inference(s, s).item(), 1e-20 + 64 * 60 * std::exp(-60.0));
}

TEST(Inference, MatchesLoopAndGradients) {
  Rng rng(3);
  Tensor a = random_vector(rng, 10, 1.5, true), b = random_vector(rng, 10, 1.5, true);
  double za = 0.0, zb = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    za += std::exp(a.at(i));
    zb += std::exp(b.at(i));
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < 10; ++i) ce -= std::exp(a.at(i)) / za * std::log(std::exp(b.at(i)) / zb);
  EXPECT_NEAR(analogy_inference(a, b).item(), ce, 1e-12);
  const auto r = check_gradients([&] { return analogy_inference(a, b); }, {a, b});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  // Gradient reaches both arguments.
  a.zero_grad();
  b.zero_grad();
  analogy_inference(a, b).backward();
  double ga = 0.0, gb = 0.0;
  for (double g : a.grad()) ga += std::fabs(g);
  for (double g : b.grad()) gb += std::fabs(g);
  EXPECT_GT(ga, 0.0);
  EXPECT_GT(gb, 0.0);
}

TEST(Inference, GibbsInequality) {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const Tensor s = random_vector(rng, 64, 2.0), q = random_vector(rng, 64, 2.0);
    ASSERT_GE(analogy_inference(s, q).item(), analogy_inference(s, s).item() - 1e-12);
  }
}

TEST(Variational, SelfDivergenceIsZero) {
  Rng rng(5);
  const Tensor mu = random_vector(rng, 256), sigma = random_sigma(rng, 256);
  EXPECT_NEAR(analogy_variational(mu, sigma, mu, sigma).item(), 0.0, 1e-12);
}

TEST(Variational, UnitShiftIsHalfPerDimension) {
  const Tensor zero = Tensor::zeros({5}), one = Tensor::full({5}, 1.0);
  EXPECT_NEAR(analogy_variational(zero, one, one, one).item(), 2.5, 1e-15);
}

TEST(Variational, MatchesMonteCarloEstimate) {
  Rng rng(6);
  const std::size_t dim = 4;
  const Tensor mu_s = random_vector(rng, dim), sigma_s = random_sigma(rng, dim);
  const Tensor mu_q = random_vector(rng, dim), sigma_q = random_sigma(rng, dim);
  const double closed = analogy_variational(mu_s, sigma_s, mu_q, sigma_q).item();
  EXPECT_GE(closed, 0.0);
  // log p(z) - log q(z) with z = mu_s + sigma_s * eps.
  constexpr int kSamples = 100000;
  double total = 0.0, total_sq = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    double log_ratio = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double eps = rng.normal();
      const double z = mu_s.at(k) + sigma_s.at(k) * eps;
      const double zq = (z - mu_q.at(k)) / sigma_q.at(k);
      log_ratio += -0.5 * eps * eps - std::log(sigma_s.at(k)) + 0.5 * zq * zq +
                   std::log(sigma_q.at(k));
    }
    total += log_ratio;
    total_sq += log_ratio * log_ratio;
  }
  const double mean = total / kSamples;
  const double se = std::sqrt((total_sq / kSamples - mean * mean) / kSamples);
  EXPECT_NEAR(mean, closed, 3 * se);
}

TEST(Variational, NonnegativeAndGradients) {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    ASSERT_GE(analogy_variational(random_vector(rng, 8), random_sigma(rng, 8), random_vector(rng, 8),
                                  random_sigma(rng, 8))
                  .item(),
              0.0);
  }
  Tensor ms = random_vector(rng, 6, 1.0, true), ss = random_sigma(rng, 6, true);
  Tensor mq = random_vector(rng, 6, 1.0, true), sq = random_sigma(rng, 6, true);
  const auto r = check_gradients([&] { return analogy_variational(ms, ss, mq, sq); },
                                 {ms, ss, mq, sq});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Variational, NonPositiveSigmaIsContractError) {
  const Tensor mu = Tensor::zeros({2});
  EXPECT_THROW(analogy_variational(mu, Tensor::vector({1.0, 0.0}), mu, Tensor::full({2}, 1.0)),
               ContractError);
}

TEST(Generative, HalfEverywhere) {
  const Tensor half = Tensor::full({9, 22}, 0.5);
  Rng rng(8);
  std::vector<double> t(9 * 22);
  for (double& v : t) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  const Tensor target({9, 22}, t);
  EXPECT_NEAR(analogy_generative(half, half, target).item(), 2.0 * std::numbers::ln2, 1e-12);
}

TEST(Generative, PerfectReconstructionIsBinaryEntropy) {
  Rng rng(9);
  std::vector<double> t(40);
  for (double& v : t) v = 0.05 + 0.9 * rng.uniform01();
  const Tensor target({4, 10}, t);
  double h = 0.0;
  for (double v : t) h -= v * std::log(v) + (1 - v) * std::log(1 - v);
  h /= 40.0;
  EXPECT_NEAR(analogy_generative(target, target, target).item(), 2.0 * h, 1e-12);
  const Tensor off = Tensor::full({4, 10}, 0.3);
  EXPECT_GT(analogy_generative(off, target, target).item(), 2.0 * h);
}

TEST(Generative, SaturatedOutputsStayFinite) {
  const Tensor ones = Tensor::full({2, 3}, 1.0), zeros = Tensor::zeros({2, 3});
  EXPECT_TRUE(std::isfinite(analogy_generative(ones, zeros, zeros).item()));
}

TEST(Generative, GradientsAndShapeCheck) {
  Rng rng(10);
  std::vector<double> r1(12), r2(12), t(12);
  for (double& v : r1) v = 0.1 + 0.8 * rng.uniform01();
  for (double& v : r2) v = 0.1 + 0.8 * rng.uniform01();
  for (double& v : t) v = rng.bernoulli(0.5);
  Tensor a({3, 4}, r1, true), b({3, 4}, r2, true);
  const Tensor target({3, 4}, t);
  const auto r = check_gradients([&] { return analogy_generative(a, b, target); }, {a, b});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_THROW(analogy_generative(a, Tensor::full({4, 3}, 0.5), target), DimensionError);
}

TEST(AnalogyLoss, NoQueriesIsZero) {
  EpisodeOutputs out;
  out.support.embedding = Tensor::vector({1.0, 2.0});
  for (KernelMode m : {KernelMode::none, KernelMode::inference, KernelMode::variational,
                       KernelMode::generative}) {
    EXPECT_EQ(analogy_loss(out, m).item(), 0.0);
  }
}

TEST(AnalogyLoss, NoneModeIsSquaredDistance) {
  EpisodeOutputs out;
  out.support.embedding = Tensor::vector({1.0, 2.0, 3.0});
  HeadOutputs same, shifted;
  same.embedding = Tensor::vector({1.0, 2.0, 3.0});
  shifted.embedding = Tensor::vector({1.0, 0.0, 4.0});
  out.queries = {same};
  EXPECT_EQ(analogy_loss(out, KernelMode::none).item(), 0.0);
  out.queries = {same, shifted};
  EXPECT_DOUBLE_EQ(analogy_loss(out, KernelMode::none).item(), 5.0);
}

TEST(AnalogyLoss, InferenceDecomposesOverQueries) {
  Rng rng(11);
  EpisodeOutputs out;
  out.support.task_scores = random_vector(rng, 64);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    HeadOutputs q;
    q.task_scores = random_vector(rng, 64);
    expected += analogy_inference(*out.support.task_scores, *q.task_scores).item();
    out.queries.push_back(q);
  }
  EXPECT_NEAR(analogy_loss(out, KernelMode::inference).item(), expected, 1e-12);
}

TEST(AnalogyLoss, MissingHeadIsContractError) {
  EpisodeOutputs out;
  out.support.embedding = Tensor::vector({1.0});
  HeadOutputs q;
  q.embedding = Tensor::vector({1.0});
  out.queries = {q};
  EXPECT_THROW(analogy_loss(out, KernelMode::inference), ContractError);
  EXPECT_THROW(analogy_loss(out, KernelMode::variational), ContractError);
  EXPECT_THROW(analogy_loss(out, KernelMode::generative), ContractError);
}

TEST(SoftSimilarity, ClosedFormPoints) {
  const Tensor v = Tensor::vector({0.3, -1.2, 2.0});
  EXPECT_EQ(soft_similarity(v, v, 0.1, 0.4), 0.1);
  EXPECT_EQ(soft_similarity(v, scale(v, -2.0), 0.1, 0.4), -1.0);
  EXPECT_EQ(soft_similarity_from_distance(0.0, 0.1, 0.4), 0.1);
  EXPECT_EQ(soft_similarity_from_distance(2.0, 0.1, 0.4), -1.0);
  EXPECT_EQ(soft_similarity_from_distance(0.25, 0.1, 0.4), 0.0);
  EXPECT_NEAR(soft_similarity_from_distance(1.4, 0.1, 0.4), -1.0, 1e-15);
  EXPECT_EQ(soft_similarity_from_distance(1.5, 0.1, 0.4), -1.0);
}

TEST(SoftSimilarity, RangeAndErrors) {
  for (double d = 0.0; d <= 2.0; d += 0.01) {
    const double s = soft_similarity_from_distance(d, 0.1, 0.4);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 0.1);
  }
  EXPECT_THROW(soft_similarity(Tensor::zeros({3}), Tensor::full({3}, 1.0)), ContractError);
  EXPECT_THROW(soft_similarity_from_distance(0.0, 0.6, 0.4), ContractError);
}

TEST(MetaContrastive, EmptyIsZero) { EXPECT_EQ(meta_contrastive_loss({}).item(), 0.0); }

TEST(MetaContrastive, ZeroWeightGivesZero) {
  // Two unit vectors at distance 0.25: inside the (p, n) dead zone.
  const double angle = 2.0 * std::asin(0.125);
  const Tensor a = Tensor::vector({1.0, 0.0}), b = Tensor::vector({std::cos(angle), std::sin(angle)});
  EXPECT_NEAR(normalized_distance(a, b), 0.25, 1e-12);
  PairScores pair{{a}, {b}};
  EXPECT_EQ(meta_contrastive_loss({pair}).item(), 0.0);
}

TEST(MetaContrastive, MonotoneInSimilarity) {
  // Fixed positive cross-entropy factor; sweep the distance through the margins.
  const double ce = 1.7;
  double previous = -1e9;
  for (double d : {2.0, 1.0, 0.25, 0.0}) {
    const double loss = ce * soft_similarity_from_distance(d, 0.1, 0.4);
    EXPECT_GE(loss, previous);
    previous = loss;
  }
}

TEST(MetaContrastive, SumsAllCombinationsWithDetachedWeight) {
  Rng rng(12);
  Tensor s0 = random_vector(rng, 8, 0.2, true), s1 = random_vector(rng, 8, 0.2, true);
  Tensor t0 = random_vector(rng, 8, 0.2, true), t1 = random_vector(rng, 8, 0.2, true);
  PairScores pair{{s0, s1}, {t0, t1}};
  double expected = 0.0;
  for (const Tensor& a : pair.source) {
    for (const Tensor& b : pair.target) {
      expected += analogy_inference(a, b).item() * soft_similarity(a, b);
    }
  }
  EXPECT_NEAR(meta_contrastive_loss({pair}).item(), expected, 1e-12);
  // Gradient equals the weighted cross-entropy gradient (weights constant).
  meta_contrastive_loss({pair}).backward();
  std::vector<double> got(s0.grad().begin(), s0.grad().end());
  s0.zero_grad();
  const Tensor manual = scale(analogy_inference(s0, t0), soft_similarity(s0, t0)) +
                        scale(analogy_inference(s0, t1), soft_similarity(s0, t1));
  manual.backward();
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got[i], s0.grad()[i], 1e-12);
}

TEST(Total, ZeroWeightsIsNce) {
  const Tensor nce = Tensor::scalar(2.5), a = Tensor::scalar(3.0), c = Tensor::scalar(-1.0);
  const LossBundle b = total_loss(nce, a, c, {0.0, 0.0}, KernelMode::none);
  EXPECT_EQ(b.total_value, b.nce);
  EXPECT_EQ(b.total.item(), 2.5);
}

TEST(Total, WeightedSumRecomputation) {
  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const double n = rng.uniform01() * 5, a = rng.uniform01() * 3, c = rng.normal();
    const LossWeights w{rng.uniform01() * 2, rng.uniform01() * 2};
    const LossBundle b = total_loss(Tensor::scalar(n), Tensor::scalar(a), Tensor::scalar(c), w,
                                    KernelMode::inference);
    EXPECT_NEAR(b.total_value, n + w.analogy * a + w.contrastive * c, 1e-12);
    EXPECT_TRUE(std::isfinite(b.total_value));
  }
}

TEST(Total, NonFiniteComponentAborts) {
  const Tensor nan = Tensor::scalar(std::nan(""));
  EXPECT_THROW(total_loss(Tensor::scalar(1.0), nan, Tensor::scalar(0.0), {}, KernelMode::none),
               NonFiniteLoss);
  EXPECT_THROW(total_loss(Tensor::scalar(1.0), Tensor::scalar(0.0), Tensor::scalar(0.0),
                          {-1.0, 1.0}, KernelMode::none),
               ContractError);
}

TEST(Descent, OneStepReducesEachLoss) {
  Rng rng(14);
  Tensor s = random_vector(rng, 8, 1.0, true);
  Tensor q = random_vector(rng, 8, 1.0, true);
  Tensor sig = random_sigma(rng, 8, true);
  const Tensor target = Tensor::full({8}, 0.7);
  std::vector<std::function<Tensor()>> losses{
      [&] { return nce_loss(s, 1); },
      [&] { return analogy_inference(s, q); },
      [&] { return analogy_variational(s, sig, q, Tensor::full({8}, 0.5)); },
      [&] { return analogy_generative(sigmoid(s), sigmoid(q), target); },
  };
  for (auto& f : losses) {
    for (Tensor* t : {&s, &q, &sig}) t->zero_grad();
    const Tensor l = f();
    const double before = l.item();
    l.backward();
    for (Tensor* t : {&s, &q, &sig}) {
      auto v = t->mutable_data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= 1e-3 * t->grad()[i];
    }
    EXPECT_LT(f().item(), before);
  }
}

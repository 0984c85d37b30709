#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "analogy/episodes.hpp"
#include "analogy/rpm_generator.hpp"

using namespace analogy;
using namespace analogy::episodes;
using rpm::AttributeDomain;
using rpm::Attribute;
using rpm::Config;
using rpm::Rule;
using rpm::RuleKind;

namespace {

int differing_positions(const Context& a, const Context& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += !(a[i] == b[i]);
  return n;
}

std::vector<RpmProblem> center_corpus(std::size_t n, std::uint64_t seed = 1) {
  return rpm::generate_corpus(Config::center, AttributeDomain::full(), seed, n);
}

// Corpus with `signatures` distinct fixed rule sets, `per` problems each.
std::vector<RpmProblem> signature_corpus(int signatures, std::size_t per) {
  const std::vector<int> steps{1, -1, 2, -2};
  std::vector<RpmProblem> out;
  for (int s = 0; s < signatures; ++s) {
    rpm::GeneratorOptions opts;
    const RuleKind color_kind = s % 2 ? RuleKind::distribute_three : RuleKind::constant;
    opts.fixed_rules = std::vector<Rule>{{Attribute::type, RuleKind::constant, 0},
                                         {Attribute::size, RuleKind::progression, steps[s / 2]},
                                         {Attribute::color, color_kind, 0}};
    auto part = rpm::generate_corpus(Config::center, AttributeDomain::full(), 40 + s, per, opts);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

TEST(MakeQueries, SingleQuerySharesSevenPanels) {
  const auto corpus = center_corpus(20);
  Rng rng(3);
  for (const RpmProblem& p : corpus) {
    const Episode ep = make_queries(p, 1, rng);
    ASSERT_EQ(ep.k(), 1u);
    EXPECT_EQ(ep.support, p.context);
    EXPECT_EQ(differing_positions(ep.support, ep.queries[0]), 1);
    EXPECT_FALSE(ep.support[ep.replaced_positions[0]] == ep.queries[0][ep.replaced_positions[0]]);
  }
}

TEST(MakeQueries, EightQueriesCoverEveryPosition) {
  const auto p = rpm::generate_problem(Config::grid3, AttributeDomain::full(), 2, 0);
  Rng rng(9);
  const Episode ep = make_queries(p, 8, rng);
  std::vector<int> sorted = ep.replaced_positions;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
  for (std::size_t i = 0; i < ep.k(); ++i) {
    EXPECT_EQ(differing_positions(ep.support, ep.queries[i]), 1);
  }
}

TEST(MakeQueries, PositionFrequencyWithinBinomialBound) {
  const auto p = rpm::generate_problem(Config::center, AttributeDomain::full(), 2, 0);
  Rng rng(10);
  constexpr int kEpisodes = 1000;
  std::array<int, 8> counts{};
  for (int i = 0; i < kEpisodes; ++i) {
    for (int pos : make_queries(p, 4, rng).replaced_positions) ++counts[pos];
  }
  // Each episode replaces a given position with probability 4/8.
  const double prob = 0.5;
  const double mean = kEpisodes * prob;
  const double sd = std::sqrt(kEpisodes * prob * (1 - prob));
  for (int c : counts) EXPECT_LE(std::fabs(c - mean), 3 * sd);
  // Equivalently 1/8 of all replacements per position.
  for (int c : counts) EXPECT_NEAR(c / (4.0 * kEpisodes), 0.125, 3 * sd / (4.0 * kEpisodes));
}

TEST(MakeQueries, RejectsOutOfRangeK) {
  const auto p = rpm::generate_problem(Config::center, AttributeDomain::full(), 2, 0);
  Rng rng(1);
  EXPECT_THROW(make_queries(p, 0, rng), ConfigurationError);
  EXPECT_THROW(make_queries(p, 9, rng), ConfigurationError);
}

TEST(MakeQueries, NoiseStaysInsideDomain) {
  const auto domain = AttributeDomain::with_shapes({rpm::triangle, rpm::square});
  const auto corpus = rpm::generate_corpus(Config::grid2, domain, 5, 50);
  Rng rng(2);
  for (const RpmProblem& p : corpus) {
    for (const Context& q : make_queries(p, 8, rng, domain).queries) {
      for (const Panel& panel : q) {
        for (const rpm::Entity& e : panel.entities) EXPECT_TRUE(domain.allows_shape(e.type));
      }
    }
  }
}

TEST(MakeQueries, RasterPanelsGetRasterNoise) {
  rpm::GeneratorOptions opts;
  opts.raster_hw = std::pair{10, 10};
  const auto p = rpm::generate_problem(Config::center, AttributeDomain::full(), 1, 0, opts);
  Rng rng(1);
  const Episode ep = make_queries(p, 2, rng);
  for (std::size_t i = 0; i < ep.k(); ++i) {
    const Panel& noise = ep.queries[i][ep.replaced_positions[i]];
    ASSERT_TRUE(noise.raster);
    EXPECT_EQ(noise.raster->pixels.size(), 100u);
  }
}

TEST(MakeQueries, PureFunctionOfSeed) {
  const auto p = rpm::generate_problem(Config::grid2, AttributeDomain::full(), 2, 0);
  Rng a(77), b(77);
  const Episode x = make_queries(p, 5, a), y = make_queries(p, 5, b);
  EXPECT_EQ(x.queries, y.queries);
  EXPECT_EQ(x.replaced_positions, y.replaced_positions);
}

TEST(DomainPairs, IdenticalRulesAreSameTask) {
  const auto corpus = signature_corpus(1, 2);
  Rng rng(1);
  const auto pairs = make_domain_pairs(corpus, 5, rng);
  for (const DomainPair& p : pairs) {
    EXPECT_TRUE(p.same_task);
    EXPECT_NE(p.source_index, p.target_index);
  }
}

TEST(DomainPairs, SingletonCorpusIsAnError) {
  const auto corpus = center_corpus(1);
  Rng rng(1);
  EXPECT_THROW(make_domain_pairs(corpus, 1, rng), ConfigurationError);
}

TEST(DomainPairs, StratifiedSameTaskFraction) {
  const auto corpus = signature_corpus(4, 25);
  Rng rng(6);
  const auto pairs = make_domain_pairs(corpus, 1000, rng);
  std::size_t same = 0;
  for (const DomainPair& p : pairs) {
    ASSERT_NE(p.source_index, p.target_index);
    const bool truth =
        rpm::task_signature(corpus[p.source_index]) == rpm::task_signature(corpus[p.target_index]);
    ASSERT_EQ(p.same_task, truth);
    same += p.same_task;
  }
  EXPECT_GE(same / 1000.0, 0.25);
}

TEST(DomainPairs, StratifiesOnDiverseCorpus) {
  const auto corpus = center_corpus(300, 4);
  Rng rng(6);
  std::size_t same = 0;
  for (const DomainPair& p : make_domain_pairs(corpus, 1000, rng)) same += p.same_task;
  EXPECT_GE(same / 1000.0, 0.25);
}

TEST(FewShot, FullSizeIsIdentity) {
  const auto corpus = center_corpus(30);
  EXPECT_EQ(few_shot_subsample(corpus, corpus.size(), 1), corpus);
}

TEST(FewShot, DeterministicAndWithoutReplacement) {
  const auto idx = few_shot_indices(1000, 161, kDefaultSeed);
  EXPECT_EQ(idx, few_shot_indices(1000, 161, kDefaultSeed));
  EXPECT_NE(idx, few_shot_indices(1000, 161, kDefaultSeed + 1));
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 161u);
}

TEST(FewShot, PresetsMatchTableSizes) {
  EXPECT_EQ(few_shot_preset("t1-14"), 14u);
  EXPECT_EQ(few_shot_preset("t2-35"), 35u);
  EXPECT_EQ(few_shot_preset("77"), 77u);
  EXPECT_EQ(few_shot_preset("t6-651"), 651u);
  EXPECT_THROW(few_shot_preset("15"), ConfigurationError);
  const auto corpus = center_corpus(100);
  EXPECT_EQ(few_shot_subsample(corpus, few_shot_preset("t1-14"), 3).size(), 14u);
}

TEST(FewShot, TooLargeIsAnError) {
  EXPECT_THROW(few_shot_indices(10, 11, 1), ConfigurationError);
}

TEST(CrossAttribute, DefaultSpecShapes) {
  const SplitSpec spec;
  EXPECT_EQ(spec.train_shapes, (std::vector<int>{rpm::triangle, rpm::square, rpm::hexagon}));
  EXPECT_EQ(spec.eval_shapes, (std::vector<int>{rpm::pentagon, rpm::circle}));
}

TEST(CrossAttribute, TrainNeverSeesEvalShapes) {
  auto corpus = center_corpus(400);
  auto restricted = rpm::generate_corpus(Config::grid2, AttributeDomain::with_shapes({1, 3}), 2, 50);
  corpus.insert(corpus.end(), restricted.begin(), restricted.end());
  const SplitSpec spec;
  const SplitResult split = cross_attribute_split(corpus, spec);
  EXPECT_EQ(split.train.size() + split.eval.size() + split.discarded, corpus.size());
  EXPECT_GT(split.discarded, 0u);
  for (const RpmProblem& p : split.train) {
    for (const Panel& panel : p.context) {
      for (const rpm::Entity& e : panel.entities) {
        EXPECT_TRUE(e.type != rpm::pentagon && e.type != rpm::circle);
      }
    }
    for (const Panel& panel : p.choices) {
      for (const rpm::Entity& e : panel.entities) {
        EXPECT_TRUE(e.type != rpm::pentagon && e.type != rpm::circle);
      }
    }
  }
  for (const RpmProblem& p : split.eval) {
    for (int s : rpm::shapes_used(p)) EXPECT_TRUE(s == rpm::pentagon || s == rpm::circle);
  }
}

TEST(CrossAttribute, OverlapAndEmptySidesAreErrors) {
  const auto corpus = center_corpus(50);
  SplitSpec overlap;
  overlap.eval_shapes = {rpm::square, rpm::circle};
  EXPECT_THROW(cross_attribute_split(corpus, overlap), ConfigurationError);
  const auto only_train =
      rpm::generate_corpus(Config::center, AttributeDomain::with_shapes({0, 1, 3}), 1, 20);
  EXPECT_THROW(cross_attribute_split(only_train, SplitSpec{}), ConfigurationError);
}

TEST(FoldSplit, SixTwoTwo) {
  const auto corpus = center_corpus(100);
  const DatasetSplit s = fold_split(corpus, 1);
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
  std::set<std::int64_t> ids;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (const RpmProblem& p : *part) ids.insert(p.id);
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(MetaBatches, TwoWayOneShot) {
  const auto corpus = signature_corpus(4, 3);
  Rng rng(1);
  const auto batches = meta_task_batches(corpus, 2, 1, rng, 10);
  ASSERT_EQ(batches.size(), 10u);
  for (const MetaBatch& b : batches) {
    ASSERT_EQ(b.size(), 2u);
    EXPECT_NE(b[0].signature, b[1].signature);
    for (const MetaTask& t : b) {
      ASSERT_EQ(t.support.size(), 1u);
      ASSERT_EQ(t.query.size(), 1u);
      EXPECT_NE(t.support[0], t.query[0]);
      EXPECT_EQ(rpm::task_signature(corpus[t.support[0]]), t.signature);
      EXPECT_EQ(rpm::task_signature(corpus[t.query[0]]), t.signature);
    }
  }
}

TEST(MetaBatches, SupportAndQueryDisjoint) {
  const auto corpus = signature_corpus(6, 8);
  Rng rng(2);
  for (const MetaBatch& b : meta_task_batches(corpus, 3, 3, rng, 20)) {
    for (const MetaTask& t : b) {
      std::set<std::size_t> s(t.support.begin(), t.support.end());
      for (std::size_t q : t.query) EXPECT_FALSE(s.count(q));
      EXPECT_EQ(s.size(), 3u);
    }
  }
}

TEST(MetaBatches, AllWaysFormOnSixSignatures) {
  const auto corpus = signature_corpus(6, 2);
  for (int n = 2; n <= 6; ++n) {
    Rng rng(n);
    EXPECT_NO_THROW(meta_task_batches(corpus, n, 1, rng, 5)) << n;
  }
  Rng rng(0);
  EXPECT_THROW(meta_task_batches(corpus, 7, 1, rng, 1), ConfigurationError);
  EXPECT_THROW(meta_task_batches(corpus, 2, 2, rng, 1), ConfigurationError);
}

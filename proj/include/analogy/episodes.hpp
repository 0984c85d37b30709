#pragma once

// Analogical training units built from generated problems: support/query
// episodes, cross-problem domain pairs, few-shot subsamples, shape splits and
// K-shot/N-task meta batches.

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "analogy/rng.hpp"
#include "analogy/rpm.hpp"

namespace analogy::episodes {

using rpm::Panel;
using rpm::RpmProblem;
using Context = std::array<Panel, rpm::kPanels>;

inline constexpr int kDefaultQueries = 4;

class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Episode {
  Context support;
  std::vector<Context> queries;
  std::vector<int> replaced_positions;  // one per query

  std::size_t k() const { return queries.size(); }
};

// k queries, each a copy of the support with one context position replaced by
// a noise panel drawn uniformly from `domain`. Positions are drawn without
// replacement. Panels carrying a raster get a uniform-random noise raster of
// the same size.
Episode make_queries(const RpmProblem& problem, int k, Rng& rng,
                     const rpm::AttributeDomain& domain = rpm::AttributeDomain::full());

struct DomainPair {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  Episode source;
  Episode target;
  bool same_task = false;
};

// Pairs of distinct problems. When the corpus has a signature shared by at
// least two problems, each pair is drawn from within one signature with
// probability 1/2 and uniformly otherwise.
std::vector<DomainPair> make_domain_pairs(
    const std::vector<RpmProblem>& corpus, std::size_t count, Rng& rng, int k = 1,
    const rpm::AttributeDomain& domain = rpm::AttributeDomain::full());

inline constexpr std::array<std::size_t, 6> kFewShotPresets{14, 35, 77, 161, 322, 651};

// Accepts "t1-14" style names or the bare size.
std::size_t few_shot_preset(std::string_view name);

// Deterministic n-sample without replacement, kept in corpus order.
std::vector<RpmProblem> few_shot_subsample(const std::vector<RpmProblem>& corpus, std::size_t n,
                                           std::uint64_t seed);
std::vector<std::size_t> few_shot_indices(std::size_t corpus_size, std::size_t n,
                                          std::uint64_t seed);

struct SplitSpec {
  std::vector<int> train_shapes{rpm::triangle, rpm::square, rpm::hexagon};
  std::vector<int> eval_shapes{rpm::pentagon, rpm::circle};
  std::uint64_t seed = kDefaultSeed;
};

struct SplitResult {
  std::vector<RpmProblem> train;
  std::vector<RpmProblem> eval;
  std::size_t discarded = 0;
};

// Problems using only train shapes go to train, only eval shapes to eval;
// anything else is discarded.
SplitResult cross_attribute_split(const std::vector<RpmProblem>& corpus, const SplitSpec& spec);

struct DatasetSplit {
  std::vector<RpmProblem> train;
  std::vector<RpmProblem> val;
  std::vector<RpmProblem> test;
};

// Seeded shuffle, then 6/2/2 proportions.
DatasetSplit fold_split(const std::vector<RpmProblem>& corpus, std::uint64_t seed);

struct MetaTask {
  std::string signature;
  std::vector<std::size_t> support;  // corpus indices
  std::vector<std::size_t> query;
};

using MetaBatch = std::vector<MetaTask>;

// Signature -> corpus indices, in corpus order.
std::map<std::string, std::vector<std::size_t>> group_by_signature(
    const std::vector<RpmProblem>& corpus);

// `count` batches, each of n_ways distinct signatures with k_shot support and
// k_shot query problems per signature.
std::vector<MetaBatch> meta_task_batches(const std::vector<RpmProblem>& corpus, int n_ways,
                                         int k_shot, Rng& rng, std::size_t count);

}  // namespace analogy::episodes

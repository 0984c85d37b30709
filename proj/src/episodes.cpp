#include "analogy/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "analogy/rpm_generator.hpp"

namespace analogy::episodes {

namespace {

Panel noise_panel(const Panel& replaced, rpm::Config config, const rpm::AttributeDomain& domain,
                  Rng& rng) {
  Panel noise;
  do {
    noise = rpm::random_panel(config, domain, rng);
  } while (rpm::same_content(noise, replaced));
  if (replaced.raster) {
    rpm::Raster r{replaced.raster->height, replaced.raster->width, {}};
    r.pixels.resize(replaced.raster->pixels.size());
    for (double& v : r.pixels) v = static_cast<double>(rng.uniform_index(256)) / 255.0;
    noise.raster = std::move(r);
  }
  return noise;
}

}  // namespace

Episode make_queries(const RpmProblem& problem, int k, Rng& rng,
                     const rpm::AttributeDomain& domain) {
  if (k < 1 || k > static_cast<int>(rpm::kPanels)) {
    throw ConfigurationError("query count must be in 1..8, got " + std::to_string(k));
  }
  Episode ep;
  ep.support = problem.context;
  std::vector<int> positions(rpm::kPanels);
  std::iota(positions.begin(), positions.end(), 0);
  rng.shuffle(positions);
  positions.resize(static_cast<std::size_t>(k));
  for (int pos : positions) {
    Context q = problem.context;
    q[pos] = noise_panel(problem.context[pos], problem.config, domain, rng);
    ep.queries.push_back(std::move(q));
  }
  ep.replaced_positions = std::move(positions);
  return ep;
}

std::vector<DomainPair> make_domain_pairs(const std::vector<RpmProblem>& corpus,
                                          std::size_t count, Rng& rng, int k,
                                          const rpm::AttributeDomain& domain) {
  if (corpus.size() < 2) throw ConfigurationError("domain pairs need at least two problems");
  std::vector<std::vector<std::size_t>> pairable;
  for (auto& [sig, members] : group_by_signature(corpus)) {
    if (members.size() >= 2) pairable.push_back(members);
  }
  std::vector<DomainPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t a, b;
    if (!pairable.empty() && rng.bernoulli(0.5)) {
      const auto& group = rng.pick(pairable);
      a = group[rng.uniform_index(group.size())];
      do {
        b = group[rng.uniform_index(group.size())];
      } while (b == a);
    } else {
      a = rng.uniform_index(corpus.size());
      do {
        b = rng.uniform_index(corpus.size());
      } while (b == a);
    }
    DomainPair pair;
    pair.source_index = a;
    pair.target_index = b;
    pair.source = make_queries(corpus[a], k, rng, domain);
    pair.target = make_queries(corpus[b], k, rng, domain);
    pair.same_task = rpm::task_signature(corpus[a]) == rpm::task_signature(corpus[b]);
    out.push_back(std::move(pair));
  }
  return out;
}

std::size_t few_shot_preset(std::string_view name) {
  for (std::size_t i = 0; i < kFewShotPresets.size(); ++i) {
    const std::string size = std::to_string(kFewShotPresets[i]);
    if (name == size || name == "t" + std::to_string(i + 1) + "-" + size) {
      return kFewShotPresets[i];
    }
  }
  throw ConfigurationError("unknown few-shot preset '" + std::string(name) + "'");
}

std::vector<std::size_t> few_shot_indices(std::size_t corpus_size, std::size_t n,
                                          std::uint64_t seed) {
  if (n > corpus_size) {
    throw ConfigurationError("subsample of " + std::to_string(n) + " exceeds corpus of " +
                             std::to_string(corpus_size));
  }
  std::vector<std::size_t> idx(corpus_size);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {0x5eb5a3b1e}));
  // Partial Fisher-Yates: the first n slots are a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(corpus_size - i)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<RpmProblem> few_shot_subsample(const std::vector<RpmProblem>& corpus, std::size_t n,
                                           std::uint64_t seed) {
  std::vector<RpmProblem> out;
  for (std::size_t i : few_shot_indices(corpus.size(), n, seed)) out.push_back(corpus[i]);
  return out;
}

SplitResult cross_attribute_split(const std::vector<RpmProblem>& corpus, const SplitSpec& spec) {
  const std::set<int> train(spec.train_shapes.begin(), spec.train_shapes.end());
  const std::set<int> eval(spec.eval_shapes.begin(), spec.eval_shapes.end());
  if (train.empty() || eval.empty()) throw ConfigurationError("shape sets must be non-empty");
  for (int s : train) {
    if (eval.count(s)) {
      throw ConfigurationError("shape '" + std::string(rpm::shape_name(s)) +
                               "' is in both train and eval sets");
    }
  }
  SplitResult out;
  for (const RpmProblem& p : corpus) {
    const auto used = rpm::shapes_used(p);
    const auto within = [&used](const std::set<int>& allowed) {
      return std::all_of(used.begin(), used.end(), [&](int s) { return allowed.count(s) > 0; });
    };
    if (within(train)) {
      out.train.push_back(p);
    } else if (within(eval)) {
      out.eval.push_back(p);
    } else {
      ++out.discarded;
    }
  }
  if (out.train.empty() || out.eval.empty()) {
    throw ConfigurationError("cross-attribute split left an empty side (train " +
                             std::to_string(out.train.size()) + ", eval " +
                             std::to_string(out.eval.size()) + ")");
  }
  return out;
}

DatasetSplit fold_split(const std::vector<RpmProblem>& corpus, std::uint64_t seed) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {0xf01d}));
  rng.shuffle(idx);
  const std::size_t n_train = corpus.size() * 6 / 10;
  const std::size_t n_val = corpus.size() * 2 / 10;
  DatasetSplit out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto& dst = i < n_train ? out.train : i < n_train + n_val ? out.val : out.test;
    dst.push_back(corpus[idx[i]]);
  }
  return out;
}

std::map<std::string, std::vector<std::size_t>> group_by_signature(
    const std::vector<RpmProblem>& corpus) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    groups[rpm::task_signature(corpus[i])].push_back(i);
  }
  return groups;
}

std::vector<MetaBatch> meta_task_batches(const std::vector<RpmProblem>& corpus, int n_ways,
                                         int k_shot, Rng& rng, std::size_t count) {
  if (n_ways < 1 || k_shot < 1) throw ConfigurationError("n_ways and k_shot must be positive");
  std::vector<std::pair<std::string, std::vector<std::size_t>>> eligible;
  for (auto& [sig, members] : group_by_signature(corpus)) {
    if (members.size() >= 2 * static_cast<std::size_t>(k_shot)) eligible.emplace_back(sig, members);
  }
  if (eligible.size() < static_cast<std::size_t>(n_ways)) {
    throw ConfigurationError("need " + std::to_string(n_ways) + " task signatures with at least " +
                             std::to_string(2 * k_shot) + " problems each, found " +
                             std::to_string(eligible.size()));
  }
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<MetaBatch> out;
  out.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    rng.shuffle(order);
    MetaBatch batch;
    for (int w = 0; w < n_ways; ++w) {
      auto [sig, members] = eligible[order[w]];
      rng.shuffle(members);
      MetaTask task{sig, {}, {}};
      task.support.assign(members.begin(), members.begin() + k_shot);
      task.query.assign(members.begin() + k_shot, members.begin() + 2 * k_shot);
      batch.push_back(std::move(task));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace analogy::episodes

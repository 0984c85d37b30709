#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "analogy/rng.hpp"
#include "analogy/rpm.hpp"

namespace analogy::rpm {

struct GeneratorOptions {
  // When set, these rules are used verbatim instead of being sampled.
  std::optional<std::vector<Rule>> fixed_rules;
  int max_distractor_attempts = 100;
  int max_rule_resamples = 20;
  // Render a raster of this height×width for every panel.
  std::optional<std::pair<int, int>> raster_hw;
};

// Draws one problem from `rng`. Throws GenerationError if no rule set yields
// seven distinct distractors within the retry budget.
RpmProblem generate_problem(Config config, const AttributeDomain& domain, Rng& rng,
                            const GeneratorOptions& options = {});

// Per-problem stream derived from (seed, index); the result does not depend
// on which other indices are generated or in what order.
RpmProblem generate_problem(Config config, const AttributeDomain& domain, std::uint64_t seed,
                            std::uint64_t index, const GeneratorOptions& options = {});

std::vector<RpmProblem> generate_corpus(Config config, const AttributeDomain& domain,
                                        std::uint64_t seed, std::size_t count,
                                        const GeneratorOptions& options = {},
                                        std::uint64_t first_index = 0);

// Uniform random panel for `config`: layout, type, size and color all drawn
// from the domain.
Panel random_panel(Config config, const AttributeDomain& domain, Rng& rng);

}  // namespace analogy::rpm

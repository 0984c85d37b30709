#include "analogy/rpm_generator.hpp"

#include <algorithm>
#include <numeric>

#include "analogy/rpm_render.hpp"

namespace analogy::rpm {

namespace {

constexpr std::size_t kCells = 9;
using Grid = std::array<int, kCells>;  // row-major 3×3 attribute values

// Values are kept in rule units: number=count, size=level+1, color=level,
// type=canonical shape index.
std::vector<int> attribute_values(Attribute a, Config config, const AttributeDomain& d) {
  std::vector<int> v;
  switch (a) {
    case Attribute::number:
      for (int n = 1; n <= slot_count(config); ++n) v.push_back(n);
      break;
    case Attribute::type:
      v = d.shape_types;
      break;
    case Attribute::size:
      for (int s = 1; s <= d.size_levels; ++s) v.push_back(s);
      break;
    case Attribute::color:
      for (int c = 0; c < d.color_levels; ++c) v.push_back(c);
      break;
    case Attribute::position:
      break;
  }
  return v;
}

std::vector<Rule> applicable_rules(Attribute a, Config config, const AttributeDomain& d) {
  std::vector<Rule> out;
  auto consider = [&](RuleKind k, int param) {
    Rule r{a, k, param};
    if (rule_applicable(r, config, d)) out.push_back(r);
  };
  consider(RuleKind::constant, 0);
  for (int step : {-2, -1, 1, 2}) consider(RuleKind::progression, step);
  for (int sign : {1, -1}) consider(RuleKind::arithmetic, sign);
  consider(RuleKind::distribute_three, 0);
  return out;
}

// Kind first (uniform over applicable kinds), then its parameter.
Rule sample_rule(Attribute a, Config config, const AttributeDomain& d, Rng& rng) {
  const auto all = applicable_rules(a, config, d);
  std::vector<RuleKind> kinds;
  for (const Rule& r : all) {
    if (std::find(kinds.begin(), kinds.end(), r.kind) == kinds.end()) kinds.push_back(r.kind);
  }
  const RuleKind kind = rng.pick(kinds);
  std::vector<Rule> of_kind;
  std::copy_if(all.begin(), all.end(), std::back_inserter(of_kind),
               [kind](const Rule& r) { return r.kind == kind; });
  return rng.pick(of_kind);
}

std::vector<Rule> sample_rules(Config config, const AttributeDomain& d, Rng& rng) {
  std::vector<Rule> rules;
  if (config != Config::center) {
    if (rng.bernoulli(0.5)) {
      rules.push_back(sample_rule(Attribute::number, config, d, rng));
    } else {
      rules.push_back(Rule{Attribute::position, RuleKind::constant, 0});
    }
  }
  for (Attribute a : {Attribute::type, Attribute::size, Attribute::color}) {
    rules.push_back(sample_rule(a, config, d, rng));
  }
  return rules;
}

Grid build_grid(const Rule& rule, Config config, const AttributeDomain& d, Rng& rng) {
  const auto values = attribute_values(rule.attribute, config, d);
  const int lo = values.front();
  const int hi = values.back();
  Grid g{};
  switch (rule.kind) {
    case RuleKind::constant:
      g.fill(rng.pick(values));
      break;
    case RuleKind::progression: {
      const int s = rule.param;
      const int first_lo = s > 0 ? lo : lo - 2 * s;
      const int first_hi = s > 0 ? hi - 2 * s : hi;
      for (int row = 0; row < 3; ++row) {
        const int start = rng.uniform_int(first_lo, first_hi);
        for (int col = 0; col < 3; ++col) g[row * 3 + col] = start + col * s;
      }
      break;
    }
    case RuleKind::arithmetic: {
      const int second_min = std::max(lo, 1);
      std::vector<std::pair<int, int>> pairs;
      for (int a = lo; a <= hi; ++a) {
        for (int b = second_min; b <= hi; ++b) {
          const int c = rule.param > 0 ? a + b : a - b;
          if (c >= lo && c <= hi) pairs.emplace_back(a, b);
        }
      }
      for (int row = 0; row < 3; ++row) {
        const auto [a, b] = rng.pick(pairs);
        g[row * 3 + 0] = a;
        g[row * 3 + 1] = b;
        g[row * 3 + 2] = rule.param > 0 ? a + b : a - b;
      }
      break;
    }
    case RuleKind::distribute_three: {
      std::vector<int> pool = values;
      rng.shuffle(pool);
      for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) g[row * 3 + col] = pool[(col + row) % 3];
      }
      break;
    }
  }
  return g;
}

std::vector<int> random_positions(int count, int slots, Rng& rng) {
  std::vector<int> all(slots);
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

// Panel-level descriptor used while building; converted to entities last.
struct Cell {
  std::vector<int> positions;
  int type = 0;
  int size = 1;  // rule units
  int color = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

Panel to_panel(const Cell& c) {
  Panel p;
  for (int pos : c.positions) p.entities.push_back(Entity{pos, c.type, c.size - 1, c.color});
  return p;
}

bool constrained(const std::vector<Rule>& rules, Attribute a) {
  return std::any_of(rules.begin(), rules.end(), [a](const Rule& r) { return r.attribute == a; });
}

// A candidate satisfies every rule exactly when its rule-constrained
// attributes equal the answer's, since each rule fixes the missing cell.
bool satisfies_rules(const Cell& candidate, const Cell& answer, const std::vector<Rule>& rules) {
  for (const Rule& r : rules) {
    switch (r.attribute) {
      case Attribute::number:
        if (candidate.positions.size() != answer.positions.size()) return false;
        break;
      case Attribute::position:
        if (candidate.positions != answer.positions) return false;
        break;
      case Attribute::type:
        if (candidate.type != answer.type) return false;
        break;
      case Attribute::size:
        if (candidate.size != answer.size) return false;
        break;
      case Attribute::color:
        if (candidate.color != answer.color) return false;
        break;
    }
  }
  return true;
}

int other_value(const std::vector<int>& values, int current, Rng& rng) {
  std::vector<int> others;
  std::copy_if(values.begin(), values.end(), std::back_inserter(others),
               [current](int v) { return v != current; });
  return rng.pick(others);
}

Cell perturb(const Cell& answer, const std::vector<Attribute>& attrs, Config config,
             const AttributeDomain& d, Rng& rng) {
  std::vector<Attribute> chosen = attrs;
  rng.shuffle(chosen);
  const std::size_t count = std::min<std::size_t>(chosen.size(), 1 + rng.uniform_index(2));
  chosen.resize(count);
  Cell c = answer;
  const int slots = slot_count(config);
  for (Attribute a : chosen) {
    switch (a) {
      case Attribute::number: {
        const int n = other_value(attribute_values(a, config, d),
                                  static_cast<int>(answer.positions.size()), rng);
        c.positions = random_positions(n, slots, rng);
        break;
      }
      case Attribute::position: {
        do {
          c.positions = random_positions(rng.uniform_int(1, slots), slots, rng);
        } while (c.positions == answer.positions);
        break;
      }
      case Attribute::type:
        c.type = other_value(d.shape_types, answer.type, rng);
        break;
      case Attribute::size:
        c.size = other_value(attribute_values(a, config, d), answer.size, rng);
        break;
      case Attribute::color:
        c.color = other_value(attribute_values(a, config, d), answer.color, rng);
        break;
    }
  }
  return c;
}

std::vector<Attribute> perturbable(const std::vector<Rule>& rules, Config config,
                                   const AttributeDomain& d) {
  std::vector<Attribute> out;
  for (Attribute a : {Attribute::number, Attribute::position, Attribute::type, Attribute::size,
                      Attribute::color}) {
    if (!constrained(rules, a)) continue;
    if (a == Attribute::type && d.shape_types.size() < 2) continue;
    if ((a == Attribute::number || a == Attribute::position) && slot_count(config) < 2) continue;
    out.push_back(a);
  }
  return out;
}

std::optional<std::array<Cell, kCells>> build_matrix(const std::vector<Rule>& rules,
                                                     Config config, const AttributeDomain& d,
                                                     Rng& rng) {
  const int slots = slot_count(config);
  std::array<Cell, kCells> cells{};
  Grid type_grid{}, size_grid{}, color_grid{}, number_grid{};
  number_grid.fill(1);
  bool have_number = false;
  bool have_position = false;
  for (const Rule& r : rules) {
    if (!rule_applicable(r, config, d)) return std::nullopt;
    const Grid g = r.attribute == Attribute::position ? Grid{} : build_grid(r, config, d, rng);
    switch (r.attribute) {
      case Attribute::number: number_grid = g; have_number = true; break;
      case Attribute::position: have_position = true; break;
      case Attribute::type: type_grid = g; break;
      case Attribute::size: size_grid = g; break;
      case Attribute::color: color_grid = g; break;
    }
  }
  if (have_number && have_position) return std::nullopt;
  for (Attribute a : {Attribute::type, Attribute::size, Attribute::color}) {
    if (!constrained(rules, a)) return std::nullopt;
  }

  std::vector<int> fixed_positions{0};
  if (config != Config::center && !have_number) {
    fixed_positions = random_positions(rng.uniform_int(1, slots), slots, rng);
  }
  for (std::size_t i = 0; i < kCells; ++i) {
    Cell& c = cells[i];
    c.positions = have_number ? random_positions(number_grid[i], slots, rng) : fixed_positions;
    c.type = type_grid[i];
    c.size = size_grid[i];
    c.color = color_grid[i];
  }
  return cells;
}

}  // namespace

Panel random_panel(Config config, const AttributeDomain& domain, Rng& rng) {
  const int slots = slot_count(config);
  Cell c;
  c.positions = random_positions(rng.uniform_int(1, slots), slots, rng);
  c.type = rng.pick(domain.shape_types);
  c.size = rng.uniform_int(1, domain.size_levels);
  c.color = rng.uniform_int(0, domain.color_levels - 1);
  return to_panel(c);
}

RpmProblem generate_problem(Config config, const AttributeDomain& domain, Rng& rng,
                            const GeneratorOptions& options) {
  for (int attempt = 0; attempt < options.max_rule_resamples; ++attempt) {
    const std::vector<Rule> rules =
        options.fixed_rules ? *options.fixed_rules : sample_rules(config, domain, rng);
    const auto cells = build_matrix(rules, config, domain, rng);
    if (!cells) {
      if (options.fixed_rules) break;
      continue;
    }
    const Cell& answer = (*cells)[8];
    const auto attrs = perturbable(rules, config, domain);
    if (attrs.empty()) {
      if (options.fixed_rules) break;
      continue;
    }

    std::vector<Cell> candidates{answer};
    for (int tries = 0; tries < options.max_distractor_attempts && candidates.size() < kPanels;
         ++tries) {
      Cell d = perturb(answer, attrs, config, domain, rng);
      if (satisfies_rules(d, answer, rules)) continue;
      if (std::find(candidates.begin(), candidates.end(), d) != candidates.end()) continue;
      candidates.push_back(std::move(d));
    }
    if (candidates.size() < kPanels) continue;

    std::array<std::size_t, kPanels> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    RpmProblem p;
    p.config = config;
    p.rules = rules;
    for (std::size_t i = 0; i < kPanels; ++i) p.context[i] = to_panel((*cells)[i]);
    for (std::size_t slot = 0; slot < kPanels; ++slot) {
      p.choices[slot] = to_panel(candidates[order[slot]]);
      if (order[slot] == 0) p.answer = static_cast<int>(slot);
    }
    if (options.raster_hw) {
      const auto [h, w] = *options.raster_hw;
      for (auto* panels : {&p.context, &p.choices}) {
        for (Panel& panel : *panels) panel.raster = render_raster(panel, config, h, w);
      }
    }
    return p;
  }
  throw GenerationError("could not generate a problem for configuration " +
                        std::string(to_string(config)) + " within the retry budget");
}

RpmProblem generate_problem(Config config, const AttributeDomain& domain, std::uint64_t seed,
                            std::uint64_t index, const GeneratorOptions& options) {
  Rng rng(derive_seed(seed, {index}));
  RpmProblem p = generate_problem(config, domain, rng, options);
  p.id = static_cast<std::int64_t>(index);
  p.seed = {seed, index};
  return p;
}

std::vector<RpmProblem> generate_corpus(Config config, const AttributeDomain& domain,
                                        std::uint64_t seed, std::size_t count,
                                        const GeneratorOptions& options,
                                        std::uint64_t first_index) {
  std::vector<RpmProblem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_problem(config, domain, seed, first_index + i, options));
  }
  return out;
}

}  // namespace analogy::rpm

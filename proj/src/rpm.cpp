#include "analogy/rpm.hpp"

#include <algorithm>
#include <set>

namespace analogy::rpm {

namespace {

constexpr std::array<std::string_view, kShapeCount> kShapeNames{
    "triangle", "square", "pentagon", "hexagon", "circle"};

}  // namespace

std::string_view to_string(Config c) {
  switch (c) {
    case Config::center: return "center";
    case Config::grid2: return "grid2";
    case Config::grid3: return "grid3";
  }
  return "?";
}

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::number: return "number";
    case Attribute::position: return "position";
    case Attribute::type: return "type";
    case Attribute::size: return "size";
    case Attribute::color: return "color";
  }
  return "?";
}

std::string_view to_string(RuleKind k) {
  switch (k) {
    case RuleKind::constant: return "constant";
    case RuleKind::progression: return "progression";
    case RuleKind::arithmetic: return "arithmetic";
    case RuleKind::distribute_three: return "distribute_three";
  }
  return "?";
}

std::string_view shape_name(int shape) {
  if (shape < 0 || shape >= kShapeCount) return "?";
  return kShapeNames[shape];
}

Config parse_config(std::string_view s) {
  if (s == "center") return Config::center;
  if (s == "grid2") return Config::grid2;
  if (s == "grid3") return Config::grid3;
  throw std::invalid_argument("unknown configuration: " + std::string(s));
}

Attribute parse_attribute(std::string_view s) {
  for (Attribute a : {Attribute::number, Attribute::position, Attribute::type,
                      Attribute::size, Attribute::color}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown attribute: " + std::string(s));
}

RuleKind parse_rule_kind(std::string_view s) {
  for (RuleKind k : {RuleKind::constant, RuleKind::progression, RuleKind::arithmetic,
                     RuleKind::distribute_three}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown rule kind: " + std::string(s));
}

int parse_shape(std::string_view s) {
  for (int i = 0; i < kShapeCount; ++i) {
    if (kShapeNames[i] == s) return i;
  }
  throw std::invalid_argument("unknown shape: " + std::string(s));
}

int slot_count(Config c) {
  switch (c) {
    case Config::center: return 1;
    case Config::grid2: return 4;
    case Config::grid3: return 9;
  }
  return 1;
}

int grid_side(Config c) {
  switch (c) {
    case Config::center: return 1;
    case Config::grid2: return 2;
    case Config::grid3: return 3;
  }
  return 1;
}

AttributeDomain AttributeDomain::with_shapes(std::vector<int> shapes) {
  std::sort(shapes.begin(), shapes.end());
  shapes.erase(std::unique(shapes.begin(), shapes.end()), shapes.end());
  if (shapes.empty()) throw std::invalid_argument("attribute domain needs at least one shape");
  for (int s : shapes) {
    if (s < 0 || s >= kShapeCount) throw std::invalid_argument("shape index out of range");
  }
  AttributeDomain d;
  d.shape_types = std::move(shapes);
  return d;
}

bool AttributeDomain::allows_shape(int shape) const {
  return std::find(shape_types.begin(), shape_types.end(), shape) != shape_types.end();
}

bool same_content(const Panel& a, const Panel& b) { return a.entities == b.entities; }

std::string to_string(const Rule& r) {
  return std::string(to_string(r.attribute)) + ":" + std::string(to_string(r.kind)) + ":" +
         std::to_string(r.param);
}

std::string task_signature(std::vector<Rule> rules) {
  std::sort(rules.begin(), rules.end());
  std::string out;
  for (const Rule& r : rules) {
    if (!out.empty()) out += '|';
    out += to_string(r);
  }
  return out;
}

std::string task_signature(const RpmProblem& p) { return task_signature(p.rules); }

std::vector<int> shapes_used(const RpmProblem& p) {
  std::set<int> used;
  for (const auto* panels : {&p.context, &p.choices}) {
    for (const Panel& panel : *panels) {
      for (const Entity& e : panel.entities) used.insert(e.type);
    }
  }
  return {used.begin(), used.end()};
}

int arithmetic_offset(Attribute a) {
  return (a == Attribute::number || a == Attribute::size) ? 1 : 0;
}

namespace {

// Value range of an ordinal attribute in arithmetic/progression units.
std::pair<int, int> value_range(Attribute a, Config config, const AttributeDomain& d) {
  switch (a) {
    case Attribute::number: return {1, slot_count(config)};
    case Attribute::size: return {1, d.size_levels};
    case Attribute::color: return {0, d.color_levels - 1};
    default: return {0, -1};
  }
}

}  // namespace

bool rule_applicable(const Rule& rule, Config config, const AttributeDomain& domain) {
  const bool layout = rule.attribute == Attribute::number || rule.attribute == Attribute::position;
  if (layout && config == Config::center) return false;
  switch (rule.kind) {
    case RuleKind::constant:
      return rule.param == 0;
    case RuleKind::progression: {
      if (rule.attribute == Attribute::type || rule.attribute == Attribute::position) return false;
      const int step = rule.param;
      if (step != -2 && step != -1 && step != 1 && step != 2) return false;
      const auto [lo, hi] = value_range(rule.attribute, config, domain);
      return hi - lo >= 2 * std::abs(step);
    }
    case RuleKind::arithmetic: {
      if (rule.attribute == Attribute::type || rule.attribute == Attribute::position) return false;
      if (rule.param != 1 && rule.param != -1) return false;
      const auto [lo, hi] = value_range(rule.attribute, config, domain);
      // Smallest non-trivial second operand is max(lo, 1).
      const int second = std::max(lo, 1);
      return rule.param > 0 ? lo + second <= hi : hi - second >= lo;
    }
    case RuleKind::distribute_three: {
      if (rule.param != 0) return false;
      switch (rule.attribute) {
        case Attribute::type: return domain.shape_types.size() >= 3;
        case Attribute::size: return domain.size_levels >= 3;
        case Attribute::color: return domain.color_levels >= 3;
        default: return false;
      }
    }
  }
  return false;
}

}  // namespace analogy::rpm

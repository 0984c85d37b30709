#include "analogy/rpm_validator.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace analogy::rpm {

namespace {

// Panel-level reading of one attribute in rule units; nullopt when the panel
// does not carry a single well-defined value.
using Reading = std::optional<std::vector<int>>;

Reading read(const Panel& p, Attribute a) {
  if (p.entities.empty()) return std::nullopt;
  switch (a) {
    case Attribute::number:
      return std::vector<int>{static_cast<int>(p.entities.size())};
    case Attribute::position: {
      std::vector<int> pos;
      for (const Entity& e : p.entities) pos.push_back(e.position);
      std::sort(pos.begin(), pos.end());
      return pos;
    }
    default: {
      auto value = [a](const Entity& e) {
        return a == Attribute::type ? e.type : a == Attribute::size ? e.size + 1 : e.color;
      };
      const int v = value(p.entities.front());
      for (const Entity& e : p.entities) {
        if (value(e) != v) return std::nullopt;
      }
      return std::vector<int>{v};
    }
  }
}

bool panel_well_formed(const Panel& p, Config config, const AttributeDomain& d,
                       std::string* why) {
  const int slots = slot_count(config);
  if (p.entities.empty() || static_cast<int>(p.entities.size()) > slots) {
    *why = "entity count outside configuration bounds";
    return false;
  }
  std::set<int> positions;
  for (const Entity& e : p.entities) {
    if (e.position < 0 || e.position >= slots || !positions.insert(e.position).second) {
      *why = "invalid or repeated position";
      return false;
    }
    if (!d.allows_shape(e.type) || e.size < 0 || e.size >= d.size_levels || e.color < 0 ||
        e.color >= d.color_levels) {
      *why = "attribute index outside domain";
      return false;
    }
  }
  if (p.raster) {
    for (double v : p.raster->pixels) {
      if (!(v >= 0.0 && v <= 1.0)) {
        *why = "raster value outside [0,1]";
        return false;
      }
    }
  }
  return true;
}

int scalar(const std::vector<int>& v) { return v.front(); }

// Predicted value of the missing cell for one rule, given the 8 context
// readings (row-major, cell 8 absent). nullopt when the context violates it.
Reading predict(const Rule& rule, const std::array<Reading, kPanels>& cells) {
  for (const Reading& c : cells) {
    if (!c) return std::nullopt;
  }
  auto at = [&](int row, int col) { return *cells[row * 3 + col]; };
  switch (rule.kind) {
    case RuleKind::constant: {
      for (const Reading& c : cells) {
        if (*c != *cells[0]) return std::nullopt;
      }
      return *cells[0];
    }
    case RuleKind::progression: {
      if (rule.attribute == Attribute::position || rule.attribute == Attribute::type) {
        return std::nullopt;
      }
      const int s = rule.param;
      for (int row = 0; row < 2; ++row) {
        if (scalar(at(row, 1)) - scalar(at(row, 0)) != s ||
            scalar(at(row, 2)) - scalar(at(row, 1)) != s) {
          return std::nullopt;
        }
      }
      if (scalar(at(2, 1)) - scalar(at(2, 0)) != s) return std::nullopt;
      return std::vector<int>{scalar(at(2, 1)) + s};
    }
    case RuleKind::arithmetic: {
      if (rule.attribute == Attribute::position || rule.attribute == Attribute::type) {
        return std::nullopt;
      }
      auto combine = [&](int a, int b) { return rule.param > 0 ? a + b : a - b; };
      for (int row = 0; row < 2; ++row) {
        if (combine(scalar(at(row, 0)), scalar(at(row, 1))) != scalar(at(row, 2))) {
          return std::nullopt;
        }
      }
      return std::vector<int>{combine(scalar(at(2, 0)), scalar(at(2, 1)))};
    }
    case RuleKind::distribute_three: {
      if (rule.attribute == Attribute::position || rule.attribute == Attribute::number) {
        return std::nullopt;
      }
      const std::set<int> triple{scalar(at(0, 0)), scalar(at(0, 1)), scalar(at(0, 2))};
      if (triple.size() != 3) return std::nullopt;
      const std::set<int> row1{scalar(at(1, 0)), scalar(at(1, 1)), scalar(at(1, 2))};
      if (row1 != triple) return std::nullopt;
      // Latin-square columns.
      for (int col = 0; col < 3; ++col) {
        if (scalar(at(0, col)) == scalar(at(1, col))) return std::nullopt;
      }
      const int a = scalar(at(2, 0)), b = scalar(at(2, 1));
      if (a == b || !triple.count(a) || !triple.count(b)) return std::nullopt;
      if (a == scalar(at(0, 0)) || a == scalar(at(1, 0)) || b == scalar(at(0, 1)) ||
          b == scalar(at(1, 1))) {
        return std::nullopt;
      }
      for (int v : triple) {
        if (v != a && v != b) return std::vector<int>{v};
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

ValidationReport validate_problem(const RpmProblem& problem, const AttributeDomain& domain) {
  ValidationReport report;
  std::string why;
  for (std::size_t i = 0; i < kPanels; ++i) {
    if (!panel_well_formed(problem.context[i], problem.config, domain, &why)) {
      report.well_formed = false;
      report.issues.push_back("context " + std::to_string(i) + ": " + why);
    }
  }
  std::array<bool, kPanels> candidate_ok{};
  for (std::size_t j = 0; j < kPanels; ++j) {
    candidate_ok[j] = panel_well_formed(problem.choices[j], problem.config, domain, &why);
    if (!candidate_ok[j]) report.issues.push_back("choice " + std::to_string(j) + ": " + why);
  }
  if (problem.answer < 0 || problem.answer >= static_cast<int>(kPanels)) {
    report.well_formed = false;
    report.issues.push_back("answer index out of range");
  }
  if (problem.rules.empty()) {
    report.well_formed = false;
    report.issues.push_back("no rules");
  }

  std::vector<std::pair<Attribute, std::vector<int>>> predictions;
  for (const Rule& rule : problem.rules) {
    std::array<Reading, kPanels> cells;
    for (std::size_t i = 0; i < kPanels; ++i) cells[i] = read(problem.context[i], rule.attribute);
    Reading expected = predict(rule, cells);
    if (!expected) {
      report.context_consistent = false;
      report.issues.push_back("context violates rule " + to_string(rule));
      continue;
    }
    predictions.emplace_back(rule.attribute, std::move(*expected));
  }

  for (std::size_t j = 0; j < kPanels; ++j) {
    bool ok = report.well_formed && report.context_consistent && candidate_ok[j];
    for (const auto& [attr, expected] : predictions) {
      if (!ok) break;
      const Reading got = read(problem.choices[j], attr);
      ok = got && *got == expected;
    }
    report.satisfies[j] = ok;
    if (ok) report.satisfying.push_back(static_cast<int>(j));
  }
  if (report.satisfying.size() != 1) {
    report.issues.push_back(std::to_string(report.satisfying.size()) +
                            " candidates satisfy all rules");
  } else if (report.satisfying.front() != problem.answer) {
    report.issues.push_back("satisfying candidate is not the labelled answer");
  }
  return report;
}

}  // namespace analogy::rpm

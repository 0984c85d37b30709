#pragma once

// Symbolic Raven-style matrix problems: panels, rules, problems and the
// attribute domain they are drawn from.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace analogy::rpm {

enum class Config { center, grid2, grid3 };

enum class Attribute { number, position, type, size, color };

enum class RuleKind { constant, progression, arithmetic, distribute_three };

// Canonical shape indices.
enum Shape : int { triangle = 0, square = 1, pentagon = 2, hexagon = 3, circle = 4 };

inline constexpr int kShapeCount = 5;
inline constexpr int kSizeLevels = 6;
inline constexpr int kColorLevels = 10;
inline constexpr std::size_t kPanels = 8;

std::string_view to_string(Config c);
std::string_view to_string(Attribute a);
std::string_view to_string(RuleKind k);
std::string_view shape_name(int shape);
Config parse_config(std::string_view s);
Attribute parse_attribute(std::string_view s);
RuleKind parse_rule_kind(std::string_view s);
int parse_shape(std::string_view s);

// Number of entity slots: Center=1, 2×2Grid=4, 3×3Grid=9.
int slot_count(Config c);
// Side length of the slot grid.
int grid_side(Config c);

struct AttributeDomain {
  std::vector<int> shape_types{triangle, square, pentagon, hexagon, circle};
  int size_levels = kSizeLevels;
  int color_levels = kColorLevels;

  static AttributeDomain full() { return {}; }
  static AttributeDomain with_shapes(std::vector<int> shapes);
  bool allows_shape(int shape) const;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entity {
  int position = 0;
  int type = 0;
  int size = 0;
  int color = 0;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Raster {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major, values in [0,1]

  friend bool operator==(const Raster&, const Raster&) = default;
};

// Every entity of a generated panel carries the same type, size and color;
// rules act on those panel-level values.
struct Panel {
  std::vector<Entity> entities;  // sorted by position
  std::optional<Raster> raster;

  friend bool operator==(const Panel&, const Panel&) = default;
};

// True when the entity list (not the raster) is identical.
bool same_content(const Panel& a, const Panel& b);

struct Rule {
  Attribute attribute = Attribute::size;
  RuleKind kind = RuleKind::constant;
  // Progression: step in {-2,-1,+1,+2}; Arithmetic: +1 add, -1 subtract;
  // otherwise 0.
  int param = 0;

  friend bool operator==(const Rule&, const Rule&) = default;
  friend auto operator<=>(const Rule&, const Rule&) = default;
};

std::string to_string(const Rule& r);

struct RpmProblem {
  std::int64_t id = 0;
  Config config = Config::center;
  std::array<Panel, kPanels> context;  // row-major cells 1..8
  std::array<Panel, kPanels> choices;
  int answer = 0;
  std::vector<Rule> rules;
  std::array<std::uint64_t, 2> seed{0, 0};  // (global seed, problem index)

  friend bool operator==(const RpmProblem&, const RpmProblem&) = default;
};

// Canonical task signature: the rule multiset in sorted order.
std::string task_signature(const RpmProblem& p);
std::string task_signature(std::vector<Rule> rules);

// Shape indices appearing in any context or choice panel.
std::vector<int> shapes_used(const RpmProblem& p);

// Domain-aware applicability of a rule. Covers both the kind table
// (Constant: all; Progression/Arithmetic: number,size,color; DistributeThree:
// type,size,color) and whether the domain has enough levels for it.
bool rule_applicable(const Rule& rule, Config config, const AttributeDomain& domain);

// Arithmetic and ordering act on one-based values for number and size
// (so 1+1=2 is a valid size), and on the raw index for color.
int arithmetic_offset(Attribute a);

}  // namespace analogy::rpm

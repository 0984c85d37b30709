#pragma once

#include <array>
#include <string>
#include <vector>

#include "analogy/rpm.hpp"

namespace analogy::rpm {

struct ValidationReport {
  bool well_formed = true;
  // Rows 1–2 (and the first two cells of row 3) are consistent with every rule.
  bool context_consistent = true;
  std::array<bool, kPanels> satisfies{};
  std::vector<int> satisfying;
  std::vector<std::string> issues;

  // Exactly one candidate completes the matrix and it is the labelled answer.
  bool valid(int answer) const {
    return well_formed && context_consistent && satisfying.size() == 1 &&
           satisfying.front() == answer;
  }
};

// Independent rule checker. Re-derives each rule's completion of the third
// row from the context alone and tests every candidate against it. Never
// throws; malformed input yields a failing report.
ValidationReport validate_problem(const RpmProblem& problem,
                                  const AttributeDomain& domain = AttributeDomain::full());

}  // namespace analogy::rpm

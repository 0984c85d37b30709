#pragma once

#include <cmath>
#include <span>

namespace analogy::testing {

// Regularized upper incomplete gamma Q(a, x), series / continued fraction.
inline double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a, total = term;
    for (int n = 1; n < 500; ++n) {
      term *= x / (a + n);
      total += term;
      if (term < total * 1e-15) break;
    }
    return 1.0 - total * std::exp(log_prefix);
  }
  // Lentz continued fraction.
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(log_prefix) * h;
}

// Pearson chi-square p-value against a uniform expectation.
inline double chi_square_uniform_p(std::span<const long> counts) {
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long c : counts) stat += (c - expected) * (c - expected) / expected;
  return gamma_q(0.5 * static_cast<double>(counts.size() - 1), 0.5 * stat);
}

}  // namespace analogy::testing

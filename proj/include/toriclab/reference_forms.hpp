#pragma once

// Closed-form island boundaries on the unit square for
//     g_s = ½ Σ_i (x_i log x_i + (1−x_i) log(1−x_i)) + s Σ_i c_i x_i²/2,
// where H_ii = 1/(2 x_i(1−x_i)) + s c_i vanishes at
//     x_i = ½ ± (1/(2|s|)) √(|s|(|s| − 2/c_i)).
// The example's printed expressions use (1 + |s|) and (2 + |s|) under the
// root instead; both are reported so the mismatch stays visible.

#include <cmath>
#include <optional>
#include <string>

namespace toriclab {

struct BoundaryPair {
  std::optional<double> lo;
  std::optional<double> hi;
};

struct AxisBoundaryForms {
  int axis = 0;             // 0-based
  double coefficient = 0;   // c_i
  BoundaryPair derived;     // roots of H_ii = 0
  BoundaryPair printed;     // as printed in the example
  std::string derived_expr;
  std::string printed_expr;
  bool printed_inside_unit_interval = false;
  double max_mismatch = 0.0;  // largest |derived − printed| when both exist
};

inline BoundaryPair half_plus_minus(double s_abs, double radicand) {
  if (!(radicand >= 0.0) || s_abs == 0.0) return {};
  const double r = std::sqrt(radicand) / (2.0 * s_abs);
  return {0.5 - r, 0.5 + r};
}

/// Boundaries along axis i for coefficient c_i (2 for x₁, 1 for x₂ in the
/// example). Only meaningful for s < 0.
inline AxisBoundaryForms unit_square_boundaries(int axis, double coefficient, double s) {
  AxisBoundaryForms f;
  f.axis = axis;
  f.coefficient = coefficient;
  const double a = std::abs(s);
  const double k = 2.0 / coefficient;  // 1 for c=2, 2 for c=1
  f.derived = half_plus_minus(a, a * (a - k));
  f.printed = half_plus_minus(a, a * (k + a));
  const std::string kk = k == 1.0 ? "1" : (k == 2.0 ? "2" : std::to_string(k));
  f.derived_expr = "1/2 +- (1/(2|s|)) sqrt(|s|(|s|-" + kk + "))";
  f.printed_expr = "1/2 +- (1/(2|s|)) sqrt(|s|(" + kk + "+|s|))";
  if (f.printed.lo && f.printed.hi)
    f.printed_inside_unit_interval = *f.printed.lo > 0.0 && *f.printed.hi < 1.0;
  if (f.derived.lo && f.printed.lo)
    f.max_mismatch = std::max(std::abs(*f.derived.lo - *f.printed.lo), std::abs(*f.derived.hi - *f.printed.hi));
  return f;
}

}  // namespace toriclab

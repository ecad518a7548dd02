#pragma once

// Monomial sections σ^m_s = w_s^m e^{−h_s} labelled by interior lattice
// points: pointwise and L² norms, concentration, the diagonal of the
// transform between s = 0 and s, monotonicity along rays in negative
// islands, and the Laplace-rate fits behind exponential suppression.
//
// Everything is computed in the log domain; angular integrals are done
// analytically ((2π)^n on the diagonal, 0 between distinct labels).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "toriclab/errors.hpp"
#include "toriclab/grid.hpp"
#include "toriclab/islands.hpp"
#include "toriclab/potential.hpp"

namespace toriclab {

enum class NormKind { plain, halfform };

struct NormConvention {
  NormKind kind = NormKind::plain;
  bool angular = true;  // include the (2π)^n torus volume
};

inline std::string to_string(NormKind k) { return k == NormKind::plain ? "plain" : "halfform"; }

inline Eigen::VectorXd to_vector(const IntVector& m) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) v[static_cast<Eigen::Index>(i)] = static_cast<double>(m[i]);
  return v;
}

class MonomialSection {
 public:
  MonomialSection(IntVector m, GeodesicRay ray, double s)
      : m_(std::move(m)), ray_(std::move(ray)), s_(s), sp_(ray_.at(s)) {
    const auto& p = ray_.polytope();
    if (m_.size() != static_cast<std::size_t>(p.dim())) throw InvalidArgument("lattice point has wrong dimension");
    if (!p.contains_exact(m_, true)) throw PreconditionError("section label m is not an interior lattice point");
    mx_ = to_vector(m_);
    ell_m_ = p.ells(mx_);
  }

  const IntVector& m() const { return m_; }
  const Eigen::VectorXd& m_point() const { return mx_; }
  const GeodesicRay& ray() const { return ray_; }
  double s() const { return s_; }
  const SymplecticPotential& potential() const { return sp_; }
  int dim() const { return ray_.dim(); }

  MonomialSection at(double s) const { return MonomialSection(m_, ray_, s); }

  /// log |σ|² on the closed polytope via
  ///   Σ β⁻¹[(ℓ_j(m) − ℓ_j(x)) + ℓ_j(m) log ℓ_j(x)] + 2(m−x)·∇χ + 2χ,
  /// which is −∞ on ∂P.
  double log_pointwise_norm_sq(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd l = sp_.ells_closed(x);
    const Eigen::VectorXd& ib = sp_.inverse_beta();
    double v = 0.0;
    for (Eigen::Index j = 0; j < l.size(); ++j) {
      if (l[j] == 0.0) return -std::numeric_limits<double>::infinity();
      v += ib[j] * ((ell_m_[j] - l[j]) + ell_m_[j] * std::log(l[j]));
    }
    const Eigen::VectorXd dchi = sp_.correction_gradient(x);
    return v + 2.0 * (mx_ - x).dot(dchi) + 2.0 * sp_.correction_value(x);
  }

  double pointwise_norm_sq(const Eigen::VectorXd& x) const { return std::exp(log_pointwise_norm_sq(x)); }

  /// 2(m−x)·y_s + 2g_s, interior only; the reference for the form above.
  double log_pointwise_norm_sq_direct(const Eigen::VectorXd& x) const {
    return 2.0 * (mx_ - x).dot(sp_.gradient(x)) + 2.0 * sp_.value(x);
  }

  /// ½ log(2ⁿ det H_s(x)); requires det H_s > 0 and x interior.
  double log_halfform_factor(const Eigen::VectorXd& x) const {
    const double det = sp_.hessian(x).determinant();
    if (!(det > 0.0)) throw ConvexityError("halfform density requires det H_s > 0");
    return 0.5 * (dim() * std::numbers::ln2 + std::log(det));
  }

  double log_density(const Eigen::VectorXd& x, const NormConvention& conv) const {
    if (conv.kind == NormKind::plain) return log_pointwise_norm_sq(x);
    return log_pointwise_norm_sq(x) + log_halfform_factor(x);
  }

 private:
  IntVector m_;
  GeodesicRay ray_;
  double s_;
  SymplecticPotential sp_;
  Eigen::VectorXd mx_;
  Eigen::VectorXd ell_m_;
};

inline double angular_log_factor(int n, const NormConvention& conv) {
  return conv.angular ? n * std::log(2.0 * std::numbers::pi) : 0.0;
}

/// log of the L² norm squared over a box (intersected with P), with the
/// density extended by zero outside P.
inline QuadResult log_l2_over_box(const MonomialSection& sec, const Box& box, const NormConvention& conv,
                                  const QuadratureSpec& quad) {
  const auto& p = sec.ray().polytope();
  auto f = [&](const Eigen::VectorXd& x) {
    if (!p.in_interior(x)) return -std::numeric_limits<double>::infinity();
    return sec.log_density(x, conv);
  };
  QuadResult r = integrate_log(box, quad, f);
  r.log_value += angular_log_factor(sec.dim(), conv);
  return r;
}

inline QuadResult log_l2_norm_sq(const MonomialSection& sec, const NormConvention& conv, const QuadratureSpec& quad) {
  return log_l2_over_box(sec, sec.ray().polytope().bounding_box(), conv, quad);
}

inline double l2_norm_sq(const MonomialSection& sec, const NormConvention& conv, const QuadratureSpec& quad) {
  return log_l2_norm_sq(sec, conv, quad).value();
}

/// Restricted norm over an axis-aligned box K inside the open polytope.
inline QuadResult log_restricted_l2_norm_sq(const MonomialSection& sec, const Box& k, const NormConvention& conv,
                                            const QuadratureSpec& quad) {
  const auto& p = sec.ray().polytope();
  if (k.dim() != p.dim()) throw InvalidArgument("box dimension mismatch");
  for (int c = 0; c < (1 << k.dim()); ++c) {
    Eigen::VectorXd x(k.dim());
    for (int i = 0; i < k.dim(); ++i) x[i] = (c >> i) & 1 ? k.hi[i] : k.lo[i];
    if (!p.in_interior(x)) throw PreconditionError("box K is not inside the open polytope");
  }
  return log_l2_over_box(sec, k, conv, quad);
}

inline double restricted_l2_norm_sq(const MonomialSection& sec, const Box& k, const NormConvention& conv,
                                    const QuadratureSpec& quad) {
  return log_restricted_l2_norm_sq(sec, k, conv, quad).value();
}

/// ⟨σ^m, σ^{m'}⟩: zero for distinct labels by the θ-integral, the squared
/// norm otherwise.
inline double l2_pairing(const MonomialSection& a, const MonomialSection& b, const NormConvention& conv,
                         const QuadratureSpec& quad) {
  if (a.m() != b.m()) return 0.0;
  if (a.s() != b.s()) throw InvalidArgument("pairing of sections at different s");
  return l2_norm_sq(a, conv, quad);
}

/// ‖σ^m_s‖ / e^{g_s(m)}.
inline double norm_ratio(const MonomialSection& sec, const NormConvention& conv, const QuadratureSpec& quad) {
  const double l = log_l2_norm_sq(sec, conv, quad).log_value;
  return std::exp(0.5 * l - sec.potential().value(sec.m_point()));
}

/// Fraction of the squared norm carried by {x : |x − m|_∞ < ε}.
inline double concentration(const MonomialSection& sec, double eps, const NormConvention& conv,
                            const QuadratureSpec& quad) {
  if (!(eps > 0.0)) throw InvalidArgument("concentration: eps must be positive");
  const Box bb = sec.ray().polytope().bounding_box();
  const Eigen::VectorXd lo = sec.m_point().array() - eps, hi = sec.m_point().array() + eps;
  const Box k{bb.lo.cwiseMax(lo), bb.hi.cwiseMin(hi)};
  const double total = log_l2_over_box(sec, bb, conv, quad).log_value;
  const double part = log_l2_over_box(sec, k, conv, quad).log_value;
  return std::min(1.0, std::exp(part - total));
}

/// Diagonal entries e^{−sψ(m)} ‖σ^m_s‖ / ‖σ^m_0‖ over the interior lattice
/// points. Entries are positive reals.
inline std::map<IntVector, std::complex<double>> transform_diagonal(const GeodesicRay& ray, double s,
                                                                    const NormConvention& conv,
                                                                    const QuadratureSpec& quad) {
  std::map<IntVector, std::complex<double>> out;
  for (const auto& m : ray.polytope().lattice_points(true)) {
    const MonomialSection s0(m, ray, 0.0), ss(m, ray, s);
    const double psi_m = ray.psi().is_zero() ? 0.0 : ray.psi().value(to_vector(m));
    const double l = 0.5 * (log_l2_norm_sq(ss, conv, quad).log_value - log_l2_norm_sq(s0, conv, quad).log_value);
    out[m] = std::exp(l - s * psi_m);
  }
  return out;
}

inline std::size_t dim_check(const Polytope& p) { return p.lattice_points(false).size(); }

struct MonotonicityReport {
  std::size_t rays = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double log_norm_at_m = 0.0;
  double min_log_norm = 0.0;  // over all samples including m
  double grad_at_m = 0.0;     // ‖∇|σ|²(m)‖_∞ by central differences
  unsigned seed = 0;
};

/// Walks rays out of m while the sample stays in the negative-definite
/// island and checks log|σ|² increases between consecutive samples.
inline MonotonicityReport ray_monotonicity_check(const MonomialSection& sec, std::size_t directions, unsigned seed,
                                                 double step = 0.0, double tol = 1e-12) {
  const int n = sec.dim();
  const auto& ray = sec.ray();
  const auto& p = ray.polytope();
  const Eigen::VectorXd m = sec.m_point();
  if (!signature_at(ray, m, sec.s()).sig.negative_definite(n))
    throw PreconditionError("m does not lie in a negative-definite island at this s");
  const Box bb = p.bounding_box();
  if (step <= 0.0) step = (bb.hi - bb.lo).maxCoeff() / 800.0;

  std::vector<Eigen::VectorXd> dirs;
  if (n == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (std::size_t k = 0; k < directions; ++k) {
      Eigen::VectorXd d(n);
      for (int i = 0; i < n; ++i) d[i] = nd(rng);
      dirs.push_back(d.normalized());
    }
  }

  MonotonicityReport rep;
  rep.seed = seed;
  rep.log_norm_at_m = sec.log_pointwise_norm_sq(m);
  rep.min_log_norm = rep.log_norm_at_m;
  for (const auto& d : dirs) {
    ++rep.rays;
    double prev = rep.log_norm_at_m;
    for (int k = 1;; ++k) {
      const Eigen::VectorXd x = m + (k * step) * d;
      if (!p.in_interior(x)) break;
      if (!signature_at(ray, x, sec.s()).sig.negative_definite(n)) break;
      const double cur = sec.log_pointwise_norm_sq(x);
      ++rep.samples;
      rep.min_log_norm = std::min(rep.min_log_norm, cur);
      if (!(cur - prev > -tol)) ++rep.violations;
      prev = cur;
    }
  }
  const double h = 1e-6;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd a = m, b = m;
    a[i] += h;
    b[i] -= h;
    rep.grad_at_m = std::max(rep.grad_at_m, std::abs(sec.pointwise_norm_sq(a) - sec.pointwise_norm_sq(b)) / (2 * h));
  }
  return rep;
}

struct PhiProfile {
  Eigen::VectorXd x0;
  double value = 0.0;
  int active_faces = 0;  // coordinates of x0 sitting on a face of K
};

/// φ(x) = (x − m)·∇ψ(x) − ψ(x).
inline double phi_value(const Correction& psi, const Eigen::VectorXd& m, const Eigen::VectorXd& x) {
  return (x - m).dot(psi.gradient(x)) - psi.value(x);
}

/// Maximizer of φ over ∂K by dense sampling of every face followed by a
/// shrinking coordinate search within the face.
inline PhiProfile phi_profile(const Correction& psi, const Eigen::VectorXd& m, const Box& k, int per_axis = 64) {
  const int n = k.dim();
  if (m.size() != n) throw InvalidArgument("dimension mismatch");
  if (!k.contains(m)) throw PreconditionError("phi_profile: K must contain m");
  PhiProfile best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < n; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const double fixed = side ? k.hi[axis] : k.lo[axis];
      const int free = n - 1;
      const int count = free == 0 ? 1 : static_cast<int>(std::pow(per_axis + 1, free));
      for (int c = 0; c < count; ++c) {
        Eigen::VectorXd x(n);
        int rest = c;
        for (int i = 0; i < n; ++i) {
          if (i == axis) {
            x[i] = fixed;
            continue;
          }
          const int t = rest % (per_axis + 1);
          rest /= per_axis + 1;
          x[i] = k.lo[i] + (k.hi[i] - k.lo[i]) * t / per_axis;
        }
        // local refinement on the face
        double v = phi_value(psi, m, x);
        double h = (k.hi - k.lo).maxCoeff() / per_axis;
        while (free > 0 && h > 1e-13) {
          bool moved = false;
          for (int i = 0; i < n; ++i) {
            if (i == axis) continue;
            for (double dir : {-1.0, 1.0}) {
              Eigen::VectorXd y = x;
              y[i] = std::clamp(y[i] + dir * h, k.lo[i], k.hi[i]);
              const double vy = phi_value(psi, m, y);
              if (vy > v) {
                x = y;
                v = vy;
                moved = true;
              }
            }
          }
          if (!moved) h *= 0.5;
        }
        if (v > best.value) {
          best.value = v;
          best.x0 = x;
        }
      }
    }
  }
  const double eps = 1e-9 * std::max(1.0, (k.hi - k.lo).maxCoeff());
  for (int i = 0; i < n; ++i)
    if (std::abs(best.x0[i] - k.lo[i]) <= eps || std::abs(best.x0[i] - k.hi[i]) <= eps) ++best.active_faces;
  return best;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
  }
  const double mt = st / n, my = sy / n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    num += (t[i] - mt) * (y[i] - my);
    den += (t[i] - mt) * (t[i] - mt);
  }
  if (den == 0.0) throw InvalidArgument("regression needs distinct abscissae");
  LinearFit f;
  f.slope = num / den;
  f.intercept = my - f.slope * mt;
  return f;
}

struct LaplaceFit {
  IntVector m;
  Box k;
  std::vector<double> s_list;
  std::vector<double> log_norms;  // log restricted ‖σ^m_s‖²_K
  PhiProfile phi;
  double target = 0.0;  // 2 φ(x₀)
  // geometric prefactor |s|^{-(k + (n−k)/2)}, k = active faces at x₀
  double prefactor_exponent = 0.0;
  double slope = 0.0;
  double rel_err = 0.0;
  double intercept_drift = 0.0;  // |C(s_a)/C(s_b) − 1| at the two largest |s|
  // alternative prefactor |s|^{-(n+½)}
  double slope_n_plus_half = 0.0;
  double rel_err_n_plus_half = 0.0;
};

/// Regresses log‖σ^m_s‖²_K + p log|s| on |s| for s < 0.
inline LaplaceFit laplace_exponent_fit(const IntVector& m, const GeodesicRay& ray, const Box& k,
                                       const std::vector<double>& s_list, const NormConvention& conv,
                                       const QuadratureSpec& quad, int island_check_res = 32) {
  if (s_list.size() < 4) throw PreconditionError("laplace_exponent_fit needs at least 4 s values");
  const int n = ray.dim();
  for (double s : s_list) {
    if (!(s < 0.0)) throw PreconditionError("laplace_exponent_fit needs s < 0");
    CellGrid g(k, island_check_res);
    for (std::size_t c = 0; c < g.size(); ++c) {
      const auto x = g.center(c);
      if (!signature_at(ray, x, s).sig.negative_definite(n))
        throw PreconditionError("K leaves the negative-definite island at s = " + std::to_string(s));
    }
    for (int c = 0; c < (1 << n); ++c) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = (c >> i) & 1 ? k.hi[i] : k.lo[i];
      if (!signature_at(ray, x, s).sig.negative_definite(n))
        throw PreconditionError("K leaves the negative-definite island at s = " + std::to_string(s));
    }
  }
  LaplaceFit fit;
  fit.m = m;
  fit.k = k;
  fit.s_list = s_list;
  fit.phi = phi_profile(ray.psi(), to_vector(m), k);
  fit.target = 2.0 * fit.phi.value;
  fit.prefactor_exponent = fit.phi.active_faces + 0.5 * (n - fit.phi.active_faces);
  std::vector<double> t, y_geo, y_half;
  for (double s : s_list) {
    const MonomialSection sec(m, ray, s);
    const double l = log_restricted_l2_norm_sq(sec, k, conv, quad).log_value;
    fit.log_norms.push_back(l);
    const double a = std::abs(s);
    t.push_back(a);
    y_geo.push_back(l + fit.prefactor_exponent * std::log(a));
    y_half.push_back(l + (n + 0.5) * std::log(a));
  }
  const LinearFit g = least_squares(t, y_geo);
  const LinearFit pp = least_squares(t, y_half);
  fit.slope = g.slope;
  fit.slope_n_plus_half = pp.slope;
  fit.rel_err = std::abs(g.slope - fit.target) / std::abs(fit.target);
  fit.rel_err_n_plus_half = std::abs(pp.slope - fit.target) / std::abs(fit.target);
  // residual intercepts at the two largest |s|
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] > t[b]; });
  const double ca = y_geo[order[0]] - g.slope * t[order[0]];
  const double cb = y_geo[order[1]] - g.slope * t[order[1]];
  fit.intercept_drift = std::abs(std::expm1(ca - cb));
  return fit;
}

/// Growth rate of the total norm, log‖σ^m_s‖² against |s| (plain linear fit).
inline LinearFit total_norm_rate(const IntVector& m, const GeodesicRay& ray, const std::vector<double>& s_list,
                                 const NormConvention& conv, const QuadratureSpec& quad) {
  std::vector<double> t, y;
  for (double s : s_list) {
    t.push_back(std::abs(s));
    y.push_back(log_l2_norm_sq(MonomialSection(m, ray, s), conv, quad).log_value);
  }
  return least_squares(t, y);
}

struct SuppressionResult {
  double ratio = 0.0;
  double log_ratio = 0.0;
  std::map<IntVector, double> mode_log_ratios;  // log ∫_K |σ̂^m|² per label
};

/// ‖u‖²_K / ‖u‖²_P for u = Σ d_m σ̂^m_s with L²-normalized σ̂. Distinct
/// labels are orthogonal on P and on any box, so the ratio is the
/// |d_m|²-weighted mean of the single-mode ratios.
inline SuppressionResult suppression_ratio(const std::map<IntVector, std::complex<double>>& coeffs,
                                           const GeodesicRay& ray, const Box& k, const Box& k_outer, double s,
                                           const NormConvention& conv, const QuadratureSpec& quad) {
  if (coeffs.empty()) throw InvalidArgument("suppression_ratio: empty coefficient map");
  if (!k_outer.contains(k)) throw PreconditionError("suppression_ratio: K must lie inside K'");
  for (int c = 0; c < (1 << k_outer.dim()); ++c) {
    Eigen::VectorXd x(k_outer.dim());
    for (int i = 0; i < k_outer.dim(); ++i) x[i] = (c >> i) & 1 ? k_outer.hi[i] : k_outer.lo[i];
    if (!ray.polytope().in_interior(x) || !signature_at(ray, x, s).sig.negative_definite(ray.dim()))
      throw PreconditionError("suppression_ratio: K' is not inside a negative-definite island");
  }
  SuppressionResult r;
  std::vector<double> terms;
  double den = 0.0;
  for (const auto& [m, d] : coeffs) {
    const MonomialSection sec(m, ray, s);
    const double total = log_l2_norm_sq(sec, conv, quad).log_value;
    const double part = log_restricted_l2_norm_sq(sec, k, conv, quad).log_value;
    r.mode_log_ratios[m] = part - total;
    den += std::norm(d);
    if (std::norm(d) > 0.0) terms.push_back(std::log(std::norm(d)) + part - total);
  }
  if (!(den > 0.0)) throw InvalidArgument("suppression_ratio: all coefficients vanish");
  r.log_ratio = log_sum_exp(terms) - std::log(den);
  r.ratio = std::exp(r.log_ratio);
  return r;
}

}  // namespace toriclab

#pragma once

// Closed-form complex-time flow identities on the open polytope: evolved
// holomorphic coordinates, the character flow, prequantum evolution,
// polarization frames, cone-angle rescaling and the Kähler metric.
//
// Tangent vectors are written in the (∂/∂x, ∂/∂θ) splitting as a pair of
// length-n blocks stacked into one length-2n vector.

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "toriclab/errors.hpp"
#include "toriclab/potential.hpp"

namespace toriclab {

using Complex = std::complex<double>;

struct HoloCoords {
  Eigen::VectorXcd z;  // z_j = y_j + s ∂ψ/∂x^j + iθ_j
};

/// z(s) = ∇g₀(x) + s∇ψ(x) + iθ.
inline HoloCoords holo_coords(const GeodesicRay& ray, const Eigen::VectorXd& x, const Eigen::VectorXd& theta,
                              double s) {
  if (theta.size() != ray.dim()) throw InvalidArgument("theta has wrong dimension");
  Eigen::VectorXd re = ray.base().gradient(x);
  if (s != 0.0 && !ray.psi().is_zero()) re += s * ray.psi().gradient(x);
  HoloCoords out;
  out.z.resize(re.size());
  for (Eigen::Index j = 0; j < re.size(); ++j) out.z[j] = Complex(re[j], theta[j]);
  return out;
}

struct LieSeriesReport {
  std::vector<double> residuals;  // residuals[k-1]: max |d^k z/dt^k − expected|, k = 1..order
  double step = 0.0;
  double fd_tolerance = 0.0;  // rounding bound of the widest stencil
  bool ok = false;
};

/// Finite-difference check along the flow of X_ψ = −Σ ψ_j ∂/∂θ_j, which
/// moves θ to θ − t∇ψ(x) and leaves x fixed. The first derivative of z_j
/// must be −i ∂ψ/∂x^j; every higher derivative must vanish.
inline LieSeriesReport lie_series_check(const GeodesicRay& ray, const Eigen::VectorXd& x, const Eigen::VectorXd& theta,
                                        double s, int order = 2, double step = 1e-3) {
  if (order < 1) throw InvalidArgument("lie_series_check: order must be >= 1");
  const Eigen::VectorXd dpsi = ray.psi().is_zero() ? Eigen::VectorXd::Zero(x.size()) : ray.psi().gradient(x);
  auto z_at = [&](double t) {
    const Eigen::VectorXd th = theta - t * dpsi;
    return holo_coords(ray, x, th, s).z;
  };
  LieSeriesReport rep;
  rep.step = step;
  double zmax = 0.0;
  for (int k = 1; k <= order; ++k) {
    // central k-th difference: Σ_i (−1)^i C(k,i) z(t + (k/2 − i) h) / h^k
    Eigen::VectorXcd d = Eigen::VectorXcd::Zero(x.size());
    double binom = 1.0;
    for (int i = 0; i <= k; ++i) {
      const Eigen::VectorXcd z = z_at((0.5 * k - i) * step);
      zmax = std::max(zmax, z.cwiseAbs().maxCoeff());
      d += ((i % 2 ? -1.0 : 1.0) * binom) * z;
      binom = binom * (k - i) / (i + 1);
    }
    d /= std::pow(step, k);
    Eigen::VectorXcd expect = Eigen::VectorXcd::Zero(x.size());
    if (k == 1)
      for (Eigen::Index j = 0; j < x.size(); ++j) expect[j] = Complex(0.0, -dpsi[j]);
    rep.residuals.push_back((d - expect).cwiseAbs().maxCoeff());
  }
  rep.fd_tolerance = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, zmax) * std::pow(2.0, order) /
                     std::pow(step, order);
  rep.ok = true;
  for (double r : rep.residuals) rep.ok = rep.ok && r <= rep.fd_tolerance;
  return rep;
}

struct CharacterFlowResult {
  Complex partial;      // Σ_{k<=K} a^k/k! · e^{iφ}
  Complex limit;        // e^{a} e^{iφ}
  double error = 0.0;   // |partial − limit|
  double tail_bound = 0.0;  // e^{|a|} |a|^{K+1}/(K+1)!
};

/// Order-K truncation of e^{a} e^{iφ} with a = m·y, φ = m·θ.
inline CharacterFlowResult character_series(double a, double phase, int order) {
  if (order < 0) throw InvalidArgument("character series order must be >= 0");
  const Complex rot = std::polar(1.0, phase);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= order; ++k) {
    term *= a / k;
    sum += term;
  }
  CharacterFlowResult r;
  r.partial = sum * rot;
  r.limit = std::exp(a) * rot;
  r.error = std::abs(r.partial - r.limit);
  r.tail_bound = std::exp(std::abs(a)) * std::abs(term * a / (order + 1));
  return r;
}

/// Σ_{k=0..K} (m·y(x))^k/k! · e^{im·θ}, the truncated time-i flow of a
/// character; the limit is w^m = e^{m·(y+iθ)}.
inline CharacterFlowResult character_flow_partial(const Eigen::VectorXd& m, const SymplecticPotential& sp,
                                                  const Eigen::VectorXd& x, const Eigen::VectorXd& theta, int order) {
  if (m.size() != sp.dim() || theta.size() != sp.dim()) throw InvalidArgument("dimension mismatch");
  return character_series(m.dot(sp.gradient(x)), m.dot(theta), order);
}

struct PrequantumReport {
  Complex left;
  Complex right;
  double rel_residual = 0.0;
};

/// Compares e^{−s(x·∇ψ−ψ)} e^{−h₀} e^{s m·∇ψ} w₀^m with e^{−h_s} w_s^m.
/// Both sides are assembled in the log domain and exponentiated only for
/// the returned values; the residual is |L/R − 1|.
inline PrequantumReport prequantum_evolve_check(const Eigen::VectorXd& m, const GeodesicRay& ray, double s,
                                                const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
  if (m.size() != ray.dim() || theta.size() != ray.dim()) throw InvalidArgument("dimension mismatch");
  const auto& psi = ray.psi();
  const Eigen::VectorXd dpsi = psi.is_zero() ? Eigen::VectorXd::Zero(x.size()) : psi.gradient(x);
  const double psix = psi.is_zero() ? 0.0 : psi.value(x);
  const SymplecticPotential g0 = ray.at(0.0);
  const SymplecticPotential gs = ray.at(s);
  const double mt = m.dot(theta);

  const double left_re = -s * (x.dot(dpsi) - psix) - g0.kahler_potential(x) + s * m.dot(dpsi) + m.dot(g0.gradient(x));
  const double right_re = -gs.kahler_potential(x) + m.dot(gs.gradient(x));

  PrequantumReport r;
  r.left = std::exp(Complex(left_re, mt));
  r.right = std::exp(Complex(right_re, mt));
  r.rel_residual = std::abs(std::expm1(left_re - right_re));
  return r;
}

struct PolarizationFrame {
  Eigen::VectorXd x;
  Eigen::VectorXd theta;
  double s = 0.0;
  Eigen::MatrixXcd vectors;  // 2n × n, column j = (e_j, −i H e_j)
};

inline PolarizationFrame polarization_frame(const SymplecticPotential& sp, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& theta) {
  const int n = sp.dim();
  if (theta.size() != n) throw InvalidArgument("theta has wrong dimension");
  const Eigen::MatrixXd h = sp.hessian(x);
  PolarizationFrame f;
  f.x = x;
  f.theta = theta;
  f.s = sp.s();
  f.vectors = Eigen::MatrixXcd::Zero(2 * n, n);
  for (int j = 0; j < n; ++j) {
    f.vectors(j, j) = 1.0;
    for (int k = 0; k < n; ++k) f.vectors(n + k, j) = Complex(0.0, -h(k, j));
  }
  return f;
}

/// ω(V, W) = V_x·W_θ − V_θ·W_x, extended complex-bilinearly.
inline Complex omega(const Eigen::VectorXcd& v, const Eigen::VectorXcd& w) {
  const Eigen::Index n = v.size() / 2;
  if (v.size() != w.size() || v.size() != 2 * n) throw InvalidArgument("omega: bad vector sizes");
  return (v.head(n).transpose() * w.tail(n))(0, 0) - (v.tail(n).transpose() * w.head(n))(0, 0);
}

/// Largest |ω(V_j, V_k)| over the frame.
inline double frame_isotropy_defect(const PolarizationFrame& f) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < f.vectors.cols(); ++j)
    for (Eigen::Index k = 0; k < f.vectors.cols(); ++k)
      worst = std::max(worst, std::abs(omega(f.vectors.col(j), f.vectors.col(k))));
  return worst;
}

inline constexpr double kRankTolerance = 1e-9;

/// Singular values below τ·σ_max count as zero.
inline int numerical_nullity(const Eigen::MatrixXd& a, double tau = kRankTolerance) {
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
  const double cut = tau * (sv.size() ? sv[0] : 0.0);
  int zero = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (!(sv[i] > cut)) ++zero;
  return zero;
}

/// dim ker H_s(x), the complex dimension of the frame's real intersection.
inline int real_intersection_dim(const SymplecticPotential& sp, const Eigen::VectorXd& x,
                                 double tau = kRankTolerance) {
  return numerical_nullity(sp.hessian(x), tau);
}

/// dim(span V ∩ span V̄) computed from the frame directly, 2n − rank[V V̄].
inline int frame_intersection_dim(const PolarizationFrame& f, double tau = kRankTolerance) {
  const Eigen::Index n = f.vectors.cols();
  Eigen::MatrixXcd both(2 * n, 2 * n);
  both << f.vectors, f.vectors.conjugate();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(both).singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tau * sv[0]) ++rank;
  return static_cast<int>(n) - (rank - static_cast<int>(n));
}

struct ConeScalingReport {
  double abs_residual = 0.0;
  double rel_residual = 0.0;
};

/// ‖s·H_{(β,ψ)}(x) − H_{(β/s, sψ)}(x)‖_max, absolute and relative to
/// ‖s·H_{(β,ψ)}‖_max. Here ψ enters as the fixed smooth part.
inline ConeScalingReport cone_scaling_check(std::shared_ptr<const Polytope> p, const ConeWeights& beta,
                                            const Correction& psi, double s, const Eigen::VectorXd& x) {
  if (!(s > 0.0)) throw InvalidArgument("cone_scaling_check: s must be positive");
  const ConeWeights b = beta.empty() ? ConeWeights::ones(p->num_facets()) : beta;
  const SymplecticPotential lhs(p, ConeWeights::unchecked(b.values()), psi);
  const SymplecticPotential rhs(p, b.divided_by(s), psi.scaled(s));
  const Eigen::MatrixXd a = s * lhs.hessian(x);
  const Eigen::MatrixXd d = a - rhs.hessian(x);
  ConeScalingReport r;
  r.abs_residual = d.lpNorm<Eigen::Infinity>();
  const double scale = a.lpNorm<Eigen::Infinity>();
  r.rel_residual = scale > 0.0 ? r.abs_residual / scale : r.abs_residual;
  return r;
}

/// Kähler metric diag(H, H⁻¹) (or diag(sH, s⁻¹H⁻¹) with a cone scale s) in
/// the (x, θ) splitting. Throws SingularMetric when H has a kernel.
inline Eigen::MatrixXd metric_eval(const SymplecticPotential& sp, const Eigen::VectorXd& x,
                                   std::optional<double> cone_s = std::nullopt) {
  const int n = sp.dim();
  const Eigen::MatrixXd h = sp.hessian(x);
  if (numerical_nullity(h) > 0) throw SingularMetric("Hessian is singular at the requested point");
  const double c = cone_s.value_or(1.0);
  if (cone_s && !(c > 0.0)) throw InvalidArgument("cone scale must be positive");
  Eigen::MatrixXd hinv = h.inverse();
  hinv = 0.5 * (hinv + hinv.transpose());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  g.topLeftCorner(n, n) = c * h;
  g.bottomRightCorner(n, n) = hinv / c;
  return g;
}

/// Complex structure I = [[0, −H⁻¹], [H, 0]].
inline Eigen::MatrixXd complex_structure(const SymplecticPotential& sp, const Eigen::VectorXd& x) {
  const int n = sp.dim();
  const Eigen::MatrixXd h = sp.hessian(x);
  if (numerical_nullity(h) > 0) throw SingularMetric("Hessian is singular at the requested point");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n) = -h.inverse();
  j.bottomLeftCorner(n, n) = h;
  return j;
}

/// Standard symplectic matrix Ω with ω(V, W) = Vᵀ Ω W.
inline Eigen::MatrixXd symplectic_matrix(int n) {
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  o.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  o.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return o;
}

}  // namespace toriclab

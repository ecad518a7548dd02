#pragma once

// Composite symplectic potentials
//     g(x) = ½ Σ_j β_j⁻¹ ℓ_j(x) log ℓ_j(x) + φ(x) + s ψ(x)
// with their Legendre map, Hessian, Kähler potential and inverse Legendre map.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "toriclab/correction.hpp"
#include "toriclab/errors.hpp"
#include "toriclab/grid.hpp"
#include "toriclab/polytope.hpp"

namespace toriclab {

/// Cone-angle weights β_j ∈ (0, 1], one per facet.
class ConeWeights {
 public:
  ConeWeights() = default;

  explicit ConeWeights(std::vector<double> beta) : beta_(std::move(beta)) {
    for (double b : beta_)
      if (!(b > 0.0 && b <= 1.0)) throw InvalidArgument("cone weight outside (0, 1]");
  }

  static ConeWeights ones(std::size_t r) { return ConeWeights(std::vector<double>(r, 1.0)); }

  /// Positive weights without the β <= 1 restriction; only the algebraic
  /// rescaling identities need these.
  static ConeWeights unchecked(std::vector<double> beta) {
    for (double b : beta)
      if (!(b > 0.0)) throw InvalidArgument("cone weight must be positive");
    ConeWeights w;
    w.beta_ = std::move(beta);
    return w;
  }

  const std::vector<double>& values() const { return beta_; }
  std::size_t size() const { return beta_.size(); }
  bool empty() const { return beta_.empty(); }
  double operator[](std::size_t j) const { return beta_[j]; }

  ConeWeights divided_by(double s) const {
    std::vector<double> out(beta_);
    for (double& b : out) b /= s;
    return unchecked(std::move(out));
  }

 private:
  std::vector<double> beta_;
};

class SymplecticPotential {
 public:
  SymplecticPotential(std::shared_ptr<const Polytope> polytope, ConeWeights beta = {},
                      Correction phi = {}, Correction psi = {}, double s = 0.0)
      : polytope_(std::move(polytope)), phi_(std::move(phi)), psi_(std::move(psi)), s_(s) {
    if (!polytope_) throw InvalidArgument("null polytope");
    const std::size_t r = polytope_->num_facets();
    beta_ = beta.empty() ? ConeWeights::ones(r) : std::move(beta);
    if (beta_.size() != r) throw InvalidArgument("cone weight count differs from facet count");
    inv_beta_.resize(static_cast<Eigen::Index>(r));
    for (std::size_t j = 0; j < r; ++j) inv_beta_[static_cast<Eigen::Index>(j)] = 1.0 / beta_[j];
  }

  explicit SymplecticPotential(const Polytope& p) : SymplecticPotential(std::make_shared<const Polytope>(p)) {}

  const Polytope& polytope() const { return *polytope_; }
  const std::shared_ptr<const Polytope>& polytope_ptr() const { return polytope_; }
  const ConeWeights& beta() const { return beta_; }
  const Correction& phi() const { return phi_; }
  const Correction& psi() const { return psi_; }
  double s() const { return s_; }
  int dim() const { return polytope_->dim(); }

  SymplecticPotential with_s(double s) const {
    SymplecticPotential out = *this;
    out.s_ = s;
    return out;
  }

  /// g(x) on the closed polytope, with t log t extended by 0 at t = 0.
  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd l = ells_closed(x);
    double v = 0.0;
    for (Eigen::Index j = 0; j < l.size(); ++j)
      if (l[j] > 0.0) v += inv_beta_[j] * l[j] * std::log(l[j]);
    return 0.5 * v + correction_value(x);
  }

  /// Legendre map y(x) = ∇g(x) on the interior.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd l = ells_open(x);
    const auto& nu = polytope_->normals();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(dim());
    for (Eigen::Index j = 0; j < l.size(); ++j)
      y += (0.5 * inv_beta_[j] * (std::log(l[j]) + 1.0)) * nu.row(j).transpose();
    return y + correction_gradient(x);
  }

  /// Hessian; symmetric by construction.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const {
    return canonical_hessian(x) + correction_hessian(x);
  }

  /// ½ Σ β_j⁻¹ ν_j ν_jᵀ / ℓ_j(x).
  Eigen::MatrixXd canonical_hessian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd l = ells_open(x);
    const auto& nu = polytope_->normals();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
    for (Eigen::Index j = 0; j < l.size(); ++j)
      h.noalias() += (0.5 * inv_beta_[j] / l[j]) * nu.row(j).transpose() * nu.row(j);
    return h;
  }

  /// h = x·y − g.
  double kahler_potential(const Eigen::VectorXd& x) const { return x.dot(gradient(x)) - value(x); }

  /// α = (det H · Π ℓ_j)⁻¹; throws RegularityError when det H <= 0.
  double regularity_alpha(const Eigen::VectorXd& x) const {
    const double det = hessian(x).determinant();
    if (!(det > 0.0)) throw RegularityError("det H = " + std::to_string(det) + " is not positive");
    return 1.0 / (det * ells_open(x).prod());
  }

  /// χ = φ + sψ and its derivatives.
  double correction_value(const Eigen::VectorXd& x) const {
    double v = phi_.is_zero() ? 0.0 : phi_.value(x);
    if (s_ != 0.0 && !psi_.is_zero()) v += s_ * psi_.value(x);
    return v;
  }

  Eigen::VectorXd correction_gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = phi_.is_zero() ? Eigen::VectorXd::Zero(x.size()) : phi_.gradient(x);
    if (s_ != 0.0 && !psi_.is_zero()) g += s_ * psi_.gradient(x);
    return g;
  }

  Eigen::MatrixXd correction_hessian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd h = phi_.is_zero() ? Eigen::MatrixXd::Zero(x.size(), x.size()) : phi_.hessian(x);
    if (s_ != 0.0 && !psi_.is_zero()) h += s_ * psi_.hessian(x);
    return h;
  }

  const Eigen::VectorXd& inverse_beta() const { return inv_beta_; }

  /// Facet values, requiring x in the closed polytope (tiny negative
  /// round-off is clamped to 0).
  Eigen::VectorXd ells_closed(const Eigen::VectorXd& x) const {
    Eigen::VectorXd l = polytope_->ells(x);
    for (Eigen::Index j = 0; j < l.size(); ++j) {
      if (l[j] < -kBoundarySlack) throw DomainError("point lies outside the polytope");
      if (l[j] < 0.0) l[j] = 0.0;
    }
    return l;
  }

  /// Facet values, requiring x in the open polytope.
  Eigen::VectorXd ells_open(const Eigen::VectorXd& x) const {
    Eigen::VectorXd l = polytope_->ells(x);
    for (Eigen::Index j = 0; j < l.size(); ++j) {
      if (l[j] < -kBoundarySlack) throw DomainError("point lies outside the polytope");
      if (l[j] <= 0.0) throw BoundarySingularity("derivative of g requested on the boundary facet " + std::to_string(j));
    }
    return l;
  }

  static constexpr double kBoundarySlack = 1e-12;

 private:
  std::shared_ptr<const Polytope> polytope_;
  ConeWeights beta_;
  Eigen::VectorXd inv_beta_;
  Correction phi_;
  Correction psi_;
  double s_ = 0.0;
};

/// The family g_s = g + sψ over a fixed base potential.
class GeodesicRay {
 public:
  GeodesicRay(std::shared_ptr<const Polytope> polytope, Correction psi, Correction phi = {},
              ConeWeights beta = {})
      : base_(std::move(polytope), std::move(beta), std::move(phi), std::move(psi), 0.0) {}

  GeodesicRay(const Polytope& p, Correction psi)
      : GeodesicRay(std::make_shared<const Polytope>(p), std::move(psi)) {}

  const SymplecticPotential& base() const { return base_; }
  const Correction& psi() const { return base_.psi(); }
  const Polytope& polytope() const { return base_.polytope(); }
  int dim() const { return base_.dim(); }

  SymplecticPotential at(double s) const { return base_.with_s(s); }

 private:
  SymplecticPotential base_;
};

struct NewtonOptions {
  double tol = 1e-10;  // on ‖∇g(x) − y‖, scaled by max(1, ‖y‖)
  int max_iter = 200;
  std::optional<Eigen::VectorXd> start;
};

struct LegendreSolution {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves ∇g(x) = y by damped Newton. Steps are halved until the iterate
/// stays in the open polytope and the residual decreases.
inline LegendreSolution legendre_inverse_solve(const SymplecticPotential& sp, const Eigen::VectorXd& y,
                                               const NewtonOptions& opt = {}) {
  const auto& p = sp.polytope();
  if (y.size() != p.dim()) throw InvalidArgument("dimension mismatch in legendre_inverse");
  Eigen::VectorXd x = opt.start.value_or(p.center());
  if (!p.in_interior(x)) x = p.center();
  const double scale = std::max(1.0, y.norm());
  Eigen::VectorXd r = sp.gradient(x) - y;
  double rn = r.norm();
  for (int it = 0; it < opt.max_iter; ++it) {
    if (rn <= opt.tol * scale) return {x, it, rn};
    const Eigen::MatrixXd h = sp.hessian(x);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw ConvexityError("Hessian is not positive definite on the Newton path");
    const Eigen::VectorXd step = llt.solve(r);
    double t = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings, t *= 0.5) {
      const Eigen::VectorXd cand = x - t * step;
      if (!p.in_interior(cand)) continue;
      const Eigen::VectorXd rc = sp.gradient(cand) - y;
      const double rcn = rc.norm();
      if (rcn < rn) {
        x = cand;
        r = rc;
        rn = rcn;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (rn <= 1e3 * opt.tol * scale) return {x, it, rn};
      throw ConvergenceError("legendre_inverse: line search failed (residual " + std::to_string(rn) + ")");
    }
  }
  if (rn <= opt.tol * scale) return {x, opt.max_iter, rn};
  throw ConvergenceError("legendre_inverse: no convergence after " + std::to_string(opt.max_iter) +
                         " iterations (residual " + std::to_string(rn) + ")");
}

inline Eigen::VectorXd legendre_inverse(const SymplecticPotential& sp, const Eigen::VectorXd& y,
                                        const NewtonOptions& opt = {}) {
  return legendre_inverse_solve(sp, y, opt).x;
}

struct ConvexityReport {
  bool strongly_convex = false;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  Eigen::VectorXd argmin;
  std::size_t samples = 0;
};

/// Grid surrogate for strong convexity of a correction on P: minimum Hessian
/// eigenvalue over cell centers inside P and the vertices.
inline ConvexityReport strong_convexity_check(const Correction& c, const Polytope& p,
                                              const QuadratureSpec& grid, double threshold = 1e-9) {
  ConvexityReport rep;
  auto visit = [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd h = c.hessian(x);
    const double lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
    ++rep.samples;
    if (lam < rep.min_eigenvalue) {
      rep.min_eigenvalue = lam;
      rep.argmin = x;
    }
  };
  CellGrid cells(p.bounding_box(), grid.base_resolution);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Eigen::VectorXd x = cells.center(k);
    if (p.contains(x)) visit(x);
  }
  for (const auto& v : p.raw_vertices()) visit(v.point);
  rep.strongly_convex = rep.min_eigenvalue > threshold;
  return rep;
}

}  // namespace toriclab

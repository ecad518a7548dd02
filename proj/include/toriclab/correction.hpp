#pragma once

// Smooth corrections added to the canonical potential: the fixed part φ and
// the ray direction ψ. Two kinds are supported, polynomials in x and the
// one-dimensional oscillatory family with
//     ψ''(x) = base + exp(-1/(x-c)^2) sin(1/(x-c)),   ψ(c) = ψ'(c) = 0.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "toriclab/errors.hpp"

namespace toriclab {

struct MonomialTerm {
  std::vector<int> exps;
  double coef = 0.0;
};

namespace detail {

/// exp(-1/u^2) sin(1/u), extended by 0 at u = 0.
inline double oscillation(double u) {
  if (u == 0.0) return 0.0;
  const double inv = 1.0 / u;
  return std::exp(-inv * inv) * std::sin(inv);
}

/// Node table of the first and second antiderivatives of the oscillation,
/// both anchored at the center. Built once, read-only afterwards.
class OscillationTable {
 public:
  OscillationTable(double center, double half_range, double step)
      : center_(center), step_(step), half_nodes_(static_cast<int>(std::ceil(half_range / step))) {
    const int count = 2 * half_nodes_ + 1;
    f1_.assign(static_cast<std::size_t>(count), 0.0);
    f2_.assign(static_cast<std::size_t>(count), 0.0);
    for (int dir : {1, -1}) {
      double f1 = 0.0, f2 = 0.0;
      for (int k = 0; k < half_nodes_; ++k) {
        const double a = node(dir * k), b = node(dir * (k + 1));
        const double seg1 = segment_integral(a, b, [](double) { return 1.0; });
        const double seg2 = segment_integral(a, b, [b](double t) { return b - t; });
        f2 += f1 * (b - a) + seg2;
        f1 += seg1;
        f1_[slot(dir * (k + 1))] = f1;
        f2_[slot(dir * (k + 1))] = f2;
      }
    }
  }

  double range_lo() const { return node(-half_nodes_); }
  double range_hi() const { return node(half_nodes_); }

  /// (∫_c^x osc, ∫_c^x (x-t) osc dt)
  std::pair<double, double> antiderivatives(double x) const {
    if (x < range_lo() || x > range_hi())
      throw DomainError("oscillatory correction evaluated outside its tabulated range");
    int k = static_cast<int>(std::trunc((x - center_) / step_));
    k = std::clamp(k, -half_nodes_, half_nodes_);
    const double a = node(k);
    const double f1k = f1_[slot(k)], f2k = f2_[slot(k)];
    const double r1 = segment_integral(a, x, [](double) { return 1.0; });
    const double r2 = segment_integral(a, x, [x](double t) { return x - t; });
    return {f1k + r1, f2k + f1k * (x - a) + r2};
  }

 private:
  double node(int k) const { return center_ + k * step_; }
  std::size_t slot(int k) const { return static_cast<std::size_t>(k + half_nodes_); }

  template <typename W>
  double segment_integral(double a, double b, W weight) const {
    if (a == b) return 0.0;
    const double c = center_;
    auto f = [&](double t) { return weight(t) * oscillation(t - c); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    if (b < a) return -GK::integrate(f, b, a, 0);
    return GK::integrate(f, a, b, 0);
  }

  double center_;
  double step_;
  int half_nodes_;
  std::vector<double> f1_, f2_;
};

}  // namespace detail

/// Value type describing a smooth function on P with closed-form or cached
/// derivatives up to order two.
class Correction {
 public:
  enum class Kind { polynomial, oscillatory1d };

  /// The zero function (any dimension).
  Correction() = default;

  static Correction polynomial(std::vector<MonomialTerm> terms) {
    Correction c;
    c.kind_ = Kind::polynomial;
    c.terms_ = std::move(terms);
    return c;
  }

  static Correction oscillatory1d(double center, double base = 2.0, double half_range = 2.0) {
    Correction c;
    c.kind_ = Kind::oscillatory1d;
    c.center_ = center;
    c.base_ = base;
    c.table_ = std::make_shared<const detail::OscillationTable>(center, half_range, 1e-3);
    return c;
  }

  Kind kind() const { return kind_; }
  const std::vector<MonomialTerm>& terms() const { return terms_; }
  double center() const { return center_; }
  double base() const { return base_; }
  double scale() const { return scale_; }

  bool is_zero() const { return kind_ == Kind::polynomial && (terms_.empty() || scale_ == 0.0); }

  /// c·f as a new correction.
  Correction scaled(double c) const {
    Correction out = *this;
    out.scale_ *= c;
    return out;
  }

  double value(const Eigen::VectorXd& x) const {
    if (kind_ == Kind::oscillatory1d) {
      check_1d(x);
      const double u = x[0] - center_;
      return scale_ * (0.5 * base_ * u * u + table_->antiderivatives(x[0]).second);
    }
    double v = 0.0;
    for (const auto& t : terms_) {
      check_term(t, x);
      double p = t.coef;
      for (std::size_t i = 0; i < t.exps.size(); ++i) p *= ipow(x[static_cast<Eigen::Index>(i)], t.exps[i]);
      v += p;
    }
    return scale_ * v;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    if (kind_ == Kind::oscillatory1d) {
      check_1d(x);
      g[0] = scale_ * (base_ * (x[0] - center_) + table_->antiderivatives(x[0]).first);
      return g;
    }
    for (const auto& t : terms_) {
      check_term(t, x);
      for (std::size_t k = 0; k < t.exps.size(); ++k) {
        if (t.exps[k] == 0) continue;
        double p = t.coef * t.exps[k];
        for (std::size_t i = 0; i < t.exps.size(); ++i)
          p *= ipow(x[static_cast<Eigen::Index>(i)], t.exps[i] - (i == k ? 1 : 0));
        g[static_cast<Eigen::Index>(k)] += p;
      }
    }
    return scale_ * g;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const {
    const auto n = x.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    if (kind_ == Kind::oscillatory1d) {
      check_1d(x);
      h(0, 0) = scale_ * (base_ + detail::oscillation(x[0] - center_));
      return h;
    }
    for (const auto& t : terms_) {
      check_term(t, x);
      for (std::size_t a = 0; a < t.exps.size(); ++a) {
        for (std::size_t b = a; b < t.exps.size(); ++b) {
          std::vector<int> e = t.exps;
          double p = t.coef;
          p *= e[a];
          e[a] -= 1;
          if (p == 0.0) continue;
          p *= e[b];
          e[b] -= 1;
          if (p == 0.0) continue;
          for (std::size_t i = 0; i < e.size(); ++i) p *= ipow(x[static_cast<Eigen::Index>(i)], e[i]);
          h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += p;
          if (a != b) h(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) += p;
        }
      }
    }
    return scale_ * h;
  }

 private:
  static double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  }

  static void check_term(const MonomialTerm& t, const Eigen::VectorXd& x) {
    if (t.exps.size() != static_cast<std::size_t>(x.size()))
      throw InvalidArgument("polynomial term dimension does not match point dimension");
  }

  static void check_1d(const Eigen::VectorXd& x) {
    if (x.size() != 1) throw InvalidArgument("oscillatory correction is one-dimensional");
  }

  Kind kind_ = Kind::polynomial;
  std::vector<MonomialTerm> terms_;
  double center_ = 0.0;
  double base_ = 2.0;
  double scale_ = 1.0;
  std::shared_ptr<const detail::OscillationTable> table_;
};

inline const std::vector<std::string>& psi_preset_names() {
  static const std::vector<std::string> names = {"zero", "quad-iso", "paper53", "osc55"};
  return names;
}

/// Named ψ presets:
///   quad-iso  |x|^2/2 in dimension n
///   paper53   (2 x1^2 + x2^2)/2
///   osc55     ψ'' = 2 + exp(-1/(x-1/2)^2) sin(1/(x-1/2))
inline Correction preset_correction(std::string_view name, int dim) {
  if (name == "zero") return Correction{};
  if (name == "quad-iso") {
    std::vector<MonomialTerm> terms;
    for (int i = 0; i < dim; ++i) {
      MonomialTerm t;
      t.exps.assign(static_cast<std::size_t>(dim), 0);
      t.exps[static_cast<std::size_t>(i)] = 2;
      t.coef = 0.5;
      terms.push_back(t);
    }
    return Correction::polynomial(std::move(terms));
  }
  if (name == "paper53") {
    if (dim != 2) throw PreconditionError("preset paper53 is two-dimensional");
    return Correction::polynomial({{{2, 0}, 1.0}, {{0, 2}, 0.5}});
  }
  if (name == "osc55") {
    if (dim != 1) throw PreconditionError("preset osc55 is one-dimensional");
    return Correction::oscillatory1d(0.5);
  }
  throw InvalidArgument("unknown psi preset '" + std::string(name) + "'");
}

}  // namespace toriclab

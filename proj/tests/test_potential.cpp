#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "toriclab/potential.hpp"

using namespace toriclab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

std::shared_ptr<const Polytope> preset(const char* name) {
  return std::make_shared<const Polytope>(preset_polytope(name));
}

Eigen::VectorXd random_interior(const Polytope& p, std::mt19937_64& rng, double min_ell = 0.02) {
  const Box bb = p.bounding_box();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    Eigen::VectorXd x(p.dim());
    for (int i = 0; i < p.dim(); ++i) x[i] = bb.lo[i] + u(rng) * (bb.hi[i] - bb.lo[i]);
    if ((p.ells(x).array() > min_ell).all()) return x;
  }
}

// A handful of potentials exercising β, φ and sψ together.
std::vector<SymplecticPotential> sample_potentials() {
  std::vector<SymplecticPotential> out;
  out.emplace_back(preset("cp1-half"));
  out.emplace_back(preset("cp1-wide"), ConeWeights({0.5, 1.0}), Correction{}, preset_correction("quad-iso", 1), 2.0);
  out.emplace_back(preset("cp1xcp1-unit"), ConeWeights{}, Correction{}, preset_correction("paper53", 2), -3.0);
  out.emplace_back(preset("simplex2-half"), ConeWeights({1.0, 0.25, 0.75}),
                   Correction::polynomial({{{1, 1}, 0.3}, {{3, 0}, -0.1}}), preset_correction("quad-iso", 2), 1.5);
  out.emplace_back(preset("simplex2"));
  out.emplace_back(std::make_shared<const Polytope>(make_box({{Rational(0), Rational(1)}})), ConeWeights{},
                   Correction{}, preset_correction("osc55", 1), -1.0);
  return out;
}

}  // namespace

TEST(Potential, EvalMatchesHandValues) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_NEAR(cp1.value(vec({0.0})), 0.5 * std::log(0.5), 1e-15);
  EXPECT_NEAR(cp1.value(vec({0.0})), -0.34657, 1e-5);
  EXPECT_EQ(cp1.value(vec({0.5})), 0.0);

  SymplecticPotential box(preset("cp1xcp1-unit"), {}, {}, preset_correction("paper53", 2), 1.0);
  // four facets at distance ½: ½·4·(½ log ½) + (2·¼ + ¼)/2
  EXPECT_NEAR(box.value(vec({0.5, 0.5})), std::log(0.5) + 0.375, 1e-14);
}

TEST(Potential, EvalVanishesAtVerticesOfCanonicalPotential) {
  for (const auto& name : polytope_preset_names()) {
    SymplecticPotential sp(preset_polytope(name));
    for (const auto& v : sp.polytope().vertices()) {
      // inactive facets still contribute ℓ log ℓ; compare with direct sum
      double expect = 0.0;
      for (std::size_t j = 0; j < sp.polytope().num_facets(); ++j) {
        const double l = sp.polytope().ell(j, v.point);
        if (l > 0) expect += 0.5 * l * std::log(l);
      }
      EXPECT_NEAR(sp.value(v.point), expect, 1e-15) << name;
    }
  }
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_EQ(cp1.value(vec({-0.5})), 0.0);
}

TEST(Potential, EvalRejectsOutsidePoints) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_THROW(cp1.value(vec({0.6})), DomainError);
  EXPECT_THROW(cp1.value(vec({0.0, 0.0})), InvalidArgument);
}

TEST(Potential, GradientHandValues) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_NEAR(cp1.gradient(vec({0.0}))[0], 0.0, 1e-15);
  EXPECT_NEAR(cp1.gradient(vec({0.3}))[0], 0.5 * std::log(4.0), 1e-14);
  EXPECT_THROW(cp1.gradient(vec({0.5})), BoundarySingularity);
  EXPECT_THROW(cp1.hessian(vec({-0.5})), BoundarySingularity);
}

TEST(Potential, GradientAndHessianMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (const auto& sp : sample_potentials()) {
    for (int k = 0; k < 25; ++k) {
      const Eigen::VectorXd x = random_interior(sp.polytope(), rng, 0.05);
      const double h = 1e-5;
      const Eigen::VectorXd fd = oracle::fd_gradient([&](const Eigen::VectorXd& z) { return sp.value(z); }, x, h);
      EXPECT_LE((fd - sp.gradient(x)).lpNorm<Eigen::Infinity>(), 1e-6);
      const Eigen::MatrixXd fdh =
          oracle::fd_jacobian([&](const Eigen::VectorXd& z) { return sp.gradient(z); }, x, 1e-6);
      const Eigen::MatrixXd hx = sp.hessian(x);
      EXPECT_LE((fdh - hx).lpNorm<Eigen::Infinity>(), 1e-5 * std::max(1.0, hx.lpNorm<Eigen::Infinity>()));
      EXPECT_EQ((hx - hx.transpose()).lpNorm<Eigen::Infinity>(), 0.0);
    }
  }
}

TEST(Potential, HessianHandValues) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_NEAR(cp1.hessian(vec({0.0}))(0, 0), 2.0, 1e-15);

  GeodesicRay ray(preset("cp1xcp1-unit"), preset_correction("paper53", 2));
  const Eigen::MatrixXd h = ray.at(-3.0).hessian(vec({0.5, 0.5}));
  EXPECT_NEAR(h(0, 0), -4.0, 1e-14);
  EXPECT_NEAR(h(1, 1), -1.0, 1e-14);
  EXPECT_EQ(h(0, 1), 0.0);
}

TEST(Potential, HessianIsAdditiveInCorrections) {
  const auto p = preset("simplex2-half");
  const Correction phi = Correction::polynomial({{{2, 1}, 0.2}, {{0, 2}, 0.1}});
  const Correction psi = preset_correction("quad-iso", 2);
  SymplecticPotential full(p, {}, phi, psi, -2.5);
  SymplecticPotential canon(p);
  const Eigen::VectorXd x = vec({0.1, 0.2});
  const Eigen::MatrixXd expect = canon.hessian(x) + phi.hessian(x) - 2.5 * psi.hessian(x);
  EXPECT_LE((full.hessian(x) - expect).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Potential, CanonicalCaseIsTermwiseEquation) {
  // β ≡ 1, φ = ψ = 0 at rational sample points
  SymplecticPotential sp(preset("simplex2"));
  for (auto [a, b] : {std::pair{0.25, 0.25}, {0.125, 0.5}, {0.6, 0.2}}) {
    const double expect = 0.5 * (a * std::log(a) + b * std::log(b) + (1 - a - b) * std::log(1 - a - b));
    EXPECT_NEAR(sp.value(vec({a, b})), expect, 1e-15);
  }
}

TEST(Potential, KahlerPotential) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_NEAR(cp1.kahler_potential(vec({0.0})), 0.5 * std::log(2.0), 1e-15);
  const double g03 = 0.5 * (0.8 * std::log(0.8) + 0.2 * std::log(0.2));
  EXPECT_NEAR(cp1.kahler_potential(vec({0.3})), 0.3 * 0.5 * std::log(4.0) - g03, 1e-14);
  std::mt19937_64 rng(11);
  for (const auto& sp : sample_potentials()) {
    const Eigen::VectorXd x = random_interior(sp.polytope(), rng);
    EXPECT_NEAR(sp.kahler_potential(x) + sp.value(x) - x.dot(sp.gradient(x)), 0.0, 1e-13);
  }
}

TEST(Potential, LegendreInverseHandValues) {
  SymplecticPotential cp1(preset("cp1-half"));
  EXPECT_NEAR(legendre_inverse(cp1, vec({0.0}))[0], 0.0, 1e-12);
  EXPECT_NEAR(legendre_inverse(cp1, vec({0.5 * std::log(4.0)}))[0], 0.3, 1e-10);
  // far out in y space the solution hugs the boundary
  const double x = legendre_inverse(cp1, vec({5.0}))[0];
  // ½ log((½+x)/(½−x)) = 5
  EXPECT_NEAR(x, 0.5 * std::tanh(5.0), 1e-12);
}

TEST(Potential, LegendreRoundTrip) {
  std::mt19937_64 rng(3);
  std::vector<SymplecticPotential> convex;
  convex.emplace_back(preset("cp1-wide"), ConeWeights({0.5, 1.0}), Correction{}, preset_correction("quad-iso", 1), 2.0);
  convex.emplace_back(preset("cp1xcp1-unit"), ConeWeights{}, Correction{}, preset_correction("paper53", 2), 1.0);
  convex.emplace_back(preset("simplex2-half"), ConeWeights{}, Correction{}, preset_correction("quad-iso", 2), 3.0);
  convex.emplace_back(preset("simplex2"));
  for (const auto& sp : convex) {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd x = random_interior(sp.polytope(), rng, 1e-4);
      const Eigen::VectorXd back = legendre_inverse(sp, sp.gradient(x));
      worst = std::max(worst, (back - x).lpNorm<Eigen::Infinity>());
    }
    EXPECT_LE(worst, 1e-8);
  }
}

TEST(Potential, LegendreInverseRejectsNonConvex) {
  GeodesicRay ray(preset("cp1xcp1-unit"), preset_correction("paper53", 2));
  EXPECT_THROW(legendre_inverse(ray.at(-3.0), vec({0.0, 0.0})), ConvexityError);
}

TEST(Potential, RegularityAlpha) {
  SymplecticPotential cp1(preset("cp1-half"));
  for (double x : {-0.49, -0.3, 0.0, 0.1, 0.4999}) EXPECT_NEAR(cp1.regularity_alpha(vec({x})), 2.0, 1e-9);

  SymplecticPotential box(preset("cp1xcp1-unit"));
  EXPECT_NEAR(box.regularity_alpha(vec({0.5, 0.5})), 4.0, 1e-13);

  GeodesicRay ray(preset("cp1xcp1-unit"), preset_correction("paper53", 2));
  // H = diag(-1, 0.5)
  EXPECT_THROW(ray.at(-1.5).regularity_alpha(vec({0.5, 0.5})), RegularityError);
}

TEST(Potential, RegularityBoundedNearBoundary) {
  for (const char* name : {"simplex2", "cp1xcp1-unit", "simplex2-half"}) {
    SymplecticPotential sp(preset(name));
    const Box bb = sp.polytope().bounding_box();
    double lo = INFINITY, hi = 0.0;
    const int res = 400;
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < res; ++j) {
        const Eigen::VectorXd x = vec({bb.lo[0] + (i + 0.5) * (bb.hi[0] - bb.lo[0]) / res,
                                       bb.lo[1] + (j + 0.5) * (bb.hi[1] - bb.lo[1]) / res});
        if (!(sp.polytope().ells(x).array() > 1e-3).all()) continue;
        const double a = sp.regularity_alpha(x);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
    }
    EXPECT_GT(lo, 0.0) << name;
    EXPECT_LT(hi / lo, 10.0) << name;
  }
}

TEST(Potential, StrongConvexityCheck) {
  const auto box = preset_polytope("cp1xcp1-unit");
  auto rep = strong_convexity_check(preset_correction("paper53", 2), box, QuadratureSpec::for_dim(2));
  EXPECT_TRUE(rep.strongly_convex);
  EXPECT_NEAR(rep.min_eigenvalue, 1.0, 1e-14);

  rep = strong_convexity_check(Correction{}, box, QuadratureSpec::for_dim(2));
  EXPECT_FALSE(rep.strongly_convex);

  const auto unit = make_box({{Rational(0), Rational(1)}});
  rep = strong_convexity_check(preset_correction("osc55", 1), unit, QuadratureSpec{});
  EXPECT_TRUE(rep.strongly_convex);
  EXPECT_GT(rep.min_eigenvalue, 1.0);
}

TEST(Potential, ConeWeightsValidation) {
  EXPECT_THROW(ConeWeights({0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(ConeWeights({1.5}), InvalidArgument);
  EXPECT_THROW(SymplecticPotential(preset("cp1-half"), ConeWeights({1.0})), InvalidArgument);
}

TEST(Correction, OscillatoryGaugeAndDerivatives) {
  const Correction psi = preset_correction("osc55", 1);
  EXPECT_EQ(psi.value(vec({0.5})), 0.0);
  EXPECT_EQ(psi.gradient(vec({0.5}))[0], 0.0);
  EXPECT_EQ(psi.hessian(vec({0.5}))(0, 0), 2.0);
  for (double x : {0.0, 0.13, 0.31, 0.47, 0.52, 0.77, 1.0}) {
    const double u = x - 0.5;
    EXPECT_NEAR(psi.hessian(vec({x}))(0, 0), 2.0 + std::exp(-1.0 / (u * u)) * std::sin(1.0 / u), 1e-15);
    // independent Simpson integration of ψ'' from the center
    const auto f2 = [](double t) {
      const double v = t - 0.5;
      return v == 0.0 ? 2.0 : 2.0 + std::exp(-1.0 / (v * v)) * std::sin(1.0 / v);
    };
    const double d1 = oracle::simpson(f2, 0.5, x, 20000);
    const double d0 = oracle::simpson([&](double t) { return (x - t) * f2(t); }, 0.5, x, 20000);
    EXPECT_NEAR(psi.gradient(vec({x}))[0], d1, 1e-10) << x;
    EXPECT_NEAR(psi.value(vec({x})), d0, 1e-10) << x;
  }
  EXPECT_THROW(psi.value(vec({3.0})), DomainError);
}

TEST(Correction, PolynomialDerivativesMatchFiniteDifferences) {
  const Correction c = Correction::polynomial({{{2, 1, 0}, 0.7}, {{0, 3, 1}, -0.4}, {{1, 0, 2}, 1.1}});
  const Eigen::VectorXd x = vec({0.3, -0.2, 0.9});
  const auto fd = oracle::fd_gradient([&](const Eigen::VectorXd& z) { return c.value(z); }, x, 1e-6);
  EXPECT_LE((fd - c.gradient(x)).norm(), 1e-8);
  const auto fdh = oracle::fd_jacobian([&](const Eigen::VectorXd& z) { return c.gradient(z); }, x, 1e-6);
  EXPECT_LE((fdh - c.hessian(x)).norm(), 1e-8);
  EXPECT_THROW(c.value(vec({0.0, 1.0})), InvalidArgument);
}

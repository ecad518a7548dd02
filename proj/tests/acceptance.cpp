// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "toriclab/toriclab.hpp"

using namespace toriclab;

namespace {

// Tolerances, pinned.
constexpr double kLifespanTol = 0.02;
constexpr double kBisectTol = 1e-3;
constexpr double kLifespanSeconds = 30.0;
constexpr double kRootTol = 1e-8;
constexpr double kExactNormTol = 1e-6;
constexpr double kExactNormSeconds = 5.0;
constexpr int kExactNormLevels = 12;
constexpr double kRatioBand = 0.02;
constexpr double kConcentrationMin = 0.99;
constexpr double kLaplaceRelErr = 0.05;
constexpr std::size_t kMinRays = 1000;
constexpr double kGradAtM = 1e-8;
constexpr double kPrequantumTol = 1e-12;
constexpr double kConeTol = 1e-12;
constexpr int kCharacterOrderMax = 25;
constexpr double kMassTol = 1e-3;
constexpr double kFillingMin = 0.95;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::shared_ptr<const Polytope> preset(const std::string& name) {
  return std::make_shared<const Polytope>(preset_polytope(name));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

GeodesicRay box_ray() { return GeodesicRay(preset("cp1xcp1-unit"), preset_correction("paper53", 2)); }
GeodesicRay wide_ray() { return GeodesicRay(preset("cp1-wide"), preset_correction("quad-iso", 1)); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome c1_lifespans() {
  const auto t0 = Clock::now();
  const auto rep = lifespans(box_ray(), 200, kBisectTol);
  const double dt = seconds_since(t0);
  const bool ok = std::abs(rep.s_cvx - 1.0) <= kLifespanTol && std::abs(rep.s_neg - 2.0) <= kLifespanTol &&
                  dt < kLifespanSeconds;
  std::ostringstream os;
  os.precision(8);
  os << "s_cvx=" << rep.s_cvx << " s_neg=" << rep.s_neg << " time=" << fmt("%.2fs", dt);
  return {ok, os.str()};
}

Outcome c2_islands() {
  const auto ray = box_ray();
  bool ok = true;
  std::ostringstream os;
  for (int res : {100, 200, 400}) {
    const auto map = island_map(ray, -3.0, res);
    const std::size_t pp = map.count({2, 0, false});
    const std::size_t mp = map.count({1, 1, false}, "-+");
    const std::size_t pm = map.count({1, 1, false}, "+-");
    const std::size_t mm = map.count({0, 2, false});
    const bool this_ok = map.islands.size() == 9 && pp == 4 && mp == 2 && pm == 2 && mm == 1;
    ok = ok && this_ok;
    os << "res" << res << ":" << map.islands.size() << "[" << pp << "(+,+) " << mp << "(-,+) " << pm << "(+,-) "
       << mm << "(-,-)] ";
  }
  return {ok, os.str()};
}

Outcome c3_boundaries() {
  const auto ray = box_ray();
  const Eigen::VectorXd mid = vec({0.5, 0.5});
  double worst = 0.0;
  bool ok = true, flagged = true;
  std::ostringstream os;
  const double coef[2] = {2.0, 1.0};
  for (int axis = 0; axis < 2; ++axis) {
    const auto roots = hessian_entry_roots(ray, -3.0, axis, mid);
    const auto forms = unit_square_boundaries(axis, coef[axis], -3.0);
    if (roots.size() != 2 || !forms.derived.lo) {
      ok = false;
      continue;
    }
    worst = std::max({worst, std::abs(roots[0] - *forms.derived.lo), std::abs(roots[1] - *forms.derived.hi)});
    flagged = flagged && forms.max_mismatch > 1e-3;
    os << "H" << axis + 1 << axis + 1 << " roots " << fmt("%.10f", roots[0]) << "," << fmt("%.10f", roots[1])
       << " printed " << fmt("%.6f", *forms.printed.lo) << "," << fmt("%.6f", *forms.printed.hi) << "; ";
  }
  ok = ok && worst <= kRootTol && flagged;
  os << "max|root-derived|=" << fmt("%.2e", worst) << " printed-mismatch-flagged=" << (flagged ? "yes" : "no");
  return {ok, os.str()};
}

Outcome c4_exact_norm() {
  const auto t0 = Clock::now();
  const MonomialSection sec({0}, GeodesicRay(preset("cp1-half"), Correction{}), 0.0);
  const auto r = log_l2_norm_sq(sec, {}, QuadratureSpec::for_dim(1));
  const double dt = seconds_since(t0);
  const double exact = std::numbers::pi * std::numbers::pi / 4.0;
  const double rel = std::abs(r.value() - exact) / exact;
  const bool ok = rel <= kExactNormTol && r.levels <= kExactNormLevels && dt < kExactNormSeconds;
  std::ostringstream os;
  os.precision(12);
  os << "norm=" << r.value() << " rel_err=" << fmt("%.2e", rel) << " levels=" << r.levels
     << " time=" << fmt("%.2fs", dt);
  return {ok, os.str()};
}

Outcome c5_ratio() {
  const auto ray = wide_ray();
  const NormConvention conv{NormKind::halfform};
  const auto quad = QuadratureSpec::for_dim(1);
  std::vector<double> r50;
  double worst_s = 0.0;
  for (std::int64_t m : {-1, 0, 1}) {
    const double a = norm_ratio(MonomialSection({m}, ray, 50.0), conv, quad);
    const double r40 = norm_ratio(MonomialSection({m}, ray, 40.0), conv, quad);
    const double r80 = norm_ratio(MonomialSection({m}, ray, 80.0), conv, quad);
    r50.push_back(a);
    worst_s = std::max(worst_s, std::abs(r80 / r40 - 1.0));
  }
  double worst_m = 0.0;
  for (double a : r50)
    for (double b : r50) worst_m = std::max(worst_m, std::abs(a / b - 1.0));
  std::ostringstream os;
  os.precision(8);
  os << "ratios(s=50)=" << r50[0] << "," << r50[1] << "," << r50[2] << " m-spread=" << fmt("%.3e", worst_m)
     << " s-drift(40->80)=" << fmt("%.3e", worst_s);
  return {worst_m <= kRatioBand && worst_s <= kRatioBand, os.str()};
}

Outcome c6_concentration() {
  const MonomialSection sec({0}, wide_ray(), 100.0);
  const double c = concentration(sec, 0.2, {}, QuadratureSpec::for_dim(1));
  return {c >= kConcentrationMin, fmt("fraction=%.10f", c)};
}

Outcome c7_laplace() {
  const auto ray = wide_ray();
  const Box k{vec({-0.3}), vec({0.3})};
  const Box k_outer{vec({-1.0}), vec({1.0})};
  const std::vector<double> ladder = {-40, -80, -120, -160, -200};
  const auto quad = QuadratureSpec::for_dim(1);
  const auto fit = laplace_exponent_fit({0}, ray, k, ladder, {}, quad);
  std::vector<double> logs;
  bool decreasing = true;
  for (double s : ladder) {
    const auto r = suppression_ratio({{IntVector{0}, 1.0}}, ray, k, k_outer, s, {}, quad);
    if (!logs.empty()) decreasing = decreasing && r.log_ratio < logs.back();
    logs.push_back(r.log_ratio);
  }
  std::ostringstream os;
  os.precision(8);
  os << "slope=" << fit.slope << " target=" << fit.target << " rel_err=" << fmt("%.3e", fit.rel_err)
     << " (n+1/2 prefactor: slope=" << fit.slope_n_plus_half << " rel_err=" << fmt("%.3e", fit.rel_err_n_plus_half) << ")"
     << " log-ratios=";
  for (std::size_t i = 0; i < logs.size(); ++i) os << (i ? "," : "") << fmt("%.2f", logs[i]);
  os << " monotone=" << (decreasing ? "yes" : "no");
  return {fit.rel_err <= kLaplaceRelErr && decreasing, os.str()};
}

Outcome c8_monotonicity() {
  std::size_t rays = 0, violations = 0;
  double grad = 0.0;
  for (std::int64_t m : {0, 1}) {
    const auto one = ray_monotonicity_check(MonomialSection({m}, wide_ray(), -5.0), 2, 1);
    rays += one.rays;
    violations += one.violations;
    grad = std::max(grad, one.grad_at_m);
  }
  const GeodesicRay ray2(preset("cp1xcp1-wide"), preset_correction("paper53", 2));
  unsigned seed = 11;
  for (const IntVector& m : {IntVector{0, 0}, IntVector{1, 1}}) {
    const auto r = ray_monotonicity_check(MonomialSection(m, ray2, -50.0), 1000, seed++);
    rays += r.rays;
    violations += r.violations;
    grad = std::max(grad, r.grad_at_m);
  }
  std::ostringstream os;
  os << "rays=" << rays << " violations=" << violations << " max|grad|sigma|^2(m)|=" << fmt("%.2e", grad);
  return {rays >= kMinRays && violations == 0 && grad <= kGradAtM, os.str()};
}

Outcome c9_identities() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // prequantum evolution on random samples over several presets
  const std::vector<std::pair<std::string, std::string>> setups = {
      {"cp1-half", "quad-iso"}, {"cp1-wide", "quad-iso"}, {"cp1xcp1-wide", "paper53"}, {"simplex2-half", "quad-iso"}};
  double pre = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto& [pn, sn] = setups[static_cast<std::size_t>(i) % setups.size()];
    const auto p = preset(pn);
    const GeodesicRay ray(p, preset_correction(sn, p->dim()));
    const auto pts = p->lattice_points(true);
    const auto& m = pts[static_cast<std::size_t>(u(rng) * static_cast<double>(pts.size())) % pts.size()];
    const Box bb = p->bounding_box();
    Eigen::VectorXd x(p->dim()), th(p->dim());
    do {
      for (int j = 0; j < p->dim(); ++j) x[j] = bb.lo[j] + (bb.hi[j] - bb.lo[j]) * u(rng);
    } while (!(p->ells(x).array() > 1e-3).all());
    for (int j = 0; j < p->dim(); ++j) th[j] = 2.0 * std::numbers::pi * u(rng);
    const double s = -5.0 + 10.0 * u(rng);
    pre = std::max(pre, prequantum_evolve_check(to_vector(m), ray, s, x, th).rel_residual);
  }
  // cone rescaling
  double cone = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto p = preset(i % 2 ? "cp1xcp1-unit" : "simplex2-half");
    std::vector<double> beta;
    for (std::size_t j = 0; j < p->num_facets(); ++j) beta.push_back(0.1 + 0.9 * u(rng));
    Eigen::VectorXd x(2);
    do {
      x = vec({-0.5 + 2.0 * u(rng), -0.5 + 2.0 * u(rng)});
    } while (!(p->ells(x).array() > 1e-2).all());
    const auto psi = preset_correction(i % 2 ? "paper53" : "quad-iso", 2);
    cone = std::max(cone, cone_scaling_check(p, ConeWeights(beta), psi, 0.2 + 5.0 * u(rng), x).rel_residual);
  }
  // character series truncations
  bool tails = true;
  for (double a : {-2.0, -0.5, 0.3, 1.0, 2.0 * std::log(2.0), 3.0})
    for (int k = 0; k <= kCharacterOrderMax; ++k) {
      const auto r = character_series(a, 0.7, k);
      tails = tails && r.error <= r.tail_bound + 4e-16 * std::abs(r.limit);
    }
  // second-order Lie series on quadratic and oscillatory rays
  bool lie = true;
  double lie_worst = 0.0;
  const GeodesicRay q(preset("cp1-half"), preset_correction("quad-iso", 1));
  const GeodesicRay o(preset("cp1-unit"), preset_correction("osc55", 1));
  const GeodesicRay b = box_ray();
  for (double s : {-2.0, 0.0, 5.0}) {
    for (const auto& [ray, x] : std::vector<std::pair<GeodesicRay, Eigen::VectorXd>>{
             {q, vec({0.3})}, {o, vec({0.3})}, {b, vec({0.2, 0.7})}}) {
      const auto rep = lie_series_check(ray, x, Eigen::VectorXd::Constant(x.size(), 0.4), s, 2);
      lie = lie && rep.ok;
      lie_worst = std::max(lie_worst, rep.residuals[1] / rep.fd_tolerance);
    }
  }
  std::ostringstream os;
  os << "prequantum=" << fmt("%.2e", pre) << " cone=" << fmt("%.2e", cone)
     << " character-tails=" << (tails ? "ok" : "violated") << " lie(2nd/fd_tol)=" << fmt("%.2e", lie_worst);
  return {pre <= kPrequantumTol && cone <= kConeTol && tails && lie, os.str()};
}

Outcome c10_counts() {
  const std::vector<std::pair<std::string, std::size_t>> expected = {
      {"cp1-half", 1}, {"cp1-wide", 3}, {"cp1xcp1-unit", 4}, {"simplex2", 3}, {"simplex2-half", 3}};
  bool ok = true;
  std::ostringstream os;
  for (const auto& [name, count] : expected) {
    const auto p = preset_polytope(name);
    const auto brute = oracle::brute_force_lattice(p.normals(), p.offsets(), false);
    const std::size_t d = dim_check(p);
    bool boundary_free = true;
    if (p.is_half_integral()) boundary_free = p.lattice_points(false).size() == p.lattice_points(true).size();
    ok = ok && d == brute.size() && d == count && boundary_free;
    os << name << "=" << d << (p.is_half_integral() ? "(half-integral, no boundary points)" : "") << " ";
  }
  return {ok, os.str()};
}

Outcome c11_mass() {
  QuadratureSpec q1 = QuadratureSpec::for_dim(1);
  q1.rel_tol = 1e-6;
  q1.max_levels = 8;
  const auto one =
      ma_mass(SymplecticPotential(preset("cp1-half")), Box{vec({-0.2}), vec({0.2})}, q1);
  QuadratureSpec q2 = QuadratureSpec::for_dim(2);
  q2.base_resolution = 64;
  q2.rel_tol = 1e-4;
  q2.max_levels = 4;
  const auto two = ma_mass(box_ray().at(1.0), Box{vec({0.2, 0.3}), vec({0.7, 0.8})}, q2);
  std::ostringstream os;
  os.precision(10);
  os << "1d: x=" << one.mass_x << " y=" << one.mass_y << " rel=" << fmt("%.2e", one.rel_diff) << "; 2d: x=" << two.mass_x
     << " y=" << two.mass_y << " rel=" << fmt("%.2e", two.rel_diff) << " (res " << two.final_resolution << ")";
  return {one.rel_diff <= kMassTol && two.rel_diff <= kMassTol, os.str()};
}

Outcome c12_track() {
  const auto rep = island_track(box_ray(), {-2.5, -3.0, -4.0, -8.0, -50.0}, 200);
  std::size_t ladder_violations = 0;
  for (const auto& st : rep.steps)
    if (st.s_next >= -8.0) ladder_violations += st.violations;
  bool corners = true;
  for (bool b : rep.vertex_cells_positive) corners = corners && b;
  const double fill = rep.negative_fraction.back();
  std::ostringstream os;
  os << "violations(-2.5..-8)=" << ladder_violations << " total=" << rep.total_violations
     << " fill(s=-50)=" << fmt("%.4f", fill) << " vertex-cells-(n,0)=" << (corners ? "yes" : "no");
  return {ladder_violations == 0 && rep.total_violations == 0 && fill >= kFillingMin && corners, os.str()};
}

Outcome c13_oscillation() {
  const GeodesicRay ray(preset("cp1-unit"), preset_correction("osc55", 1));
  const auto rep = second_derivative_sign_changes(ray, -1.0, 0.5, 0.2, 2000, 3);
  std::ostringstream os;
  os << "sign changes at";
  for (std::size_t i = 0; i < rep.samples.size(); ++i) os << " " << rep.samples[i] << ":" << rep.changes[i];
  os << " strictly-increasing=" << (rep.strictly_increasing ? "yes" : "no");
  return {rep.strictly_increasing, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"box lifespans s_cvx=1, s_neg=2", c1_lifespans},
      {"nine islands at s=-3, resolutions 100/200/400", c2_islands},
      {"island boundary roots vs closed form", c3_boundaries},
      {"exact CP1 norm pi^2/4", c4_exact_norm},
      {"half-form norm ratio m-independent and s-stable", c5_ratio},
      {"concentration at s=100", c6_concentration},
      {"Laplace exponent and suppression decay", c7_laplace},
      {"monotonicity along rays in negative islands", c8_monotonicity},
      {"algebraic identity suites", c9_identities},
      {"lattice counts on five presets", c10_counts},
      {"Monge-Ampere mass identity", c11_mass},
      {"negative-island nesting and filling", c12_track},
      {"oscillatory sign changes under refinement", c13_oscillation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}

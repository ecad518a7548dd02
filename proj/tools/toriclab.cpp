// toriclab command-line front end.
//
// Exit codes: 0 success, 1 IO, 2 precondition or invalid input,
// 3 verification failure.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "toriclab/json_io.hpp"
#include "toriclab/toriclab.hpp"

namespace tl = toriclab;
using tl::Json;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kPrecondition = 2, kVerification = 3 };

/// A check ran to completion and its residual exceeded the bound.
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // shared
  std::string scenario;
  std::string psi;
  std::string out;
  std::string csv;
  std::string config;
  int workers = 1;
  unsigned seed = 1;
  // numerics
  std::string s;
  int res = 200;
  double margin = -1.0;
  double tau = tl::kSignatureTolerance;
  double tol = 1e-3;
  double quad_tol = 0.0;
  int base_res = 0;
  int max_levels = 0;
  // sections
  std::string m;
  std::string conv = "plain";
  std::string k;
  std::string k_outer;
  double eps = 0.2;
  bool allow_any = false;
  std::size_t directions = 1000;
  // flows
  std::size_t samples = 100;
  std::string beta;
  std::string x;
  std::string theta;
  int order = 25;
  int lie_order = 2;
};

// ---------------------------------------------------------------- parsing

std::vector<double> parse_numbers(std::string text) {
  std::replace(text.begin(), text.end(), ';', ',');
  std::vector<double> out;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    try {
      out.push_back(std::stod(tok, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw tl::InvalidArgument("not a number: '" + tok + "'");
  }
  return out;
}

/// "a,b,c" or "a..b" (five points) or "a..b:n" (n points, inclusive).
std::vector<double> parse_s_list(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return parse_numbers(text);
  const double a = std::stod(text.substr(0, dots));
  std::string rest = text.substr(dots + 2);
  int count = 5;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    count = std::stoi(rest.substr(colon + 1));
    rest = rest.substr(0, colon);
  }
  const double b = std::stod(rest);
  if (count < 2) throw tl::InvalidArgument("range needs at least 2 points");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(a + (b - a) * i / (count - 1));
  return out;
}

/// Flat integer list chunked into labels of length n.
std::vector<tl::IntVector> parse_labels(const std::string& text, int n) {
  const auto nums = parse_numbers(text);
  if (nums.empty() || nums.size() % static_cast<std::size_t>(n) != 0)
    throw tl::InvalidArgument("--m needs a multiple of " + std::to_string(n) + " integers");
  std::vector<tl::IntVector> out;
  for (std::size_t i = 0; i < nums.size(); i += static_cast<std::size_t>(n)) {
    tl::IntVector m;
    for (int j = 0; j < n; ++j) {
      const double v = nums[i + static_cast<std::size_t>(j)];
      if (v != std::round(v)) throw tl::InvalidArgument("--m entries must be integers");
      m.push_back(static_cast<std::int64_t>(v));
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// "lo1,hi1[,lo2,hi2...]".
tl::Box parse_box(const std::string& text, int n) {
  const auto nums = parse_numbers(text);
  if (nums.size() != 2 * static_cast<std::size_t>(n))
    throw tl::InvalidArgument("box needs " + std::to_string(2 * n) + " numbers (lo,hi per axis)");
  tl::Box b{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    b.lo[i] = nums[2 * static_cast<std::size_t>(i)];
    b.hi[i] = nums[2 * static_cast<std::size_t>(i) + 1];
    if (!(b.lo[i] < b.hi[i])) throw tl::InvalidArgument("box side with lo >= hi");
  }
  return b;
}

Eigen::VectorXd parse_point(const std::string& text, int n) {
  const auto nums = parse_numbers(text);
  if (nums.size() != static_cast<std::size_t>(n))
    throw tl::InvalidArgument("point needs " + std::to_string(n) + " coordinates");
  return Eigen::Map<const Eigen::VectorXd>(nums.data(), n);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------- scenario

struct Scenario {
  std::string name;
  tl::PotentialBundle bundle;
  bool has_psi = false;
  std::string psi_name;
};

bool is_preset(const std::string& name) {
  for (const auto& p : tl::polytope_preset_names())
    if (p == name) return true;
  return false;
}

Scenario load_scenario(const Options& o, const std::string& default_scenario, const std::string& default_psi) {
  Scenario sc;
  sc.name = o.scenario.empty() ? default_scenario : o.scenario;
  if (is_preset(sc.name)) {
    sc.bundle.polytope = std::make_shared<const tl::Polytope>(tl::preset_polytope(sc.name));
  } else {
    const Json j = tl::read_json_file(sc.name);
    if (j.contains("polytope")) {
      sc.bundle = tl::bundle_from_json(j);
      sc.has_psi = j.contains("psi");
      if (sc.has_psi) sc.psi_name = j.at("psi").is_string() ? j.at("psi").get<std::string>() : "custom";
    } else {
      sc.bundle.polytope = std::make_shared<const tl::Polytope>(tl::polytope_from_json(j));
    }
  }
  const int n = sc.bundle.polytope->dim();
  std::string psi = o.psi;
  if (psi.empty() && !sc.has_psi) psi = default_psi;
  if (!psi.empty()) {
    bool preset = false;
    for (const auto& p : tl::psi_preset_names()) preset = preset || p == psi;
    sc.bundle.psi = preset ? tl::preset_correction(psi, n) : tl::correction_from_json(tl::read_json_file(psi), n);
    sc.psi_name = psi;
    sc.has_psi = true;
  }
  if (n > 3) throw tl::PreconditionError("only dimensions n <= 3 are supported");
  return sc;
}

// ---------------------------------------------------------------- output

void emit(const Options& o, Json report) {
  report["environment"]["seed"] = o.seed;
  report["environment"]["workers"] = o.workers;
  if (o.out.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw tl::IoError("cannot write '" + o.out + "'");
  f << report.dump(2) << "\n";
}

template <typename Writer>
void emit_csv(const std::string& path, Writer&& write) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw tl::IoError("cannot write '" + path + "'");
  write(f);
}

tl::QuadratureSpec quad_spec(const Options& o, int n) {
  auto q = tl::QuadratureSpec::for_dim(n);
  if (o.quad_tol < 0) throw tl::PreconditionError("--quad-tol must be positive");
  if (o.quad_tol > 0) q.rel_tol = o.quad_tol;
  if (o.base_res > 0) q.base_resolution = o.base_res;
  if (o.max_levels > 0) q.max_levels = o.max_levels;
  q.workers = o.workers;
  q.validate();
  return q;
}

Json quad_json(const tl::QuadratureSpec& q) {
  return {{"base_resolution", q.base_resolution},
          {"refinement", q.refinement},
          {"rel_tol", q.rel_tol},
          {"max_levels", q.max_levels}};
}

void check_resolution(int res) {
  if (res < 16) throw tl::PreconditionError("--res must be >= 16");
}

void check_tolerance(double t, const char* what) {
  if (!(t > 0)) throw tl::PreconditionError(std::string(what) + " must be positive");
}

// ---------------------------------------------------------------- polytope

int cmd_polytope(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "zero");
  const auto& p = *sc.bundle.polytope;
  Json j;
  j["scenario"] = sc.name;
  j["dim"] = p.dim();
  j["polytope"] = tl::to_json(p);
  Json verts = Json::array();
  for (const auto& v : p.raw_vertices()) {
    Json e;
    Json exact = Json::array();
    for (const auto& q : v.exact) exact.push_back(tl::to_string(q));
    e["point"] = exact;
    e["active_facets"] = v.active;
    verts.push_back(e);
  }
  j["vertices"] = verts;
  const auto dz = p.is_delzant();
  j["delzant"] = dz.ok;
  Json fails = Json::array();
  for (const auto& f : dz.failures) fails.push_back({{"point", to_std(f.point)}, {"active_facets", f.active}, {"reason", f.reason}});
  j["delzant_failures"] = fails;
  j["half_integral"] = p.is_half_integral();
  const auto all = p.lattice_points(false);
  const auto interior = p.lattice_points(true);
  j["lattice_count"] = all.size();
  j["interior_lattice_count"] = interior.size();
  j["boundary_lattice_count"] = all.size() - interior.size();
  j["lattice_points"] = all;
  emit(o, j);
  return kOk;
}

// ---------------------------------------------------------------- islands

tl::GeodesicRay islands_ray(const Scenario& sc) {
  if (!sc.has_psi || sc.bundle.psi.is_zero()) throw tl::PreconditionError("islands commands need a direction psi");
  return sc.bundle.ray();
}

Scenario islands_scenario(const Options& o) {
  // the unit square with the two-coefficient quadratic is the default pair
  if (o.scenario.empty() && o.psi.empty()) {
    Options d = o;
    d.psi = "paper53";
    return load_scenario(d, "cp1xcp1-unit", "");
  }
  return load_scenario(o, "cp1xcp1-unit", "");
}

double single_s(const Options& o, double fallback) {
  if (o.s.empty()) return fallback;
  const auto v = parse_s_list(o.s);
  if (v.size() != 1) throw tl::InvalidArgument("--s takes a single value here");
  return v[0];
}

std::optional<double> margin_opt(const Options& o) {
  return o.margin >= 0 ? std::optional<double>(o.margin) : std::nullopt;
}

int cmd_islands_map(const Options& o) {
  const Scenario sc = islands_scenario(o);
  check_resolution(o.res);
  const double s = single_s(o, -3.0);
  const auto map = tl::island_map(islands_ray(sc), s, o.res, margin_opt(o), o.tau, o.workers);
  emit_csv(o.csv, [&](std::ostream& f) { tl::write_island_csv(f, map); });
  Json j;
  j["scenario"] = sc.name;
  j["psi"] = sc.psi_name;
  j["s"] = s;
  j["islands"] = map.islands.size();
  std::map<std::string, int> by_sig;
  Json detail = Json::array();
  for (const auto& isl : map.islands) {
    ++by_sig[isl.sig.str()];
    detail.push_back({{"id", isl.id}, {"signature", isl.sig.str()}, {"diagonal_pattern", isl.pattern},
                      {"cells", isl.members.size()}});
  }
  j["by_signature"] = by_sig;
  j["detail"] = detail;
  j["singular_cells"] = std::count(map.label.begin(), map.label.end(), -1);
  j["sampled_cells"] = map.grid.cells.size();
  j["adjacency"] = map.adjacency;
  j["environment"] = {{"resolution", o.res}, {"margin", map.grid.margin}, {"tau", o.tau}};
  emit(o, j);
  return kOk;
}

int cmd_islands_lifespan(const Options& o) {
  const Scenario sc = islands_scenario(o);
  check_resolution(o.res);
  check_tolerance(o.tol, "--tol");
  const auto rep = tl::lifespans(islands_ray(sc), o.res, o.tol, o.workers);
  Json j = tl::to_json(rep);
  j["scenario"] = sc.name;
  j["psi"] = sc.psi_name;
  j["environment"] = {{"resolution", o.res}, {"bisect_tol", o.tol}, {"margin", rep.margin}};
  emit(o, j);
  return kOk;
}

int cmd_islands_track(const Options& o) {
  const Scenario sc = islands_scenario(o);
  check_resolution(o.res);
  if (o.s.empty()) throw tl::PreconditionError("islands track needs --s (a decreasing list of negative values)");
  const auto rep = tl::island_track(islands_ray(sc), parse_s_list(o.s), o.res, o.tau, o.workers);
  Json steps = Json::array();
  for (const auto& st : rep.steps)
    steps.push_back({{"s", st.s}, {"s_next", st.s_next}, {"negative_cells", st.negative_cells},
                     {"negative_cells_next", st.negative_cells_next}, {"violations", st.violations}});
  Json j = {{"scenario", sc.name},
            {"psi", sc.psi_name},
            {"s", rep.s_list},
            {"negative_fraction", rep.negative_fraction},
            {"vertex_cells_positive", rep.vertex_cells_positive},
            {"steps", steps},
            {"total_violations", rep.total_violations},
            {"sampled_cells", rep.samples}};
  j["environment"] = {{"resolution", o.res}, {"tau", o.tau}};
  emit(o, j);
  if (rep.total_violations) throw VerificationFailure("negative sets are not nested along the s list");
  return kOk;
}

int cmd_islands_boundaries(const Options& o) {
  const Scenario sc = islands_scenario(o);
  const auto ray = islands_ray(sc);
  const double s = single_s(o, -3.0);
  const auto& p = ray.polytope();
  const int n = p.dim();
  const Eigen::VectorXd through = o.x.empty() ? p.center() : parse_point(o.x, n);
  // closed forms apply to the unit cube with a constant diagonal Hess ψ
  const tl::Box bb = p.bounding_box();
  bool unit_cube = p.num_facets() == 2 * static_cast<std::size_t>(n) &&
                   bb.lo.isZero() && bb.hi.isApprox(Eigen::VectorXd::Ones(n));
  const Eigen::MatrixXd h0 = ray.psi().hessian(through);
  const Eigen::MatrixXd h1 = ray.psi().hessian(0.5 * (through + bb.lo) + Eigen::VectorXd::Constant(n, 0.01));
  const bool diagonal_const = (h0 - h1).cwiseAbs().maxCoeff() < 1e-12 &&
                              (h0 - Eigen::MatrixXd(h0.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-12;
  Json axes = Json::array();
  bool mismatch = false;
  for (int i = 0; i < n; ++i) {
    Json a = {{"axis", i + 1}, {"roots", tl::hessian_entry_roots(ray, s, i, through)}};
    if (unit_cube && diagonal_const && h0(i, i) > 0) {
      const auto f = tl::unit_square_boundaries(i, h0(i, i), s);
      auto pair = [](const tl::BoundaryPair& b) {
        return b.lo ? Json::array({*b.lo, *b.hi}) : Json::array();
      };
      a["derived"] = pair(f.derived);
      a["derived_expr"] = f.derived_expr;
      a["printed"] = pair(f.printed);
      a["printed_expr"] = f.printed_expr;
      a["printed_inside_unit_interval"] = f.printed_inside_unit_interval;
      a["max_mismatch"] = f.max_mismatch;
      mismatch = mismatch || f.max_mismatch > 1e-6 || !f.printed_inside_unit_interval;
    }
    axes.push_back(a);
  }
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"s", s}, {"through", to_std(through)}, {"axes", axes}};
  if (unit_cube && diagonal_const) j["printed_expressions_disagree"] = mismatch;
  emit(o, j);
  return kOk;
}

// ---------------------------------------------------------------- sections

tl::NormConvention parse_conv(const std::string& c) {
  if (c == "plain") return {tl::NormKind::plain};
  if (c == "halfform") return {tl::NormKind::halfform};
  throw tl::InvalidArgument("--conv must be plain or halfform");
}

std::vector<tl::IntVector> labels_or_all(const Options& o, const tl::Polytope& p) {
  if (!o.m.empty()) return parse_labels(o.m, p.dim());
  return p.lattice_points(true);
}

void require_half_integral(const Options& o, const tl::Polytope& p) {
  if (!o.allow_any && !p.is_half_integral())
    throw tl::PreconditionError("norm commands need a half-integral polytope (pass --allow-any to override)");
}

Json label_json(const tl::IntVector& m) { return Json(m); }

int cmd_sections_norm(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  require_half_integral(o, p);
  const auto conv = parse_conv(o.conv);
  const auto quad = quad_spec(o, p.dim());
  const auto ray = sc.bundle.ray();
  const auto s_list = o.s.empty() ? std::vector<double>{0.0} : parse_s_list(o.s);
  Json rows = Json::array();
  for (const auto& m : labels_or_all(o, p))
    for (double s : s_list) {
      const auto r = tl::log_l2_norm_sq(tl::MonomialSection(m, ray, s), conv, quad);
      rows.push_back({{"m", label_json(m)}, {"s", s}, {"norm_sq", r.value()}, {"log_norm_sq", r.log_value},
                      {"levels", r.levels}, {"final_resolution", r.final_resolution},
                      {"last_rel_change", r.last_rel_change}});
    }
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"convention", o.conv}, {"norms", rows}};
  j["environment"] = {{"quadrature", quad_json(quad)}};
  emit(o, j);
  return kOk;
}

int cmd_sections_ratio(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  require_half_integral(o, p);
  const auto conv = parse_conv(o.conv);
  const auto quad = quad_spec(o, p.dim());
  const auto ray = sc.bundle.ray();
  const auto s_list = o.s.empty() ? std::vector<double>{40.0, 80.0} : parse_s_list(o.s);
  const auto labels = labels_or_all(o, p);
  std::vector<std::vector<double>> r(labels.size());
  Json rows = Json::array();
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (double s : s_list) {
      r[i].push_back(tl::norm_ratio(tl::MonomialSection(labels[i], ray, s), conv, quad));
      rows.push_back({{"m", label_json(labels[i])}, {"s", s}, {"ratio", r[i].back()}});
    }
  Json spread = Json::array();
  for (std::size_t k = 0; k < s_list.size(); ++k) {
    double lo = 1e300, hi = 0;
    for (const auto& v : r) {
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    spread.push_back({{"s", s_list[k]}, {"max_pairwise_deviation", hi / lo - 1.0}});
  }
  Json drift = Json::array();
  for (std::size_t i = 0; i < labels.size(); ++i)
    drift.push_back({{"m", label_json(labels[i])}, {"s_first", s_list.front()}, {"s_last", s_list.back()},
                     {"rel_change", std::abs(r[i].back() / r[i].front() - 1.0)}});
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"convention", o.conv},
            {"ratios", rows},      {"m_spread", spread},   {"s_drift", drift}};
  j["environment"] = {{"quadrature", quad_json(quad)}};
  emit(o, j);
  return kOk;
}

int cmd_sections_concentration(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  require_half_integral(o, p);
  const auto conv = parse_conv(o.conv);
  const auto quad = quad_spec(o, p.dim());
  const auto ray = sc.bundle.ray();
  const auto s_list = o.s.empty() ? std::vector<double>{100.0} : parse_s_list(o.s);
  Json rows = Json::array();
  for (const auto& m : labels_or_all(o, p))
    for (double s : s_list)
      rows.push_back({{"m", label_json(m)}, {"s", s}, {"eps", o.eps},
                      {"fraction", tl::concentration(tl::MonomialSection(m, ray, s), o.eps, conv, quad)}});
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"convention", o.conv}, {"concentration", rows}};
  j["environment"] = {{"quadrature", quad_json(quad)}};
  emit(o, j);
  return kOk;
}

int cmd_sections_laplace(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  const auto labels = o.m.empty() ? std::vector<tl::IntVector>{tl::IntVector(static_cast<std::size_t>(n), 0)}
                                  : parse_labels(o.m, n);
  if (labels.size() != 1) throw tl::InvalidArgument("laplace takes a single --m");
  if (o.k.empty()) throw tl::PreconditionError("laplace needs --K");
  const auto quad = quad_spec(o, n);
  const auto s_list = o.s.empty() ? parse_s_list("-40..-200") : parse_s_list(o.s);
  const auto fit =
      tl::laplace_exponent_fit(labels[0], sc.bundle.ray(), parse_box(o.k, n), s_list, parse_conv(o.conv), quad);
  Json j = tl::to_json(fit);
  j["scenario"] = sc.name;
  j["psi"] = sc.psi_name;
  j["convention"] = o.conv;
  j["environment"] = {{"quadrature", quad_json(quad)}};
  emit(o, j);
  return kOk;
}

int cmd_sections_suppression(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  if (o.k.empty()) throw tl::PreconditionError("suppression needs --K");
  const tl::Box k = parse_box(o.k, n);
  const tl::Box outer = o.k_outer.empty() ? k : parse_box(o.k_outer, n);
  const auto quad = quad_spec(o, n);
  const auto conv = parse_conv(o.conv);
  std::map<tl::IntVector, std::complex<double>> coeffs;
  for (const auto& m : labels_or_all(o, p)) coeffs[m] = 1.0;
  const auto s_list = o.s.empty() ? parse_s_list("-40..-200") : parse_s_list(o.s);
  Json rows = Json::array();
  std::vector<double> logs;
  for (double s : s_list) {
    const auto r = tl::suppression_ratio(coeffs, sc.bundle.ray(), k, outer, s, conv, quad);
    logs.push_back(r.log_ratio);
    rows.push_back({{"s", s}, {"ratio", r.ratio}, {"log_ratio", r.log_ratio}});
  }
  bool decays = true;
  for (std::size_t i = 1; i < logs.size(); ++i)
    decays = decays && (std::abs(s_list[i]) > std::abs(s_list[i - 1]) ? logs[i] < logs[i - 1] : logs[i] > logs[i - 1]);
  Json labels = Json::array();
  for (const auto& [m, c] : coeffs) labels.push_back(label_json(m));
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"convention", o.conv}, {"modes", labels},
            {"K", tl::box_json(k)},   {"K_outer", tl::box_json(outer)}, {"suppression", rows},
            {"monotone_decay", decays}};
  j["environment"] = {{"quadrature", quad_json(quad)}};
  emit(o, j);
  return kOk;
}

int cmd_sections_monotone(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  const double s = single_s(o, -5.0);
  Json rows = Json::array();
  std::size_t violations = 0;
  for (const auto& m : labels_or_all(o, p)) {
    const auto r = tl::ray_monotonicity_check(tl::MonomialSection(m, sc.bundle.ray(), s), o.directions, o.seed);
    violations += r.violations;
    rows.push_back({{"m", label_json(m)}, {"rays", r.rays}, {"samples", r.samples}, {"violations", r.violations},
                    {"log_norm_at_m", r.log_norm_at_m}, {"min_log_norm", r.min_log_norm},
                    {"grad_at_m", r.grad_at_m}});
  }
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"s", s}, {"dim", n}, {"checks", rows},
            {"total_violations", violations}};
  j["environment"] = {{"directions", o.directions}};
  emit(o, j);
  if (violations) throw VerificationFailure("|sigma|^2 decreased along a ray inside a negative island");
  return kOk;
}

int cmd_sections_dim(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "zero");
  const auto& p = *sc.bundle.polytope;
  Json j = {{"scenario", sc.name},
            {"dim_check", tl::dim_check(p)},
            {"interior_lattice_count", p.lattice_points(true).size()},
            {"half_integral", p.is_half_integral()}};
  emit(o, j);
  return kOk;
}

int cmd_sections_sweep(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-wide", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  require_half_integral(o, p);
  const auto conv = parse_conv(o.conv);
  const auto quad = quad_spec(o, p.dim());
  const auto ray = sc.bundle.ray();
  const auto s_list = o.s.empty() ? std::vector<double>{0.0, 10.0, 20.0, 40.0, 80.0} : parse_s_list(o.s);
  std::vector<tl::SweepRow> rows;
  for (const auto& m : labels_or_all(o, p))
    for (double s : s_list) {
      const tl::MonomialSection sec(m, ray, s);
      const double l = tl::log_l2_norm_sq(sec, conv, quad).log_value;
      rows.push_back({m, s, std::exp(l), std::exp(0.5 * l - sec.potential().value(sec.m_point())),
                      tl::concentration(sec, o.eps, conv, quad)});
    }
  if (o.csv.empty()) {
    tl::write_sweep_csv(std::cout, rows);
  } else {
    emit_csv(o.csv, [&](std::ostream& f) { tl::write_sweep_csv(f, rows); });
    Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"rows", rows.size()}, {"csv", o.csv}};
    j["environment"] = {{"quadrature", quad_json(quad)}, {"eps", o.eps}};
    emit(o, j);
  }
  return kOk;
}

// ---------------------------------------------------------------- flows

constexpr double kPrequantumBound = 1e-12;
constexpr double kConeBound = 1e-12;
constexpr double kConeExampleBound = 1e-13;

Eigen::VectorXd random_interior(const tl::Polytope& p, std::mt19937_64& rng) {
  const tl::Box bb = p.bounding_box();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    Eigen::VectorXd x(p.dim());
    for (int i = 0; i < p.dim(); ++i) x[i] = bb.lo[i] + u(rng) * (bb.hi[i] - bb.lo[i]);
    if ((p.ells(x).array() > 1e-3).all()) return x;
  }
}

Eigen::VectorXd point_or_center(const std::string& text, const tl::Polytope& p) {
  return text.empty() ? p.center() : parse_point(text, p.dim());
}

Eigen::VectorXd theta_or_default(const std::string& text, int n) {
  return text.empty() ? Eigen::VectorXd::Constant(n, 0.5) : parse_point(text, n);
}

int cmd_flows_verify(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  const auto ray = sc.bundle.ray();
  const auto pts = p.lattice_points(false);
  if (pts.empty()) throw tl::PreconditionError("polytope has no lattice points");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double pre = 0, cone = 0, lie_ratio = 0, char_ratio = 0;
  bool lie_ok = true, char_ok = true;
  for (std::size_t i = 0; i < o.samples; ++i) {
    const Eigen::VectorXd x = random_interior(p, rng);
    Eigen::VectorXd th(n);
    for (int k = 0; k < n; ++k) th[k] = 2 * std::numbers::pi * u(rng);
    const auto& mi = pts[static_cast<std::size_t>(u(rng) * static_cast<double>(pts.size())) % pts.size()];
    const Eigen::VectorXd m = tl::to_vector(mi);
    const double s = -5.0 + 10.0 * u(rng);
    pre = std::max(pre, tl::prequantum_evolve_check(m, ray, s, x, th).rel_residual);

    std::vector<double> beta;
    for (std::size_t j = 0; j < p.num_facets(); ++j) beta.push_back(0.1 + 0.9 * u(rng));
    cone = std::max(cone, tl::cone_scaling_check(sc.bundle.polytope, tl::ConeWeights(beta), sc.bundle.psi,
                                                 0.2 + 4.8 * u(rng), x)
                              .rel_residual);

    const auto lie = tl::lie_series_check(ray, x, th, s, o.lie_order);
    lie_ok = lie_ok && lie.ok;
    lie_ratio = std::max(lie_ratio, lie.residuals.back() / lie.fd_tolerance);

    const double a = m.dot(ray.at(s).gradient(x));
    for (int k = 0; k <= o.order; ++k) {
      const auto c = tl::character_series(a, m.dot(th), k);
      const double slack = 4e-16 * std::abs(c.limit);
      char_ok = char_ok && c.error <= c.tail_bound + slack;
      if (c.tail_bound > 0) char_ratio = std::max(char_ratio, c.error / (c.tail_bound + slack));
    }
  }
  const bool ok = pre <= kPrequantumBound && cone <= kConeBound && lie_ok && char_ok;
  Json j = {{"scenario", sc.name},
            {"psi", sc.psi_name},
            {"samples", o.samples},
            {"prequantum", {{"max_rel_residual", pre}, {"bound", kPrequantumBound}}},
            {"cone_scaling", {{"max_rel_residual", cone}, {"bound", kConeBound}}},
            {"lie_series", {{"order", o.lie_order}, {"max_residual_over_fd_tolerance", lie_ratio}, {"ok", lie_ok}}},
            {"character", {{"max_order", o.order}, {"max_error_over_tail_bound", char_ratio}, {"ok", char_ok}}},
            {"ok", ok}};
  emit(o, j);
  if (!ok) throw VerificationFailure("flow identity residual above its bound");
  return kOk;
}

int cmd_flows_cone(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  std::vector<double> beta = o.beta.empty() ? std::vector<double>{1.0} : parse_numbers(o.beta);
  if (beta.size() == 1) beta.assign(p.num_facets(), beta[0]);
  const double s = single_s(o, 2.0);
  const Eigen::VectorXd x = point_or_center(o.x, p);
  const auto r = tl::cone_scaling_check(sc.bundle.polytope, tl::ConeWeights(beta), sc.bundle.psi, s, x);
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"beta", beta}, {"s", s}, {"x", to_std(x)},
            {"abs_residual", r.abs_residual}, {"rel_residual", r.rel_residual}, {"bound", kConeExampleBound}};
  emit(o, j);
  if (r.rel_residual > kConeExampleBound) throw VerificationFailure("cone rescaling residual above bound");
  return kOk;
}

int cmd_flows_character(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  const Eigen::VectorXd m = o.m.empty() ? Eigen::VectorXd::Ones(n) : tl::to_vector(parse_labels(o.m, n).at(0));
  const Eigen::VectorXd x = o.x.empty() ? p.center() + Eigen::VectorXd::Constant(n, 0.3) : parse_point(o.x, n);
  if (!p.in_interior(x)) throw tl::PreconditionError("x must lie in the open polytope");
  const Eigen::VectorXd th = theta_or_default(o.theta, n);
  const auto sp = sc.bundle.ray().at(single_s(o, 0.0));
  Json rows = Json::array();
  bool ok = true;
  for (int k = 0; k <= o.order; ++k) {
    const auto r = tl::character_flow_partial(m, sp, x, th, k);
    const bool within = r.error <= r.tail_bound + 4e-16 * std::abs(r.limit);
    ok = ok && within;
    rows.push_back({{"K", k}, {"error", r.error}, {"tail_bound", r.tail_bound}, {"within", within}});
  }
  const auto last = tl::character_flow_partial(m, sp, x, th, o.order);
  Json j = {{"scenario", sc.name}, {"m", to_std(m)}, {"x", to_std(x)}, {"theta", to_std(th)},
            {"limit", {last.limit.real(), last.limit.imag()}},
            {"partial", {last.partial.real(), last.partial.imag()}}, {"orders", rows}, {"ok", ok}};
  emit(o, j);
  if (!ok) throw VerificationFailure("character series error above the exponential tail bound");
  return kOk;
}

int cmd_flows_lie(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const Eigen::VectorXd x = point_or_center(o.x, p);
  const Eigen::VectorXd th = theta_or_default(o.theta, p.dim());
  const double s = single_s(o, 0.0);
  const auto r = tl::lie_series_check(sc.bundle.ray(), x, th, s, o.lie_order);
  Json j = {{"scenario", sc.name}, {"psi", sc.psi_name}, {"x", to_std(x)}, {"s", s}, {"order", o.lie_order},
            {"residuals", r.residuals}, {"step", r.step}, {"fd_tolerance", r.fd_tolerance}, {"ok", r.ok}};
  emit(o, j);
  if (!r.ok) throw VerificationFailure("Lie series residual above finite-difference tolerance");
  return kOk;
}

int cmd_flows_prequantum(const Options& o) {
  const Scenario sc = load_scenario(o, "cp1-half", "quad-iso");
  const auto& p = *sc.bundle.polytope;
  const int n = p.dim();
  const Eigen::VectorXd m =
      o.m.empty() ? Eigen::VectorXd::Zero(n) : tl::to_vector(parse_labels(o.m, n).at(0));
  const Eigen::VectorXd x = point_or_center(o.x, p);
  const Eigen::VectorXd th = theta_or_default(o.theta, n);
  const double s = single_s(o, 2.0);
  const auto r = tl::prequantum_evolve_check(m, sc.bundle.ray(), s, x, th);
  Json j = {{"scenario", sc.name},
            {"psi", sc.psi_name},
            {"m", to_std(m)},
            {"x", to_std(x)},
            {"s", s},
            {"left", {r.left.real(), r.left.imag()}},
            {"right", {r.right.real(), r.right.imag()}},
            {"rel_residual", r.rel_residual},
            {"bound", kPrequantumBound}};
  emit(o, j);
  if (r.rel_residual > kPrequantumBound) throw VerificationFailure("prequantum evolution residual above bound");
  return kOk;
}

// ---------------------------------------------------------------- config

std::string json_to_arg(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + json_to_arg(e);
    return out;
  }
  return v.dump();
}

/// Fills options the command line left unset from a JSON object whose keys
/// are long option names.
void apply_config(const std::string& path, const std::vector<CLI::App*>& chain) {
  const Json cfg = tl::read_json_file(path);
  if (!cfg.is_object()) throw tl::IoError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    for (auto it = chain.rbegin(); it != chain.rend() && !opt; ++it) opt = (*it)->get_option_no_throw("--" + key);
    if (!opt) throw tl::InvalidArgument("config key '" + key + "' is not an option of this command");
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value.is_boolean() && value.get<bool>()) opt->add_result("true");
    } else {
      opt->add_result(json_to_arg(value));
    }
    opt->run_callback();
  }
}

int default_workers() {
  if (const char* env = std::getenv("TORICLAB_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring TORICLAB_WORKERS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  o.workers = default_workers();
  CLI::App app{"toriclab: toric Kähler geodesic rays, signature islands and monomial-section norms"};
  app.require_subcommand(1);

  auto shared = [&](CLI::App* c) {
    c->add_option("--scenario", o.scenario, "polytope preset or JSON file (polytope or potential bundle)");
    c->add_option("--psi", o.psi, "ray direction: preset name (zero, quad-iso, paper53, osc55) or JSON file");
    c->add_option("--out", o.out, "write the JSON report here instead of stdout");
    c->add_option("--config", o.config, "JSON file with option values; command-line flags take precedence");
    c->add_option("--workers", o.workers, "worker threads for grid and quadrature passes")
        ->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "seed for random sample placement");
  };
  auto numerics = [&](CLI::App* c) {
    c->add_option("--s", o.s, "s value, list a,b,c or range a..b[:count]")->allow_extra_args(false);
    c->add_option("--res", o.res, "grid cells per axis");
    c->add_option("--margin", o.margin, "minimum distance of sampled cells to the boundary");
    c->add_option("--tau", o.tau, "relative eigenvalue band counted as singular");
    c->add_option("--tol", o.tol, "bisection tolerance");
    c->add_option("--csv", o.csv, "CSV output path");
    c->add_option("--x", o.x, "point (comma separated)");
  };
  auto quadrature = [&](CLI::App* c) {
    c->add_option("--quad-tol", o.quad_tol, "quadrature relative tolerance");
    c->add_option("--base-res", o.base_res, "quadrature cells per axis at the first level");
    c->add_option("--max-levels", o.max_levels, "quadrature refinement levels");
  };

  std::vector<std::pair<CLI::App*, std::function<int()>>> handlers;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, std::function<int()> fn) {
    CLI::App* c = parent->add_subcommand(name, help);
    c->fallthrough();
    handlers.emplace_back(c, std::move(fn));
    return c;
  };

  CLI::App* poly = app.add_subcommand("polytope", "vertices, Delzant and half-integrality verdicts, lattice points");
  shared(poly);
  handlers.emplace_back(poly, [&] { return cmd_polytope(o); });

  CLI::App* isl = app.add_subcommand("islands", "Hessian signature islands of g + s psi (default: map)");
  shared(isl);
  numerics(isl);
  isl->require_subcommand(0, 1);
  leaf(isl, "map", "island map at one s", [&] { return cmd_islands_map(o); });
  leaf(isl, "lifespan", "convex lifespan and negative onset", [&] { return cmd_islands_lifespan(o); });
  leaf(isl, "track", "nesting of negative-definite sets along decreasing s", [&] { return cmd_islands_track(o); });
  leaf(isl, "boundaries", "axis roots of the Hessian diagonal", [&] { return cmd_islands_boundaries(o); });

  CLI::App* sec = app.add_subcommand("sections", "monomial section norms and asymptotics");
  shared(sec);
  numerics(sec);
  quadrature(sec);
  sec->add_option("--m", o.m, "lattice label(s): integers, chunked by dimension");
  sec->add_option("--conv", o.conv, "norm convention: plain or halfform");
  sec->add_option("--K", o.k, "box K as lo1,hi1[,lo2,hi2...]");
  sec->add_option("--K-outer", o.k_outer, "box K' containing K (suppression)");
  sec->add_option("--eps", o.eps, "concentration half-width");
  sec->add_flag("--allow-any", o.allow_any, "allow norm commands on polytopes that are not half-integral");
  sec->add_option("--directions", o.directions, "random ray directions for the monotonicity check");
  sec->require_subcommand(1);
  leaf(sec, "norm", "L2 norms", [&] { return cmd_sections_norm(o); });
  leaf(sec, "ratio", "norm / e^{g_s(m)} across labels and s", [&] { return cmd_sections_ratio(o); });
  leaf(sec, "concentration", "mass fraction near m", [&] { return cmd_sections_concentration(o); });
  leaf(sec, "laplace", "Laplace exponent fit of the restricted norm", [&] { return cmd_sections_laplace(o); });
  leaf(sec, "suppression", "restricted / total norm along s", [&] { return cmd_sections_suppression(o); });
  leaf(sec, "monotone", "monotonicity of |sigma|^2 along rays in negative islands",
       [&] { return cmd_sections_monotone(o); });
  leaf(sec, "dim", "number of lattice points", [&] { return cmd_sections_dim(o); });
  leaf(sec, "sweep", "CSV sweep of norm, ratio and concentration", [&] { return cmd_sections_sweep(o); });

  CLI::App* flows = app.add_subcommand("flows", "complex-time flow identities");
  shared(flows);
  numerics(flows);
  flows->add_option("--m", o.m, "lattice label");
  flows->add_option("--samples", o.samples, "random samples for verify");
  flows->add_option("--beta", o.beta, "cone weights (one value is broadcast to every facet)");
  flows->add_option("--theta", o.theta, "angles (comma separated)");
  flows->add_option("--K", o.order, "character series order");
  flows->add_option("--order", o.lie_order, "Lie series order");
  flows->require_subcommand(1);
  leaf(flows, "verify", "all identities on random samples", [&] { return cmd_flows_verify(o); });
  leaf(flows, "cone", "cone-angle rescaling", [&] { return cmd_flows_cone(o); });
  leaf(flows, "character", "character series truncation", [&] { return cmd_flows_character(o); });
  leaf(flows, "lie", "Lie series of the holomorphic coordinates", [&] { return cmd_flows_lie(o); });
  leaf(flows, "prequantum", "prequantum evolution identity", [&] { return cmd_flows_prequantum(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kPrecondition;
  }

  // deepest selected subcommand
  std::vector<CLI::App*> chain{&app};
  while (true) {
    const auto subs = chain.back()->get_subcommands();
    if (subs.empty()) break;
    chain.push_back(subs.front());
  }
  CLI::App* active = chain.back();
  if (active == isl) active = isl->get_subcommand("map");

  try {
    if (!o.config.empty()) apply_config(o.config, chain);
    if (o.workers < 1) throw tl::PreconditionError("--workers must be >= 1");
    check_tolerance(o.tau, "--tau");
    check_tolerance(o.tol, "--tol");
    for (const auto& [cmd, fn] : handlers)
      if (cmd == active) return fn();
    throw tl::InvalidArgument("no command selected");
  } catch (const tl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kVerification;
  } catch (const tl::ConvergenceError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kVerification;
  } catch (const tl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPrecondition;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad numeric value (" << e.what() << ")\n";
    return kPrecondition;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: value out of range (" << e.what() << ")\n";
    return kPrecondition;
  }
}

#pragma once

// JSON and CSV exchange formats. Requires the single-header nlohmann json.hpp
// on the include path.
//
//   polytope    {"dim": n, "facets": [{"normal": [..], "lambda": "p/q"}, ..]}
//   correction  {"kind": "polynomial", "terms": [{"exps": [..], "coef": c}, ..]}
//               {"kind": "oscillatory1d", "center": c}
//   potential   {"polytope": <polytope or preset name>, "beta": [..],
//                "phi": <correction>, "psi": <correction or preset name>, "s": s}

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "toriclab/errors.hpp"
#include "toriclab/islands.hpp"
#include "toriclab/polytope.hpp"
#include "toriclab/potential.hpp"
#include "toriclab/quantization.hpp"

namespace toriclab {

using Json = nlohmann::ordered_json;

/// Malformed JSON documents or files that cannot be read.
class IoError : public Error {
 public:
  using Error::Error;
};

inline Json to_json(const Polytope& p) {
  Json facets = Json::array();
  for (const auto& f : p.facets()) facets.push_back({{"normal", f.normal}, {"lambda", to_string(f.offset)}});
  return {{"dim", p.dim()}, {"facets", facets}};
}

inline Polytope polytope_from_json(const Json& j) {
  try {
    const int n = j.at("dim").get<int>();
    std::vector<Facet> facets;
    for (const auto& f : j.at("facets")) {
      Facet fc;
      fc.normal = f.at("normal").get<IntVector>();
      const auto& lam = f.at("lambda");
      fc.offset = lam.is_string() ? parse_rational(lam.get<std::string>()) : Rational(lam.get<std::int64_t>());
      facets.push_back(std::move(fc));
    }
    return Polytope(n, std::move(facets));
  } catch (const Json::exception& e) {
    throw IoError(std::string("polytope JSON: ") + e.what());
  }
}

inline Json to_json(const Correction& c) {
  if (c.kind() == Correction::Kind::oscillatory1d) {
    Json j = {{"kind", "oscillatory1d"}, {"center", c.center()}};
    if (c.base() != 2.0) j["base"] = c.base();
    if (c.scale() != 1.0) j["scale"] = c.scale();
    return j;
  }
  Json terms = Json::array();
  for (const auto& t : c.terms()) terms.push_back({{"exps", t.exps}, {"coef", t.coef * c.scale()}});
  return {{"kind", "polynomial"}, {"terms", terms}};
}

inline Correction correction_from_json(const Json& j, int dim) {
  try {
    if (j.is_string()) return preset_correction(j.get<std::string>(), dim);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "polynomial") {
      std::vector<MonomialTerm> terms;
      for (const auto& t : j.at("terms")) {
        MonomialTerm mt{t.at("exps").get<std::vector<int>>(), t.at("coef").get<double>()};
        if (mt.exps.size() != static_cast<std::size_t>(dim))
          throw InvalidArgument("correction term has " + std::to_string(mt.exps.size()) + " exponents, expected " +
                                std::to_string(dim));
        for (int e : mt.exps)
          if (e < 0) throw InvalidArgument("negative exponent in correction term");
        terms.push_back(std::move(mt));
      }
      return Correction::polynomial(std::move(terms));
    }
    if (kind == "oscillatory1d") {
      if (dim != 1) throw InvalidArgument("oscillatory1d correction needs dim 1");
      Correction c = Correction::oscillatory1d(j.at("center").get<double>(), j.value("base", 2.0));
      return j.contains("scale") ? c.scaled(j.at("scale").get<double>()) : c;
    }
    throw InvalidArgument("unknown correction kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw IoError(std::string("correction JSON: ") + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

/// A preset name, or a path to a JSON file holding a polytope or a
/// potential bundle (whose "polytope" member is used).
inline Polytope load_polytope(const std::string& scenario) {
  for (const auto& name : polytope_preset_names())
    if (name == scenario) return preset_polytope(scenario);
  const Json j = read_json_file(scenario);
  if (j.contains("polytope")) {
    const auto& p = j.at("polytope");
    return p.is_string() ? preset_polytope(p.get<std::string>()) : polytope_from_json(p);
  }
  return polytope_from_json(j);
}

struct PotentialBundle {
  std::shared_ptr<const Polytope> polytope;
  ConeWeights beta;
  Correction phi;
  Correction psi;
  double s = 0.0;

  SymplecticPotential potential() const { return SymplecticPotential(polytope, beta, phi, psi, s); }
  GeodesicRay ray() const { return GeodesicRay(polytope, psi, phi, beta); }
};

inline PotentialBundle bundle_from_json(const Json& j) {
  PotentialBundle b;
  try {
    const auto& pj = j.at("polytope");
    b.polytope = std::make_shared<const Polytope>(pj.is_string() ? load_polytope(pj.get<std::string>())
                                                                 : polytope_from_json(pj));
    const int n = b.polytope->dim();
    if (j.contains("beta")) b.beta = ConeWeights(j.at("beta").get<std::vector<double>>());
    if (j.contains("phi")) b.phi = correction_from_json(j.at("phi"), n);
    if (j.contains("psi")) b.psi = correction_from_json(j.at("psi"), n);
    b.s = j.value("s", 0.0);
  } catch (const Json::exception& e) {
    throw IoError(std::string("potential JSON: ") + e.what());
  }
  return b;
}

inline Json to_json(const PotentialBundle& b) {
  Json j = {{"polytope", to_json(*b.polytope)}};
  if (!b.beta.empty()) j["beta"] = b.beta.values();
  j["phi"] = to_json(b.phi);
  j["psi"] = to_json(b.psi);
  j["s"] = b.s;
  return j;
}

inline Json to_json(const LifespanReport& r) {
  return {{"s_cvx", r.s_cvx},           {"s_neg", r.s_neg},         {"resolution", r.resolution},
          {"tol", r.tol},               {"margin", r.margin},       {"cvx_capped", r.cvx_capped},
          {"neg_capped", r.neg_capped}};
}

inline Json box_json(const Box& b) {
  Json j = Json::array();
  for (int i = 0; i < b.dim(); ++i) j.push_back({b.lo[i], b.hi[i]});
  return j;
}

inline Json to_json(const LaplaceFit& f) {
  return {{"m", f.m},
          {"K", box_json(f.k)},
          {"s", f.s_list},
          {"log_norms", f.log_norms},
          {"x0", std::vector<double>(f.phi.x0.data(), f.phi.x0.data() + f.phi.x0.size())},
          {"phi_x0", f.phi.value},
          {"target", f.target},
          {"prefactor_exponent", f.prefactor_exponent},
          {"slopes", {{"geometric", f.slope}, {"n_plus_half", f.slope_n_plus_half}}},
          {"slope", f.slope},
          {"rel_err", f.rel_err},
          {"rel_err_n_plus_half", f.rel_err_n_plus_half},
          {"intercept_drift", f.intercept_drift}};
}

struct SweepRow {
  IntVector m;
  double s = 0.0;
  double norm_sq = 0.0;
  double ratio = 0.0;
  double concentration = 0.0;
};

inline std::string format_label(const IntVector& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) out += (i ? " " : "") + std::to_string(m[i]);
  return out;
}

/// CSV columns m, s, norm_sq, ratio, concentration (m space-separated).
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << std::setprecision(17);
  os << "m,s,norm_sq,ratio,concentration\n";
  for (const auto& r : rows)
    os << format_label(r.m) << "," << r.s << "," << r.norm_sq << "," << r.ratio << "," << r.concentration << "\n";
}

}  // namespace toriclab

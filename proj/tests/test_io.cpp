#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "toriclab/json_io.hpp"

using namespace toriclab;

namespace {

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("toriclab_io_" + name);
  std::ofstream(path) << contents;
  return path.string();
}

void expect_same_correction(const Correction& a, const Correction& b, const std::vector<Eigen::VectorXd>& pts) {
  for (const auto& x : pts) {
    EXPECT_NEAR(a.value(x), b.value(x), 1e-14 * (1 + std::abs(a.value(x))));
    EXPECT_LE((a.hessian(x) - b.hessian(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace

TEST(PolytopeJson, RoundTripKeepsExactOffsets) {
  for (const auto& name : polytope_preset_names()) {
    const Polytope p = preset_polytope(name);
    const Polytope q = polytope_from_json(Json::parse(to_json(p).dump()));
    ASSERT_EQ(q.dim(), p.dim()) << name;
    ASSERT_EQ(q.num_facets(), p.num_facets()) << name;
    for (std::size_t i = 0; i < p.num_facets(); ++i) {
      EXPECT_EQ(q.facets()[i].normal, p.facets()[i].normal) << name;
      EXPECT_TRUE(q.facets()[i].offset == p.facets()[i].offset) << name;
    }
    EXPECT_EQ(q.lattice_points(false), p.lattice_points(false)) << name;
  }
}

TEST(PolytopeJson, OffsetsAsStringsOrIntegers) {
  const Json j = Json::parse(R"({"dim":1,"facets":[{"normal":[1],"lambda":"3/2"},{"normal":[-1],"lambda":1}]})");
  const Polytope p = polytope_from_json(j);
  EXPECT_TRUE(p.facets()[0].offset == Rational(3, 2));
  EXPECT_TRUE(p.facets()[1].offset == Rational(1));
  EXPECT_EQ(to_json(p)["facets"][0]["lambda"], "3/2");
}

TEST(PolytopeJson, MissingFieldsAreIoErrors) {
  EXPECT_THROW(polytope_from_json(Json::parse(R"({"facets":[]})")), IoError);
  EXPECT_THROW(polytope_from_json(Json::parse(R"({"dim":1,"facets":[{"normal":[1]}]})")), IoError);
}

TEST(PolytopeJson, UnboundedIsInvalidPolytope) {
  const Json j = Json::parse(R"({"dim":1,"facets":[{"normal":[1],"lambda":"1/2"}]})");
  EXPECT_THROW(polytope_from_json(j), InvalidPolytope);
}

TEST(CorrectionJson, PolynomialRoundTrip) {
  const Correction c = preset_correction("paper53", 2).scaled(-1.5);
  const Correction d = correction_from_json(Json::parse(to_json(c).dump()), 2);
  Eigen::VectorXd a(2), b(2);
  a << 0.2, 0.7;
  b << -0.4, 1.3;
  expect_same_correction(c, d, {a, b});
}

TEST(CorrectionJson, OscillatoryRoundTrip) {
  const Correction c = Correction::oscillatory1d(0.5, 3.0).scaled(0.25);
  const Json j = to_json(c);
  EXPECT_EQ(j["kind"], "oscillatory1d");
  const Correction d = correction_from_json(j, 1);
  std::vector<Eigen::VectorXd> pts;
  for (double x : {0.1, 0.37, 0.52, 0.9}) pts.push_back(Eigen::VectorXd::Constant(1, x));
  expect_same_correction(c, d, pts);
}

TEST(CorrectionJson, PresetNameString) {
  const Correction d = correction_from_json(Json("quad-iso"), 3);
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, -1.0;
  EXPECT_DOUBLE_EQ(d.value(x), 3.0);
}

TEST(CorrectionJson, BadTermsAreRejected) {
  EXPECT_THROW(correction_from_json(Json::parse(R"({"kind":"polynomial","terms":[{"exps":[2],"coef":1}]})"), 2),
               InvalidArgument);
  EXPECT_THROW(correction_from_json(Json::parse(R"({"kind":"polynomial","terms":[{"exps":[-1],"coef":1}]})"), 1),
               InvalidArgument);
  EXPECT_THROW(correction_from_json(Json::parse(R"({"kind":"oscillatory1d","center":0.5})"), 2), InvalidArgument);
  EXPECT_THROW(correction_from_json(Json::parse(R"({"kind":"spline"})"), 1), InvalidArgument);
  EXPECT_THROW(correction_from_json(Json::parse(R"({"kind":"polynomial","terms":[{"exps":[1]}]})"), 1), IoError);
}

TEST(BundleJson, RoundTrip) {
  const Json j = Json::parse(R"({"polytope":"cp1-half","beta":[0.5,0.25],"psi":"quad-iso",
                                 "phi":{"kind":"polynomial","terms":[{"exps":[1],"coef":0.1}]},"s":-2})");
  const PotentialBundle b = bundle_from_json(j);
  EXPECT_EQ(b.polytope->dim(), 1);
  EXPECT_DOUBLE_EQ(b.s, -2.0);
  const PotentialBundle c = bundle_from_json(Json::parse(to_json(b).dump()));
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.13);
  EXPECT_NEAR(c.potential().value(x), b.potential().value(x), 1e-14);
  EXPECT_NEAR(c.potential().gradient(x)[0], b.potential().gradient(x)[0], 1e-13);
}

TEST(BundleJson, MissingPolytopeIsIoError) {
  EXPECT_THROW(bundle_from_json(Json::parse(R"({"psi":"quad-iso"})")), IoError);
}

TEST(Files, MissingAndMalformed) {
  EXPECT_THROW(read_json_file("/nonexistent/toriclab.json"), IoError);
  EXPECT_THROW(read_json_file(temp_file("bad.json", "{\"dim\": ")), IoError);
}

TEST(Files, LoadPolytopeFromPresetFileAndBundle) {
  EXPECT_EQ(load_polytope("cp1xcp1-unit").lattice_points(false).size(), 4u);
  const auto poly = temp_file("poly.json", to_json(preset_polytope("simplex2")).dump());
  EXPECT_EQ(load_polytope(poly).lattice_points(false), preset_polytope("simplex2").lattice_points(false));
  const auto bundle = temp_file("bundle.json", R"({"polytope":"cp1-wide","psi":"quad-iso"})");
  EXPECT_EQ(load_polytope(bundle).lattice_points(true).size(), 3u);
  EXPECT_THROW(load_polytope("not-a-preset-or-file"), IoError);
}

TEST(Csv, SweepLayout) {
  std::ostringstream os;
  write_sweep_csv(os, {{{0, -1}, 2.0, 1.5, 0.75, 0.99}, {{1, 1}, -3.0, 2.5, 0.5, 0.9}});
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "m,s,norm_sq,ratio,concentration");
  std::getline(in, line);
  EXPECT_EQ(line, "0 -1,2,1.5,0.75,0.98999999999999999");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 7), "1 1,-3,");
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Reports, LifespanKeys) {
  LifespanReport r;
  r.s_cvx = 1.0;
  r.s_neg = 2.0;
  r.resolution = 200;
  const Json j = to_json(r);
  for (const char* k : {"s_cvx", "s_neg", "resolution", "tol", "margin", "cvx_capped", "neg_capped"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_DOUBLE_EQ(j["s_neg"].get<double>(), 2.0);
}

TEST(Reports, LaplaceKeysAndBox) {
  LaplaceFit f;
  f.m = {0};
  f.k = Box{Eigen::VectorXd::Constant(1, -0.3), Eigen::VectorXd::Constant(1, 0.3)};
  f.phi.x0 = Eigen::VectorXd::Constant(1, 0.3);
  f.slope = 0.09;
  f.slope_n_plus_half = 0.094;
  const Json j = to_json(f);
  EXPECT_EQ(j["K"].dump(), "[[-0.3,0.3]]");
  EXPECT_DOUBLE_EQ(j["slopes"]["geometric"].get<double>(), 0.09);
  EXPECT_DOUBLE_EQ(j["slopes"]["n_plus_half"].get<double>(), 0.094);
  for (const char* k : {"m", "s", "log_norms", "x0", "phi_x0", "target", "rel_err", "intercept_drift"})
    EXPECT_TRUE(j.contains(k)) << k;
}

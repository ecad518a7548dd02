#include <gtest/gtest.h>

#include "oracles.hpp"
#include "toriclab/polytope.hpp"

using namespace toriclab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

}  // namespace

TEST(Polytope, EllEvaluatesAffineFacets) {
  const auto cp1 = preset_polytope("cp1-half");
  EXPECT_DOUBLE_EQ(cp1.ell(0, vec({0.0})), 0.5);
  EXPECT_DOUBLE_EQ(cp1.ell(1, vec({0.5})), 0.0);

  const auto box = preset_polytope("cp1xcp1-unit");
  // facet 0 is ν=(1,0), λ=0
  EXPECT_EQ(box.facet(0).normal, (IntVector{1, 0}));
  EXPECT_EQ(box.facet(0).offset, Rational(0));
  EXPECT_DOUBLE_EQ(box.ell(0, vec({0.3, 0.9})), 0.3);
}

TEST(Polytope, EllRejectsBadIndexAndDimension) {
  const auto cp1 = preset_polytope("cp1-half");
  EXPECT_THROW(cp1.ell(2, vec({0.0})), InvalidArgument);
  EXPECT_THROW(cp1.ell(0, vec({0.0, 1.0})), InvalidArgument);
}

TEST(Polytope, VerticesOfPresets) {
  const auto cp1 = preset_polytope("cp1-half");
  const auto& v = cp1.vertices();
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].exact[0], Rational(-1, 2));
  EXPECT_EQ(v[0].active, (std::vector<std::size_t>{0}));
  EXPECT_EQ(v[1].exact[0], Rational(1, 2));
  EXPECT_EQ(v[1].active, (std::vector<std::size_t>{1}));

  const auto box = preset_polytope("cp1xcp1-unit");
  ASSERT_EQ(box.vertices().size(), 4u);
  std::vector<RationalVector> expect = {{Rational(0), Rational(0)},
                                        {Rational(0), Rational(1)},
                                        {Rational(1), Rational(0)},
                                        {Rational(1), Rational(1)}};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(box.vertices()[i].exact, expect[i]);

  EXPECT_EQ(preset_polytope("simplex2").vertices().size(), 3u);
  EXPECT_EQ(preset_polytope("cp1-unit").lattice_points(false), (std::vector<IntVector>{{0}, {1}}));
}

TEST(Polytope, VertexInvariantsHoldExactly) {
  for (const auto& name : polytope_preset_names()) {
    const auto p = preset_polytope(name);
    for (const auto& v : p.vertices()) {
      EXPECT_EQ(v.active.size(), static_cast<std::size_t>(p.dim())) << name;
      for (std::size_t j = 0; j < p.num_facets(); ++j) {
        const Rational l = p.ell_exact(j, v.exact);
        const bool active = std::find(v.active.begin(), v.active.end(), j) != v.active.end();
        if (active)
          EXPECT_EQ(l, Rational(0)) << name;
        else
          EXPECT_GT(l, Rational(0)) << name;
      }
    }
  }
}

TEST(Polytope, DelzantCheck) {
  EXPECT_TRUE(preset_polytope("cp1xcp1-unit").is_delzant().ok);
  EXPECT_TRUE(preset_polytope("cp1-half").is_delzant().ok);
  EXPECT_TRUE(preset_polytope("simplex2-half").is_delzant().ok);

  // normals (1,0),(0,1),(-1,-2): determinant at the vertex of facets 0 and 2
  // is det[[1,0],[-1,-2]] = -2.
  const Polytope bad(2, {{{1, 0}, Rational(0)}, {{0, 1}, Rational(0)}, {{-1, -2}, Rational(2)}});
  const auto rep = bad.is_delzant();
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_EQ(rep.failures[0].active, (std::vector<std::size_t>{0, 2}));
}

TEST(Polytope, NonSimpleVertexIsReported) {
  // square pyramid-like 2d degeneracy: an extra facet through a vertex
  const Polytope p(2, {{{1, 0}, Rational(0)},
                       {{0, 1}, Rational(0)},
                       {{-1, 0}, Rational(1)},
                       {{0, -1}, Rational(1)},
                       {{-1, -1}, Rational(2)}});
  EXPECT_THROW(p.vertices(), InvalidPolytope);
  EXPECT_FALSE(p.is_delzant().ok);
}

TEST(Polytope, HalfIntegrality) {
  EXPECT_TRUE(preset_polytope("cp1-half").is_half_integral());
  EXPECT_FALSE(preset_polytope("cp1xcp1-unit").is_half_integral());
  EXPECT_TRUE(preset_polytope("cp1-wide").is_half_integral());
  EXPECT_FALSE(preset_polytope("simplex2").is_half_integral());
  EXPECT_TRUE(preset_polytope("simplex2-half").is_half_integral());
}

TEST(Polytope, LatticePointsOfPresets) {
  EXPECT_EQ(preset_polytope("cp1-half").lattice_points(false), (std::vector<IntVector>{{0}}));
  EXPECT_EQ(preset_polytope("cp1-wide").lattice_points(false), (std::vector<IntVector>{{-1}, {0}, {1}}));
  EXPECT_EQ(preset_polytope("cp1xcp1-unit").lattice_points(false),
            (std::vector<IntVector>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
  EXPECT_TRUE(preset_polytope("cp1xcp1-unit").lattice_points(true).empty());
}

TEST(Polytope, LatticeEnumerationMatchesBruteForce) {
  for (const auto& name : polytope_preset_names()) {
    const auto p = preset_polytope(name);
    for (bool interior : {false, true}) {
      const auto fast = p.lattice_points(interior);
      const auto slow = oracle::brute_force_lattice(p.normals(), p.offsets(), interior);
      EXPECT_EQ(fast, slow) << name << " interior=" << interior;
    }
    if (p.is_half_integral()) {
      EXPECT_EQ(p.lattice_points(true), p.lattice_points(false)) << name;
    }
  }
}

TEST(Polytope, ConstructionRejectsBadInput) {
  EXPECT_THROW(Polytope(1, {{{2}, Rational(1)}, {{-1}, Rational(1)}}), InvalidPolytope);  // not primitive
  EXPECT_THROW(Polytope(1, {{{0}, Rational(1)}, {{-1}, Rational(1)}}), InvalidPolytope);  // zero normal
  EXPECT_THROW(Polytope(2, {{{1, 0}, Rational(0)}, {{0, 1}, Rational(0)}, {{1, 1}, Rational(0)}}),
               InvalidPolytope);  // unbounded quadrant
  EXPECT_THROW(Polytope(1, {{{1}, Rational(0)}, {{-1}, Rational(0)}}), InvalidPolytope);  // a point
  EXPECT_THROW(Polytope(1, {{{1}, Rational(-1)}, {{-1}, Rational(0)}}), InvalidPolytope);  // empty
  EXPECT_THROW(Polytope(2, {{{1, 0}, Rational(0)}, {{-1, 0}, Rational(1)}, {{0, 1}, Rational(0)}}),
               InvalidPolytope);  // strip, unbounded in y
}

TEST(Polytope, RationalParsing) {
  EXPECT_EQ(parse_rational("1/2"), Rational(1, 2));
  EXPECT_EQ(parse_rational("-3/2"), Rational(-3, 2));
  EXPECT_EQ(parse_rational("4"), Rational(4));
  EXPECT_EQ(parse_rational(" 6/4 "), Rational(3, 2));
  EXPECT_THROW(parse_rational("1/0"), InvalidArgument);
  EXPECT_THROW(parse_rational("0.5"), InvalidArgument);
  EXPECT_THROW(parse_rational(""), InvalidArgument);
}

TEST(Polytope, CenterAndBoundingBox) {
  const auto s = preset_polytope("simplex2");
  EXPECT_NEAR(s.center()[0], 1.0 / 3.0, 1e-15);
  EXPECT_TRUE(s.in_interior(s.center()));
  const auto bb = s.bounding_box();
  EXPECT_DOUBLE_EQ(bb.hi[0], 1.0);
  EXPECT_DOUBLE_EQ(bb.lo[1], 0.0);
}

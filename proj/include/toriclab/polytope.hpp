#pragma once

// Delzant polytopes in H-representation P = { x : ℓ_j(x) = ν_j·x + λ_j >= 0 }.
//
// Facet data is exact (integer normals, rational offsets) and every
// combinatorial predicate (vertex solving, containment of lattice points,
// unimodularity) runs in exact rational arithmetic. Floating point is only
// used by the numerical consumers through ell()/ells().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include "toriclab/errors.hpp"
#include "toriclab/grid.hpp"

namespace toriclab {

using Rational = boost::rational<std::int64_t>;
using IntVector = std::vector<std::int64_t>;
using RationalVector = std::vector<Rational>;

// Mixed int/rational comparisons recurse under C++20 rewritten operators in
// some boost versions, so compare against a Rational constant.
inline const Rational kZero(0);

inline double to_double(const Rational& q) {
  return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

inline std::string to_string(const Rational& q) {
  std::ostringstream os;
  os << q.numerator();
  if (q.denominator() != 1) os << '/' << q.denominator();
  return os.str();
}

/// Parses "p", "-p", "p/q". Throws InvalidArgument on anything else.
inline Rational parse_rational(std::string_view text) {
  auto parse_int = [&](std::string_view s) -> std::int64_t {
    if (s.empty()) throw InvalidArgument("empty integer in rational '" + std::string(text) + "'");
    std::size_t pos = 0;
    bool neg = false;
    if (s[0] == '+' || s[0] == '-') {
      neg = s[0] == '-';
      pos = 1;
    }
    if (pos == s.size()) throw InvalidArgument("bad rational '" + std::string(text) + "'");
    std::int64_t v = 0;
    for (; pos < s.size(); ++pos) {
      if (s[pos] < '0' || s[pos] > '9')
        throw InvalidArgument("bad rational '" + std::string(text) + "'");
      v = v * 10 + (s[pos] - '0');
    }
    return neg ? -v : v;
  };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  const auto den = parse_int(text.substr(slash + 1));
  if (den == 0) throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
  return Rational(parse_int(text.substr(0, slash)), den);
}

struct Facet {
  IntVector normal;  // primitive inward normal ν_j
  Rational offset;   // λ_j
};

struct Vertex {
  RationalVector exact;
  Eigen::VectorXd point;
  std::vector<std::size_t> active;  // facets with ℓ_j(v) = 0, ascending
};

struct DelzantFailure {
  Eigen::VectorXd point;
  std::vector<std::size_t> active;
  std::string reason;
};

struct DelzantReport {
  bool ok = true;
  std::vector<DelzantFailure> failures;
};

namespace detail {

inline std::int64_t gcd_of(const IntVector& v) {
  std::int64_t g = 0;
  for (auto a : v) g = std::gcd(g, a < 0 ? -a : a);
  return g;
}

/// Solves A x = b exactly; nullopt when A is singular.
inline std::optional<RationalVector> solve_exact(std::vector<RationalVector> a, RationalVector b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && a[piv][col] == kZero) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t row = 0; row < n; ++row) {
      if (row == col || a[row][col] == kZero) continue;
      const Rational f = a[row][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
      b[row] -= f * b[col];
    }
  }
  RationalVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

/// Exact determinant of a square integer matrix (rows given).
inline Rational det_exact(const std::vector<IntVector>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) return Rational(1);
  std::vector<RationalVector> a(n, RationalVector(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = Rational(rows[i][j]);
  Rational det(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && a[piv][col] == kZero) ++piv;
    if (piv == n) return Rational(0);
    if (piv != col) {
      std::swap(a[piv], a[col]);
      det = -det;
    }
    det *= a[col][col];
    for (std::size_t row = col + 1; row < n; ++row) {
      if (a[row][col] == kZero) continue;
      const Rational f = a[row][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
    }
  }
  return det;
}

inline std::size_t rank_exact(const std::vector<IntVector>& rows, std::size_t ncols) {
  std::vector<RationalVector> a;
  for (const auto& r : rows) {
    RationalVector q(ncols);
    for (std::size_t j = 0; j < ncols; ++j) q[j] = Rational(r[j]);
    a.push_back(std::move(q));
  }
  std::size_t rank = 0;
  for (std::size_t col = 0; col < ncols && rank < a.size(); ++col) {
    std::size_t piv = rank;
    while (piv < a.size() && a[piv][col] == kZero) ++piv;
    if (piv == a.size()) continue;
    std::swap(a[piv], a[rank]);
    for (std::size_t row = 0; row < a.size(); ++row) {
      if (row == rank || a[row][col] == kZero) continue;
      const Rational f = a[row][col] / a[rank][col];
      for (std::size_t k = col; k < ncols; ++k) a[row][k] -= f * a[rank][k];
    }
    ++rank;
  }
  return rank;
}

/// Generalized cross product: a vector orthogonal to n-1 rows in Z^n.
inline IntVector cofactor_null_vector(const std::vector<IntVector>& rows, std::size_t n) {
  IntVector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<IntVector> minor;
    for (const auto& r : rows) {
      IntVector m;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) m.push_back(r[j]);
      minor.push_back(std::move(m));
    }
    const Rational det = det_exact(minor);
    const std::int64_t v = det.numerator();  // integer matrix: denominator 1
    d[i] = (i % 2 == 0) ? v : -v;
  }
  return d;
}

template <typename F>
void for_each_subset(std::size_t r, std::size_t k, F&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k > r) return;
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == r - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

/// Immutable Delzant-candidate polytope. Construction verifies facet
/// primitivity, boundedness and nonempty interior; the Delzant condition
/// itself is reported by is_delzant() so that non-Delzant inputs can be
/// diagnosed rather than rejected.
class Polytope {
 public:
  Polytope(int dim, std::vector<Facet> facets) : dim_(dim), facets_(std::move(facets)) {
    validate_facets();
    build_numeric();
    enumerate_vertices();
    check_bounded();
    check_interior();
  }

  int dim() const { return dim_; }
  std::size_t num_facets() const { return facets_.size(); }
  const std::vector<Facet>& facets() const { return facets_; }

  const Facet& facet(std::size_t j) const {
    if (j >= facets_.size())
      throw InvalidArgument("facet index " + std::to_string(j) + " out of range [0," +
                            std::to_string(facets_.size()) + ")");
    return facets_[j];
  }

  /// Normal matrix (r×n) and offsets in floating point.
  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

  /// ℓ_j(x) = ν_j·x + λ_j, facets indexed from 0.
  double ell(std::size_t j, const Eigen::VectorXd& x) const {
    facet(j);
    check_dim(x);
    return normals_.row(static_cast<Eigen::Index>(j)).dot(x) + offsets_[static_cast<Eigen::Index>(j)];
  }

  /// All facet values at x.
  Eigen::VectorXd ells(const Eigen::VectorXd& x) const {
    check_dim(x);
    return normals_ * x + offsets_;
  }

  Rational ell_exact(std::size_t j, const RationalVector& x) const {
    const auto& f = facet(j);
    if (x.size() != static_cast<std::size_t>(dim_)) throw InvalidArgument("dimension mismatch");
    Rational v = f.offset;
    for (std::size_t i = 0; i < x.size(); ++i) v += Rational(f.normal[i]) * x[i];
    return v;
  }

  Rational ell_exact(std::size_t j, const IntVector& m) const {
    RationalVector q(m.begin(), m.end());
    return ell_exact(j, q);
  }

  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const {
    return (ells(x).array() >= -slack).all();
  }

  bool in_interior(const Eigen::VectorXd& x) const { return (ells(x).array() > 0.0).all(); }

  bool contains_exact(const IntVector& m, bool strict) const {
    for (std::size_t j = 0; j < facets_.size(); ++j) {
      const Rational v = ell_exact(j, m);
      if (strict ? v <= kZero : v < kZero) return false;
    }
    return true;
  }

  /// Euclidean distance from an interior point to the nearest facet hyperplane.
  double boundary_distance(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd l = ells(x);
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < l.size(); ++j) d = std::min(d, l[j] / normals_.row(j).norm());
    return d;
  }

  /// Vertices with their active facets. Throws InvalidPolytope when some
  /// vertex is not simple (more than n active facets).
  const std::vector<Vertex>& vertices() const {
    for (const auto& v : raw_vertices_) {
      if (v.active.size() != static_cast<std::size_t>(dim_)) {
        std::ostringstream os;
        os << "degenerate vertex: facets {";
        for (std::size_t i = 0; i < v.active.size(); ++i) os << (i ? "," : "") << v.active[i];
        os << "} meet at one point";
        throw InvalidPolytope(os.str());
      }
    }
    return raw_vertices_;
  }

  /// Vertex enumeration without the simplicity check.
  const std::vector<Vertex>& raw_vertices() const { return raw_vertices_; }

  /// Vertex centroid; an interior point.
  const Eigen::VectorXd& center() const { return center_; }

  Box bounding_box() const { return bbox_; }

  DelzantReport is_delzant() const {
    DelzantReport rep;
    for (const auto& v : raw_vertices_) {
      if (v.active.size() != static_cast<std::size_t>(dim_)) {
        rep.ok = false;
        rep.failures.push_back({v.point, v.active, "vertex is not simple"});
        continue;
      }
      std::vector<IntVector> rows;
      for (auto j : v.active) rows.push_back(facets_[j].normal);
      const Rational det = detail::det_exact(rows);
      if (det != Rational(1) && det != Rational(-1)) {
        rep.ok = false;
        rep.failures.push_back({v.point, v.active, "normal determinant " + to_string(det)});
      }
    }
    return rep;
  }

  bool is_half_integral() const {
    return std::all_of(facets_.begin(), facets_.end(),
                       [](const Facet& f) { return f.offset.denominator() == 2; });
  }

  /// Z^n ∩ P (or ∩ interior), lexicographically sorted.
  std::vector<IntVector> lattice_points(bool interior_only) const {
    IntVector lo(static_cast<std::size_t>(dim_)), hi(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; ++i) {
      Rational mn = raw_vertices_.front().exact[static_cast<std::size_t>(i)], mx = mn;
      for (const auto& v : raw_vertices_) {
        mn = std::min(mn, v.exact[static_cast<std::size_t>(i)]);
        mx = std::max(mx, v.exact[static_cast<std::size_t>(i)]);
      }
      lo[static_cast<std::size_t>(i)] = boost::rational_cast<std::int64_t>(mn);
      if (Rational(lo[static_cast<std::size_t>(i)]) > mn) --lo[static_cast<std::size_t>(i)];
      hi[static_cast<std::size_t>(i)] = boost::rational_cast<std::int64_t>(mx);
      if (Rational(hi[static_cast<std::size_t>(i)]) < mx) ++hi[static_cast<std::size_t>(i)];
    }
    std::vector<IntVector> out;
    IntVector m = lo;
    while (true) {
      if (contains_exact(m, interior_only)) out.push_back(m);
      int i = dim_ - 1;
      while (i >= 0 && m[static_cast<std::size_t>(i)] == hi[static_cast<std::size_t>(i)]) {
        m[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
        --i;
      }
      if (i < 0) break;
      ++m[static_cast<std::size_t>(i)];
    }
    return out;
  }

 private:
  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != dim_)
      throw InvalidArgument("dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                            std::to_string(x.size()));
  }

  void validate_facets() const {
    if (dim_ < 1) throw InvalidPolytope("dimension must be positive");
    if (facets_.size() < static_cast<std::size_t>(dim_) + 1)
      throw InvalidPolytope("need at least n+1 facets");
    for (std::size_t j = 0; j < facets_.size(); ++j) {
      const auto& f = facets_[j];
      if (f.normal.size() != static_cast<std::size_t>(dim_))
        throw InvalidPolytope("facet " + std::to_string(j) + ": normal has wrong length");
      const auto g = detail::gcd_of(f.normal);
      if (g == 0) throw InvalidPolytope("facet " + std::to_string(j) + ": zero normal");
      if (g != 1) throw InvalidPolytope("facet " + std::to_string(j) + ": normal is not primitive");
    }
  }

  void build_numeric() {
    const auto r = static_cast<Eigen::Index>(facets_.size());
    normals_.resize(r, dim_);
    offsets_.resize(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      for (int i = 0; i < dim_; ++i)
        normals_(j, i) = static_cast<double>(facets_[static_cast<std::size_t>(j)].normal[static_cast<std::size_t>(i)]);
      offsets_[j] = to_double(facets_[static_cast<std::size_t>(j)].offset);
    }
  }

  void enumerate_vertices() {
    const std::size_t n = static_cast<std::size_t>(dim_);
    detail::for_each_subset(facets_.size(), n, [&](const std::vector<std::size_t>& idx) {
      std::vector<RationalVector> a;
      RationalVector b;
      for (auto j : idx) {
        RationalVector row(n);
        for (std::size_t i = 0; i < n; ++i) row[i] = Rational(facets_[j].normal[i]);
        a.push_back(std::move(row));
        b.push_back(-facets_[j].offset);
      }
      auto x = detail::solve_exact(std::move(a), std::move(b));
      if (!x) return;
      std::vector<std::size_t> active;
      for (std::size_t k = 0; k < facets_.size(); ++k) {
        const Rational v = ell_exact(k, *x);
        if (v < kZero) return;
        if (v == kZero) active.push_back(k);
      }
      for (const auto& v : raw_vertices_)
        if (v.exact == *x) return;
      Vertex vert;
      vert.exact = *x;
      vert.point.resize(dim_);
      for (std::size_t i = 0; i < n; ++i) vert.point[static_cast<Eigen::Index>(i)] = to_double((*x)[i]);
      vert.active = std::move(active);
      raw_vertices_.push_back(std::move(vert));
    });
    std::sort(raw_vertices_.begin(), raw_vertices_.end(),
              [](const Vertex& a, const Vertex& b) { return a.exact < b.exact; });
  }

  void check_bounded() const {
    const std::size_t n = static_cast<std::size_t>(dim_);
    std::vector<IntVector> rows;
    for (const auto& f : facets_) rows.push_back(f.normal);
    if (detail::rank_exact(rows, n) < n) throw InvalidPolytope("unbounded: normals do not span R^n");
    // A pointed recession cone {d : N d >= 0} is trivial iff none of its
    // candidate extreme rays (null vectors of n-1 independent rows) lies in it.
    bool unbounded = false;
    detail::for_each_subset(facets_.size(), n - 1, [&](const std::vector<std::size_t>& idx) {
      if (unbounded) return;
      std::vector<IntVector> sub;
      for (auto j : idx) sub.push_back(facets_[j].normal);
      if (n > 1 && detail::rank_exact(sub, n) < n - 1) return;
      const IntVector d = detail::cofactor_null_vector(sub, n);
      bool all_nonneg = true, all_nonpos = true;
      for (const auto& f : facets_) {
        std::int64_t dot = 0;
        for (std::size_t i = 0; i < n; ++i) dot += f.normal[i] * d[i];
        if (dot < 0) all_nonneg = false;
        if (dot > 0) all_nonpos = false;
      }
      if (all_nonneg || all_nonpos) unbounded = true;
    });
    if (unbounded) throw InvalidPolytope("unbounded: recession cone is nontrivial");
  }

  void check_interior() {
    if (raw_vertices_.empty()) throw InvalidPolytope("empty polytope");
    const std::size_t n = static_cast<std::size_t>(dim_);
    RationalVector c(n, Rational(0));
    for (const auto& v : raw_vertices_)
      for (std::size_t i = 0; i < n; ++i) c[i] += v.exact[i];
    for (auto& ci : c) ci /= static_cast<std::int64_t>(raw_vertices_.size());
    for (std::size_t j = 0; j < facets_.size(); ++j)
      if (ell_exact(j, c) <= kZero) throw InvalidPolytope("polytope has empty interior");
    center_.resize(dim_);
    for (std::size_t i = 0; i < n; ++i) center_[static_cast<Eigen::Index>(i)] = to_double(c[i]);
    bbox_.lo = raw_vertices_.front().point;
    bbox_.hi = raw_vertices_.front().point;
    for (const auto& v : raw_vertices_) {
      bbox_.lo = bbox_.lo.cwiseMin(v.point);
      bbox_.hi = bbox_.hi.cwiseMax(v.point);
    }
  }

  int dim_;
  std::vector<Facet> facets_;
  Eigen::MatrixXd normals_;
  Eigen::VectorXd offsets_;
  std::vector<Vertex> raw_vertices_;
  Eigen::VectorXd center_;
  Box bbox_;
};

/// Box [lo_i, hi_i] as a product of intervals with rational endpoints.
inline Polytope make_box(const std::vector<std::pair<Rational, Rational>>& sides) {
  const int n = static_cast<int>(sides.size());
  std::vector<Facet> facets;
  for (int i = 0; i < n; ++i) {
    IntVector up(static_cast<std::size_t>(n), 0), down(static_cast<std::size_t>(n), 0);
    up[static_cast<std::size_t>(i)] = 1;
    down[static_cast<std::size_t>(i)] = -1;
    facets.push_back({up, -sides[static_cast<std::size_t>(i)].first});
    facets.push_back({down, sides[static_cast<std::size_t>(i)].second});
  }
  return Polytope(n, std::move(facets));
}

inline const std::vector<std::string>& polytope_preset_names() {
  static const std::vector<std::string> names = {"cp1-half", "cp1-wide",      "cp1-unit",    "cp1xcp1-unit",
                                                 "simplex2", "simplex2-half", "cp1xcp1-wide"};
  return names;
}

/// Named scenario polytopes.
///   cp1-half      [-1/2, 1/2]
///   cp1-wide      [-3/2, 3/2]
///   cp1-unit      [0, 1] (not half-integral)
///   cp1xcp1-unit  [0,1]^2 (not half-integral)
///   simplex2      {x>=0, y>=0, x+y<=1}
///   simplex2-half {x>=-1/2, y>=-1/2, x+y<=3/2}
///   cp1xcp1-wide  [-1/2, 3/2]^2
inline Polytope preset_polytope(std::string_view name) {
  const Rational half(1, 2);
  if (name == "cp1-half") return Polytope(1, {{{1}, half}, {{-1}, half}});
  if (name == "cp1-wide") return Polytope(1, {{{1}, Rational(3, 2)}, {{-1}, Rational(3, 2)}});
  if (name == "cp1-unit") return make_box({{Rational(0), Rational(1)}});
  if (name == "cp1xcp1-unit") return make_box({{Rational(0), Rational(1)}, {Rational(0), Rational(1)}});
  if (name == "simplex2") return Polytope(2, {{{1, 0}, Rational(0)}, {{0, 1}, Rational(0)}, {{-1, -1}, Rational(1)}});
  if (name == "simplex2-half")
    return Polytope(2, {{{1, 0}, half}, {{0, 1}, half}, {{-1, -1}, Rational(3, 2)}});
  if (name == "cp1xcp1-wide") return make_box({{-half, Rational(3, 2)}, {-half, Rational(3, 2)}});
  throw InvalidArgument("unknown polytope preset '" + std::string(name) + "'");
}

}  // namespace toriclab

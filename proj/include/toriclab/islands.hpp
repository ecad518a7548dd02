#pragma once

// Hessian signature stratification of P \ Z_s on a cell grid, islands as
// face-connected components, lifespans s^cvx / s^neg, nesting of negative
// sets along the ray and the Monge–Ampère mass identity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "toriclab/errors.hpp"
#include "toriclab/grid.hpp"
#include "toriclab/potential.hpp"

namespace toriclab {

inline constexpr double kSignatureTolerance = 1e-7;

struct Signature {
  int pos = 0;
  int neg = 0;
  bool singular = false;

  bool operator==(const Signature&) const = default;

  bool positive_definite(int n) const { return !singular && pos == n; }
  bool negative_definite(int n) const { return !singular && neg == n; }

  std::string str() const {
    if (singular) return "SINGULAR";
    return "(" + std::to_string(pos) + "," + std::to_string(neg) + ")";
  }
};

struct SignatureSample {
  Signature sig;
  Eigen::VectorXd eigenvalues;  // ascending
  std::string pattern;          // signs of the diagonal entries, e.g. "+-"
};

namespace detail {

inline std::string diagonal_pattern(const Eigen::MatrixXd& h) {
  std::string p;
  for (Eigen::Index i = 0; i < h.rows(); ++i) p += h(i, i) > 0 ? '+' : (h(i, i) < 0 ? '-' : '0');
  return p;
}

inline SignatureSample classify(const Eigen::MatrixXd& h, double tau) {
  SignatureSample out;
  out.eigenvalues = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues();
  const double radius = out.eigenvalues.cwiseAbs().maxCoeff();
  const double band = tau * radius;
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    const double l = out.eigenvalues[i];
    if (l > band)
      ++out.sig.pos;
    else if (l < -band)
      ++out.sig.neg;
    else
      out.sig.singular = true;
  }
  if (radius == 0.0) out.sig.singular = true;
  out.pattern = diagonal_pattern(h);
  return out;
}

}  // namespace detail

/// Signature of H_s(x): eigenvalues beyond ±τ·(spectral radius) are counted,
/// anything inside the band makes the point SINGULAR.
inline SignatureSample signature_at(const GeodesicRay& ray, const Eigen::VectorXd& x, double s,
                                    double tau = kSignatureTolerance) {
  return detail::classify(ray.at(s).hessian(x), tau);
}

inline void check_grid_args(const GeodesicRay& ray, int resolution) {
  if (resolution < 16) throw PreconditionError("grid resolution must be >= 16");
  if (ray.dim() > 3) throw PreconditionError("grid consumers support n <= 3");
}

/// Sampled cells of the bounding-box grid: centers whose distance to ∂P is
/// at least the margin. Hessians are split as A + s·B with A the s-free part,
/// so any s can be evaluated without touching the potential again.
class HessianField {
 public:
  HessianField(const GeodesicRay& ray, int resolution, std::optional<double> margin = std::nullopt, int workers = 1)
      : grid_(ray.polytope().bounding_box(), resolution) {
    check_grid_args(ray, resolution);
    margin_ = margin.value_or(0.5 * grid_.width().minCoeff());
    if (!(margin_ >= 0.0)) throw InvalidArgument("margin must be non-negative");
    const auto& p = ray.polytope();
    const SymplecticPotential base = ray.at(0.0);
    const int n = ray.dim();
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      const Eigen::VectorXd x = grid_.center(k);
      if (!p.in_interior(x) || p.boundary_distance(x) < margin_ - 1e-12) continue;
      cells_.push_back(k);
    }
    a_.resize(cells_.size());
    b_.resize(cells_.size());
    parallel_for(cells_.size(), workers, [&](std::size_t i) {
      const Eigen::VectorXd x = grid_.center(cells_[i]);
      a_[i] = base.hessian(x);
      b_[i] = ray.psi().is_zero() ? Eigen::MatrixXd::Zero(n, n) : ray.psi().hessian(x);
    });
    slot_.assign(grid_.size(), kNone);
    for (std::size_t i = 0; i < cells_.size(); ++i) slot_[cells_[i]] = i;
  }

  const CellGrid& grid() const { return grid_; }
  double margin() const { return margin_; }
  std::size_t size() const { return cells_.size(); }
  std::size_t cell(std::size_t i) const { return cells_[i]; }
  Eigen::VectorXd center(std::size_t i) const { return grid_.center(cells_[i]); }

  /// Sample index of a grid cell, or kNone when the cell is not sampled.
  std::size_t slot(std::size_t grid_cell) const { return slot_[grid_cell]; }

  Eigen::MatrixXd hessian(std::size_t i, double s) const { return a_[i] + s * b_[i]; }

  /// Smallest eigenvalue over all samples at s.
  double min_eigenvalue(double s) const {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) lo = std::min(lo, smallest(hessian(i, s)));
    return lo;
  }

  bool any_negative_definite(double s) const {
    for (std::size_t i = 0; i < size(); ++i)
      if (largest(hessian(i, s)) < 0.0) return true;
    return false;
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

 private:
  static double smallest(const Eigen::MatrixXd& h) {
    if (h.rows() == 1) return h(0, 0);
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
  }
  static double largest(const Eigen::MatrixXd& h) {
    if (h.rows() == 1) return h(0, 0);
    const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues();
    return ev[ev.size() - 1];
  }

  CellGrid grid_;
  double margin_ = 0.0;
  std::vector<std::size_t> cells_;
  std::vector<std::size_t> slot_;
  std::vector<Eigen::MatrixXd> a_, b_;
};

struct SignatureGrid {
  double s = 0.0;
  double tau = kSignatureTolerance;
  int resolution = 0;
  double margin = 0.0;
  CellGrid grid;
  std::vector<std::size_t> cells;        // sampled grid cells
  std::vector<SignatureSample> samples;  // parallel to cells
};

inline SignatureGrid signature_grid(const HessianField& field, double s, double tau = kSignatureTolerance,
                                    int workers = 1) {
  SignatureGrid g{s, tau, field.grid().resolution(), field.margin(), field.grid(), {}, {}};
  g.cells.resize(field.size());
  g.samples.resize(field.size());
  parallel_for(field.size(), workers, [&](std::size_t i) {
    g.cells[i] = field.cell(i);
    g.samples[i] = detail::classify(field.hessian(i, s), tau);
  });
  return g;
}

struct Island {
  int id = 0;
  Signature sig;
  std::string pattern;  // diagonal sign pattern of the island's first cell
  std::vector<std::size_t> members;  // indices into SignatureGrid::cells
};

struct IslandMap {
  SignatureGrid grid;
  std::vector<Island> islands;
  std::vector<int> label;  // per sample, -1 for SINGULAR
  std::string adjacency = "face";

  std::size_t count(const Signature& sig) const {
    return static_cast<std::size_t>(
        std::count_if(islands.begin(), islands.end(), [&](const Island& i) { return i.sig == sig; }));
  }
  std::size_t count(const Signature& sig, const std::string& pattern) const {
    return static_cast<std::size_t>(std::count_if(islands.begin(), islands.end(), [&](const Island& i) {
      return i.sig == sig && i.pattern == pattern;
    }));
  }
};

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace detail

/// Face-connected components of equal signature. Component ids follow the
/// order of each component's first cell in grid order.
inline IslandMap label_islands(SignatureGrid grid) {
  const std::size_t m = grid.cells.size();
  std::vector<std::size_t> slot(grid.grid.size(), HessianField::kNone);
  for (std::size_t i = 0; i < m; ++i) slot[grid.cells[i]] = i;
  detail::UnionFind uf(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (grid.samples[i].sig.singular) continue;
    for (std::size_t nb : grid.grid.face_neighbors(grid.cells[i])) {
      const std::size_t j = slot[nb];
      if (j == HessianField::kNone || j < i || grid.samples[j].sig.singular) continue;
      if (grid.samples[j].sig == grid.samples[i].sig) uf.unite(i, j);
    }
  }
  IslandMap out;
  out.label.assign(m, -1);
  std::vector<int> root_id(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    if (grid.samples[i].sig.singular) continue;
    const std::size_t r = uf.find(i);
    if (root_id[r] < 0) {
      root_id[r] = static_cast<int>(out.islands.size());
      Island isl;
      isl.id = root_id[r];
      isl.sig = grid.samples[i].sig;
      isl.pattern = grid.samples[i].pattern;
      out.islands.push_back(std::move(isl));
    }
    out.label[i] = root_id[r];
    out.islands[static_cast<std::size_t>(root_id[r])].members.push_back(i);
  }
  out.grid = std::move(grid);
  return out;
}

inline IslandMap island_map(const GeodesicRay& ray, double s, int resolution,
                            std::optional<double> margin = std::nullopt, double tau = kSignatureTolerance,
                            int workers = 1) {
  HessianField field(ray, resolution, margin, workers);
  return label_islands(signature_grid(field, s, tau, workers));
}

/// CSV rows x1..xn, eig1..eign, sig_a, sig_b, island_id (SINGULAR cells carry
/// sig -1,-1 and island -1).
inline void write_island_csv(std::ostream& os, const IslandMap& map) {
  const int n = map.grid.grid.dim();
  os.precision(17);
  for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
  for (int i = 0; i < n; ++i) os << "eig" << i + 1 << ",";
  os << "sig_a,sig_b,island_id\n";
  for (std::size_t k = 0; k < map.grid.cells.size(); ++k) {
    const Eigen::VectorXd x = map.grid.grid.center(map.grid.cells[k]);
    const auto& smp = map.grid.samples[k];
    for (int i = 0; i < n; ++i) os << x[i] << ",";
    for (int i = 0; i < n; ++i) os << smp.eigenvalues[i] << ",";
    if (smp.sig.singular)
      os << "-1,-1,";
    else
      os << smp.sig.pos << "," << smp.sig.neg << ",";
    os << map.label[k] << "\n";
  }
}

struct ThresholdResult {
  double value = 0.0;
  bool capped = false;  // predicate never flipped below the cap; value is a lower bound
};

struct LifespanReport {
  double s_cvx = 0.0;
  double s_neg = 0.0;
  bool cvx_capped = false;
  bool neg_capped = false;
  int resolution = 0;
  double tol = 0.0;
  double margin = 0.0;
};

namespace detail {

/// Smallest t > 0 (to within tol) where pred(t) becomes true, assuming pred
/// is monotone. Doubling search up to cap, then bisection.
inline ThresholdResult first_true(const std::function<bool(double)>& pred, double tol, double cap) {
  if (pred(0.0)) return {0.0, false};
  double lo = 0.0, hi = 1.0;
  while (!pred(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) return {lo, true};
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return {0.5 * (lo + hi), false};
}

inline void require_convex_direction(const GeodesicRay& ray) {
  QuadratureSpec q;
  q.base_resolution = 32;
  if (!strong_convexity_check(ray.psi(), ray.polytope(), q).strongly_convex)
    throw PreconditionError("ray direction psi is not strongly convex on P");
}

}  // namespace detail

inline constexpr double kLifespanCap = 1e6;

/// s^cvx: the t at which min over the grid of λ_min(H_{−t}) stops being
/// positive.
inline ThresholdResult convex_lifespan(const HessianField& field, double tol, double cap = kLifespanCap) {
  return detail::first_true([&](double t) { return !(field.min_eigenvalue(-t) > 0.0); }, tol, cap);
}

inline ThresholdResult convex_lifespan(const GeodesicRay& ray, int resolution, double tol, double cap = kLifespanCap) {
  detail::require_convex_direction(ray);
  return convex_lifespan(HessianField(ray, resolution), tol, cap);
}

/// s^neg: the t at which some grid point becomes negative definite at s = −t.
inline ThresholdResult neg_onset(const HessianField& field, double tol, double cap = kLifespanCap) {
  return detail::first_true([&](double t) { return field.any_negative_definite(-t); }, tol, cap);
}

inline ThresholdResult neg_onset(const GeodesicRay& ray, int resolution, double tol, double cap = kLifespanCap) {
  detail::require_convex_direction(ray);
  return neg_onset(HessianField(ray, resolution), tol, cap);
}

inline LifespanReport lifespans(const GeodesicRay& ray, int resolution, double tol, int workers = 1) {
  detail::require_convex_direction(ray);
  HessianField field(ray, resolution, std::nullopt, workers);
  const auto cvx = convex_lifespan(field, tol);
  const auto neg = neg_onset(field, tol);
  return {cvx.value, neg.value, cvx.capped, neg.capped, resolution, tol, field.margin()};
}

struct TrackStep {
  double s = 0.0;
  double s_next = 0.0;
  std::size_t negative_cells = 0;
  std::size_t negative_cells_next = 0;
  std::size_t violations = 0;  // negative at s but not at s_next
};

struct TrackReport {
  std::vector<double> s_list;
  std::vector<double> negative_fraction;  // per s
  std::vector<bool> vertex_cells_positive;  // per s
  std::vector<TrackStep> steps;
  std::size_t total_violations = 0;
  std::size_t samples = 0;
  int resolution = 0;
};

/// Sample indices nearest to each vertex (all ties kept).
inline std::vector<std::vector<std::size_t>> vertex_cells(const HessianField& field, const Polytope& p) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& v : p.raw_vertices()) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double d = (field.center(i) - v.point).norm();
      if (d < best - 1e-12) {
        best = d;
        idx.assign(1, i);
      } else if (d <= best + 1e-12) {
        idx.push_back(i);
      }
    }
    out.push_back(std::move(idx));
  }
  return out;
}

/// Cellwise nesting of negative-definite sets along a strictly decreasing
/// list of negative s values, plus filling fraction and vertex-cell
/// positivity at each s.
inline TrackReport island_track(const GeodesicRay& ray, const std::vector<double>& s_list, int resolution,
                                double tau = kSignatureTolerance, int workers = 1) {
  if (s_list.empty()) throw PreconditionError("island_track: empty s list");
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    if (!(s_list[i] < 0.0)) throw PreconditionError("island_track: s values must be negative");
    if (i && !(s_list[i] < s_list[i - 1])) throw PreconditionError("island_track: s list must be strictly decreasing");
  }
  HessianField field(ray, resolution, std::nullopt, workers);
  const int n = ray.dim();
  const auto corners = vertex_cells(field, ray.polytope());
  TrackReport rep;
  rep.s_list = s_list;
  rep.samples = field.size();
  rep.resolution = resolution;
  std::vector<char> prev;
  for (std::size_t k = 0; k < s_list.size(); ++k) {
    const auto g = signature_grid(field, s_list[k], tau, workers);
    std::vector<char> neg(field.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      neg[i] = g.samples[i].sig.negative_definite(n);
      count += static_cast<std::size_t>(neg[i]);
    }
    rep.negative_fraction.push_back(field.size() ? static_cast<double>(count) / static_cast<double>(field.size()) : 0.0);
    bool corners_ok = true;
    for (const auto& c : corners)
      for (std::size_t i : c) corners_ok = corners_ok && g.samples[i].sig.positive_definite(n);
    rep.vertex_cells_positive.push_back(corners_ok);
    if (k) {
      TrackStep st;
      st.s = s_list[k - 1];
      st.s_next = s_list[k];
      for (std::size_t i = 0; i < field.size(); ++i) {
        st.negative_cells += static_cast<std::size_t>(prev[i]);
        st.negative_cells_next += static_cast<std::size_t>(neg[i]);
        if (prev[i] && !neg[i]) ++st.violations;
      }
      rep.total_violations += st.violations;
      rep.steps.push_back(st);
    }
    prev = std::move(neg);
  }
  return rep;
}

/// Roots of the diagonal Hessian entry H_s(x)_{ii} along the axis line
/// through `through` in direction e_i, restricted to P. Sign changes are
/// located on `samples` subintervals and polished with TOMS 748.
inline std::vector<double> hessian_entry_roots(const GeodesicRay& ray, double s, int axis,
                                               const Eigen::VectorXd& through, int samples = 4000) {
  const auto& p = ray.polytope();
  if (axis < 0 || axis >= p.dim()) throw InvalidArgument("axis out of range");
  const SymplecticPotential sp = ray.at(s);
  // extent of the line inside P
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd l0 = p.ells(through);
  for (Eigen::Index j = 0; j < l0.size(); ++j) {
    const double nu = p.normals()(j, axis);
    if (nu > 0) lo = std::max(lo, -l0[j] / nu);
    if (nu < 0) hi = std::min(hi, -l0[j] / nu);
    if (nu == 0 && l0[j] <= 0) return {};
  }
  auto f = [&](double t) {
    Eigen::VectorXd x = through;
    x[axis] += t;
    return sp.hessian(x)(axis, axis);
  };
  std::vector<double> roots;
  const double w = (hi - lo) / samples;
  double a = lo + 0.5 * w, fa = f(a);
  for (int k = 1; k < samples; ++k) {
    const double b = lo + (k + 0.5) * w, fb = f(b);
    if (fa == 0.0) {
      roots.push_back(through[axis] + a);
    } else if ((fa < 0) != (fb < 0) && fb != 0.0) {
      boost::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52),
                                                       iters);
      roots.push_back(through[axis] + 0.5 * (r.first + r.second));
    }
    a = b;
    fa = fb;
  }
  return roots;
}

/// Number of strict sign changes in f over `samples` equally spaced points
/// of [a, b] (exact zeros are skipped).
inline int count_sign_changes(const std::function<double(double)>& f, double a, double b, int samples) {
  if (samples < 2) throw InvalidArgument("count_sign_changes: need at least 2 samples");
  int changes = 0, last = 0;
  for (int k = 0; k < samples; ++k) {
    const double v = f(a + (b - a) * k / (samples - 1));
    const int sg = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (sg == 0) continue;
    if (last != 0 && sg != last) ++changes;
    last = sg;
  }
  return changes;
}

struct SignChangeReport {
  std::vector<int> samples;
  std::vector<int> changes;
  bool strictly_increasing = false;
};

/// Sign changes of g_s'' on (c − η, c + η) for a 1d ray at successively
/// refined sample counts.
inline SignChangeReport second_derivative_sign_changes(const GeodesicRay& ray, double s, double center, double eta,
                                                       int base_samples, int refinements) {
  if (ray.dim() != 1) throw PreconditionError("sign-change scan is one-dimensional");
  const SymplecticPotential sp = ray.at(s);
  Eigen::VectorXd x(1);
  auto f = [&](double t) {
    x[0] = t;
    return sp.hessian(x)(0, 0);
  };
  SignChangeReport rep;
  int n = base_samples;
  for (int r = 0; r <= refinements; ++r, n *= 2) {
    rep.samples.push_back(n);
    rep.changes.push_back(count_sign_changes(f, center - eta, center + eta, n));
  }
  rep.strictly_increasing = true;
  for (std::size_t i = 1; i < rep.changes.size(); ++i)
    rep.strictly_increasing = rep.strictly_increasing && rep.changes[i] > rep.changes[i - 1];
  return rep;
}

struct MassReport {
  double mass_x = 0.0;
  double mass_y = 0.0;
  double rel_diff = 0.0;
  int levels = 0;
  int final_resolution = 0;
};

/// Change-of-variables check for the Monge–Ampère measure on a box A ⊂ P̌:
/// vol(A) against ∫_{y(A)} det H(x(y))⁻¹ dy, the latter by midpoint
/// quadrature on a y-grid pulled back through the inverse Legendre map.
inline MassReport ma_mass(const SymplecticPotential& sp, const Box& a, const QuadratureSpec& quad) {
  quad.validate();
  const auto& p = sp.polytope();
  const int n = p.dim();
  if (a.dim() != n) throw InvalidArgument("box dimension mismatch");
  if (n > 3) throw PreconditionError("ma_mass supports n <= 3");
  // A must sit in the open polytope: check its corners
  for (int c = 0; c < (1 << n); ++c) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = (c >> i) & 1 ? a.hi[i] : a.lo[i];
    if (!p.in_interior(x)) throw PreconditionError("box A is not inside the open polytope");
  }
  // convexity on A and the image bounding box from a dense scan of A
  const int scan = n == 1 ? 2048 : (n == 2 ? 128 : 32);
  Box ybox{Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity()),
           Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())};
  {
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = a.lo[i] + (a.hi[i] - a.lo[i]) * idx[static_cast<std::size_t>(i)] / scan;
      Eigen::LLT<Eigen::MatrixXd> llt(sp.hessian(x));
      if (llt.info() != Eigen::Success) throw ConvexityError("potential is not convex on A");
      const Eigen::VectorXd y = sp.gradient(x);
      ybox.lo = ybox.lo.cwiseMin(y);
      ybox.hi = ybox.hi.cwiseMax(y);
      int i = n - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == scan) idx[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
    }
  }
  const Eigen::VectorXd pad = 0.02 * (ybox.hi - ybox.lo) + Eigen::VectorXd::Constant(n, 1e-9);
  ybox.lo -= pad;
  ybox.hi += pad;

  // Cells whose image may straddle ∂A (judged by the linearization
  // x(y + δ) ≈ x(y) + H⁻¹δ with a safety factor 2) are split 2ⁿ-fold up to
  // max_depth times; the remaining leaves use the center indicator.
  const int max_depth = n == 1 ? 16 : (n == 2 ? 8 : 4);
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&, int)> cell_mass =
      [&](const Eigen::VectorXd& yc, const Eigen::VectorXd& w, const Eigen::VectorXd& warm, int depth) {
        NewtonOptions opt;
        opt.start = warm;
        const Eigen::VectorXd x = legendre_inverse(sp, yc, opt);
        const Eigen::MatrixXd h = sp.hessian(x);
        bool straddles = false;
        if (depth < max_depth) {
          const Eigen::MatrixXd hinv = h.inverse();
          for (int i = 0; i < n && !straddles; ++i) {
            const double reach = 2.0 * 0.5 * hinv.row(i).cwiseAbs().dot(w);
            straddles = std::abs(x[i] - a.lo[i]) <= reach || std::abs(a.hi[i] - x[i]) <= reach;
          }
        }
        if (!straddles) return a.contains(x) ? w.prod() / h.determinant() : 0.0;
        const Eigen::VectorXd hw = 0.5 * w;
        std::vector<double> parts;
        for (int c = 0; c < (1 << n); ++c) {
          Eigen::VectorXd sub = yc;
          for (int i = 0; i < n; ++i) sub[i] += ((c >> i) & 1 ? 0.5 : -0.5) * hw[i];
          parts.push_back(cell_mass(sub, hw, x, depth + 1));
        }
        return pairwise_sum(parts);
      };

  auto level_integral = [&](int res) {
    CellGrid grid(ybox, res);
    const std::size_t row = static_cast<std::size_t>(res);
    const std::size_t rows = grid.size() / row;
    std::vector<double> vals(grid.size(), 0.0);
    parallel_for(rows, quad.workers, [&](std::size_t r) {
      Eigen::VectorXd warm = p.center();
      for (std::size_t c = 0; c < row; ++c) {
        const std::size_t k = r * row + c;
        const Eigen::VectorXd yc = grid.center(k);
        NewtonOptions opt;
        opt.start = warm;
        warm = legendre_inverse(sp, yc, opt);
        vals[k] = cell_mass(yc, grid.width(), warm, 0);
      }
    });
    return pairwise_sum(vals);
  };

  MassReport rep;
  rep.mass_x = a.volume();
  int res = quad.base_resolution;
  double prev = 0.0;
  for (int level = 0; level < quad.max_levels; ++level, res *= quad.refinement) {
    const double cur = level_integral(res);
    rep.levels = level + 1;
    rep.final_resolution = res;
    rep.mass_y = cur;
    if (level > 0 && std::abs(cur - prev) <= quad.rel_tol * std::abs(cur)) break;
    prev = cur;
  }
  rep.rel_diff = std::abs(rep.mass_y - rep.mass_x) / rep.mass_x;
  return rep;
}

}  // namespace toriclab

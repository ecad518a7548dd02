#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <cstdio>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "toriclab/errors.hpp"

namespace toriclab {

namespace detail {
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}
}  // namespace detail

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
    return v;
  }

  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
  }

  bool contains(const Box& other) const {
    for (int i = 0; i < dim(); ++i)
      if (other.lo[i] < lo[i] || other.hi[i] > hi[i]) return false;
    return true;
  }

  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }

  static Box symmetric(const Eigen::VectorXd& c, double half_width) {
    return Box{c.array() - half_width, c.array() + half_width};
  }
};

/// Resolution and refinement policy for midpoint quadrature and grid scans.
struct QuadratureSpec {
  int base_resolution = 64;  // cells per axis at level 0
  int refinement = 2;        // cells-per-axis multiplier between levels
  double rel_tol = 1e-7;     // stop when consecutive levels differ by less
  int max_levels = 16;       // including level 0
  int workers = 1;

  static QuadratureSpec for_dim(int n) {
    QuadratureSpec q;
    if (n >= 2) {
      q.base_resolution = 32;
      q.rel_tol = 1e-6;
      q.max_levels = 6;
    }
    return q;
  }

  void validate() const {
    if (base_resolution < 1 || refinement < 2 || !(rel_tol > 0.0) || max_levels < 1 ||
        workers < 1)
      throw InvalidArgument("QuadratureSpec: invalid field");
  }
};

/// Runs fn(i) for i in [0, count) on up to `workers` threads. fn must only
/// write state owned by index i.
template <typename F>
void parallel_for(std::size_t count, int workers, F&& fn) {
  if (workers <= 1 || count < 2048) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  const std::size_t chunk = (count + nthreads - 1) / nthreads;
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

/// Deterministic pairwise summation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Uniform cell grid over a box; cell k has multi-index given by mixed radix
/// with the first axis varying slowest.
class CellGrid {
 public:
  CellGrid() : CellGrid(Box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)}, 1) {}

  CellGrid(Box box, int cells_per_axis) : box_(std::move(box)), res_(cells_per_axis) {
    if (res_ < 1) throw InvalidArgument("CellGrid: resolution must be positive");
    const int n = box_.dim();
    width_ = (box_.hi - box_.lo) / static_cast<double>(res_);
    count_ = 1;
    for (int i = 0; i < n; ++i) count_ *= static_cast<std::size_t>(res_);
  }

  std::size_t size() const { return count_; }
  int resolution() const { return res_; }
  int dim() const { return box_.dim(); }
  const Box& box() const { return box_; }
  const Eigen::VectorXd& width() const { return width_; }

  double cell_volume() const { return width_.prod(); }

  std::vector<int> multi_index(std::size_t k) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int i = dim() - 1; i >= 0; --i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(k % static_cast<std::size_t>(res_));
      k /= static_cast<std::size_t>(res_);
    }
    return idx;
  }

  std::size_t linear_index(const std::vector<int>& idx) const {
    std::size_t k = 0;
    for (int v : idx) k = k * static_cast<std::size_t>(res_) + static_cast<std::size_t>(v);
    return k;
  }

  Eigen::VectorXd center(std::size_t k) const {
    Eigen::VectorXd x(dim());
    for (int i = dim() - 1; i >= 0; --i) {
      const auto c = static_cast<double>(k % static_cast<std::size_t>(res_));
      k /= static_cast<std::size_t>(res_);
      x[i] = box_.lo[i] + (c + 0.5) * width_[i];
    }
    return x;
  }

  /// Face neighbours (±1 along one axis) that exist in the grid.
  std::vector<std::size_t> face_neighbors(std::size_t k) const {
    std::vector<std::size_t> out;
    auto idx = multi_index(k);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (int d : {-1, 1}) {
        const int v = idx[i] + d;
        if (v < 0 || v >= res_) continue;
        auto j = idx;
        j[i] = v;
        out.push_back(linear_index(j));
      }
    }
    return out;
  }

 private:
  Box box_;
  int res_;
  Eigen::VectorXd width_;
  std::size_t count_ = 0;
};

/// log of sum_k exp(log_terms[k]); -inf when every term is -inf.
inline double log_sum_exp(std::span<const double> log_terms) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : log_terms) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  std::vector<double> shifted(log_terms.size());
  for (std::size_t i = 0; i < log_terms.size(); ++i) shifted[i] = std::exp(log_terms[i] - peak);
  return peak + std::log(pairwise_sum(shifted));
}

/// Midpoint rule for ∫_box exp(log_f) at a fixed resolution, returned as a log.
inline double midpoint_log_integral(const Box& box, int cells_per_axis,
                                    const std::function<double(const Eigen::VectorXd&)>& log_f,
                                    int workers = 1) {
  CellGrid grid(box, cells_per_axis);
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t k) { vals[k] = log_f(grid.center(k)); });
  const double lse = log_sum_exp(vals);
  return lse + std::log(grid.cell_volume());
}

struct QuadResult {
  double log_value = -std::numeric_limits<double>::infinity();
  int levels = 0;              // number of levels evaluated
  int final_resolution = 0;
  double last_rel_change = std::numeric_limits<double>::infinity();
  bool converged = false;

  double value() const { return std::exp(log_value); }
};

/// Refines the midpoint rule until two consecutive levels agree to rel_tol.
/// Throws ConvergenceError after max_levels.
inline QuadResult integrate_log(const Box& box, const QuadratureSpec& quad,
                                const std::function<double(const Eigen::VectorXd&)>& log_f) {
  quad.validate();
  QuadResult r;
  int res = quad.base_resolution;
  double prev = 0.0;
  for (int level = 0; level < quad.max_levels; ++level) {
    const double cur = midpoint_log_integral(box, res, log_f, quad.workers);
    r.levels = level + 1;
    r.final_resolution = res;
    r.log_value = cur;
    if (level > 0) {
      if (!std::isfinite(cur) && !std::isfinite(prev)) {
        r.last_rel_change = 0.0;
      } else {
        r.last_rel_change = std::abs(std::expm1(cur - prev));
      }
      if (r.last_rel_change < quad.rel_tol) {
        r.converged = true;
        return r;
      }
    }
    prev = cur;
    res *= quad.refinement;
  }
  throw ConvergenceError("quadrature did not converge within " + std::to_string(quad.max_levels) +
                         " levels (last relative change " + detail::sci(r.last_rel_change) + ")");
}

}  // namespace toriclab

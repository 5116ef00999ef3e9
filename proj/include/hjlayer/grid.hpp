#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "hjlayer/errors.hpp"

namespace hjlayer {

inline constexpr std::size_t kMaxDim = 2;
inline constexpr double kPlusInfinity = std::numeric_limits<double>::infinity();

/// A point (or momentum) in R^1 or R^2.
class Point {
public:
  Point() = default;
  explicit Point(std::size_t dim, double fill = 0.0) : dim_(dim) {
    assert(dim <= kMaxDim);
    c_.fill(fill);
  }
  Point(std::initializer_list<double> xs) : dim_(xs.size()) {
    assert(xs.size() <= kMaxDim);
    std::copy(xs.begin(), xs.end(), c_.begin());
  }

  std::size_t size() const noexcept { return dim_; }
  double& operator[](std::size_t i) noexcept { return c_[i]; }
  double operator[](std::size_t i) const noexcept { return c_[i]; }
  const double* begin() const noexcept { return c_.data(); }
  const double* end() const noexcept { return c_.data() + dim_; }

  friend bool operator==(const Point& a, const Point& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t i = 0; i < a.dim_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }

  friend Point operator+(Point a, const Point& b) noexcept {
    for (std::size_t i = 0; i < a.dim_; ++i) a.c_[i] += b.c_[i];
    return a;
  }
  friend Point operator-(Point a, const Point& b) noexcept {
    for (std::size_t i = 0; i < a.dim_; ++i) a.c_[i] -= b.c_[i];
    return a;
  }
  friend Point operator*(double s, Point a) noexcept {
    for (std::size_t i = 0; i < a.dim_; ++i) a.c_[i] *= s;
    return a;
  }

private:
  std::array<double, kMaxDim> c_{};
  std::size_t dim_ = 0;
};

inline double dot(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double distance(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Uniform tensor grid over a box. Row-major storage: the last axis varies fastest.
class Grid {
public:
  Grid() = default;
  Grid(std::vector<Interval> box, std::vector<std::size_t> counts)
      : box_(std::move(box)), counts_(std::move(counts)) {
    if (box_.empty() || box_.size() > kMaxDim)
      throw InputError("grid dimension must be 1 or 2");
    if (box_.size() != counts_.size())
      throw InputError("grid box and counts differ in dimension");
    for (std::size_t a = 0; a < box_.size(); ++a) {
      if (counts_[a] < 2) throw InputError("grid needs at least 2 nodes per axis");
      if (!(box_[a].lo < box_[a].hi)) throw InputError("grid box is degenerate on an axis");
    }
  }

  static Grid line(double lo, double hi, std::size_t count) { return Grid({{lo, hi}}, {count}); }

  std::size_t dim() const noexcept { return box_.size(); }
  const std::vector<Interval>& box() const noexcept { return box_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  std::size_t count(std::size_t axis) const noexcept { return counts_[axis]; }

  std::size_t size() const noexcept {
    std::size_t n = 1;
    for (auto c : counts_) n *= c;
    return n;
  }

  double spacing(std::size_t axis) const noexcept {
    return box_[axis].width() / static_cast<double>(counts_[axis] - 1);
  }

  double max_spacing() const noexcept {
    double h = 0.0;
    for (std::size_t a = 0; a < dim(); ++a) h = std::max(h, spacing(a));
    return h;
  }

  /// Coordinate of node i along an axis; the last node is exactly hi.
  double node(std::size_t axis, std::size_t i) const noexcept {
    if (i + 1 == counts_[axis]) return box_[axis].hi;
    return box_[axis].lo + static_cast<double>(i) * spacing(axis);
  }

  std::vector<double> nodes(std::size_t axis) const {
    std::vector<double> out(counts_[axis]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(axis, i);
    return out;
  }

  Point point(std::size_t flat) const noexcept {
    Point p(dim());
    for (std::size_t a = dim(); a-- > 0;) {
      p[a] = node(a, flat % counts_[a]);
      flat /= counts_[a];
    }
    return p;
  }

  std::vector<Point> points() const {
    std::vector<Point> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = point(k);
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  std::vector<Interval> box_;
  std::vector<std::size_t> counts_;
};

/// Scalar values on the nodes of a Grid. With `extended` set, +infinity marks nodes
/// outside the effective domain.
class SampledFunction {
public:
  SampledFunction() = default;
  SampledFunction(Grid grid, std::vector<double> values, bool extended = false)
      : grid_(std::move(grid)), values_(std::move(values)), extended_(extended) {
    if (values_.size() != grid_.size())
      throw InputError("sampled values do not match the grid size");
    std::size_t finite = 0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double v = values_[k];
      if (std::isnan(v) || v == -kPlusInfinity)
        throw InputError("sampled value is not a number at node " + std::to_string(k));
      if (v == kPlusInfinity) {
        if (!extended_)
          throw InputError("infinite sampled value at node " + std::to_string(k) +
                           " without the extended flag");
      } else {
        ++finite;
      }
    }
    if (finite == 0) throw InputError("conjugate of identically +infinity");
  }

  template <class F>
  static SampledFunction sample(const Grid& grid, F&& f) {
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.point(k));
    return SampledFunction(grid, std::move(v));
  }

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  bool extended() const noexcept { return extended_; }
  std::size_t size() const noexcept { return values_.size(); }

private:
  Grid grid_;
  std::vector<double> values_;
  bool extended_ = false;
};

}  // namespace hjlayer

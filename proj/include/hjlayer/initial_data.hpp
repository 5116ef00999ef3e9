#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hjlayer/conjugate.hpp"
#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/polynomial.hpp"

namespace hjlayer {

/// Piecewise-linear profile: `slopes[i]` holds on the i-th piece between consecutive
/// breakpoints (so slopes.size() == breakpoints.size() + 1); `offset` is the value at 0.
struct PiecewiseLinear {
  std::vector<double> breakpoints;
  std::vector<double> slopes;
  double offset = 0.0;
  friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;
};

/// Convex Lipschitz initial data sigma. One-dimensional profiles are applied additively
/// per coordinate in dimension 2: sigma(x) = s(x_1) + s(x_2). Sampled data carry their
/// own grid and are linearly interpolated.
class InitialData {
public:
  using Body = std::variant<PiecewiseLinear, Polynomial, SampledFunction>;

  InitialData(std::size_t dimension, Body body, double smoothing_radius = 0.0)
      : dim_(dimension), body_(std::move(body)), radius_(smoothing_radius) {
    if (dim_ < 1 || dim_ > kMaxDim) throw InputError("dimension must be 1 or 2");
    if (radius_ < 0.0) throw InputError("smoothing radius must be nonnegative");
    if (auto* pl = std::get_if<PiecewiseLinear>(&body_)) {
      if (pl->slopes.size() != pl->breakpoints.size() + 1)
        throw InputError("piecewise-linear sigma needs one more slope than breakpoints");
      for (std::size_t i = 0; i + 1 < pl->breakpoints.size(); ++i) {
        if (!(pl->breakpoints[i] < pl->breakpoints[i + 1]))
          throw InputError("sigma breakpoints must be strictly increasing");
        if (!(pl->breakpoints[i + 1] - pl->breakpoints[i] > 2.0 * radius_))
          throw InputError("smoothing radius overlaps neighbouring sigma kinks");
      }
      for (std::size_t i = 0; i + 1 < pl->slopes.size(); ++i)
        if (pl->slopes[i] > pl->slopes[i + 1])
          throw InputError("sigma not convex: slopes decrease at breakpoint " + std::to_string(i));
    } else if (auto* s = std::get_if<SampledFunction>(&body_)) {
      if (s->grid().dim() != dim_) throw InputError("sampled sigma dimension mismatch");
      if (s->extended()) throw InputError("sampled sigma must be finite");
      if (radius_ > 0.0) throw InputError("smoothing applies to piecewise-linear sigma only");
    } else if (radius_ > 0.0) {
      throw InputError("smoothing applies to piecewise-linear sigma only");
    }
  }

  std::size_t dimension() const noexcept { return dim_; }
  const Body& body() const noexcept { return body_; }
  double smoothing_radius() const noexcept { return radius_; }

  double value(const Point& x) const {
    if (auto* s = std::get_if<SampledFunction>(&body_)) return interpolate(*s, x);
    double v = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) v += profile_value(x[d]);
    return v;
  }

  /// Gradient of sigma. Throws InputError at a kink where sigma is not differentiable.
  Point gradient(const Point& x) const {
    Point g(x.size());
    if (auto* s = std::get_if<SampledFunction>(&body_)) {
      for (std::size_t d = 0; d < x.size(); ++d) g[d] = sampled_slope(*s, x, d);
      return g;
    }
    for (std::size_t d = 0; d < x.size(); ++d) g[d] = profile_slope(x[d]);
    return g;
  }

  /// Exact max |slope| for piecewise-linear data; otherwise the largest absolute
  /// sampled slope on `grid`, inflated by 0.1%.
  double lipschitz_estimate(const Grid& grid) const {
    if (auto* pl = std::get_if<PiecewiseLinear>(&body_)) {
      double L = 0.0;
      for (double s : pl->slopes) L = std::max(L, std::fabs(s));
      return L;
    }
    const SampledFunction f = sample(grid);
    const auto& v = f.values();
    double L = 0.0;
    std::size_t stride = 1;
    for (std::size_t ax = grid.dim(); ax-- > 0;) {
      const std::size_t c = grid.count(ax);
      const double h = grid.spacing(ax);
      for (std::size_t k = 0; k < v.size(); ++k)
        if ((k / stride) % c + 1 < c) L = std::max(L, std::fabs(v[k + stride] - v[k]) / h);
      stride *= c;
    }
    return L * 1.001;
  }

  SampledFunction sample(const Grid& grid) const {
    if (grid.dim() != dim_) throw InputError("sigma grid dimension mismatch");
    return SampledFunction::sample(grid, [&](const Point& x) { return value(x); });
  }

  /// Throws InputError naming the first node where sampled second differences go negative.
  void validate_convex(const Grid& grid, double rel_tol = 1e-9) const {
    const SampledFunction f = sample(grid);
    double scale = 0.0;
    for (double v : f.values()) scale = std::max(scale, std::fabs(v));
    std::size_t bad = 0;
    if (!is_discretely_convex(f, rel_tol * (1.0 + scale), &bad))
      throw InputError("sigma not convex at node " + std::to_string(bad));
  }

private:
  double profile_value(double x) const {
    if (auto* p = std::get_if<Polynomial>(&body_)) return (*p)(x);
    const auto& pl = std::get<PiecewiseLinear>(body_);
    // Integrate slopes from 0 to x.
    double v = pl.offset;
    const auto& b = pl.breakpoints;
    const auto slope_at = [&](double z) {
      const auto it = std::upper_bound(b.begin(), b.end(), z);
      return pl.slopes[static_cast<std::size_t>(it - b.begin())];
    };
    if (x >= 0.0) {
      double z = 0.0;
      for (double bp : b) {
        if (bp <= z) continue;
        if (bp >= x) break;
        v += slope_at(z) * (bp - z);
        z = bp;
      }
      v += slope_at(z) * (x - z);
    } else {
      double z = 0.0;
      for (auto it = b.rbegin(); it != b.rend(); ++it) {
        const double bp = *it;
        if (bp >= z) continue;
        if (bp <= x) break;
        v -= slope_at(bp) * (z - bp);  // piece (bp, z] carries slope_at(bp)
        z = bp;
      }
      v -= slope_at(x) * (z - x);
    }
    if (radius_ > 0.0) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double u = x - b[i];
        if (std::fabs(u) < radius_) {
          // Quadratic blend on [b - r, b + r]; it lies above the kink.
          const double jump = pl.slopes[i + 1] - pl.slopes[i];
          v += jump * (u + radius_) * (u + radius_) / (4.0 * radius_) - jump * std::max(u, 0.0);
        }
      }
    }
    return v;
  }

  double profile_slope(double x) const {
    if (auto* p = std::get_if<Polynomial>(&body_)) return p->derivative()(x);
    const auto& pl = std::get<PiecewiseLinear>(body_);
    const auto& b = pl.breakpoints;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double u = x - b[i];
      if (radius_ > 0.0 && std::fabs(u) < radius_)
        return pl.slopes[i] + (pl.slopes[i + 1] - pl.slopes[i]) * (u + radius_) / (2.0 * radius_);
      if (radius_ == 0.0 && u == 0.0 && pl.slopes[i] != pl.slopes[i + 1])
        throw InputError("sigma is not differentiable at its kink x=" + std::to_string(b[i]));
    }
    const auto it = std::upper_bound(b.begin(), b.end(), x);
    return pl.slopes[static_cast<std::size_t>(it - b.begin())];
  }

  static double interpolate(const SampledFunction& s, const Point& x) {
    const Grid& g = s.grid();
    // Multilinear interpolation (clamped to the box).
    std::size_t base[kMaxDim];
    double w[kMaxDim];
    for (std::size_t d = 0; d < g.dim(); ++d) {
      const double u = (std::clamp(x[d], g.box()[d].lo, g.box()[d].hi) - g.box()[d].lo) / g.spacing(d);
      base[d] = std::min(static_cast<std::size_t>(u), g.count(d) - 2);
      w[d] = u - static_cast<double>(base[d]);
    }
    if (g.dim() == 1) return s[base[0]] + w[0] * (s[base[0] + 1] - s[base[0]]);
    const std::size_t n1 = g.count(1);
    const auto at = [&](std::size_t i, std::size_t j) { return s[i * n1 + j]; };
    const double a = at(base[0], base[1]) + w[1] * (at(base[0], base[1] + 1) - at(base[0], base[1]));
    const double b =
        at(base[0] + 1, base[1]) + w[1] * (at(base[0] + 1, base[1] + 1) - at(base[0] + 1, base[1]));
    return a + w[0] * (b - a);
  }

  static double sampled_slope(const SampledFunction& s, const Point& x, std::size_t d) {
    const Grid& g = s.grid();
    const double h = g.spacing(d);
    Point lo = x, hi = x;
    const double u = (x[d] - g.box()[d].lo) / h;
    const double frac = u - std::floor(u);
    if (frac == 0.0 && x[d] > g.box()[d].lo && x[d] < g.box()[d].hi) {
      lo[d] = x[d] - h;
      hi[d] = x[d] + h;
      const double left = (interpolate(s, x) - interpolate(s, lo)) / h;
      const double right = (interpolate(s, hi) - interpolate(s, x)) / h;
      if (std::fabs(left - right) > 1e-12 * (1.0 + std::fabs(left)))
        throw InputError("sampled sigma is not differentiable at a grid node");
      return left;
    }
    const double cell = std::clamp(std::floor(u), 0.0, static_cast<double>(g.count(d) - 2));
    lo[d] = g.box()[d].lo + cell * h;
    hi[d] = lo[d] + h;
    return (interpolate(s, hi) - interpolate(s, lo)) / h;
  }

  std::size_t dim_;
  Body body_;
  double radius_;
};

}  // namespace hjlayer

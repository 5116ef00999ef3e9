#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"

namespace hjlayer {

/// Default scale-aware tie tolerance for multiple maximizers.
inline double default_tie_tolerance(double value, double rel = 1e-9) {
  return rel * (1.0 + std::fabs(value));
}

/// Grid nodes attaining a discrete maximum within a tie tolerance.
struct ArgmaxSet {
  std::vector<Point> maximizers;
  std::vector<std::size_t> indices;
  double value = -kPlusInfinity;
  double diameter = 0.0;
};

struct ConjugateValue {
  double value = -kPlusInfinity;
  ArgmaxSet argmax;
};

namespace detail {

/// Indices of the lower convex hull of the points (x[i], f[i]) with finite f, in
/// increasing x. Collinear points are kept so that the hull contains every node
/// that can be a maximizer of <x, q> - f(x).
inline std::vector<std::size_t> lower_hull(std::span<const double> x, std::span<const double> f,
                                           bool keep_collinear) {
  std::vector<std::size_t> h;
  h.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (f[i] == kPlusInfinity) continue;
    while (h.size() >= 2) {
      const std::size_t o = h[h.size() - 2], a = h.back();
      const double cross = (x[a] - x[o]) * (f[i] - f[o]) - (f[a] - f[o]) * (x[i] - x[o]);
      if (cross < 0.0 || (!keep_collinear && cross == 0.0)) {
        h.pop_back();
      } else {
        break;
      }
    }
    h.push_back(i);
  }
  return h;
}

/// out[j] = max_i x[i] * q[j] - f[i] over finite f[i]; q ascending.
/// Linear time after the hull: the optimal hull vertex is nondecreasing in q.
inline void conjugate_line(std::span<const double> x, std::span<const double> f,
                           std::span<const double> q, std::span<double> out) {
  const auto hull = lower_hull(x, f, true);
  if (hull.empty()) {
    std::fill(out.begin(), out.end(), -kPlusInfinity);
    return;
  }
  std::size_t k = 0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double qj = q[j];
    double best = x[hull[k]] * qj - f[hull[k]];
    while (k + 1 < hull.size()) {
      const double next = x[hull[k + 1]] * qj - f[hull[k + 1]];
      if (next < best) break;
      best = next;
      ++k;
    }
    out[j] = best;
  }
}

}  // namespace detail

/// Discrete Legendre-Fenchel transform: g(q) = max over nodes x of <x, q> - f(x), with q
/// ranging over the nodes of `dual`. Linear time per line; 2D factorizes axis by axis.
inline SampledFunction legendre_transform(const SampledFunction& f, const Grid& dual) {
  const Grid& g = f.grid();
  if (g.dim() != dual.dim()) throw InputError("primal and dual grids differ in dimension");
  const auto& fv = f.values();

  if (g.dim() == 1) {
    const auto x = g.nodes(0);
    const auto q = dual.nodes(0);
    std::vector<double> out(q.size());
    detail::conjugate_line(x, fv, q, out);
    return SampledFunction(dual, std::move(out));
  }

  // 2D: inner(x0, q1) = max_{x1} x1 q1 - f(x0, x1); g(q0, q1) = max_{x0} x0 q0 + inner(x0, q1).
  const std::size_t n0 = g.count(0), n1 = g.count(1);
  const std::size_t m0 = dual.count(0), m1 = dual.count(1);
  const auto x0 = g.nodes(0), x1 = g.nodes(1);
  const auto q0 = dual.nodes(0), q1 = dual.nodes(1);

  std::vector<double> neg_inner(n0 * m1);  // row-major (x0, q1), stores -inner
  std::vector<double> row_out(m1);
  for (std::size_t i = 0; i < n0; ++i) {
    std::span<const double> row(fv.data() + i * n1, n1);
    detail::conjugate_line(x1, row, q1, row_out);
    for (std::size_t j = 0; j < m1; ++j)
      neg_inner[i * m1 + j] = row_out[j] == -kPlusInfinity ? kPlusInfinity : -row_out[j];
  }
  std::vector<double> out(m0 * m1);
  std::vector<double> column(n0), col_out(m0);
  for (std::size_t j = 0; j < m1; ++j) {
    for (std::size_t i = 0; i < n0; ++i) column[i] = neg_inner[i * m1 + j];
    detail::conjugate_line(x0, column, q0, col_out);
    for (std::size_t k = 0; k < m0; ++k) out[k * m1 + j] = col_out[k];
  }
  return SampledFunction(dual, std::move(out));
}

/// Greatest convex function below f on its (1D) grid. Nodes outside the convex hull of
/// the finite nodes stay +infinity.
inline SampledFunction lower_convex_envelope(const SampledFunction& f) {
  const Grid& g = f.grid();
  if (g.dim() != 1) throw InputError("lower_convex_envelope is one-dimensional");
  const auto x = g.nodes(0);
  const auto& fv = f.values();
  const auto hull = detail::lower_hull(x, fv, false);

  std::vector<double> out(fv.size(), kPlusInfinity);
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t a = hull[h], b = hull[h + 1];
    out[a] = fv[a];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double w = (x[i] - x[a]) / (x[b] - x[a]);
      out[i] = std::min(fv[i], fv[a] + w * (fv[b] - fv[a]));
    }
  }
  out[hull.back()] = fv[hull.back()];
  return SampledFunction(g, std::move(out), f.extended());
}

/// f** through an intermediate dual grid, returned on f's own grid. Rounding in the two
/// passes can lift a node a few ulps above f; those nodes are pinned back to f.
inline SampledFunction biconjugate(const SampledFunction& f, const Grid& dual) {
  auto v = legendre_transform(legendre_transform(f, dual), f.grid()).values();
  const auto& fv = f.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(v[i], fv[i]);
  return SampledFunction(f.grid(), std::move(v), f.extended());
}

/// max over nodes q of <x, q> - values[q], with every node within `tie_tol` of the max.
inline ConjugateValue max_affine(const Grid& grid, std::span<const double> values, const Point& x,
                                 std::optional<double> tie_tol = std::nullopt, double tie_rel = 1e-9) {
  const std::size_t n = grid.size();
  ConjugateValue r;
  double best = -kPlusInfinity;
  thread_local std::vector<double> scores;
  scores.resize(n);
  if (grid.dim() == 1) {
    const double lo = grid.box()[0].lo, h = grid.spacing(0), xx = x[0];
    for (std::size_t k = 0; k < n; ++k) {
      const double q = k + 1 == n ? grid.box()[0].hi : lo + static_cast<double>(k) * h;
      const double s = xx * q - values[k];
      scores[k] = s;
      if (s > best) best = s;
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      const double s = dot(x, grid.point(k)) - values[k];
      scores[k] = s;
      if (s > best) best = s;
    }
  }
  const double tol = tie_tol ? *tie_tol : default_tie_tolerance(best, tie_rel);
  r.value = best;
  r.argmax.value = best;
  for (std::size_t k = 0; k < n; ++k) {
    if (scores[k] >= best - tol) {
      r.argmax.indices.push_back(k);
      r.argmax.maximizers.push_back(grid.point(k));
    }
  }
  const auto& m = r.argmax.maximizers;
  if (grid.dim() == 1) {
    r.argmax.diameter = m.back()[0] - m.front()[0];
  } else {
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b)
        r.argmax.diameter = std::max(r.argmax.diameter, distance(m[a], m[b]));
  }
  return r;
}

/// sup over nodes q of <x, q> - f(q), plus the nodes within the tie tolerance.
inline ConjugateValue conjugate_eval_with_argmax(const SampledFunction& f, const Point& x,
                                                 std::optional<double> tie_tol = std::nullopt) {
  if (x.size() != f.grid().dim()) throw InputError("evaluation point dimension mismatch");
  return max_affine(f.grid(), f.values(), x, tie_tol);
}

/// True when discrete slopes are nondecreasing along every grid line (within tol).
/// On failure, `first_bad` receives the flat index of the offending centre node.
inline bool is_discretely_convex(const SampledFunction& f, double tol,
                                 std::size_t* first_bad = nullptr) {
  const Grid& g = f.grid();
  const auto& v = f.values();
  std::size_t stride = 1;
  for (std::size_t ax = g.dim(); ax-- > 0;) {
    const std::size_t c = g.count(ax);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::size_t idx = (k / stride) % c;
      if (idx == 0 || idx + 1 == c) continue;
      const double a = v[k - stride], b = v[k], d = v[k + stride];
      if (a == kPlusInfinity || b == kPlusInfinity || d == kPlusInfinity) continue;
      if (a - 2.0 * b + d < -tol) {
        if (first_bad) *first_bad = k;
        return false;
      }
    }
    stride *= c;
  }
  return true;
}

}  // namespace hjlayer

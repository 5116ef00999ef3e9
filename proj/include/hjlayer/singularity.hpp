#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjlayer/conjugate.hpp"
#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/solver.hpp"

namespace hjlayer {

struct SingularPoint {
  double t = 0.0;
  Point x;
  double diameter = 0.0;
};

/// Default singularity threshold: three dual-grid spacings.
inline double default_diam_threshold(const LayeredSolution& sol) { return 3.0 * sol.dual_grid().max_spacing(); }

/// (t, x) nodes where the l-set diameter exceeds `diam_threshold`, in (t, x) order.
inline std::vector<SingularPoint> detect_singular_points(const LayeredSolution& sol, std::span<const double> times,
                                                         const Grid& xgrid, std::optional<double> diam_threshold = {}) {
  const double thr = diam_threshold ? *diam_threshold : default_diam_threshold(sol);
  if (!(thr > sol.dual_grid().max_spacing()))
    throw InputError("singularity threshold must exceed the dual-grid spacing");
  std::vector<SingularPoint> out;
  const auto xs = xgrid.points();
  for (double t : times) {
    const SliceEvaluator u(sol, t);
    for (const auto& x : xs) {
      const auto r = u(x);
      if (r.argmax.diameter > thr) out.push_back({t, x, r.argmax.diameter});
    }
  }
  return out;
}

/// A point (p, q) of R x R^n: time and space components of a space-time gradient.
struct GradientPair {
  double p = 0.0;
  Point q;
};

struct GradientSets {
  std::vector<GradientPair> d_star;
  std::vector<GradientPair> d_minus;  // hull vertices; ordered (counter-clockwise) when n = 1
  bool boundary_minus_dstar_nonempty = false;
  bool hull_exact = true;  // false for the sampled hull used when n = 2
};

namespace detail {

inline double cross2(const GradientPair& o, const GradientPair& a, const GradientPair& b) {
  return (a.p - o.p) * (b.q[0] - o.q[0]) - (a.q[0] - o.q[0]) * (b.p - o.p);
}

inline double pair_distance(const GradientPair& a, const GradientPair& b) {
  double s = (a.p - b.p) * (a.p - b.p);
  for (std::size_t d = 0; d < a.q.size(); ++d) s += (a.q[d] - b.q[d]) * (a.q[d] - b.q[d]);
  return std::sqrt(s);
}

/// Convex hull in the (p, q) plane, counter-clockwise, collinear points dropped.
/// Degenerate inputs yield one point or the two segment endpoints.
inline std::vector<GradientPair> planar_hull(std::vector<GradientPair> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.p < b.p || (a.p == b.p && a.q[0] < b.q[0]);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a.p == b.p && a.q[0] == b.q[0]; }),
            pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<GradientPair> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross2(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Edges of the hull polygon (a single edge for a segment, none for a point).
inline std::vector<std::pair<GradientPair, GradientPair>> hull_edges(const std::vector<GradientPair>& v) {
  std::vector<std::pair<GradientPair, GradientPair>> e;
  if (v.size() == 2) e.push_back({v[0], v[1]});
  if (v.size() > 2)
    for (std::size_t i = 0; i < v.size(); ++i) e.push_back({v[i], v[(i + 1) % v.size()]});
  return e;
}

inline GradientPair lerp(const GradientPair& a, const GradientPair& b, double s) {
  GradientPair r{a.p + s * (b.p - a.p), a.q + s * (b.q - a.q)};
  return r;
}

}  // namespace detail

/// D*u(t0, x0) = {(-H(t0, q), q) : q in l(t0, x0)} and its convex hull D^-u.
///
/// The boundary flag reports whether the hull boundary (in R^{n+1}) has points that are
/// not reachable gradients: an edge sample farther than `cover_tol` (default 1.5 dual
/// spacings) from every D* member. For n = 2 the hull is not reduced; D^- lists the
/// D* points and the flag is set when two members are farther apart than cover_tol.
inline GradientSets reachable_gradients(const LayeredSolution& sol, double t0, const Point& x0,
                                        std::optional<double> tie_tol = std::nullopt,
                                        std::optional<double> cover_tol = std::nullopt) {
  const auto r = sol.eval(t0, x0, tie_tol);
  const LayeredHamiltonian& H = sol.hamiltonian();
  const double cover = cover_tol ? *cover_tol : 1.5 * sol.dual_grid().max_spacing();
  GradientSets gs;
  for (const auto& q : r.argmax.maximizers) gs.d_star.push_back({-H.eval_H(t0, q), q});

  if (x0.size() == 1) {
    gs.d_minus = detail::planar_hull(gs.d_star);
    for (const auto& [a, b] : detail::hull_edges(gs.d_minus)) {
      for (int s = 0; s <= 100 && !gs.boundary_minus_dstar_nonempty; ++s) {
        const GradientPair z = detail::lerp(a, b, s / 100.0);
        double nearest = kPlusInfinity;
        for (const auto& d : gs.d_star) nearest = std::min(nearest, detail::pair_distance(z, d));
        if (nearest > cover) gs.boundary_minus_dstar_nonempty = true;
      }
    }
    return gs;
  }
  gs.hull_exact = false;
  gs.d_minus = gs.d_star;
  for (std::size_t a = 0; a < gs.d_star.size() && !gs.boundary_minus_dstar_nonempty; ++a)
    for (std::size_t b = a + 1; b < gs.d_star.size(); ++b)
      if (detail::pair_distance(gs.d_star[a], gs.d_star[b]) > cover) {
        gs.boundary_minus_dstar_nonempty = true;
        break;
      }
  return gs;
}

/// Whether z lies in the (planar) hull of `hull` within tol. n = 1 only.
inline bool hull_contains(const std::vector<GradientPair>& hull, const GradientPair& z, double tol = 1e-8) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return detail::pair_distance(hull[0], z) <= tol;
  if (hull.size() == 2) {
    const auto& a = hull[0];
    const auto& b = hull[1];
    const double len = detail::pair_distance(a, b);
    const double s = std::clamp(((z.p - a.p) * (b.p - a.p) + (z.q[0] - a.q[0]) * (b.q[0] - a.q[0])) / (len * len), 0.0, 1.0);
    return detail::pair_distance(detail::lerp(a, b, s), z) <= tol;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double len = detail::pair_distance(a, b);
    if (detail::cross2(a, b, z) < -tol * len) return false;
  }
  return true;
}

struct PropagationReport {
  GradientSets sets;
  double alpha = 0.0;           // max of g(p, q) = p + H(t0, q) over D^-u
  GradientPair alpha_at;
  bool segment_in_level_set = false;  // some hull edge has |g| <= 1e-9 at all 101 samples
  bool singleton = true;
  bool predicted = false;
};

/// Propagation test at a singular point: predicted iff alpha > 0, no hull edge lies in
/// {g = 0}, and D^-u is not a singleton.
inline PropagationReport check_propagation_condition(const LayeredSolution& sol, double t0, const Point& x0,
                                                     std::optional<double> tie_tol = std::nullopt) {
  PropagationReport rep;
  rep.sets = reachable_gradients(sol, t0, x0, tie_tol);
  const LayeredHamiltonian& H = sol.hamiltonian();
  const auto g = [&](const GradientPair& z) { return z.p + H.eval_H(t0, z.q); };

  const auto& hull = rep.sets.d_minus;
  rep.singleton = hull.size() <= 1;
  rep.alpha = -kPlusInfinity;
  for (const auto& v : hull) {
    const double gv = g(v);
    if (gv > rep.alpha) {
      rep.alpha = gv;
      rep.alpha_at = v;
    }
  }
  std::vector<std::pair<GradientPair, GradientPair>> edges;
  if (x0.size() == 1) {
    edges = detail::hull_edges(hull);
  } else {
    for (std::size_t a = 0; a < hull.size(); ++a)
      for (std::size_t b = a + 1; b < hull.size(); ++b) edges.push_back({hull[a], hull[b]});
  }
  for (const auto& [a, b] : edges) {
    bool all_zero = true;
    for (int s = 0; s <= 100; ++s) {
      const GradientPair z = detail::lerp(a, b, s / 100.0);
      const double gz = g(z);
      if (gz > rep.alpha) {
        rep.alpha = gz;
        rep.alpha_at = z;
      }
      if (std::fabs(gz) > 1e-9) all_zero = false;
    }
    if (all_zero) rep.segment_in_level_set = true;
  }
  rep.predicted = rep.alpha > 0.0 && !rep.segment_in_level_set && !rep.singleton;
  return rep;
}

enum class ArcDirection { Forward, Backward };

struct ArcSample {
  double t = 0.0;
  double x = 0.0;
  double diameter = 0.0;  // singularity certificate
};

struct SingularArc {
  double t0 = 0.0;
  double x0 = 0.0;
  ArcDirection direction = ArcDirection::Backward;
  std::vector<ArcSample> samples;  // anchor first
  double lipschitz = 0.0;          // max |dx| / |dt| between consecutive samples
  std::string terminated_reason;
};

struct ArcOptions {
  double dt = 0.05;
  std::size_t max_steps = 1000;
  std::optional<double> diam_threshold;
  double dx = 0.01;                 // line-search resolution in x
  std::size_t window_steps = 50;    // search |x - x_prev| <= window_steps * dx
};

namespace detail {

inline double argmax_lo(const ConjugateValue& r) {
  double m = kPlusInfinity;
  for (const auto& q : r.argmax.maximizers) m = std::min(m, q[0]);
  return m;
}

inline double argmax_hi(const ConjugateValue& r) {
  double m = -kPlusInfinity;
  for (const auto& q : r.argmax.maximizers) m = std::max(m, q[0]);
  return m;
}

/// Bisects [a, b] towards a point whose l-set diameter exceeds thr, keeping a sub-bracket
/// across which the maximizers jump by more than thr. The l-set is monotone in x.
inline std::optional<ArcSample> bisect_jump(const SliceEvaluator& u, double t, double a, double b, double thr) {
  auto ra = u(Point{a}), rb = u(Point{b});
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    if (!(argmax_lo(rb) - argmax_hi(ra) > thr)) return std::nullopt;
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    auto rm = u(Point{m});
    if (rm.argmax.diameter > thr) return ArcSample{t, m, rm.argmax.diameter};
    if (argmax_lo(rm) - argmax_hi(ra) >= argmax_lo(rb) - argmax_hi(rm)) {
      b = m;
      rb = std::move(rm);
    } else {
      a = m;
      ra = std::move(rm);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Follows singular points from an anchor in one time direction (1D). At each step the
/// x nearest the previous sample (searched outward in dx increments) whose l-set diameter
/// exceeds the threshold is taken; between probes, a jump of the maximizers larger than
/// the threshold is bisected down to the tie point. Tracing stops when none is found, at
/// t = 0 or T, or after max_steps.
inline SingularArc trace_singular_arc(const LayeredSolution& sol, double t0, double x0, ArcDirection dir,
                                      const ArcOptions& opt = {}) {
  if (sol.dual_grid().dim() != 1) throw InputError("arc tracing is one-dimensional");
  if (!(opt.dt > 0.0) || !(opt.dx > 0.0)) throw InputError("arc steps must be positive");
  const double thr = opt.diam_threshold ? *opt.diam_threshold : default_diam_threshold(sol);
  const auto anchor = sol.eval(t0, Point{x0});
  if (!(anchor.argmax.diameter > thr))
    throw InputError("anchor is not a singular point (l-set diameter " + std::to_string(anchor.argmax.diameter) + ")");

  SingularArc arc;
  arc.t0 = t0;
  arc.x0 = x0;
  arc.direction = dir;
  arc.samples.push_back({t0, x0, anchor.argmax.diameter});
  const double T = sol.horizon();
  const double sgn = dir == ArcDirection::Forward ? 1.0 : -1.0;

  double t = t0, x = x0;
  for (std::size_t step = 0; step < opt.max_steps; ++step) {
    if ((dir == ArcDirection::Backward && t <= 0.0) || (dir == ArcDirection::Forward && t >= T)) {
      arc.terminated_reason = "reached the time boundary";
      return arc;
    }
    const double tn = std::clamp(t + sgn * opt.dt, 0.0, T);
    const SliceEvaluator u(sol, tn);
    std::optional<ArcSample> found;
    for (std::size_t k = 0; k <= opt.window_steps && !found; ++k) {
      for (double s : {1.0, -1.0}) {
        if (k == 0 && s < 0.0) continue;
        const double xc = x + s * static_cast<double>(k) * opt.dx;
        const auto r = u(Point{xc});
        if (r.argmax.diameter > thr) {
          found = ArcSample{tn, xc, r.argmax.diameter};
          break;
        }
        if (k == 0) continue;
        const double xp = x + s * static_cast<double>(k - 1) * opt.dx;
        if ((found = detail::bisect_jump(u, tn, std::min(xp, xc), std::max(xp, xc), thr))) break;
      }
    }
    if (!found) {
      arc.terminated_reason = "no singular point within the search window";
      return arc;
    }
    arc.lipschitz = std::max(arc.lipschitz, std::fabs(found->x - x) / std::fabs(tn - t));
    arc.samples.push_back(*found);
    t = tn;
    x = found->x;
  }
  arc.terminated_reason = "max_steps reached";
  return arc;
}

}  // namespace hjlayer

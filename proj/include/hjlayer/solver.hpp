#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hjlayer/conjugate.hpp"
#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/hamiltonian.hpp"
#include "hjlayer/initial_data.hpp"

namespace hjlayer {

struct SpaceTimePoint {
  double t = 0.0;
  Point x;
};

struct BuildOptions {
  bool validate_hamiltonian = true;
  // Intermediate slope grid for the 2D biconjugate; 0 means 2 * count - 1 per axis.
  std::size_t intermediate_counts = 0;
  double tie_rel = 1e-9;
};

/// Per-layer kernels phi_i on a fixed dual grid; u(t, x) = (phi_i + int_{t_i}^t H)^*(x).
/// Immutable after build.
class LayeredSolution {
public:
  LayeredSolution(HamiltonianPtr ham, InitialData sigma, Grid dual, std::vector<SampledFunction> kernels,
                  double lipschitz, double tie_rel)
      : ham_(std::move(ham)),
        sigma_(std::move(sigma)),
        dual_(std::move(dual)),
        kernels_(std::move(kernels)),
        lipschitz_(lipschitz),
        tie_rel_(tie_rel) {
    build_caches();
  }

  const LayeredHamiltonian& hamiltonian() const noexcept { return *ham_; }
  const HamiltonianPtr& hamiltonian_ptr() const noexcept { return ham_; }
  const InitialData& sigma() const noexcept { return sigma_; }
  const Grid& dual_grid() const noexcept { return dual_; }
  const std::vector<SampledFunction>& kernels() const noexcept { return kernels_; }
  const std::vector<double>& breakpoints() const noexcept { return ham_->breakpoints(); }
  double horizon() const noexcept { return ham_->horizon(); }
  double lipschitz() const noexcept { return lipschitz_; }
  double tie_rel() const noexcept { return tie_rel_; }
  std::size_t layer_of(double t) const { return ham_->layer_of(t); }

  /// phi_layer(q) + int_{t_layer}^t H(tau, q) dtau on the dual nodes.
  std::vector<double> kernel_values(std::size_t layer, double t) const {
    const double start = breakpoints()[layer];
    if (t < start) throw DomainError("time precedes the layer start");
    std::vector<double> out(kernels_[layer].values());
    if (t == start) return out;
    std::vector<double> integral(out.size(), 0.0);
    add_integral(layer, start, t, integral);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out[k] + integral[k];
    return out;
  }

  /// Kernel used for evaluation at t. At an interior breakpoint the incoming layer is used:
  /// both give the same value, but only the unconvexified kernel keeps the true maximizer set.
  std::size_t eval_layer(double t) const {
    const std::size_t i = layer_of(t);
    return i > 0 && t == breakpoints()[i] ? i - 1 : i;
  }

  std::vector<double> kernel_values(double t) const { return kernel_values(eval_layer(t), t); }

  /// sigma^* + int_0^t H: the single-kernel (global Hopf) candidate.
  std::vector<double> hopf_kernel_values(double t) const {
    std::vector<double> out(kernels_[0].values());
    if (t == 0.0) return out;
    ham_->layer_of(t);  // domain check
    std::vector<double> total(out.size(), 0.0), piece(out.size());
    const auto& bp = breakpoints();
    for (std::size_t i = 0; i < kernels_.size() && bp[i] < t; ++i) {
      const double b = std::min(t, bp[i + 1]);
      std::fill(piece.begin(), piece.end(), 0.0);
      add_integral(i, bp[i], b, piece);
      for (std::size_t k = 0; k < out.size(); ++k) total[k] += piece[k];
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out[k] + total[k];
    return out;
  }

  ConjugateValue eval(double t, const Point& x, std::optional<double> tie_tol = std::nullopt) const {
    const auto kv = kernel_values(t);
    return max_affine(dual_, kv, x, tie_tol, tie_rel_);
  }

  /// Evaluation with a prescribed layer's kernel (used for two-sided gluing checks).
  ConjugateValue eval_in_layer(std::size_t layer, double t, const Point& x) const {
    const auto kv = kernel_values(layer, t);
    return max_affine(dual_, kv, x, std::nullopt, tie_rel_);
  }

  ConjugateValue eval_hopf_global(double t, const Point& x,
                                  std::optional<double> tie_tol = std::nullopt) const {
    const auto kv = hopf_kernel_values(t);
    return max_affine(dual_, kv, x, tie_tol, tie_rel_);
  }

private:
  struct LayerCache {
    bool polynomial = false;
    std::vector<Polynomial> antiderivatives;  // per term
    std::vector<std::vector<double>> h_nodes;  // per term, per dual node
    Polynomial k_antiderivative;
  };

  void build_caches() {
    const auto pts = dual_.points();
    caches_.resize(ham_->layer_count());
    for (std::size_t i = 0; i < ham_->layer_count(); ++i) {
      const auto& L = ham_->layers()[i];
      auto& c = caches_[i];
      if (!L.is_polynomial()) continue;
      c.polynomial = true;
      for (const auto& term : L.polynomial().terms) {
        c.antiderivatives.push_back(term.g.antiderivative());
        std::vector<double> hv(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) hv[k] = term.h.value(pts[k]);
        c.h_nodes.push_back(std::move(hv));
      }
      c.k_antiderivative = L.polynomial().k.antiderivative();
    }
  }

  /// out[k] += int_a^b H_layer(tau, q_k), same arithmetic as LayeredHamiltonian::integral_layer.
  void add_integral(std::size_t layer, double a, double b, std::vector<double>& out) const {
    const auto& c = caches_[layer];
    if (!c.polynomial) {
      for (std::size_t k = 0; k < out.size(); ++k)
        out[k] += ham_->integral_layer(layer, a, b, dual_.point(k));
      return;
    }
    const double dk = c.k_antiderivative(b) - c.k_antiderivative(a);
    std::vector<double> dg(c.antiderivatives.size());
    for (std::size_t j = 0; j < dg.size(); ++j) dg[j] = c.antiderivatives[j](b) - c.antiderivatives[j](a);
    for (std::size_t k = 0; k < out.size(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < dg.size(); ++j) s += dg[j] * c.h_nodes[j][k];
      out[k] += s + dk;
    }
  }

  HamiltonianPtr ham_;
  InitialData sigma_;
  Grid dual_;
  std::vector<SampledFunction> kernels_;
  double lipschitz_;
  double tie_rel_;
  std::vector<LayerCache> caches_;
};

/// Evaluates u(t, .) for one fixed t at many x with a single kernel computation.
class SliceEvaluator {
public:
  SliceEvaluator(const LayeredSolution& sol, double t, bool hopf_global = false)
      : grid_(&sol.dual_grid()),
        t_(t),
        tie_rel_(sol.tie_rel()),
        kernel_(hopf_global ? sol.hopf_kernel_values(t) : sol.kernel_values(t)) {}

  double t() const noexcept { return t_; }
  std::span<const double> kernel() const noexcept { return kernel_; }

  ConjugateValue operator()(const Point& x, std::optional<double> tie_tol = std::nullopt) const {
    return max_affine(*grid_, kernel_, x, tie_tol, tie_rel_);
  }

  double value(const Point& x) const {
    const std::size_t n = kernel_.size();
    double best = -kPlusInfinity;
    if (grid_->dim() == 1) {
      const double lo = grid_->box()[0].lo, h = grid_->spacing(0), xx = x[0];
      for (std::size_t k = 0; k < n; ++k) {
        const double q = k + 1 == n ? grid_->box()[0].hi : lo + static_cast<double>(k) * h;
        best = std::max(best, xx * q - kernel_[k]);
      }
      return best;
    }
    for (std::size_t k = 0; k < n; ++k) best = std::max(best, dot(x, grid_->point(k)) - kernel_[k]);
    return best;
  }

private:
  const Grid* grid_;
  double t_;
  double tie_rel_;
  std::vector<double> kernel_;
};

/// Builds the layered solution: phi_0 = sigma^*, phi_i = (phi_{i-1} + int H)^** on the
/// dual grid. sigma must be convex on `sigma_grid`.
inline LayeredSolution build_layered_solution(const InitialData& sigma, HamiltonianPtr ham,
                                              const Grid& dual, const Grid& sigma_grid,
                                              const BuildOptions& opts = {}) {
  if (sigma.dimension() != ham->dimension() || dual.dim() != ham->dimension() ||
      sigma_grid.dim() != ham->dimension())
    throw InputError("sigma, Hamiltonian and grids must share one dimension");
  sigma.validate_convex(sigma_grid);
  if (opts.validate_hamiltonian) ham->validate(StructureCheck{dual});

  std::vector<SampledFunction> kernels;
  kernels.push_back(legendre_transform(sigma.sample(sigma_grid), dual));
  double L = 0.0;
  for (const auto& iv : dual.box()) L = std::max({L, std::fabs(iv.lo), std::fabs(iv.hi)});

  // Provisional solution used only to reuse the integral caches while chaining.
  const auto& bp = ham->breakpoints();
  for (std::size_t i = 1; i < ham->layer_count(); ++i) {
    LayeredSolution partial(ham, sigma, dual, kernels, L, opts.tie_rel);
    const std::vector<double> w = partial.kernel_values(i - 1, bp[i]);
    SampledFunction wf(dual, w);
    if (dual.dim() == 1) {
      kernels.push_back(lower_convex_envelope(wf));
    } else {
      // Intermediate slopes: bounded by the discrete gradient range of w.
      std::vector<Interval> box;
      std::vector<std::size_t> counts;
      const auto& v = wf.values();
      std::size_t stride = 1;
      std::vector<double> slope_bound(dual.dim(), 0.0);
      for (std::size_t ax = dual.dim(); ax-- > 0;) {
        const std::size_t c = dual.count(ax);
        for (std::size_t k = 0; k < v.size(); ++k)
          if ((k / stride) % c + 1 < c)
            slope_bound[ax] = std::max(slope_bound[ax], std::fabs(v[k + stride] - v[k]) / dual.spacing(ax));
        stride *= c;
      }
      for (std::size_t ax = 0; ax < dual.dim(); ++ax) {
        const double s = std::max(slope_bound[ax], 1e-12);
        box.push_back({-s, s});
        counts.push_back(opts.intermediate_counts ? opts.intermediate_counts : 2 * dual.count(ax) - 1);
      }
      kernels.push_back(biconjugate(wf, Grid(box, counts)));
    }
  }
  return LayeredSolution(std::move(ham), sigma, dual, std::move(kernels), L, opts.tie_rel);
}

// ---------------------------------------------------------------------------------------
// Verification predicates

struct SemiconvexityTriple {
  SpaceTimePoint y1;
  SpaceTimePoint y2;
  double lambda = 0.5;
};

struct SemiconvexityViolation {
  SpaceTimePoint y1;
  SpaceTimePoint y2;
  double lambda = 0.0;
  double excess = 0.0;  // defect minus the allowed quadratic bound
};

struct SemiconvexityReport {
  double C = 0.0;
  std::size_t samples_tested = 0;
  std::vector<SemiconvexityViolation> violations;
  double max_excess = -kPlusInfinity;  // over all tested triples, violations or not
};

struct SemiconvexityOptions {
  std::size_t samples = 100000;
  double C = 0.0;
  std::uint64_t seed = 0;
  Interval time{0.0, 1.0};
  std::vector<Interval> space;
  double rel_tol = 1e-7;
  std::vector<SemiconvexityTriple> extra;  // tested in addition to the random draws
};

/// Uniform double in [0, 1) from the top 53 bits; reproducible across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Tests u(l y1 + (1-l) y2) - l u(y1) - (1-l) u(y2) <= l (1-l) (C/2) |y1 - y2|^2 + tol
/// on random triples in time x space, plus any explicit triples.
template <class U>
  requires std::is_invocable_r_v<double, U&, double, const Point&>
SemiconvexityReport check_semiconvexity(U&& u, const SemiconvexityOptions& opt) {
  if (opt.C < 0.0) throw InputError("semiconvexity constant must be nonnegative");
  SemiconvexityReport rep;
  rep.C = opt.C;
  const std::size_t dim = opt.space.size();

  const auto test = [&](const SpaceTimePoint& y1, const SpaceTimePoint& y2, double lam) {
    SpaceTimePoint y0;
    y0.t = lam * y1.t + (1.0 - lam) * y2.t;
    y0.x = lam * y1.x + (1.0 - lam) * y2.x;
    const double u0 = u(y0.t, y0.x), u1 = u(y1.t, y1.x), u2 = u(y2.t, y2.x);
    double d2 = (y1.t - y2.t) * (y1.t - y2.t);
    for (std::size_t d = 0; d < y1.x.size(); ++d) d2 += (y1.x[d] - y2.x[d]) * (y1.x[d] - y2.x[d]);
    const double defect = u0 - lam * u1 - (1.0 - lam) * u2;
    const double bound = lam * (1.0 - lam) * 0.5 * opt.C * d2;
    const double tol = opt.rel_tol * (1.0 + std::max({std::fabs(u0), std::fabs(u1), std::fabs(u2)}));
    const double excess = defect - bound;
    ++rep.samples_tested;
    rep.max_excess = std::max(rep.max_excess, excess);
    if (excess > tol) rep.violations.push_back({y1, y2, lam, excess});
  };

  std::mt19937_64 rng(opt.seed);
  const auto draw = [&]() {
    SpaceTimePoint y;
    y.t = opt.time.lo + opt.time.width() * unit_uniform(rng);
    y.x = Point(dim);
    for (std::size_t d = 0; d < dim; ++d) y.x[d] = opt.space[d].lo + opt.space[d].width() * unit_uniform(rng);
    return y;
  };
  for (std::size_t s = 0; s < opt.samples; ++s) {
    const SpaceTimePoint y1 = draw();
    const SpaceTimePoint y2 = draw();
    const double lam = unit_uniform(rng);
    test(y1, y2, lam);
  }
  for (const auto& tr : opt.extra) test(tr.y1, tr.y2, tr.lambda);
  return rep;
}

inline SemiconvexityReport check_semiconvexity(const LayeredSolution& sol, SemiconvexityOptions opt) {
  return check_semiconvexity(
      [&](double t, const Point& x) { return SliceEvaluator(sol, t).value(x); },
      opt);
}

struct ResidualSample {
  double t = 0.0;
  Point x;
  double residual = 0.0;
  bool included = false;
};

struct ResidualReport {
  std::vector<ResidualSample> samples;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  std::size_t included = 0;
  SpaceTimePoint argmax;
};

/// |u_t + H(t, D_x u)| by centered differences at every (t, x) node farther than
/// `exclusion_radius` (Euclidean in (t, x)) from all listed singular points. Differences
/// become one-sided at t = 0 and t = T.
inline ResidualReport check_pde_residual(const LayeredSolution& sol, std::span<const double> times,
                                         const Grid& xgrid, double fd_step, double exclusion_radius,
                                         std::span<const SpaceTimePoint> singular = {}) {
  if (!(fd_step > 0.0)) throw InputError("fd_step must be positive");
  if (exclusion_radius < 0.0) throw InputError("exclusion radius must be nonnegative");
  const LayeredHamiltonian& H = sol.hamiltonian();
  const double T = sol.horizon();
  const auto xs = xgrid.points();
  ResidualReport rep;
  double sum = 0.0;

  for (double t : times) {
    const double ta = std::max(0.0, t - fd_step), tb = std::min(T, t + fd_step);
    const SliceEvaluator u_mid(sol, t), u_lo(sol, ta), u_hi(sol, tb);
    for (const Point& x : xs) {
      ResidualSample s{t, x, 0.0, true};
      for (const auto& sp : singular) {
        double d2 = (sp.t - t) * (sp.t - t);
        for (std::size_t d = 0; d < x.size(); ++d) d2 += (sp.x[d] - x[d]) * (sp.x[d] - x[d]);
        if (d2 <= exclusion_radius * exclusion_radius) {
          s.included = false;
          break;
        }
      }
      if (s.included) {
        const double ut = (u_hi.value(x) - u_lo.value(x)) / (tb - ta);
        Point grad(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) {
          Point xp = x, xm = x;
          xp[d] += fd_step;
          xm[d] -= fd_step;
          grad[d] = (u_mid.value(xp) - u_mid.value(xm)) / (2.0 * fd_step);
        }
        s.residual = std::fabs(ut + H.eval_H(t, grad));
        ++rep.included;
        sum += s.residual;
        if (s.residual > rep.max_residual) {
          rep.max_residual = s.residual;
          rep.argmax = {t, x};
        }
      }
      rep.samples.push_back(std::move(s));
    }
  }
  rep.mean_residual = rep.included ? sum / static_cast<double>(rep.included) : 0.0;
  return rep;
}

/// Largest two-sided disagreement at interior breakpoints over the x nodes.
inline double gluing_error(const LayeredSolution& sol, const Grid& xgrid) {
  double worst = 0.0;
  const auto& bp = sol.breakpoints();
  const auto xs = xgrid.points();
  for (std::size_t i = 1; i + 1 < bp.size(); ++i) {
    const auto left = sol.kernel_values(i - 1, bp[i]);
    const auto right = sol.kernel_values(i, bp[i]);
    for (const auto& x : xs) {
      const double a = max_affine(sol.dual_grid(), left, x, 0.0).value;
      const double b = max_affine(sol.dual_grid(), right, x, 0.0).value;
      worst = std::max(worst, std::fabs(a - b));
    }
  }
  return worst;
}

}  // namespace hjlayer

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/polynomial.hpp"
#include "hjlayer/quadrature.hpp"

namespace hjlayer {

enum class LayerKind { ConvexInP, ConcaveInP, Separable };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::ConvexInP: return "convex";
    case LayerKind::ConcaveInP: return "concave";
    case LayerKind::Separable: return "separable";
  }
  return "?";
}

/// A 1D profile sampled on a uniform grid, linearly interpolated between nodes.
struct SampledProfile {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> values;

  double spacing() const { return (hi - lo) / static_cast<double>(values.size() - 1); }

  double value(double p) const {
    if (p < lo || p > hi) throw DomainError("momentum outside the sampled profile range");
    const double s = (p - lo) / spacing();
    const std::size_t i = std::min(static_cast<std::size_t>(s), values.size() - 2);
    const double w = s - static_cast<double>(i);
    return values[i] + w * (values[i + 1] - values[i]);
  }

  /// Centered difference at the nearest node; one-sided at the two end nodes.
  double slope(double p, bool& one_sided) const {
    if (p < lo || p > hi) throw DomainError("momentum outside the sampled profile range");
    const std::size_t n = values.size();
    const auto i = static_cast<std::size_t>(std::lround((p - lo) / spacing()));
    const double h = spacing();
    if (i == 0) {
      one_sided = true;
      return (values[1] - values[0]) / h;
    }
    if (i >= n - 1) {
      one_sided = true;
      return (values[n - 1] - values[n - 2]) / h;
    }
    return (values[i + 1] - values[i - 1]) / (2.0 * h);
  }

  friend bool operator==(const SampledProfile&, const SampledProfile&) = default;
};

/// h(p) = sum over coordinates d of h_d(p_d). A single polynomial (or sampled profile)
/// is applied to every coordinate; otherwise one polynomial per coordinate.
class Profile {
public:
  Profile() = default;
  Profile(Polynomial shared) : body_(std::vector<Polynomial>{std::move(shared)}) {}
  explicit Profile(std::vector<Polynomial> per_axis) : body_(std::move(per_axis)) {}
  explicit Profile(SampledProfile sampled) : body_(std::move(sampled)) {}

  bool is_polynomial() const { return std::holds_alternative<std::vector<Polynomial>>(body_); }
  const std::vector<Polynomial>& polynomials() const {
    return std::get<std::vector<Polynomial>>(body_);
  }
  const SampledProfile& sampled() const { return std::get<SampledProfile>(body_); }

  double value(const Point& p) const {
    double s = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) s += axis_value(d, p[d]);
    return s;
  }

  Point gradient(const Point& p, bool& one_sided) const {
    Point g(p.size());
    for (std::size_t d = 0; d < p.size(); ++d) {
      if (is_polynomial()) {
        g[d] = axis_poly(d).derivative()(p[d]);
      } else {
        g[d] = sampled().slope(p[d], one_sided);
      }
    }
    return g;
  }

  /// Coordinates of axis d where h_d may attain its extrema over [lo, hi].
  std::vector<double> axis_extremum_candidates(std::size_t d, double lo, double hi) const {
    if (is_polynomial()) return extremum_candidates(axis_poly(d), lo, hi);
    std::vector<double> out{lo, hi};
    const auto& s = sampled();
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double x = s.lo + static_cast<double>(i) * s.spacing();
      if (x > lo && x < hi) out.push_back(x);
    }
    return out;
  }

  friend bool operator==(const Profile&, const Profile&) = default;

private:
  const Polynomial& axis_poly(std::size_t d) const {
    const auto& v = polynomials();
    return v.size() == 1 ? v[0] : v.at(d);
  }
  double axis_value(std::size_t d, double x) const {
    if (is_polynomial()) return axis_poly(d)(x);
    return sampled().value(x);
  }

  std::variant<std::vector<Polynomial>, SampledProfile> body_ = std::vector<Polynomial>{};
};

/// One product g(t) h(p) of a separable Hamiltonian.
struct SeparableTerm {
  Polynomial g;
  Profile h;
  friend bool operator==(const SeparableTerm&, const SeparableTerm&) = default;
};

/// H(t, p) = sum_j g_j(t) h_j(p) + k(t) with polynomial g_j and k.
struct PolynomialForm {
  std::vector<SeparableTerm> terms;
  Polynomial k;
  friend bool operator==(const PolynomialForm&, const PolynomialForm&) = default;
};

/// General C1 Hamiltonian supplied as callbacks. `partial_t` and `integral` are optional;
/// missing ones fall back to centered differences and adaptive Simpson quadrature.
struct CallbackForm {
  std::function<double(double, const Point&)> value;
  std::function<Point(double, const Point&)> grad_p;
  std::function<double(double, const Point&)> partial_t;
  std::function<double(double, double, const Point&)> integral;
};

struct LayerForm {
  LayerKind kind = LayerKind::Separable;
  std::variant<PolynomialForm, CallbackForm> body;

  bool is_polynomial() const { return std::holds_alternative<PolynomialForm>(body); }
  const PolynomialForm& polynomial() const { return std::get<PolynomialForm>(body); }
  const CallbackForm& callback() const { return std::get<CallbackForm>(body); }
};

/// Sign-changing roots of g in (0, T); these are the layer breakpoints of g(t)h(p)+k(t).
/// A zero polynomial yields no breakpoints (H = k(t) is both convex and concave).
inline std::vector<double> detect_breakpoints(const Polynomial& g, double horizon) {
  return sign_change_roots(g, 0.0, horizon);
}

struct SupEstimate {
  double value = 0.0;
  bool exact = false;
  double mesh = 0.0;  // sampling mesh used when not exact (max of time and momentum steps)
};

struct GradientValue {
  Point value;
  bool one_sided = false;
};

/// Validation settings for layer structure checks.
struct StructureCheck {
  Grid momentum_grid;               // sampled p values
  std::size_t time_samples = 9;     // per layer, endpoints included
  double rel_tol = 1e-9;
};

/// Time-layered Hamiltonian H(t, p) on [0, T] x R^n. Immutable after construction.
class LayeredHamiltonian {
public:
  LayeredHamiltonian(std::size_t dimension, std::vector<double> breakpoints,
                     std::vector<LayerForm> layers)
      : dim_(dimension), breakpoints_(std::move(breakpoints)), layers_(std::move(layers)) {
    if (dim_ < 1 || dim_ > kMaxDim) throw InputError("dimension must be 1 or 2");
    if (layers_.empty()) throw InputError("at least one layer is required");
    if (breakpoints_.size() != layers_.size() + 1)
      throw InputError("need exactly one more breakpoint than layers");
    if (breakpoints_.front() != 0.0) throw InputError("first breakpoint must be 0");
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] < breakpoints_[i + 1]))
        throw InputError("breakpoints must be strictly increasing");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& L = layers_[i];
      if (L.is_polynomial()) {
        for (const auto& term : L.polynomial().terms) {
          if (term.h.is_polynomial() && term.h.polynomials().size() != 1 &&
              term.h.polynomials().size() != dim_)
            throw StructuralError(i, "profile needs one polynomial or one per coordinate");
          if (!term.h.is_polynomial() && term.h.sampled().values.size() < 3)
            throw StructuralError(i, "sampled profile needs at least 3 nodes");
        }
      } else {
        const auto& cb = L.callback();
        if (!cb.value || !cb.grad_p) throw StructuralError(i, "callback form needs value and grad_p");
        if (L.kind == LayerKind::Separable)
          throw StructuralError(i, "separable layers must use the polynomial form");
      }
    }
  }

  /// Single g(t)h(p)+k(t) on [0, T], split at the sign changes of g.
  static LayeredHamiltonian split_separable(std::size_t dimension, double horizon,
                                            const SeparableTerm& term, const Polynomial& k = {}) {
    if (!(horizon > 0.0)) throw InputError("horizon must be positive");
    std::vector<double> bps{0.0};
    for (double r : detect_breakpoints(term.g, horizon)) bps.push_back(r);
    bps.push_back(horizon);
    std::vector<LayerForm> layers(bps.size() - 1,
                                  LayerForm{LayerKind::Separable, PolynomialForm{{term}, k}});
    return LayeredHamiltonian(dimension, std::move(bps), std::move(layers));
  }

  std::size_t dimension() const noexcept { return dim_; }
  double horizon() const noexcept { return breakpoints_.back(); }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<LayerForm>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  /// Layers are [t_i, t_{i+1}); t = T belongs to the last layer.
  std::size_t layer_of(double t) const {
    check_time(t);
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - breakpoints_.begin());
    i = i == 0 ? 0 : i - 1;
    return std::min(i, layers_.size() - 1);
  }

  double eval_H(double t, const Point& p) const { return eval_layer(layer_of(t), t, p); }

  double eval_layer(std::size_t i, double t, const Point& p) const {
    const auto& L = layers_[i];
    if (!L.is_polynomial()) return L.callback().value(t, p);
    const auto& f = L.polynomial();
    double s = 0.0;
    for (const auto& term : f.terms) s += term.g(t) * term.h.value(p);
    return s + f.k(t);
  }

  GradientValue grad_p_H_flagged(double t, const Point& p) const {
    const std::size_t i = layer_of(t);
    const auto& L = layers_[i];
    GradientValue out{Point(p.size()), false};
    if (!L.is_polynomial()) {
      out.value = L.callback().grad_p(t, p);
      return out;
    }
    for (const auto& term : L.polynomial().terms) {
      const double gt = term.g(t);
      out.value = out.value + gt * term.h.gradient(p, out.one_sided);
    }
    return out;
  }

  Point grad_p_H(double t, const Point& p) const { return grad_p_H_flagged(t, p).value; }

  /// Right-sided at interior breakpoints (the layer containing t).
  double partial_t_H(double t, const Point& p) const { return partial_t_layer(layer_of(t), t, p); }

  /// Integral of H(tau, p) over [ta, tb], additive across breakpoints.
  double integral_H(double ta, double tb, const Point& p) const {
    check_interval(ta, tb);
    if (ta == tb) return 0.0;
    double total = 0.0;
    for_each_piece(ta, tb, [&](std::size_t i, double a, double b) {
      total += integral_layer(i, a, b, p);
    });
    return total;
  }

  /// Integral of H(tau, p) over [a, b] within layer i, evaluated with layer i's form.
  double integral_layer(std::size_t i, double a, double b, const Point& p) const {
    const auto& L = layers_[i];
    if (!L.is_polynomial()) {
      const auto& cb = L.callback();
      if (cb.integral) return cb.integral(a, b, p);
      return adaptive_simpson([&](double tau) { return cb.value(tau, p); }, a, b, 1e-10);
    }
    const auto& f = L.polynomial();
    double s = 0.0;
    for (const auto& term : f.terms) {
      const Polynomial G = term.g.antiderivative();
      s += (G(b) - G(a)) * term.h.value(p);
    }
    const Polynomial K = f.k.antiderivative();
    return s + (K(b) - K(a));
  }

  /// Integral of grad_p H(tau, p) over [ta, tb].
  Point integral_grad_p_H(double ta, double tb, const Point& p) const {
    check_interval(ta, tb);
    Point total(p.size());
    if (ta == tb) return total;
    for_each_piece(ta, tb, [&](std::size_t i, double a, double b) {
      const auto& L = layers_[i];
      if (!L.is_polynomial()) {
        const auto& cb = L.callback();
        for (std::size_t d = 0; d < p.size(); ++d)
          total[d] += adaptive_simpson([&](double tau) { return cb.grad_p(tau, p)[d]; }, a, b,
                                       1e-10);
        return;
      }
      bool one_sided = false;
      for (const auto& term : L.polynomial().terms) {
        const Polynomial G = term.g.antiderivative();
        total = total + (G(b) - G(a)) * term.h.gradient(p, one_sided);
      }
    });
    return total;
  }

  /// sup |H_t| over [0, T] x p_box.
  SupEstimate sup_abs_Ht(const std::vector<Interval>& p_box) const {
    if (p_box.size() != dim_) throw InputError("momentum box dimension mismatch");
    SupEstimate best{0.0, true, 0.0};
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const SupEstimate s = sup_abs_Ht_layer(i, p_box);
      best.value = std::max(best.value, s.value);
      best.exact = best.exact && s.exact;
      best.mesh = std::max(best.mesh, s.mesh);
    }
    return best;
  }

  /// Throws StructuralError naming the first layer whose tagged structure fails,
  /// or whose value at a shared breakpoint disagrees with its neighbour.
  void validate(const StructureCheck& check) const {
    const Grid& grid = check.momentum_grid;
    if (grid.dim() != dim_) throw InputError("momentum grid dimension mismatch");
    const auto pts = grid.points();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const double a = breakpoints_[i], b = breakpoints_[i + 1];
      const auto& L = layers_[i];
      if (L.kind == LayerKind::Separable) {
        validate_separable(i, a, b);
      } else {
        const double sign = L.kind == LayerKind::ConvexInP ? 1.0 : -1.0;
        for (std::size_t s = 0; s < check.time_samples; ++s) {
          const double t =
              check.time_samples == 1
                  ? a
                  : a + (b - a) * static_cast<double>(s) / static_cast<double>(check.time_samples - 1);
          check_second_differences(i, t, sign, grid, check.rel_tol);
        }
      }
    }
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      const double t = breakpoints_[i];
      for (const auto& p : pts) {
        const double left = eval_layer(i - 1, t, p), right = eval_layer(i, t, p);
        if (std::fabs(left - right) > 1e-9 * (1.0 + std::fabs(left)))
          throw StructuralError(i, "H is discontinuous at breakpoint t=" + std::to_string(t));
      }
    }
  }

private:
  void check_time(double t) const {
    if (!(t >= 0.0 && t <= horizon()))
      throw DomainError("time " + std::to_string(t) + " outside [0, T]");
  }
  void check_interval(double ta, double tb) const {
    check_time(ta);
    check_time(tb);
    if (ta > tb) throw DomainError("integration interval is reversed");
  }

  template <class F>
  void for_each_piece(double ta, double tb, F&& f) const {
    std::size_t i = layer_of(ta);
    double a = ta;
    while (true) {
      const double end = i + 1 < layers_.size() ? breakpoints_[i + 1] : horizon();
      const double b = std::min(tb, end);
      if (b > a) f(i, a, b);
      if (b >= tb || i + 1 >= layers_.size()) break;
      a = b;
      ++i;
    }
  }

  void validate_separable(std::size_t i, double a, double b) const {
    const auto& f = layers_[i].polynomial();
    int common = 0;
    for (const auto& term : f.terms) {
      if (!sign_change_roots(term.g, a, b).empty())
        throw StructuralError(i, "separable coefficient g changes sign inside the layer");
      // Sign on the layer: sample midpoints until a nonzero value appears.
      int s = 0;
      for (int k = 1; k < 64 && s == 0; ++k) {
        const double v = term.g(a + (b - a) * k / 64.0);
        s = (v > 0) - (v < 0);
      }
      if (s == 0) continue;
      if (common == 0) common = s;
      if (s != common)
        throw StructuralError(i, "separable terms have coefficients g of different signs");
    }
  }

  void check_second_differences(std::size_t i, double t, double sign, const Grid& grid,
                                double rel_tol) const {
    const std::size_t n = grid.size();
    std::vector<double> v(n);
    double scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = sign * eval_layer(i, t, grid.point(k));
      scale = std::max(scale, std::fabs(v[k]));
    }
    const double tol = rel_tol * (1.0 + scale);
    std::size_t stride = 1;
    for (std::size_t ax = grid.dim(); ax-- > 0;) {
      const std::size_t c = grid.count(ax);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = (k / stride) % c;
        if (idx == 0 || idx + 1 == c) continue;
        const double d2 = v[k - stride] - 2.0 * v[k] + v[k + stride];
        if (d2 < -tol)
          throw StructuralError(i, std::string("H(t, .) is not ") +
                                       (sign > 0 ? "convex" : "concave") + " at t=" +
                                       std::to_string(t));
      }
      stride *= c;
    }
  }

  SupEstimate sup_abs_Ht_layer(std::size_t i, const std::vector<Interval>& p_box) const {
    const double a = breakpoints_[i], b = breakpoints_[i + 1];
    const auto& L = layers_[i];
    double best = 0.0;
    bool exact = false;
    if (L.is_polynomial()) {
      const auto& f = L.polynomial();
      std::vector<double> times{a, b};
      for (const auto& term : f.terms)
        for (double r : sign_change_roots(term.g.derivative().derivative(), a, b))
          times.push_back(r);
      for (double r : sign_change_roots(f.k.derivative().derivative(), a, b)) times.push_back(r);

      // Per-axis candidate coordinates; the product set is enumerated.
      std::vector<std::vector<double>> axes(dim_);
      for (std::size_t d = 0; d < dim_; ++d) {
        axes[d] = {p_box[d].lo, p_box[d].hi};
        for (const auto& term : f.terms) {
          auto c = term.h.axis_extremum_candidates(d, p_box[d].lo, p_box[d].hi);
          axes[d].insert(axes[d].end(), c.begin(), c.end());
        }
      }
      for (double t : times) {
        for_each_product(axes, [&](const Point& p) {
          best = std::max(best, std::fabs(partial_t_layer(i, t, p)));
        });
      }
      // Exact when H_t(t, p) = g'(t) h(p) + const: extremes separate in t and p.
      exact = f.terms.size() <= 1 && f.k.degree() <= 1;
      if (exact) return {best, true, 0.0};
    }
    // Dense sampling, combined with the enumeration above when available.
    const std::size_t nt = 201;
    const std::size_t np = dim_ == 1 ? 401 : 101;
    double mesh = (b - a) / static_cast<double>(nt - 1);
    std::vector<std::vector<double>> axes(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      axes[d] = Grid::line(p_box[d].lo, p_box[d].hi, np).nodes(0);
      mesh = std::max(mesh, p_box[d].width() / static_cast<double>(np - 1));
    }
    for (std::size_t s = 0; s < nt; ++s) {
      const double t = a + (b - a) * static_cast<double>(s) / static_cast<double>(nt - 1);
      for_each_product(axes, [&](const Point& p) {
        best = std::max(best, std::fabs(partial_t_layer(i, t, p)));
      });
    }
    return {best, exact, mesh};
  }

  double partial_t_layer(std::size_t i, double t, const Point& p) const {
    const auto& L = layers_[i];
    if (L.is_polynomial()) {
      const auto& f = L.polynomial();
      double s = 0.0;
      for (const auto& term : f.terms) s += term.g.derivative()(t) * term.h.value(p);
      return s + f.k.derivative()(t);
    }
    const auto& cb = L.callback();
    if (cb.partial_t) return cb.partial_t(t, p);
    const double lo = breakpoints_[i], hi = breakpoints_[i + 1];
    const double h = 1e-6 * std::max(1.0, hi - lo);
    const double ta = std::max(lo, t - h), tb = std::min(hi, t + h);
    return (cb.value(tb, p) - cb.value(ta, p)) / (tb - ta);
  }

  template <class F>
  void for_each_product(const std::vector<std::vector<double>>& axes, F&& f) const {
    Point p(dim_);
    if (dim_ == 1) {
      for (double x : axes[0]) {
        p[0] = x;
        f(p);
      }
      return;
    }
    for (double x : axes[0])
      for (double y : axes[1]) {
        p[0] = x;
        p[1] = y;
        f(p);
      }
  }

  std::size_t dim_;
  std::vector<double> breakpoints_;
  std::vector<LayerForm> layers_;
};

using HamiltonianPtr = std::shared_ptr<const LayeredHamiltonian>;

}  // namespace hjlayer

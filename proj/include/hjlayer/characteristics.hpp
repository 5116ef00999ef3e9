#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/hamiltonian.hpp"
#include "hjlayer/initial_data.hpp"
#include "hjlayer/solver.hpp"

namespace hjlayer {

enum class CharacteristicType { TypeI, TypeII };

inline const char* to_string(CharacteristicType c) {
  return c == CharacteristicType::TypeI ? "I" : "II";
}

struct StripSample {
  double t = 0.0;
  Point x;
  double v = 0.0;
};

/// Characteristic strip started at (t_start, y) with constant momentum p:
///   x(t) = y + int_{t_start}^t H_p(tau, p) dtau,
///   v(t) = v_start + <int H_p, p> - int H.
class Characteristic {
public:
  Characteristic(HamiltonianPtr ham, double t_start, Point y, Point p, double v_start)
      : ham_(std::move(ham)), t_start_(t_start), y_(std::move(y)), p_(std::move(p)), v_start_(v_start) {}

  const Point& origin() const noexcept { return y_; }
  const Point& momentum() const noexcept { return p_; }
  double start_time() const noexcept { return t_start_; }
  double start_value() const noexcept { return v_start_; }
  const LayeredHamiltonian& hamiltonian() const noexcept { return *ham_; }
  const HamiltonianPtr& hamiltonian_ptr() const noexcept { return ham_; }

  Point position(double t) const {
    if (t < t_start_) throw DomainError("time precedes the characteristic start");
    return y_ + ham_->integral_grad_p_H(t_start_, t, p_);
  }

  double value(double t) const {
    if (t < t_start_) throw DomainError("time precedes the characteristic start");
    const Point ig = ham_->integral_grad_p_H(t_start_, t, p_);
    return v_start_ + dot(ig, p_) - ham_->integral_H(t_start_, t, p_);
  }

  std::vector<StripSample> sample(std::span<const double> times) const {
    std::vector<StripSample> out;
    out.reserve(times.size());
    for (double t : times) out.push_back({t, position(t), value(t)});
    return out;
  }

private:
  HamiltonianPtr ham_;
  double t_start_;
  Point y_;
  Point p_;
  double v_start_;
};

/// Strip of problem (H, sigma) from y. sigma must be differentiable at y.
inline Characteristic emit_characteristic(const InitialData& sigma, HamiltonianPtr ham, const Point& y) {
  const Point p = sigma.gradient(y);
  return Characteristic(std::move(ham), 0.0, y, p, sigma.value(y));
}

struct BackwardCandidate {
  double y = 0.0;
  double p = 0.0;
  double residual = 0.0;
  std::optional<CharacteristicType> type;
};

struct BackwardSearchResult {
  std::vector<BackwardCandidate> candidates;
  bool empty() const noexcept { return candidates.empty(); }
};

struct BackwardSearchOptions {
  Interval y_box{-1.0, 1.0};
  std::size_t scan_count = 20001;
  double tol = 1e-10;  // bisection width and accepted residual
};

/// Roots of y -> x(t0, y) - x0 over a 1D scan box: every sign-change bracket is bisected
/// independently, since characteristics may cross. Only roots whose residual is within
/// tol are kept (jumps of sigma_y produce sign changes that are not crossings).
inline BackwardSearchResult find_backward(const InitialData& sigma, const LayeredHamiltonian& ham,
                                          double t0, double x0, const BackwardSearchOptions& opt = {}) {
  if (sigma.dimension() != 1) throw InputError("find_backward is one-dimensional");
  if (!(t0 > 0.0 && t0 <= ham.horizon())) throw DomainError("target time must lie in (0, T]");
  if (opt.scan_count < 2 || !(opt.y_box.lo < opt.y_box.hi)) throw InputError("invalid scan box");

  const auto F = [&](double y) {
    const double p = sigma.gradient(Point{y})[0];
    return y + ham.integral_grad_p_H(0.0, t0, Point{p})[0] - x0;
  };
  const Grid scan = Grid::line(opt.y_box.lo, opt.y_box.hi, opt.scan_count);
  BackwardSearchResult res;
  const auto accept = [&](double y) {
    const double r = std::fabs(F(y));
    if (r > opt.tol) return;
    if (!res.candidates.empty() && std::fabs(res.candidates.back().y - y) <= opt.tol) return;
    res.candidates.push_back({y, sigma.gradient(Point{y})[0], r, std::nullopt});
  };

  double prev_y = scan.node(0, 0);
  double prev_f = F(prev_y);
  if (prev_f == 0.0) accept(prev_y);
  for (std::size_t i = 1; i < scan.count(0); ++i) {
    const double y = scan.node(0, i);
    const double f = F(y);
    if (f == 0.0) {
      accept(y);
    } else if (prev_f != 0.0 && (f > 0.0) != (prev_f > 0.0)) {
      double lo = prev_y, hi = y, flo = prev_f;
      while (hi - lo > opt.tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = F(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm > 0.0) == (flo > 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double root = std::fabs(F(lo)) <= std::fabs(F(hi)) ? lo : hi;
      accept(root);
    }
    prev_y = y;
    prev_f = f;
  }
  return res;
}

/// TypeI iff `p` lies within `momentum_tol` of a maximizer in l(t0, x0).
/// The default tolerance is one dual-grid spacing.
inline CharacteristicType classify(const Point& p, const LayeredSolution& sol, double t0, const Point& x0,
                                   std::optional<double> momentum_tol = std::nullopt) {
  const double tol = momentum_tol ? *momentum_tol : sol.dual_grid().max_spacing();
  const auto r = sol.eval(t0, x0);
  for (const auto& m : r.argmax.maximizers)
    if (distance(m, p) <= tol) return CharacteristicType::TypeI;
  return CharacteristicType::TypeII;
}

/// Fills `type` on every candidate.
inline void classify_all(BackwardSearchResult& res, const LayeredSolution& sol, double t0, double x0,
                         std::optional<double> momentum_tol = std::nullopt) {
  for (auto& c : res.candidates) c.type = classify(Point{c.p}, sol, t0, Point{x0}, momentum_tol);
}

enum class ExtensionDirection { Forward, Backward };

/// l(t, x) counts as a singleton when its diameter is at most two dual spacings.
inline bool is_singleton(const ArgmaxSet& a, const Grid& dual) {
  return a.diameter <= 2.0 * dual.max_spacing() + 1e-15;
}

/// Forward: restrict a (H, sigma) characteristic to [t1, T] and restart it as a
/// characteristic of (H, omega), omega = u(t1, .), from (t1, x1) with the same momentum.
/// Backward: continue a (H, omega) characteristic started at (t1, x1) down to t = 0,
/// reaching y = x1 - int_0^{t1} H_p(tau, q) dtau. Both require l(t1, x1) to be a singleton.
inline Characteristic extend_across_layer(const Characteristic& ch, const LayeredSolution& sol, double t1,
                                          ExtensionDirection dir) {
  const auto& ham = sol.hamiltonian_ptr();
  const auto junction_check = [&](const Point& x1) {
    const auto r = sol.eval(t1, x1);
    if (!is_singleton(r.argmax, sol.dual_grid()))
      throw NondifferentiableJunction("u(t1, .) is not differentiable at the crossing point (l-set diameter " +
                                      std::to_string(r.argmax.diameter) + ")");
  };
  if (dir == ExtensionDirection::Forward) {
    if (t1 < ch.start_time()) throw DomainError("junction precedes the characteristic start");
    const Point x1 = ch.position(t1);
    junction_check(x1);
    return Characteristic(ham, t1, x1, ch.momentum(), ch.value(t1));
  }
  if (ch.start_time() != t1) throw InputError("backward extension needs a characteristic started at t1");
  const Point& x1 = ch.origin();
  junction_check(x1);
  const Point y = x1 - ham->integral_grad_p_H(0.0, t1, ch.momentum());
  return Characteristic(ham, 0.0, y, ch.momentum(), sol.sigma().value(y));
}

}  // namespace hjlayer

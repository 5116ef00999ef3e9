#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace hjlayer {

/// Real polynomial with coefficients in ascending-degree order.
class Polynomial {
public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) { trim(); }
  Polynomial(std::initializer_list<double> coefficients) : c_(coefficients) { trim(); }

  static Polynomial constant(double v) { return Polynomial({v}); }

  const std::vector<double>& coefficients() const noexcept { return c_; }
  bool is_zero() const noexcept { return c_.empty(); }
  int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }

  double operator()(double x) const noexcept {
    double r = 0.0;
    for (std::size_t i = c_.size(); i-- > 0;) r = r * x + c_[i];
    return r;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
    return Polynomial(std::move(d));
  }

  /// Antiderivative vanishing at 0.
  Polynomial antiderivative() const {
    if (c_.empty()) return {};
    std::vector<double> a(c_.size() + 1, 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i) a[i + 1] = c_[i] / static_cast<double>(i + 1);
    return Polynomial(std::move(a));
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
  void trim() {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }

  std::vector<double> c_;
};

/// Sign-changing roots of p in the open interval (a, b), sorted ascending.
///
/// The interval is scanned on `scan_points` uniform nodes; every bracket where the
/// sign flips is bisected and then polished with Newton steps. Roots of even
/// multiplicity (touching zero without crossing) are not reported.
inline std::vector<double> sign_change_roots(const Polynomial& p, double a, double b,
                                             std::size_t scan_points = 10000,
                                             double tol = 1e-12) {
  std::vector<double> roots;
  if (p.is_zero() || p.degree() == 0 || !(a < b)) return roots;

  const auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  const double h = (b - a) / static_cast<double>(scan_points);
  const auto node = [&](std::size_t i) {
    return i == scan_points ? b : a + static_cast<double>(i) * h;
  };
  const Polynomial dp = p.derivative();

  // Track the last nonzero sign so exact zeros on scan nodes are handled.
  int last_sign = sgn(p(a));
  double last_nonzero_x = a;
  std::size_t zero_run_start = last_sign == 0 ? 0 : scan_points + 1;

  for (std::size_t i = 1; i <= scan_points; ++i) {
    const double x = node(i);
    const int s = sgn(p(x));
    if (s == 0) {
      if (zero_run_start > scan_points) zero_run_start = i;
      continue;
    }
    if (last_sign != 0 && s != last_sign) {
      double root;
      if (zero_run_start <= scan_points) {
        root = node(zero_run_start);  // exact zero on a scan node
      } else {
        double lo = last_nonzero_x, hi = x;
        while (hi - lo > tol) {
          const double mid = 0.5 * (lo + hi);
          const int sm = sgn(p(mid));
          if (sm == 0) {
            lo = hi = mid;
            break;
          }
          (sm == last_sign ? lo : hi) = mid;
        }
        root = 0.5 * (lo + hi);
        for (int k = 0; k < 3; ++k) {
          const double d = dp(root);
          if (d == 0.0) break;
          const double next = root - p(root) / d;
          if (!(next >= last_nonzero_x && next <= x)) break;
          root = next;
        }
      }
      if (root > a && root < b) roots.push_back(root);
    }
    last_sign = s;
    last_nonzero_x = x;
    zero_run_start = scan_points + 1;
  }
  return roots;
}

/// All real critical points of p in [a, b] (roots of p', sign-changing or not), plus the
/// interval endpoints. Used for exact extremum enumeration.
inline std::vector<double> extremum_candidates(const Polynomial& p, double a, double b) {
  std::vector<double> out{a, b};
  const Polynomial dp = p.derivative();
  for (double r : sign_change_roots(dp, a, b)) out.push_back(r);
  // Even-multiplicity roots of p' are inflection-type points; they never host a strict
  // extremum, so sign changes of p' suffice.
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hjlayer

#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "mvgf/errors.hpp"

namespace mvgf::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Globally adaptive Gauss-Kronrod (G7/K15) quadrature on a finite interval.
///
/// The interval with the largest error estimate is bisected until the summed
/// error estimate drops below `abs_tol` or `max_panels` panels are in use, in
/// which case NumericalError is thrown. The tolerance is floored at a small
/// multiple of machine epsilon times the L1 norm, below which the per-panel
/// estimates are pure roundoff.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol = 1e-10, int max_panels = 4000) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  if (a == b) return {};
  const double sign = a < b ? 1.0 : -1.0;
  if (b < a) std::swap(a, b);

  struct Panel {
    double lo, hi, value, error, l1;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    double err = 0.0, l1 = 0.0;
    const double v = GK::integrate(f, lo, hi, 0, 0.0, &err, &l1);
    // Boost reports the depth-0 error estimate on the reference interval [-1, 1].
    return Panel{lo, hi, v, err * 0.5 * (hi - lo), l1};
  };

  std::priority_queue<Panel> panels;
  Panel first = eval(a, b);
  double total = first.value;
  double total_err = first.error;
  double total_l1 = first.l1;
  panels.push(first);
  constexpr double kRoundoff = 50.0 * std::numeric_limits<double>::epsilon();
  while (total_err > std::max(abs_tol, kRoundoff * total_l1)) {
    if (static_cast<int>(panels.size()) >= max_panels) {
      throw NumericalError("adaptive quadrature did not converge: error estimate " +
                           std::to_string(total_err) + " after " +
                           std::to_string(max_panels) + " panels");
    }
    Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      // Interval cannot be split further in floating point.
      throw NumericalError("adaptive quadrature: interval collapsed near " + std::to_string(mid));
    }
    Panel left = eval(worst.lo, mid);
    Panel right = eval(mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    total_l1 += left.l1 + right.l1 - worst.l1;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to drop accumulated cancellation from the running updates.
  double sum = 0.0, err = 0.0;
  while (!panels.empty()) {
    sum += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  if (!std::isfinite(sum)) throw NumericalError("adaptive quadrature produced a non-finite value");
  return {sign * sum, err};
}

/// Integrable endpoint singularities on [a, b] (double-exponential rule).
template <class F>
Result integrate_singular(F&& f, double a, double b, double rel_tol = 1e-12) {
  boost::math::quadrature::tanh_sinh<double> rule;
  double err = 0.0, l1 = 0.0;
  const double v = rule.integrate(f, a, b, rel_tol, &err, &l1);
  if (!std::isfinite(v)) throw NumericalError("tanh-sinh quadrature produced a non-finite value");
  return {v, err};
}

/// Integral over [a, +inf) for integrands with (at least) exponential decay.
template <class F>
Result integrate_to_infinity(F&& f, double a, double rel_tol = 1e-12) {
  boost::math::quadrature::exp_sinh<double> rule;
  double err = 0.0, l1 = 0.0;
  const double v = rule.integrate([&](double t) { return f(a + t); }, 0.0,
                                  std::numeric_limits<double>::infinity(), rel_tol, &err, &l1);
  if (!std::isfinite(v)) throw NumericalError("exp-sinh quadrature produced a non-finite value");
  return {v, err};
}

}  // namespace mvgf::quad

#include "mvgf/transport.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"

namespace mvgf {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Proximal map of gamma * w * m^2 / h(u) at (a, bm). For fixed u the optimal m
// is bm h / (h + 2 gamma w); what remains is convex in u because 1 / (h + c)
// is convex for concave h >= 0.
struct PerspectiveProx {
  const MobilityModel& model;
  double u_sup;  // saturation level, or +inf

  double h_second(double u) const {
    const double e = 1e-6 * std::max(1.0, u);
    const double lo = std::max(0.0, u - e), hi = std::isfinite(u_sup) ? std::min(u_sup, u + e) : u + e;
    return (model.h_prime(hi) - model.h_prime(lo)) / (hi - lo);
  }

  std::pair<double, double> operator()(double a, double bm, double gamma, double w) const {
    const double c = 2.0 * gamma * w;
    const double k = w * bm * bm;
    auto dphi = [&](double u) {
      const double hc = model.h(u) + c;
      return (u - a) / gamma - k * model.h_prime(u) / (hc * hc);
    };
    double lo = 0.0, hi;
    if (dphi(0.0) >= 0.0) return {0.0, 0.0};
    if (std::isfinite(u_sup)) {
      hi = u_sup;
      if (dphi(hi) <= 0.0) return {hi, bm * model.h(hi) / (model.h(hi) + c)};
    } else {
      hi = std::max(1.0, 2.0 * std::abs(a));
      while (dphi(hi) <= 0.0) hi *= 2.0;
    }
    // Safeguarded Newton: keep the bracket, bisect when a step leaves it.
    double u = std::clamp(a, lo, hi);
    if (u == lo || u == hi) u = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
      const double d = dphi(u);
      if (d > 0.0) hi = u;
      else lo = u;
      const double hc = model.h(u) + c, hp = model.h_prime(u);
      const double d2 = 1.0 / gamma - k * (h_second(u) / (hc * hc) - 2.0 * hp * hp / (hc * hc * hc));
      double next = u - d / d2;
      if (!(d2 > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - u) <= 1e-12 * std::max(1.0, std::abs(u)) || hi - lo <= 1e-14 * std::max(1.0, hi)) {
        u = next;
        break;
      }
      u = next;
    }
    const double h = model.h(u);
    return {u, bm * h / (h + c)};
  }
};

// Index bookkeeping for the staggered unknowns.
struct Layout {
  std::size_t n, K;
  std::size_t n_u() const { return (K - 1) * n; }        // u_k, k = 1..K-1
  std::size_t n_m() const { return K * (n - 1); }        // m_k at interior faces 1..n-1
  std::size_t u_index(std::size_t k, std::size_t i) const { return (k - 1) * n + i; }
  std::size_t m_index(std::size_t k, std::size_t j) const { return n_u() + k * (n - 1) + (j - 1); }
  std::size_t n_dual() const { return K * (n - 1); }     // (k + 1/2, interior face j)
};

}  // namespace

double transport_action(const MobilityModel& model, const Grid1D& grid, const TransportSolution& s) {
  const std::size_t n = s.n_cells, K = s.n_time;
  const double w = grid.dx() / static_cast<double>(K);
  const double u_sup = model.saturation().value_or(std::numeric_limits<double>::infinity());
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 1; j < n; ++j) {
      const double mm = s.m_at(k, j);
      if (mm == 0.0) continue;
      const double uf = 0.25 * (s.u_at(k, j - 1) + s.u_at(k, j) + s.u_at(k + 1, j - 1) + s.u_at(k + 1, j));
      const double h = uf > 0.0 ? model.h(std::min(uf, u_sup)) : 0.0;
      if (!(h > 0.0)) return std::numeric_limits<double>::infinity();
      total += w * mm * mm / h;
    }
  }
  return total;
}

TransportSolution wh_distance(const TransportProblem& pr) {
  const MobilityModel& model = pr.model;
  const TransportControls& ctl = pr.controls;
  if (!model.h_concave()) throw ValidationError("wh_distance: model " + model.name() + " does not have concave h");
  if (!(pr.p0.grid() == pr.p1.grid())) throw ValidationError("wh_distance: densities live on different grids");
  if (ctl.n_time < 1) throw ValidationError("wh_distance: n_time must be positive");
  const Grid1D& grid = pr.p0.grid();
  const double mass0 = pr.p0.mass(), mass1 = pr.p1.mass();
  if (std::abs(mass0 - mass1) > 1e-8 * std::max(1.0, mass0)) {
    throw ValidationError("wh_distance: masses differ (" + std::to_string(mass0) + " vs " + std::to_string(mass1) + ")");
  }
  const double u_sup = model.saturation().value_or(std::numeric_limits<double>::infinity());
  for (const auto* p : {&pr.p0, &pr.p1}) {
    if (p->max() > u_sup) throw ValidationError("wh_distance: density exceeds the saturation level");
  }

  const Layout L{grid.size(), ctl.n_time};
  const std::size_t n = L.n, K = L.K;
  const double dx = grid.dx(), dt = 1.0 / static_cast<double>(K), w = dx * dt;
  auto known_u = [&](std::size_t k, std::size_t i) { return k == 0 ? pr.p0[i] : pr.p1[i]; };

  // Continuity rows (k, i): (u_{k+1,i} - u_{k,i}) / dt + (m_{k,i+1} - m_{k,i}) / dx = 0.
  // The constant vector spans the left null space, so the last row is dropped.
  const std::size_t n_rows = K * n - 1, n_x = L.n_u() + L.n_m();
  std::vector<Eigen::Triplet<double>> trip;
  Vec rhs = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = k * n + i;
      if (r == n_rows) break;
      const auto ri = static_cast<int>(r);
      if (k + 1 < K) trip.emplace_back(ri, static_cast<int>(L.u_index(k + 1, i)), 1.0 / dt);
      else rhs[ri] -= known_u(K, i) / dt;
      if (k > 0) trip.emplace_back(ri, static_cast<int>(L.u_index(k, i)), -1.0 / dt);
      else rhs[ri] += known_u(0, i) / dt;
      if (i + 1 < n) trip.emplace_back(ri, static_cast<int>(L.m_index(k, i + 1)), 1.0 / dx);
      if (i > 0) trip.emplace_back(ri, static_cast<int>(L.m_index(k, i)), -1.0 / dx);
    }
  }
  SpMat B(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_x));
  B.setFromTriplets(trip.begin(), trip.end());
  const SpMat BBt = SpMat(B * B.transpose());
  Eigen::SimplicialLLT<SpMat> chol(BBt);
  if (chol.info() != Eigen::Success) throw NumericalError("wh_distance: continuity system is not positive definite");
  auto project = [&](Vec& x) {
    const Vec r = B * x - rhs;
    x -= B.transpose() * chol.solve(r);
  };

  // A x + a0: face densities at half time levels (four-point average) and fluxes.
  const std::size_t nd = L.n_dual();
  auto u_value = [&](const Vec& x, std::size_t k, std::size_t i) {
    return (k == 0 || k == K) ? known_u(k, i) : x[static_cast<Eigen::Index>(L.u_index(k, i))];
  };
  auto apply_A = [&](const Vec& x, std::vector<double>& uf, std::vector<double>& mf) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 1; j < n; ++j) {
        const std::size_t d = k * (n - 1) + (j - 1);
        uf[d] = 0.25 * (u_value(x, k, j - 1) + u_value(x, k, j) + u_value(x, k + 1, j - 1) + u_value(x, k + 1, j));
        mf[d] = x[static_cast<Eigen::Index>(L.m_index(k, j))];
      }
    }
  };
  auto apply_At = [&](const std::vector<double>& yu, const std::vector<double>& ym, Vec& out) {
    out.setZero();
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 1; j < n; ++j) {
        const std::size_t d = k * (n - 1) + (j - 1);
        for (std::size_t kk : {k, k + 1}) {
          if (kk == 0 || kk == K) continue;
          out[static_cast<Eigen::Index>(L.u_index(kk, j - 1))] += 0.25 * yu[d];
          out[static_cast<Eigen::Index>(L.u_index(kk, j))] += 0.25 * yu[d];
        }
        out[static_cast<Eigen::Index>(L.m_index(k, j))] += ym[d];
      }
    }
  };

  // Initial guess: linear interpolation in time with compatible fluxes.
  Vec x = Vec::Zero(static_cast<Eigen::Index>(n_x));
  {
    std::vector<double> c0(n + 1, 0.0), c1(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      c0[i + 1] = c0[i] + pr.p0[i] * dx;
      c1[i + 1] = c1[i] + pr.p1[i] * dx;
    }
    for (std::size_t k = 1; k < K; ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(K);
      for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(L.u_index(k, i))] = (1 - s) * pr.p0[i] + s * pr.p1[i];
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 1; j < n; ++j) x[static_cast<Eigen::Index>(L.m_index(k, j))] = c0[j] - c1[j];
    }
    project(x);
  }

  // ||A|| <= 1: each face average has unit row sum and each cell feeds four faces at 1/4.
  const double tau = ctl.tau > 0.0 ? ctl.tau : 0.99;
  const double sigma = ctl.sigma > 0.0 ? ctl.sigma : 0.99;
  if (tau * sigma >= 1.0) throw ValidationError("wh_distance: tau * sigma must be below 1");

  const PerspectiveProx prox{model, u_sup};
  std::vector<double> yu(nd, 0.0), ym(nd, 0.0), uf(nd), mf(nd);
  Vec x_bar = x, x_old(x.size()), Aty(x.size());

  // Relative changes are measured against at least this much action, so
  // near-identical endpoints still terminate.
  const double action_floor = 1e-12 * mass0 * std::pow(2.0 * grid.half_width(), 2);

  // Reported iterate: negative densities projected to zero, and fluxes dropped
  // where the face has no mobility or the flux is at the round-off level of
  // the projection (far tails would otherwise divide 1e-17 fluxes by 1e-40
  // densities). Convergence is judged on this cleaned pair, so the continuity
  // residual holds for what is returned.
  TransportSolution sol;
  sol.n_time = K;
  sol.n_cells = n;
  sol.u.assign((K + 1) * n, 0.0);
  sol.m.assign(K * (n + 1), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sol.u[i] = pr.p0[i];
    sol.u[K * n + i] = pr.p1[i];
  }
  auto extract = [&](const Vec& xv) {
    sol.negative_faces = 0;
    for (std::size_t k = 1; k < K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = xv[static_cast<Eigen::Index>(L.u_index(k, i))];
        sol.negative_faces += v < 0.0 ? 1 : 0;
        sol.u[k * n + i] = std::max(0.0, v);
      }
    }
    double m_scale = 0.0;
    for (std::size_t q = L.n_u(); q < n_x; ++q) m_scale = std::max(m_scale, std::abs(xv[static_cast<Eigen::Index>(q)]));
    const double m_floor = 1e-10 * m_scale;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 1; j < n; ++j) {
        const double uface = 0.25 * (sol.u_at(k, j - 1) + sol.u_at(k, j) + sol.u_at(k + 1, j - 1) + sol.u_at(k + 1, j));
        const bool mobile = model.h(std::min(uface, u_sup)) > 0.0;
        const double mv = xv[static_cast<Eigen::Index>(L.m_index(k, j))];
        sol.m[k * (n + 1) + j] = (std::abs(mv) > m_floor && mobile) ? mv : 0.0;
      }
    }
    double resid = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double r = (sol.u_at(k + 1, i) - sol.u_at(k, i)) / dt + (sol.m_at(k, i + 1) - sol.m_at(k, i)) / dx;
        resid = std::max(resid, std::abs(r));
      }
    }
    sol.constraint_residual = resid;
    sol.action = transport_action(model, grid, sol);
  };

  extract(x);
  double last_action = sol.action;
  std::size_t it = 0;
  for (it = 1; it <= ctl.max_iters; ++it) {
    // Dual step: y <- prox_{sigma F*}(y + sigma A x_bar) via Moreau.
    apply_A(x_bar, uf, mf);
    for (std::size_t d = 0; d < nd; ++d) {
      const double zu = yu[d] + sigma * uf[d], zm = ym[d] + sigma * mf[d];
      const auto [pu, pm] = prox(zu / sigma, zm / sigma, 1.0 / sigma, w);
      yu[d] = zu - sigma * pu;
      ym[d] = zm - sigma * pm;
    }
    // Primal step: projection onto the continuity constraints.
    x_old = x;
    apply_At(yu, ym, Aty);
    x -= tau * Aty;
    project(x);
    x_bar = 2.0 * x - x_old;

    if (it % ctl.check_every == 0 || it == ctl.max_iters) {
      extract(x);
      sol.relative_change = std::abs(sol.action - last_action) / std::max(sol.action, action_floor);
      last_action = sol.action;
      if (sol.relative_change < ctl.primal_tol && sol.constraint_residual < ctl.constraint_tol) {
        sol.converged = true;
        break;
      }
    }
  }
  sol.iterations = std::min(it, ctl.max_iters);
  sol.distance = std::sqrt(sol.action);
  return sol;
}

double w2_quantile_oracle(const DensityField& p0, const DensityField& p1) {
  if (!(p0.grid() == p1.grid())) throw ValidationError("w2_quantile_oracle: densities live on different grids");
  const double m0 = p0.mass(), m1 = p1.mass();
  if (!(m0 > 0.0) || std::abs(m0 - m1) > 1e-8 * std::max(1.0, m0)) throw ValidationError("w2_quantile_oracle: mass mismatch");
  const Grid1D& grid = p0.grid();
  const std::size_t n = grid.size();
  // Merge the CDF breakpoints of both densities in quantile space; between
  // consecutive breakpoints both quantile functions are linear in q.
  std::vector<double> c0(n + 1, 0.0), c1(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    c0[i + 1] = c0[i] + p0[i] * grid.dx() / m0;
    c1[i + 1] = c1[i] + p1[i] * grid.dx() / m1;
  }
  c0[n] = c1[n] = 1.0;
  // Generalized inverse inf{x : F(x) >= q}; flat stretches of F are skipped.
  auto quantile = [&](const std::vector<double>& c, double q) {
    std::size_t i = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), q) - c.begin());
    i = i == 0 ? 0 : std::min(i - 1, n - 1);
    while (i + 1 < n && !(c[i + 1] > c[i])) ++i;
    const double span = c[i + 1] - c[i];
    const double frac = span > 0.0 ? std::clamp((q - c[i]) / span, 0.0, 1.0) : 0.0;
    return grid.face(i) + frac * grid.dx();
  };
  std::vector<double> qs(c0);
  qs.insert(qs.end(), c1.begin(), c1.end());
  std::sort(qs.begin(), qs.end());
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < qs.size(); ++j) {
    const double a = qs[j], b = qs[j + 1];
    if (!(b > a)) continue;
    // Simpson is exact for the square of a linear function.
    const double da = quantile(c0, a) - quantile(c1, a);
    const double db = quantile(c0, b) - quantile(c1, b);
    const double mid = 0.5 * (a + b);
    const double dm = quantile(c0, mid) - quantile(c1, mid);
    total += (b - a) / 6.0 * (da * da + 4.0 * dm * dm + db * db);
  }
  return std::sqrt(total * m0);
}

MetricDerivativeReport metric_derivative(const MobilityModel& model, const DensityCurve& curve, double t0,
                                         const std::vector<double>& deltas, const TransportControls& controls) {
  if (deltas.empty()) throw ValidationError("metric_derivative: no deltas");
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (!(deltas[j] > 0.0) || (j > 0 && !(deltas[j] < deltas[j - 1]))) {
      throw ValidationError("metric_derivative: deltas must be positive and decreasing");
    }
  }
  MetricDerivativeReport rep;
  rep.t0 = t0;
  rep.deltas = deltas;
  const DensityField& a = curve[curve.index_of(t0)];
  for (double d : deltas) {
    const DensityField& b = curve[curve.index_of(t0 + d)];
    // Mass drifts by round-off along the curve; match it before transport.
    TransportProblem pr{model, a, b.normalized(a.mass()), controls};
    const auto sol = wh_distance(pr);
    if (!sol.converged) throw NumericalError("metric_derivative: transport did not converge at delta = " + std::to_string(d));
    rep.distances.push_back(sol.distance);
    rep.estimates.push_back(sol.distance / d);
    rep.converged.push_back(sol.converged);
  }
  const std::size_t J = deltas.size();
  if (J == 1) {
    rep.extrapolated = rep.estimates.back();
  } else {
    const double d1 = deltas[J - 2], d2 = deltas[J - 1], e1 = rep.estimates[J - 2], e2 = rep.estimates[J - 1];
    rep.extrapolated = (d1 * e2 - d2 * e1) / (d1 - d2);
  }
  rep.sqrt_dissipation = std::sqrt(std::max(0.0, dissipation(model, a)));
  const double diff = std::abs(rep.extrapolated - rep.sqrt_dissipation);
  rep.limit_check = rep.sqrt_dissipation > 1e-12 ? diff / rep.sqrt_dissipation : diff;
  return rep;
}

void write_transport_solution(std::ostream& out, const Grid1D& grid, const TransportSolution& s,
                              const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "# distance=%.17g, action=%.17g, iterations=%zu, converged=%d, constraint_residual=%.3e, "
                "relative_change=%.3e\n",
                s.distance, s.action, s.iterations, s.converged ? 1 : 0, s.constraint_residual, s.relative_change);
  out << buf;
  out << "field,k,index,x,value\n";
  for (std::size_t k = 0; k <= s.n_time; ++k) {
    for (std::size_t i = 0; i < s.n_cells; ++i) {
      std::snprintf(buf, sizeof buf, "u,%zu,%zu,%.17g,%.17g\n", k, i, grid.center(i), s.u_at(k, i));
      out << buf;
    }
  }
  for (std::size_t k = 0; k < s.n_time; ++k) {
    for (std::size_t j = 0; j <= s.n_cells; ++j) {
      std::snprintf(buf, sizeof buf, "m,%zu,%zu,%.17g,%.17g\n", k, j, grid.face(j), s.m_at(k, j));
      out << buf;
    }
  }
}

void write_metric_derivative(std::ostream& out, const MetricDerivativeReport& r, const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  char buf[256];
  std::snprintf(buf, sizeof buf, "# t0=%.17g, extrapolated=%.17g, sqrt_I=%.17g, limit_check=%.6e\n", r.t0,
                r.extrapolated, r.sqrt_dissipation, r.limit_check);
  out << buf << "delta,distance,estimate,converged\n";
  for (std::size_t j = 0; j < r.deltas.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", r.deltas[j], r.distances[j], r.estimates[j],
                  r.converged[j] ? 1 : 0);
    out << buf;
  }
}

}  // namespace mvgf

#include "mvgf/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mvgf/errors.hpp"
#include "mvgf/quadrature.hpp"

namespace mvgf {

namespace {

constexpr double kMaskFraction = 1e-14;

double mask_cut(const DensityField& p) { return kMaskFraction * p.max(); }

void require_same_grid(const DensityField& p, const DensityField& q, const char* what) {
  if (!(p.grid() == q.grid())) throw ValidationError(std::string(what) + ": densities live on different grids");
}

void require_same_mass(const DensityField& p, const DensityField& q, const char* what) {
  require_same_grid(p, q, what);
  const double dm = std::abs(p.mass() - q.mass());
  if (dm > 1e-6) {
    throw ValidationError(std::string(what) + ": mass mismatch " + std::to_string(dm) + " exceeds 1e-6");
  }
}

// Discrete gradient of w = g(p) + extra, reusing the grid stencils where every
// stencil value is finite and g'(p) p_x + extra' otherwise.
std::vector<double> gradient_of_g_plus(const MobilityModel& model, const DensityField& p,
                                       const std::vector<double>& extra, const std::vector<double>& extra_prime) {
  const Grid1D& grid = p.grid();
  const std::size_t n = grid.size();
  if (n < 3) throw ValidationError("gradient: need at least 3 cells");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = p[i] > 0.0 ? model.g(p[i]) + extra[i] : std::numeric_limits<double>::quiet_NaN();
  }
  const auto dw = calculus::gradient(grid, w);
  const auto px = calculus::gradient(grid, p.view());
  const double cut = mask_cut(p);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] > 0.0) || p[i] < cut) continue;
    out[i] = std::isfinite(dw[i]) ? dw[i] : model.g_prime(p[i]) * px[i] + extra_prime[i];
  }
  return out;
}

std::vector<double> potential_values(const Potential& pot, const Grid1D& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = pot.value(grid.center(i));
  return v;
}

std::vector<double> potential_gradient(const Potential& pot, const Grid1D& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = pot.gradient(grid.center(i));
  return v;
}

double weighted_square(const MobilityModel& model, const DensityField& p, const std::vector<double>& v) {
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) integrand[i] = p[i] > 0.0 ? v[i] * v[i] * model.h(p[i]) : 0.0;
  return calculus::integrate(p.grid(), integrand);
}

}  // namespace

double free_energy(const MobilityModel& model, const DensityField& p) {
  const Grid1D& grid = p.grid();
  const Potential& pot = model.potential();
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    integrand[i] = model.eta_or_zero(p[i]) + pot.value(grid.center(i)) * p[i];
    if (!std::isfinite(integrand[i])) {
      throw NumericalError("free_energy: eta undefined at p = " + std::to_string(p[i]) + " (cell " +
                           std::to_string(i) + ")");
    }
  }
  return calculus::integrate(grid, integrand);
}

double relative_entropy(const MobilityModel& model, const DensityField& p, const DensityField& q) {
  require_same_mass(p, q, "relative_entropy");
  return free_energy(model, p) - free_energy(model, q);
}

double bregman_entropy(const MobilityModel& model, const DensityField& p, const DensityField& q) {
  require_same_mass(p, q, "bregman_entropy");
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(q[i] > 0.0)) throw ValidationError("bregman_entropy: reference density must be positive");
    integrand[i] = model.eta_or_zero(p[i]) - model.eta(q[i]) - model.g(q[i]) * (p[i] - q[i]);
  }
  return calculus::integrate(p.grid(), integrand);
}

std::vector<double> chemical_gradient(const MobilityModel& model, const DensityField& p) {
  const Grid1D& grid = p.grid();
  return gradient_of_g_plus(model, p, potential_values(model.potential(), grid),
                            potential_gradient(model.potential(), grid));
}

double dissipation(const MobilityModel& model, const DensityField& p) {
  return weighted_square(model, p, chemical_gradient(model, p));
}

double relative_fisher(const MobilityModel& model, const DensityField& p, const DensityField& q) {
  require_same_mass(p, q, "relative_fisher");
  const std::vector<double> zero(p.size(), 0.0);
  const auto dp = gradient_of_g_plus(model, p, zero, zero);
  const auto dq = gradient_of_g_plus(model, q, zero, zero);
  std::vector<double> v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = dp[i] - dq[i];
  return weighted_square(model, p, v);
}

double rate_D_pointwise(const MobilityModel& model, double p, double px, double pxx, double x) {
  if (!(p > 0.0)) throw ValidationError("rate_D: density must be positive, got " + std::to_string(p));
  const Potential& pot = model.potential();
  const double d1 = pot.gradient(x), d2 = pot.laplacian(x);
  const double ph1 = model.phi_prime(p), ph2 = model.phi_second(p);
  const double div = d2 * model.h(p) + d1 * model.h_prime(p) * px + model.f_second(p) * px * px +
                     model.f_prime(p) * pxx;
  const double lap_theta = ph2 * px * px + ph1 * pxx + d2;
  return ph1 * div + model.f_over_p(p) * lap_theta - (ph1 * px + d1) * d1 * model.b(p);
}

std::vector<double> rate_D_field(const MobilityModel& model, const DensityField& p) {
  const Grid1D& grid = p.grid();
  const auto px = calculus::gradient(grid, p.view());
  const auto pxx = calculus::laplacian(grid, p.view());
  const double cut = mask_cut(p);
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && p[i] >= cut) out[i] = rate_D_pointwise(model, p[i], px[i], pxx[i], grid.center(i));
  }
  return out;
}

double rate_D_generic(const MobilityModel& model, const DensityCurve& curve, std::size_t t_index,
                      std::size_t x_index) {
  if (t_index >= curve.size()) throw ValidationError("rate_D_generic: time index out of range");
  const DensityField& p = curve[t_index];
  const Grid1D& grid = p.grid();
  if (grid.size() < 4 || x_index >= grid.size()) throw ValidationError("rate_D_generic: cell index out of range");
  const auto px = calculus::gradient(grid, p.view());
  const auto pxx = calculus::laplacian(grid, p.view());
  return rate_D_pointwise(model, p[x_index], px[x_index], pxx[x_index], grid.center(x_index));
}

double rate_D_boundary_term(const MobilityModel& model, const DensityField& p) {
  const Grid1D& grid = p.grid();
  const std::size_t n = grid.size();
  if (n < 4) throw ValidationError("rate_D_boundary_term: need at least 4 cells");
  const auto px = calculus::gradient(grid, p.view());
  const Potential& pot = model.potential();
  const auto chem = chemical_gradient(model, p);
  // f theta_x + (phi - g) J with the PDE flux J = -h (g + Phi)_x.
  auto flux = [&](std::size_t i) {
    const double s = p[i];
    if (!(s > 0.0)) return 0.0;
    const double theta_x = model.phi_prime(s) * px[i] + pot.gradient(grid.center(i));
    return model.f(s) * theta_x - (model.phi(s) - model.g(s)) * model.h(s) * chem[i];
  };
  const double left = 1.5 * flux(0) - 0.5 * flux(1);
  const double right = 1.5 * flux(n - 1) - 0.5 * flux(n - 2);
  return right - left;
}

double bose_A(double gamma, double r) {
  if (!(r > 0.0)) return 0.0;
  // A(r) = gamma (r ln r - r) - r int_0^1 log1p((r t)^gamma) dt.
  auto tail = [&](double t) { return std::log1p(std::pow(r * t, gamma)); };
  const double scale = std::max(1.0, std::log1p(std::pow(r, gamma)));
  const double I = quad::integrate(tail, 0.0, 1.0, 1e-15 * scale).value;
  return gamma * (r * std::log(r) - r) - r * I;
}

double rate_D_specialized(const ModelSpec& spec, double p, double px, double pxx, double x) {
  if (!(p > 0.0) || !std::isfinite(p) || !std::isfinite(px) || !std::isfinite(pxx) || !std::isfinite(x)) {
    throw ValidationError("rate_D_specialized: need finite inputs with p > 0");
  }
  const double px2 = px * px;
  const double x2 = x * x;
  if (spec.family == "fermi-dirac") {
    if (p >= 1.0) throw ValidationError("rate_D_specialized: fermi-dirac density must stay below 1");
    const double l = std::log1p(-p);
    return l * (1.0 - 1.0 / p + x * px / p - 2.0 * pxx / (p * p) + 2.0 * px2 / (p * p * p)) +
           px2 / (p * p * (1.0 - p)) - x2 * (1.0 - p) + 1.0;
  }
  if (spec.family == "bose") {
    const double g = spec.gamma;
    const double pg = std::pow(p, g);
    const double L = g * std::log(p) - std::log1p(pg);
    const double A = bose_A(g, p);
    return L * (2.0 * pxx / (g * p) + (1.0 + pg) / g + x * px * std::pow(p, g - 1.0) - 2.0 * px2 / (g * p * p)) +
           A * (-2.0 * pxx / (g * p * p) - (1.0 + pg) / (g * p) - x * px * std::pow(p, g - 2.0) +
                2.0 * px2 / (g * p * p * p)) +
           px2 / (p * p) - std::pow(p, g - 2.0) * px2 / (1.0 + pg) + 1.0 - x2 * (1.0 + pg);
  }
  if (spec.family == "power") {
    const double a = spec.alpha;
    if (a == 1.0) {
      const double l = std::log(p);
      return l + 2.0 * x * px * l / p + pxx * l / (p * p) - pxx / p + px2 / (p * p) + pxx + 1.0 + x * px -
             x * px * p - x2 * p;
    }
    if (a > 1.0) {
      const double pa = std::pow(p, a);
      return 1.0 / (1.0 - a) + (a + 1.0) * x * px / ((1.0 - a) * p) + pxx / ((1.0 - a) * p * pa) + px2 / (p * pa) -
             pxx / (a * pa) + pxx / a + 1.0 + x * px / a - x2 * pa - x * px * pa / a;
    }
    throw ValidationError("rate_D_specialized: power mobility needs alpha >= 1");
  }
  throw ValidationError("rate_D_specialized: no closed form for family '" + spec.family + "'");
}

std::vector<double> wh_gradient(const MobilityModel& model, const DensityField& p) {
  const Grid1D& grid = p.grid();
  const Potential& pot = model.potential();
  const auto px = calculus::gradient(grid, p.view());
  const auto pxx = calculus::laplacian(grid, p.view());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = grid.center(i), s = p[i];
    out[i] = -(model.f_second(s) * px[i] * px[i] + model.f_prime(s) * pxx[i] +
               model.h_prime(s) * px[i] * pot.gradient(x) + model.h(s) * pot.laplacian(x));
  }
  return out;
}

double wh_gradient_norm2(const MobilityModel& model, const DensityField& p) {
  const auto v = chemical_gradient(model, p);
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) integrand[i] = p[i] > 0.0 ? model.h(p[i]) * v[i] * v[i] : 0.0;
  return calculus::integrate(p.grid(), integrand);
}

double log_gradient_energy(const DensityCurve& curve) {
  if (curve.size() < 2) throw ValidationError("log_gradient_energy: need at least two snapshots");
  std::vector<double> per(curve.size());
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const DensityField& p = curve[k];
    auto px = calculus::gradient(p.grid(), p.view());
    std::vector<double> sq(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) sq[i] = px[i] * px[i];
    per[k] = calculus::integrate(p.grid(), calculus::masked_ratio(sq, p.view()));
  }
  const auto& t = curve.times();
  double total = 0.0;
  for (std::size_t k = 1; k < per.size(); ++k) total += 0.5 * (t[k] - t[k - 1]) * (per[k] + per[k - 1]);
  return total;
}

double growth_m_R(const Potential& potential) {
  if (!potential.gradient) throw ValidationError("growth constants: potential has no gradient");
  const double R = potential.growth_R;
  if (!(R >= 0.0) || !std::isfinite(R)) throw ValidationError("growth constants: R missing");
  if (R == 0.0) return 0.0;
  double m = 0.0;
  constexpr int kSamples = 2001;
  for (int j = 0; j < kSamples; ++j) {
    const double x = -R + 2.0 * R * j / (kSamples - 1);
    m = std::max(m, std::abs(x * potential.gradient(x)));
  }
  return m;
}

std::pair<double, double> observed_b_range(const MobilityModel& model, double max_density) {
  if (!(max_density >= 0.0)) throw ValidationError("observed_b_range: negative density");
  double top = max_density;
  if (auto sat = model.saturation()) top = std::min(top, *sat);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  constexpr int kSamples = 401;
  for (int j = 0; j < kSamples; ++j) {
    const double b = model.b(top * j / (kSamples - 1));
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  return {lo, hi};
}

std::vector<double> gronwall_bound(const MobilityModel& model, const std::vector<double>& times,
                                   double initial_moment, std::pair<double, double> b_range) {
  const Potential& pot = model.potential();
  const double C = pot.growth_C;
  if (!std::isfinite(C) || C < 0.0) throw ValidationError("gronwall_bound: growth constant C missing");
  const double m_R = growth_m_R(pot);
  const double b1 = b_range.second;
  const double gamma2 = model.f_slope_bounds().second;
  const double B = 2.0 * m_R * b1 + 2.0 * model.dim() * gamma2;
  const double k = 2.0 * b1 * C;
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    const double tau = t - times.front();
    double s = initial_moment + B * tau;
    if (k > 0.0 && tau > 0.0) {
      auto integrand = [&](double u) { return (initial_moment + B * u) * std::exp(k * (tau - u)); };
      s += k * quad::integrate(integrand, 0.0, tau, 1e-12 * std::max(1.0, s)).value;
    }
    out.push_back(s);
  }
  return out;
}

SecondMomentCheck second_moment_check(const MobilityModel& model, const std::vector<double>& times,
                                      const std::vector<double>& moments, double max_density) {
  if (times.empty() || times.size() != moments.size()) throw ValidationError("second_moment_check: size mismatch");
  SecondMomentCheck out;
  out.times = times;
  out.moments = moments;
  out.bound = gronwall_bound(model, times, moments.front(), observed_b_range(model, max_density));
  out.ok = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(moments[k] <= out.bound[k] * (1.0 + 1e-12) + 1e-12)) out.ok = false;
  }
  return out;
}

SecondMomentCheck second_moment_check(const MobilityModel& model, const DensityCurve& curve) {
  if (curve.empty()) throw ValidationError("second_moment_check: empty curve");
  std::vector<double> moments;
  double pmax = 0.0;
  const Grid1D& grid = curve.grid();
  for (const auto& p : curve.fields()) {
    std::vector<double> x2p(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) x2p[i] = grid.center(i) * grid.center(i) * p[i];
    moments.push_back(calculus::integrate(grid, x2p));
    pmax = std::max(pmax, p.max());
  }
  return second_moment_check(model, curve.times(), moments, pmax);
}

std::vector<double> time_derivative(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n != y.size() || n < 2) throw ValidationError("time_derivative: need >= 2 matching samples");
  std::vector<double> d(n);
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (t[1] - t[0]);
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] + h1 / (h2 * (h1 + h2)) * y[i + 1];
  }
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1] - h1 / (h2 * (h1 + h2)) * y[2];
  }
  {
    const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
    d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2] +
               (2 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
  }
  return d;
}

double EnergyReport::max_interior_residual() const {
  double r = 0.0;
  for (std::size_t k = 1; k + 1 < residual.size(); ++k) r = std::max(r, std::abs(residual[k]));
  return r;
}

double EnergyReport::max_I() const {
  double r = 0.0;
  for (double v : I) r = std::max(r, v);
  return r;
}

EnergyReport energy_report(const MobilityModel& model, const DensityCurve& curve, const DensityField& reference) {
  if (curve.size() < 2) throw ValidationError("energy_report: need at least two snapshots");
  require_same_grid(curve.front(), reference, "energy_report");
  EnergyReport r;
  r.times = curve.times();
  const double F_ref = free_energy(model, reference);
  for (const auto& p : curve.fields()) {
    require_same_mass(p, reference, "energy_report");
    r.F.push_back(free_energy(model, p));
    r.H_g.push_back(r.F.back() - F_ref);
    r.I.push_back(dissipation(model, p));
  }
  r.dFdt_numeric = time_derivative(r.times, r.F);
  r.residual.resize(r.times.size());
  for (std::size_t k = 0; k < r.times.size(); ++k) r.residual[k] = r.dFdt_numeric[k] + r.I[k];
  return r;
}

void write_energy_report(std::ostream& out, const EnergyReport& report, const std::vector<std::string>& header) {
  for (const auto& line : header) out << "# " << line << '\n';
  out << "time,F,H_g,I,dFdt_numeric,residual,metric_deriv\n";
  char buf[256];
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    const double md = report.metric_deriv ? (*report.metric_deriv)[k] : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", report.times[k], report.F[k],
                  report.H_g[k], report.I[k], report.dFdt_numeric[k], report.residual[k], md);
    out << buf;
  }
}

}  // namespace mvgf

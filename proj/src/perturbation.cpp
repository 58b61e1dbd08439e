#include "mvgf/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"
#include "mvgf/particles.hpp"

namespace mvgf {

namespace {

// Below this q = 1 - z^2 the factor exp(-1/q) is under 1e-300 and every
// derivative is zero in double precision.
constexpr double kMinQ = 1.0 / 690.0;

struct BumpPoint {
  double beta, z, q;
};

BumpPoint bump_point(const BumpField& b, double x) {
  const double z = (x - b.center) / b.radius;
  const double q = 1.0 - z * z;
  if (q <= kMinQ || b.amplitude == 0.0) return {0.0, z, q};
  return {b.amplitude * std::exp(-1.0 / q), z, q};
}

std::vector<double> on_cells(const Grid1D& grid, const auto& f) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.center(i));
  return v;
}

// Inner products in L^2(h(p) dx).
double h_inner(const MobilityModel& model, const DensityField& p, const std::vector<double>& a,
               const std::vector<double>& b) {
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) integrand[i] = p[i] > 0.0 ? a[i] * b[i] * model.h(p[i]) : 0.0;
  return calculus::integrate(p.grid(), integrand);
}

}  // namespace

double BumpField::value(double x) const { return bump_point(*this, x).beta; }

double BumpField::gradient(double x) const {
  const auto [beta, z, q] = bump_point(*this, x);
  if (beta == 0.0) return 0.0;
  return beta * (-2.0 * z / (q * q)) / radius;
}

double BumpField::laplacian(double x) const {
  const auto [beta, z, q] = bump_point(*this, x);
  if (beta == 0.0) return 0.0;
  const double q2 = q * q;
  return beta * (4.0 * z * z / (q2 * q2) - 2.0 / q2 - 8.0 * z * z / (q2 * q)) / (radius * radius);
}

void BumpField::validate() const {
  if (!std::isfinite(center) || !std::isfinite(amplitude) || !(radius > 0.0) || !std::isfinite(radius)) {
    throw ValidationError("bump: need finite centre and amplitude and a positive radius");
  }
}

Potential perturbed_potential(const Potential& base, const BumpField& beta) {
  beta.validate();
  Potential p = base;
  p.name = base.name + "+bump";
  p.value = [f = base.value, beta](double x) { return f(x) + beta.value(x); };
  p.gradient = [f = base.gradient, beta](double x) { return f(x) + beta.gradient(x); };
  p.laplacian = [f = base.laplacian, beta](double x) { return f(x) + beta.laplacian(x); };
  p.growth_R = std::max(base.growth_R, std::abs(beta.center) + beta.radius);
  return p;
}

DensityCurve perturbed_curve(const MobilityModel& model, const BumpField& beta, const DensityField& p_t0,
                             double t_end, std::vector<double> snapshot_times, const FpeOptions& options) {
  beta.validate();
  if (beta.amplitude == 0.0) return evolve(model, p_t0, t_end, std::move(snapshot_times), options);
  const MobilityModel perturbed = model.with_potential(perturbed_potential(model.potential(), beta));
  return evolve(perturbed, p_t0, t_end, std::move(snapshot_times), options);
}

double PerturbedResidual::max_interior_residual() const {
  double r = 0.0;
  for (std::size_t k = 1; k + 1 < residual.size(); ++k) r = std::max(r, std::abs(residual[k]));
  return r;
}

PerturbedResidual perturbed_dissipation_residual(const MobilityModel& model, const BumpField& beta,
                                                 const DensityCurve& curve) {
  beta.validate();
  if (curve.size() < 2) throw ValidationError("perturbed residual: need at least two snapshots");
  const Grid1D& grid = curve.grid();
  const auto dbeta = on_cells(grid, [&](double x) { return beta.gradient(x); });
  PerturbedResidual r;
  r.times = curve.times();
  for (const auto& p : curve.fields()) {
    if (!(p.grid() == grid)) throw ValidationError("perturbed residual: snapshots live on different grids");
    const auto a = chemical_gradient(model, p);
    r.F.push_back(free_energy(model, p));
    r.I.push_back(h_inner(model, p, a, a));
    r.cross.push_back(h_inner(model, p, a, dbeta));
    r.scale = std::max(r.scale, r.I.back() + std::abs(r.cross.back()));
  }
  r.dFdt = time_derivative(r.times, r.F);
  for (std::size_t k = 0; k < r.times.size(); ++k) r.residual.push_back(r.dFdt[k] + r.I[k] + r.cross[k]);
  return r;
}

std::vector<SlopeComparison> slope_comparison(const MobilityModel& model, const DensityField& p,
                                              const std::vector<BumpField>& betas) {
  const Grid1D& grid = p.grid();
  const auto a = chemical_gradient(model, p);
  const double aa = h_inner(model, p, a, a);
  std::vector<SlopeComparison> out;
  for (const auto& beta : betas) {
    beta.validate();
    std::vector<double> s(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) s[i] = a[i] + beta.gradient(grid.center(i));
    const double ss = h_inner(model, p, s, s);
    if (!(ss > 1e-28 * std::max(1.0, aa))) throw ValidationError("slope comparison: |a + grad beta| vanishes");
    SlopeComparison c;
    c.beta = beta;
    const double as = h_inner(model, p, a, s);
    c.lhs = as / std::sqrt(ss);
    c.rhs = std::sqrt(aa);
    c.gap = c.rhs - c.lhs;
    c.holds = c.lhs <= c.rhs + 1e-10;
    // Distance of s from its projection onto a, relative to |s|.
    if (aa > 0.0 && as > 0.0) {
      const double off = std::max(0.0, ss - as * as / aa);
      c.aligned = std::sqrt(off / ss) <= 1e-8;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<BumpField> random_bumps(std::uint64_t seed, std::size_t count, double spread) {
  std::vector<BumpField> out;
  for (std::size_t k = 0; k < count; ++k) {
    const NormalStream s(seed, static_cast<std::uint32_t>(k), 0, StreamPurpose::Initial);
    out.push_back({spread * (2.0 * s.uniform(0) - 1.0), 0.5 + 1.5 * s.uniform(1), 2.0 * s.uniform(2) - 1.0});
  }
  return out;
}

void write_slope_report(std::ostream& out, const std::vector<SlopeComparison>& rows,
                        const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  out << "center,radius,amplitude,lhs,rhs,gap,holds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.beta.center, r.beta.radius,
                  r.beta.amplitude, r.lhs, r.rhs, r.gap, r.holds ? 1 : 0);
    out << buf;
  }
}

void write_perturbed_residual(std::ostream& out, const PerturbedResidual& r, const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  out << "time,F,I,cross,dFdt,residual\n";
  char buf[256];
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.times[k], r.F[k], r.I[k], r.cross[k],
                  r.dFdt[k], r.residual[k]);
    out << buf;
  }
}

}  // namespace mvgf

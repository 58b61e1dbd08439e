#include "mvgf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"

namespace mvgf {

namespace {

double fd_profile(double c, double x) { return 1.0 / (1.0 + c * std::exp(0.5 * x * x)); }

Potential well_potential(const Potential& base, double depth, double shift) {
  Potential p = base;
  p.name = base.name + "+well";
  p.value = [f = base.value, depth, shift](double x) {
    const double z = x - shift;
    return f(x) - depth * std::exp(-z * z);
  };
  p.gradient = [f = base.gradient, depth, shift](double x) {
    const double z = x - shift;
    return f(x) + 2.0 * depth * z * std::exp(-z * z);
  };
  p.laplacian = [f = base.laplacian, depth, shift](double x) {
    const double z = x - shift;
    return f(x) + 2.0 * depth * std::exp(-z * z) * (1.0 - 2.0 * z * z);
  };
  return p;
}

}  // namespace

std::vector<ModelSpec> builtin_models() {
  return {{"linear"}, {"fermi-dirac"}, {"bose", 1.0}, {"bose", 3.0}, {"power", 1.0, 1.0}, {"power", 1.0, 2.0}};
}

InitialSpec default_initial(const MobilityModel& model) {
  InitialSpec s;
  switch (model.family()) {
    case Family::FermiDirac:
      s.kind = "fd-sandwich";
      break;
    case Family::Power:
      s.kind = "well";
      s.shift = 1.5;
      break;
    default:
      s.kind = "gaussian";
      break;
  }
  return s;
}

DensityField make_initial(const MobilityModel& model, const Grid1D& grid, const InitialSpec& spec) {
  if (spec.kind == "default") return make_initial(model, grid, default_initial(model));
  if (spec.kind == "gaussian") {
    if (!(spec.variance > 0.0) || !std::isfinite(spec.mean)) {
      throw ValidationError("initial: gaussian needs a finite mean and a positive variance");
    }
    if (!(spec.mass > 0.0)) throw ValidationError("initial: mass must be positive");
    return DensityField::gaussian(grid, spec.mean, spec.variance).normalized(spec.mass);
  }
  if (spec.kind == "stationary") {
    if (!(spec.mass > 0.0)) throw ValidationError("initial: mass must be positive");
    return stationary_density(model, spec.mass, grid.half_width()).on_grid(grid);
  }
  if (spec.kind == "fd-sandwich") {
    if (!(spec.upper_c > 0.0) || !(spec.lower_c >= spec.upper_c) || spec.weight < 0.0 || spec.weight > 1.0) {
      throw ValidationError("initial: fd-sandwich needs 0 < upper_c <= lower_c and weight in [0, 1]");
    }
    return DensityField::sample(grid, [&](double x) {
      const double lo = fd_profile(spec.lower_c, x), hi = fd_profile(spec.upper_c, x);
      return lo + spec.weight * (hi - lo) * (1.0 + std::tanh(x - spec.shift)) / 2.0;
    });
  }
  if (spec.kind == "well") {
    if (!(spec.mass > 0.0) || !std::isfinite(spec.depth) || !std::isfinite(spec.shift)) {
      throw ValidationError("initial: well needs a positive mass and finite depth and shift");
    }
    const auto shifted = model.with_potential(well_potential(model.potential(), spec.depth, spec.shift));
    return stationary_density(shifted, spec.mass, grid.half_width()).on_grid(grid);
  }
  throw ValidationError("initial: unknown kind '" + spec.kind +
                        "' (expected default, gaussian, stationary, fd-sandwich or well)");
}

std::vector<double> uniform_snapshots(double t_end, std::size_t count) {
  std::vector<double> s;
  for (std::size_t k = 1; k < count; ++k) s.push_back(t_end * static_cast<double>(k) / static_cast<double>(count));
  return s;
}

FigureSpec figure_spec(int figure) {
  FigureSpec s;
  s.figure = figure;
  s.particles.n = 500;
  s.particles.dt = 1e-3;
  s.particles.record_stride = 10;
  switch (figure) {
    case 1:
    case 2:
      s.model = {"fermi-dirac"};
      s.half_width = 12.0;
      s.n_cells = 1200;
      // Right half of a wide near-saturated profile: far from equilibrium while
      // staying between two stationary envelopes.
      s.initial.kind = "fd-sandwich";
      s.initial.lower_c = 20.0;
      s.initial.upper_c = 1e-3;
      s.initial.weight = 1.0;
      s.initial.shift = 2.0;
      s.t_end = 4.0;
      break;
    case 3:
    case 4:
      s.model = {"bose", 1.0};
      break;
    case 5:
    case 6:
      s.model = {"bose", 3.0};
      break;
    case 7:
      s.model = {"power", 1.0, 1.0};
      break;
    case 8:
      s.model = {"power", 1.0, 2.0};
      break;
    default:
      throw ValidationError("reproduce: figure must be 1..8");
  }
  if (s.model.family != "fermi-dirac") {
    s.initial.kind = "gaussian";
    s.initial.mean = 20.0;
    s.initial.variance = 1.0;
  }
  s.snapshots = static_cast<std::size_t>(std::lround(s.t_end * 100));
  return s;
}

ExponentialFit exponential_fit(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& se, double limit, double z, double rel_floor) {
  if (t.size() != y.size() || (!se.empty() && se.size() != y.size())) {
    throw ValidationError("exponential fit: series lengths differ");
  }
  if (t.empty()) throw ValidationError("exponential fit: empty series");
  const double floor = rel_floor * (y.front() - limit);
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double gap = y[k] - limit;
    const double noise = se.empty() ? 0.0 : z * se[k];
    if (!(gap > std::max(noise, floor))) break;
    xs.push_back(t[k]);
    ys.push_back(std::log(gap));
  }
  if (xs.size() < 3) throw NumericalError("exponential fit: fewer than three points above the noise floor");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) sx += xs[k], sy += ys[k];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  ExponentialFit f;
  const double slope = sxy / sxx;
  f.rate = -slope;
  f.intercept = my - slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.points = xs.size();
  f.window_end = xs.back();
  return f;
}

MonotoneCheck monotone_decrease(const std::vector<TrajectoryEnergyPath>& paths, double family_alpha) {
  if (paths.size() < 2) throw ValidationError("monotone check: need at least two paths");
  if (!(family_alpha > 0.0 && family_alpha < 1.0)) throw ValidationError("monotone check: alpha must be in (0, 1)");
  const std::size_t nt = paths.front().times.size();
  if (nt < 2) throw ValidationError("monotone check: need at least two recorded times");
  const double n = static_cast<double>(paths.size());
  MonotoneCheck c;
  // One-sided Bonferroni threshold over the nt - 1 steps.
  const boost::math::normal_distribution<double> normal;
  c.threshold = boost::math::quantile(boost::math::complement(normal, family_alpha / static_cast<double>(nt - 1)));
  for (std::size_t k = 0; k + 1 < nt; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& p : paths) {
      const double d = p.theta[k + 1] - p.theta[k];
      s += d;
      s2 += d * d;
    }
    const double mean = s / n;
    const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    if (mean > 0.0) ++c.upticks;
    const double zk = se > 0.0 ? mean / se : (mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    c.worst_z = std::max(c.worst_z, zk);
  }
  c.pass = c.worst_z <= c.threshold;
  return c;
}

std::vector<double> median_energy(const std::vector<TrajectoryEnergyPath>& paths) {
  if (paths.empty()) throw ValidationError("median energy: no paths");
  std::vector<double> out, v(paths.size());
  for (std::size_t k = 0; k < paths.front().times.size(); ++k) {
    for (std::size_t i = 0; i < paths.size(); ++i) v[i] = paths[i].theta[k] - paths[i].theta[0];
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double med = *mid;
    if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
    out.push_back(med);
  }
  return out;
}

FigureResult run_figure(const FigureSpec& spec) {
  FigureResult r;
  r.spec = spec;
  const auto model = MobilityModel::build(spec.model);
  const Grid1D grid(spec.half_width, spec.n_cells);
  const auto p0 = make_initial(model, grid, spec.initial);
  r.curve = evolve(model, p0, spec.t_end, uniform_snapshots(spec.t_end, spec.snapshots));

  ParticleOptions opt = spec.particles;
  opt.t_end = spec.t_end;
  r.ensemble = simulate(model, r.curve, opt);
  const CurveDensity density(r.curve);
  r.paths = trajectory_energy(r.ensemble, model, density, opt.threads);
  r.mean = mean_energy(r.paths);

  r.monotone = monotone_decrease(r.paths);
  r.median = median_energy(r.paths);
  r.pde_times = r.curve.times();
  // Particles follow p / mass, so their mean energy is F / mass.
  const double mass = p0.mass();
  try {
    const double F0 = free_energy(model, p0);
    for (const auto& p : r.curve.fields()) r.pde_energy.push_back((free_energy(model, p) - F0) / mass);
    r.limit = (free_energy(model, stationary_density(model, mass, spec.half_width).on_grid(grid)) - F0) / mass;
  } catch (const NumericalError& e) {
    r.pde_energy.clear();
    r.fit_note = std::string("free energy unavailable: ") + e.what();
    return r;
  }
  try {
    r.fit = exponential_fit(r.mean.times, r.mean.mean, r.mean.standard_error, r.limit);
    r.fit_available = true;
  } catch (const NumericalError& e) {
    r.fit_note = e.what();
  }
  return r;
}

}  // namespace mvgf

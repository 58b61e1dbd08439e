#include "mvgf/fpe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>

#include "mvgf/errors.hpp"

namespace mvgf {

namespace {

constexpr double kTimeTol = 1e-12;

bool same_time(double a, double b) { return std::abs(a - b) <= kTimeTol * std::max(1.0, std::abs(a)); }

}  // namespace

void DensityCurve::append(DensityField field) {
  if (!fields_.empty()) {
    if (!(field.grid() == fields_.front().grid())) {
      throw ValidationError("density curve snapshots must share one grid");
    }
    if (!(field.time() > times_.back())) {
      throw ValidationError("density curve times must be strictly increasing");
    }
  }
  times_.push_back(field.time());
  fields_.push_back(std::move(field));
}

std::size_t DensityCurve::index_of(double t) const {
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (same_time(times_[k], t)) return k;
  }
  throw ValidationError("density curve has no snapshot at t = " + std::to_string(t));
}

namespace {

// Snapshot bracket [k, k+1] and weight for time t, clamped to the curve's span.
std::pair<std::size_t, double> time_bracket(const std::vector<double>& times, double t) {
  if (times.empty()) throw ValidationError("empty density curve");
  if (times.size() == 1 || t <= times.front()) return {0, 0.0};
  if (t >= times.back()) return {times.size() - 2, 1.0};
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  return {k, (t - times[k]) / (times[k + 1] - times[k])};
}

}  // namespace

double DensityCurve::value_at(double t, double x) const {
  const auto [k, w] = time_bracket(times_, t);
  if (fields_.size() == 1) return fields_[0].interpolate(x);
  const double a = fields_[k].interpolate(x);
  if (w == 0.0) return a;
  return (1.0 - w) * a + w * fields_[k + 1].interpolate(x);
}

DensityField DensityCurve::field_at(double t) const {
  const auto [k, w] = time_bracket(times_, t);
  if (fields_.size() == 1 || w == 0.0) {
    DensityField f = fields_[k];
    f.set_time(t);
    return f;
  }
  std::vector<double> v(grid().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - w) * fields_[k][i] + w * fields_[k + 1][i];
  return DensityField(grid(), std::move(v), t);
}

namespace {

// Per-grid flux evaluator. Potential data is precomputed once; each call
// evaluates the per-cell model functions a single time and then sweeps the
// faces for the fluxes and, on request, the step-size and Peclet bounds.
// The bounds always use the face velocity u = -Phi'(x_face) b(pbar).
class FluxOperator {
 public:
  FluxOperator(const MobilityModel& model, const Grid1D& grid, FluxScheme scheme)
      : model_(model), grid_(grid), scheme_(scheme), grad_face_(grid.size() + 1, 0.0),
        dphi_(grid.size() + 1, 0.0) {
    const Potential& pot = model.potential();
    const double dx = grid.dx();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      grad_face_[i + 1] = pot.gradient(grid.face(i + 1));
      dphi_[i + 1] = scheme == FluxScheme::Balanced
                         ? (pot.value(grid.center(i + 1)) - pot.value(grid.center(i))) / dx
                         : grad_face_[i + 1];
    }
  }

  struct Bounds {
    double max_fprime = 0.0;
    double max_u = 0.0;
    double peclet = 0.0;
  };

  // Fills J (n+1 entries, zero at both ends). `bounds` is optional.
  void flux(std::span<const double> p, std::vector<double>& J, Bounds* bounds) const {
    const std::size_t n = grid_.size();
    const double dx = grid_.dx();
    f_.resize(n);
    g_.resize(n);
    fp_.resize(n);
    hp_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      f_[i] = model_.f(p[i]);
      if (scheme_ == FluxScheme::Balanced) g_[i] = g_or_inf(p[i]);
      if (bounds) {
        fp_[i] = model_.f_prime(p[i]);
        hp_[i] = std::abs(model_.h_prime(p[i]));
      }
    }
    J.assign(n + 1, 0.0);
    Bounds b;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double pl = p[i], pr = p[i + 1];
      const double pbar = 0.5 * (pl + pr);
      double m;
      double bbar = -1.0;
      if (scheme_ == FluxScheme::Balanced) {
        m = balanced_mobility(pl, pr, f_[i + 1] - f_[i], g_[i + 1] - g_[i], pbar);
      } else if (scheme_ == FluxScheme::Central) {
        bbar = model_.b(pbar);
        m = pbar * bbar;
      } else {
        bbar = model_.b(pbar);
        m = (dphi_[i + 1] * bbar < 0.0 ? pl : pr) * bbar;
      }
      J[i + 1] = -dphi_[i + 1] * m - (f_[i + 1] - f_[i]) / dx;
      if (bounds) {
        if (bbar < 0.0) bbar = model_.b(pbar);
        const double phip = std::abs(grad_face_[i + 1]);
        b.max_fprime = std::max({b.max_fprime, fp_[i], fp_[i + 1]});
        b.max_u = std::max(b.max_u, phip * std::abs(bbar));
        b.peclet = std::max(b.peclet, phip * std::max(hp_[i], hp_[i + 1]) * dx /
                                          (2.0 * std::min(fp_[i], fp_[i + 1])));
      }
    }
    if (bounds) *bounds = b;
  }

 private:
  double g_or_inf(double v) const {
    if (v <= 0.0) return -INFINITY;
    if (const auto sat = model_.saturation(); sat && v >= *sat) return INFINITY;
    return model_.g(v);
  }

  // (f_r - f_l) / (g_r - g_l), with the limit h(pbar) for nearly equal values
  // and 0 when either side sits at a singular point of g.
  double balanced_mobility(double pl, double pr, double df, double dg, double pbar) const {
    if (!std::isfinite(dg)) return 0.0;
    if (std::abs(pr - pl) <= 1e-6 * pbar || dg == 0.0) return model_.h(pbar);
    return df / dg;
  }

  const MobilityModel& model_;
  const Grid1D& grid_;
  FluxScheme scheme_;
  std::vector<double> grad_face_;
  std::vector<double> dphi_;
  // Scratch, reused across calls on one operator (not shared between threads).
  mutable std::vector<double> f_, g_, fp_, hp_;
};

}  // namespace

std::vector<double> face_flux(const MobilityModel& model, const DensityField& p, FluxScheme scheme) {
  std::vector<double> J;
  FluxOperator(model, p.grid(), scheme).flux(p.view(), J, nullptr);
  return J;
}

std::vector<double> rhs(const MobilityModel& model, const DensityField& p, FluxScheme scheme) {
  auto J = face_flux(model, p, scheme);
  for (double v : J) {
    if (!std::isfinite(v)) throw NumericalError("non-finite face flux: blow-up or time step too large");
  }
  auto out = calculus::face_divergence(p.grid(), J);
  for (double& v : out) v = -v;
  return out;
}

namespace {

double dt_from_bounds(double dx, double max_fp, double max_u, double cfl_safety) {
  double dt = max_fp > 0.0 ? dx * dx / (2.0 * max_fp) : INFINITY;
  if (max_u > 0.0) dt = std::min(dt, dx / max_u);
  if (!std::isfinite(dt)) throw ValidationError("stable_dt: no diffusion or drift to bound the step");
  return cfl_safety * dt;
}

}  // namespace

double stable_dt(const MobilityModel& model, const DensityField& p, double cfl_safety) {
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ValidationError("cfl_safety must lie in (0, 1]");
  const Grid1D& grid = p.grid();
  if (!(grid.dx() > 0.0)) throw ValidationError("degenerate grid");
  std::vector<double> J;
  FluxOperator::Bounds b;
  FluxOperator(model, grid, FluxScheme::Central).flux(p.view(), J, &b);
  return dt_from_bounds(grid.dx(), b.max_fprime, b.max_u, cfl_safety);
}

double cell_peclet(const MobilityModel& model, const DensityField& p) {
  std::vector<double> J;
  FluxOperator::Bounds b;
  FluxOperator(model, p.grid(), FluxScheme::Central).flux(p.view(), J, &b);
  return b.peclet;
}

DensityCurve evolve(const MobilityModel& model, const DensityField& init, double t_end,
                    std::vector<double> snapshot_times, const FpeOptions& options) {
  const double t0 = init.time();
  if (!(t_end > t0) || !std::isfinite(t_end)) {
    throw ValidationError("evolve: t_end must exceed the initial time");
  }
  if (!(options.cfl_safety > 0.0 && options.cfl_safety <= 1.0)) {
    throw ValidationError("cfl_safety must lie in (0, 1]");
  }
  if (const auto sat = model.saturation(); sat && init.max() > *sat) {
    throw ValidationError("evolve: initial density exceeds the saturation level of " + model.name());
  }
  std::sort(snapshot_times.begin(), snapshot_times.end());
  std::vector<double> targets;
  for (double t : snapshot_times) {
    if (t < t0 - kTimeTol || t > t_end + kTimeTol) {
      throw ValidationError("snapshot time " + std::to_string(t) + " outside [t0, t_end]");
    }
    if (same_time(t, t0)) continue;
    if (targets.empty() || !same_time(targets.back(), t)) targets.push_back(t);
  }
  if (targets.empty() || !same_time(targets.back(), t_end)) targets.push_back(t_end);
  targets.back() = t_end;

  DensityCurve curve;
  curve.append(init);
  const Grid1D& grid = init.grid();
  const double dx = grid.dx();
  const FluxOperator op(model, grid, options.scheme);
  std::vector<double> p = init.values(), J;
  double t = t0;
  std::size_t steps = 0, clamped = 0;
  const auto sat = model.saturation();
  const bool second_order = options.scheme != FluxScheme::Upwind;

  for (double target : targets) {
    while (t < target) {
      FluxOperator::Bounds b;
      op.flux(p, J, &b);
      if (second_order && b.peclet > 1.0) {
        throw ValidationError("cell Peclet number " + std::to_string(b.peclet) + " > 1 at t = " +
                              std::to_string(t) +
                              ": positivity is not guaranteed; refine the grid or use upwind flux");
      }
      double dt = dt_from_bounds(dx, b.max_fprime, b.max_u, options.cfl_safety);
      bool land = false;
      if (t + dt >= target - kTimeTol * std::max(1.0, std::abs(target))) {
        dt = target - t;
        land = true;
      }
      double pmax = 0.0;
      for (double v : p) pmax = std::max(pmax, v);
      for (std::size_t i = 0; i < p.size(); ++i) {
        double v = p[i] - dt * (J[i + 1] - J[i]) / dx;
        if (!std::isfinite(v)) {
          throw NumericalError("evolve: non-finite density at x = " + std::to_string(grid.center(i)) +
                               ", t = " + std::to_string(t) + " (blow-up)");
        }
        if (v < 0.0) {
          if (v < -1e-13 * pmax) {
            throw NumericalError("evolve: positivity lost at x = " + std::to_string(grid.center(i)) +
                                 ", t = " + std::to_string(t) + " (value " + std::to_string(v) +
                                 ", dt = " + std::to_string(dt) + ")");
          }
          v = 0.0;
          ++clamped;
        }
        if (sat && v > *sat) {
          throw NumericalError("evolve: density " + std::to_string(v) + " crossed the saturation level");
        }
        p[i] = v;
      }
      t = land ? target : t + dt;
      if (++steps > options.max_steps) throw NumericalError("evolve: step limit exceeded");
    }
    curve.append(DensityField(grid, p, target));
  }
  curve.steps = steps;
  curve.clamped_cells = clamped;
  return curve;
}

void write_curve(const std::filesystem::path& dir, const DensityCurve& curve, const std::string& header) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.csv");
  if (!index) throw ValidationError("cannot write " + (dir / "index.csv").string());
  if (!header.empty()) index << "# " << header << "\n";
  index << "snapshot,time,file\n";
  char name[64], t[64];
  for (std::size_t k = 0; k < curve.size(); ++k) {
    std::snprintf(name, sizeof name, "snapshot_%05zu.csv", k);
    std::snprintf(t, sizeof t, "%.17g", curve.times()[k]);
    index << k << "," << t << "," << name << "\n";
    std::ofstream out(dir / name);
    write_field_csv(out, curve[k], header);
  }
}

DensityCurve read_curve(const std::filesystem::path& dir) {
  std::ifstream index(dir / "index.csv");
  if (!index) throw ValidationError("missing " + (dir / "index.csv").string());
  DensityCurve curve;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("snapshot,", 0) == 0) continue;
    const auto last = line.rfind(',');
    std::ifstream in(dir / line.substr(last + 1));
    if (!in) throw ValidationError("missing snapshot file " + line.substr(last + 1));
    curve.append(read_field_csv(in));
  }
  return curve;
}

}  // namespace mvgf

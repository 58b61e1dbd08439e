#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvgf/fpe.hpp"
#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"
#include "mvgf/particles.hpp"

namespace mvgf {

/// The six builtin parametrizations: linear, Fermi-Dirac, Bose gamma = 1 and 3,
/// power alpha = 1 and 2.
std::vector<ModelSpec> builtin_models();

/// Named initial density with its parameters.
///   default         per-model test density (see default_initial_kind)
///   gaussian        N(mean, variance)
///   stationary      g^{-1}(c - Phi) of the given mass
///   fd-sandwich     1/(1 + c_lo e^{x^2/2}) + weight (upper - lower) (1 + tanh(x - shift)) / 2,
///                   lower/upper the Fermi-Dirac profiles with c_lo = lower_c, c_hi = upper_c
///   well            stationary density of Phi - depth exp(-(x - shift)^2), same mobility
struct InitialSpec {
  std::string kind = "default";
  double mean = 2.0;
  double variance = 1.0;
  double mass = 1.0;
  double lower_c = 4.0;
  double upper_c = 0.5;
  double weight = 0.6;
  double shift = 1.0;
  double depth = 2.0;
};

/// Kind used by "default": fd-sandwich for Fermi-Dirac, well (shift 1.5) for
/// power mobility, gaussian N(2, 1) otherwise.
InitialSpec default_initial(const MobilityModel& model);

/// Samples the density on the grid. Throws ValidationError for unknown kinds or
/// parameters outside their range.
DensityField make_initial(const MobilityModel& model, const Grid1D& grid, const InitialSpec& spec);

/// Evenly spaced snapshot times t_end k / count, k = 1..count-1.
std::vector<double> uniform_snapshots(double t_end, std::size_t count);

// ---------------------------------------------------------------------------
// Figure reproduction

struct FigureSpec {
  int figure = 2;
  ModelSpec model;
  double half_width = 30.0;
  std::size_t n_cells = 2000;
  InitialSpec initial;
  double t_end = 5.0;
  /// PDE snapshots seen by the particles (linear interpolation in between).
  std::size_t snapshots = 500;
  ParticleOptions particles;
};

/// Defaults per figure: fig1/2 Fermi-Dirac, fig3/4 Bose gamma = 1, fig5/6 Bose
/// gamma = 3, fig7 power alpha = 1, fig8 power alpha = 2. Bose and power start
/// from N(20, 1); Fermi-Dirac from the envelope sandwich.
FigureSpec figure_spec(int figure);

/// Least-squares line through log(y - limit) against t on the leading window
/// where y - limit stays above the noise floor.
struct ExponentialFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
  double window_end = 0.0;
};

/// Uses points while y - limit > max(z * se, rel_floor * (y0 - limit)). Throws
/// NumericalError when fewer than three points qualify.
ExponentialFit exponential_fit(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& se, double limit, double z = 5.0,
                               double rel_floor = 1e-3);

/// Step-wise decrease of the mean energy with the per-step standard error of
/// the path increments.
struct MonotoneCheck {
  /// Largest (mean increment) / (SE of the increment) over steps.
  double worst_z = 0.0;
  /// Number of steps whose mean increment is positive at all.
  std::size_t upticks = 0;
  /// z level with family-wise error family_alpha over all steps.
  double threshold = 0.0;
  bool pass = false;
};

/// Passes when no step rises by more than the Bonferroni-corrected z level.
MonotoneCheck monotone_decrease(const std::vector<TrajectoryEnergyPath>& paths, double family_alpha = 0.01);

/// Median over paths of theta(t_k) - theta(0), robust where theta is heavy tailed.
std::vector<double> median_energy(const std::vector<TrajectoryEnergyPath>& paths);

struct FigureResult {
  FigureSpec spec;
  DensityCurve curve;
  ParticleEnsemble ensemble;
  std::vector<TrajectoryEnergyPath> paths;
  MeanEnergy mean;
  std::vector<double> median;
  /// (F(p_t) - F(p_0)) / mass on the PDE snapshots, the value the mean
  /// energy estimates. Empty when F is not finite on the grid.
  std::vector<double> pde_times;
  std::vector<double> pde_energy;
  /// (F(p_inf) - F(p_0)) / mass for the stationary density of the same mass.
  double limit = 0.0;
  MonotoneCheck monotone;
  /// Fit of the particle mean energy against `limit`.
  ExponentialFit fit;
  bool fit_available = false;
  std::string fit_note;
};

FigureResult run_figure(const FigureSpec& spec);

}  // namespace mvgf

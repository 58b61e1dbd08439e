#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvgf/fpe.hpp"
#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"

namespace mvgf {

struct TransportControls {
  /// Number of time steps K of the dynamic formulation.
  std::size_t n_time = 16;
  std::size_t max_iters = 50000;
  /// Relative change of the action between convergence checks.
  double primal_tol = 1e-6;
  /// Sup-norm of the discrete continuity residual.
  double constraint_tol = 1e-8;
  /// Primal and dual step sizes (tau * sigma < 1); 0 picks 0.99 for both.
  double tau = 0.0;
  double sigma = 0.0;
  /// Iterations between convergence checks.
  std::size_t check_every = 25;
};

struct TransportProblem {
  MobilityModel model;
  DensityField p0;
  DensityField p1;
  TransportControls controls;
};

/// Staggered-grid solution: densities at integer time levels and cell centres,
/// fluxes at half time levels and faces.
struct TransportSolution {
  std::size_t n_time = 0;
  std::size_t n_cells = 0;
  /// (K+1) x n_cells, row-major; row 0 is p0 and row K is p1.
  std::vector<double> u;
  /// K x (n_cells+1), row-major; the two boundary faces carry zero flux.
  std::vector<double> m;
  double action = 0.0;
  double distance = 0.0;
  double constraint_residual = 0.0;
  double relative_change = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  /// Interior faces whose interpolated density went negative at the end.
  std::size_t negative_faces = 0;

  double u_at(std::size_t k, std::size_t i) const { return u[k * n_cells + i]; }
  double m_at(std::size_t k, std::size_t j) const { return m[k * (n_cells + 1) + j]; }
};

/// W_h(p0, p1) by a first-order primal-dual iteration on the dynamic problem.
/// Requires a model with concave h; densities beyond the saturation level are rejected.
TransportSolution wh_distance(const TransportProblem& problem);

/// Action sum m^2 / h(u_face) dx dt of a staggered pair, with the perspective
/// convention (0 for m = 0 on zero mobility, +inf for m != 0 there).
double transport_action(const MobilityModel& model, const Grid1D& grid, const TransportSolution& solution);

/// Exact 1-D W2 via piecewise-linear quantile functions.
double w2_quantile_oracle(const DensityField& p0, const DensityField& p1);

struct MetricDerivativeReport {
  double t0 = 0.0;
  std::vector<double> deltas;
  std::vector<double> distances;
  std::vector<double> estimates;
  std::vector<bool> converged;
  /// Linear extrapolation to delta = 0 from the two smallest deltas
  /// (2 e(d/2) - e(d) when they differ by a factor of two).
  double extrapolated = 0.0;
  double sqrt_dissipation = 0.0;
  /// |extrapolated - sqrt(I)| / sqrt(I); absolute difference when I vanishes.
  double limit_check = 0.0;
};

/// W_h(p(t0), p(t0 + delta)) / delta along a curve. Snapshots must exist at t0 + delta.
MetricDerivativeReport metric_derivative(const MobilityModel& model, const DensityCurve& curve, double t0,
                                         const std::vector<double>& deltas, const TransportControls& controls = {});

/// Summary line and u/m stacks.
void write_transport_solution(std::ostream& out, const Grid1D& grid, const TransportSolution& solution,
                              const std::vector<std::string>& header = {});
void write_metric_derivative(std::ostream& out, const MetricDerivativeReport& report,
                             const std::vector<std::string>& header = {});

}  // namespace mvgf

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvgf/fpe.hpp"
#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"

namespace mvgf {

/// F(p) = int (eta(p) + Phi p) dx, midpoint rule, eta(0) = 0.
double free_energy(const MobilityModel& model, const DensityField& p);

/// H_g(p | q) = F(p) - F(q). Masses must agree to 1e-6.
double relative_entropy(const MobilityModel& model, const DensityField& p, const DensityField& q);

/// Bregman form int [eta(p) - eta(q) - g(q)(p - q)] dx. Equals relative_entropy
/// when q is the stationary density of the same mass.
double bregman_entropy(const MobilityModel& model, const DensityField& p, const DensityField& q);

/// Discrete d/dx (g(p) + Phi). Cells below 1e-14 max(p) get 0; stencils that touch
/// p = 0 fall back to g'(p) p_x.
std::vector<double> chemical_gradient(const MobilityModel& model, const DensityField& p);

/// I(p) = int |d/dx (g(p) + Phi)|^2 b(p) p dx.
double dissipation(const MobilityModel& model, const DensityField& p);

/// I_g(p | q) = int |d/dx (g(p) - g(q))|^2 h(p) dx.
double relative_fisher(const MobilityModel& model, const DensityField& p, const DensityField& q);

/// Trajectorial rate
///   D = phi'(p) (Phi'' h + Phi' h' p_x + f'' p_x^2 + f' p_xx)
///     + (f/p) (phi'' p_x^2 + phi' p_xx + Phi'') - (phi' p_x + Phi') Phi' b
/// at one point. Requires p > 0.
double rate_D_pointwise(const MobilityModel& model, double p, double px, double pxx, double x);

/// D on every cell of a snapshot; 0 where p < 1e-14 max(p).
std::vector<double> rate_D_field(const MobilityModel& model, const DensityField& p);

/// D at (curve time t_index, cell x_index) from grid derivatives of that snapshot.
double rate_D_generic(const MobilityModel& model, const DensityCurve& curve, std::size_t t_index,
                      std::size_t x_index);

/// Boundary contribution to the rate average on a truncated domain:
///   int D p dx = -I(p) + [f(p) theta_x + (phi(p) - g(p)) J]_{-L}^{L},
/// theta = phi(p) + Phi and J = -h(p) (g(p) + Phi)_x, which vanishes for
/// solutions of the no-flux problem. End values are extrapolated from the two
/// outermost cells. Negligible for light tails, O(1) for power mobility on
/// desk-scale domains.
double rate_D_boundary_term(const MobilityModel& model, const DensityField& p);

/// Closed forms for Phi = x^2/2, one per family. Fermi-Dirac, Bose (any gamma),
/// power alpha = 1 and power alpha > 1.
double rate_D_specialized(const ModelSpec& spec, double p, double px, double pxx, double x);

/// Bose building block A(r) = int_0^r ln(s^gamma / (1 + s^gamma)) ds.
double bose_A(double gamma, double r);

/// -d/dx (h(p) d/dx (g(p) + Phi)), expanded as -(f'' p_x^2 + f' p_xx + h' p_x Phi' + h Phi'')
/// with central-difference derivatives.
std::vector<double> wh_gradient(const MobilityModel& model, const DensityField& p);

/// int |d/dx (g(p) + Phi)|^2 h(p) dx.
double wh_gradient_norm2(const MobilityModel& model, const DensityField& p);

/// Trapezoid in time of int |p_x|^2 / p dx over the snapshots.
double log_gradient_energy(const DensityCurve& curve);

/// Second moments against the Gronwall envelope
///   s(t) = m0 + B t + k int_0^t (m0 + B u) e^{k (t - u)} du,
///   B = 2 m_R b1 + 2 d gamma_2,  k = 2 b1 C.
struct SecondMomentCheck {
  std::vector<double> times;
  std::vector<double> moments;
  std::vector<double> bound;
  bool ok = false;
};

/// m_R = max |x Phi'(x)| over |x| <= R.
double growth_m_R(const Potential& potential);

/// Envelope values at `times` given the initial moment and the mobility range (b0, b1).
std::vector<double> gronwall_bound(const MobilityModel& model, const std::vector<double>& times,
                                   double initial_moment, std::pair<double, double> b_range);

/// b over [0, max p] of the curve; (b0, b1).
std::pair<double, double> observed_b_range(const MobilityModel& model, double max_density);

SecondMomentCheck second_moment_check(const MobilityModel& model, const DensityCurve& curve);
SecondMomentCheck second_moment_check(const MobilityModel& model, const std::vector<double>& times,
                                      const std::vector<double>& moments, double max_density);

/// Derivative of samples y(t): centred three-point stencil inside, one-sided
/// second-order stencils at both ends. Non-uniform spacing allowed.
std::vector<double> time_derivative(const std::vector<double>& t, const std::vector<double>& y);

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> F;
  std::vector<double> H_g;
  std::vector<double> I;
  std::vector<double> dFdt_numeric;
  std::vector<double> residual;
  std::optional<std::vector<double>> metric_deriv;

  /// max |residual| over interior snapshots.
  double max_interior_residual() const;
  double max_I() const;
};

/// F, H_g against `reference`, I and the identity residual dF/dt + I per snapshot.
EnergyReport energy_report(const MobilityModel& model, const DensityCurve& curve,
                           const DensityField& reference);

/// Columns: time,F,H_g,I,dFdt_numeric,residual,metric_deriv. Each header line is prefixed by '#'.
void write_energy_report(std::ostream& out, const EnergyReport& report,
                         const std::vector<std::string>& header = {});

}  // namespace mvgf

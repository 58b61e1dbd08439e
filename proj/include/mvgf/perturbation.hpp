#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvgf/fpe.hpp"
#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"

namespace mvgf {

/// Smooth bump A exp(-1 / (1 - z^2)), z = (x - c) / r, zero for |z| >= 1.
struct BumpField {
  double center = 0.0;
  double radius = 1.0;
  double amplitude = 0.0;

  double value(double x) const;
  double gradient(double x) const;
  double laplacian(double x) const;
  /// Throws ValidationError unless radius > 0 and all fields are finite.
  void validate() const;
};

/// Phi + beta. The growth radius is widened to cover the bump's support.
Potential perturbed_potential(const Potential& base, const BumpField& beta);

/// Evolves p_t0 under the potential Phi + beta. A zero-amplitude bump runs the
/// unperturbed model, so its output is bit-identical to evolve().
DensityCurve perturbed_curve(const MobilityModel& model, const BumpField& beta, const DensityField& p_t0,
                             double t_end, std::vector<double> snapshot_times = {}, const FpeOptions& options = {});

struct PerturbedResidual {
  std::vector<double> times;
  /// F with the original Phi along the perturbed curve.
  std::vector<double> F;
  std::vector<double> I;
  /// int <d(g(p) + Phi), d beta> b(p) p dx.
  std::vector<double> cross;
  std::vector<double> dFdt;
  /// dFdt + I + cross.
  std::vector<double> residual;
  /// max over snapshots of I + |cross|.
  double scale = 0.0;

  /// Largest |residual| over interior snapshots.
  double max_interior_residual() const;
};

/// Dissipation identity along a perturbed curve; `model` carries the original Phi.
PerturbedResidual perturbed_dissipation_residual(const MobilityModel& model, const BumpField& beta,
                                                 const DensityCurve& curve);

struct SlopeComparison {
  BumpField beta;
  /// <a, a + b> / ||a + b|| and ||a|| in L^2(h(p) dx), a = d(g(p) + Phi), b = d beta.
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  bool holds = false;
  /// a + b is numerically a positive multiple of a.
  bool aligned = false;
};

std::vector<SlopeComparison> slope_comparison(const MobilityModel& model, const DensityField& p,
                                              const std::vector<BumpField>& betas);

/// Bumps with centres in [-spread, spread], radii in [0.5, 2] and amplitudes
/// in [-1, 1], drawn from a counter-based stream.
std::vector<BumpField> random_bumps(std::uint64_t seed, std::size_t count, double spread);

/// Columns center,radius,amplitude,lhs,rhs,gap,holds.
void write_slope_report(std::ostream& out, const std::vector<SlopeComparison>& rows,
                        const std::vector<std::string>& header = {});
/// Columns time,F,I,cross,dFdt,residual.
void write_perturbed_residual(std::ostream& out, const PerturbedResidual& r,
                              const std::vector<std::string>& header = {});

}  // namespace mvgf

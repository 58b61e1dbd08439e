#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"

namespace mvgf {

/// Face mobility in the drift part of the flux J = -Phi'_face m - (f(p_{i+1}) - f(p_i)) / dx.
///   Balanced: m = (f(p_{i+1}) - f(p_i)) / (g(p_{i+1}) - g(p_i)), a mean value of
///             h = f'/g' on [p_i, p_{i+1}], with Phi'_face = (Phi_{i+1} - Phi_i) / dx.
///             J vanishes exactly when g(p) + Phi is constant, so sampled
///             stationary densities are exact discrete equilibria.
///   Central:  m = pbar b(pbar) with the arithmetic face average pbar.
///   Upwind:   m = p_donor b(pbar), donor chosen by the sign of the drift (first order).
enum class FluxScheme { Balanced, Central, Upwind };

struct FpeOptions {
  double cfl_safety = 0.45;
  FluxScheme scheme = FluxScheme::Balanced;
  std::size_t max_steps = 100'000'000;
};

/// Snapshots t -> p(t, .) on one shared grid.
class DensityCurve {
 public:
  DensityCurve() = default;

  void append(DensityField field);

  std::size_t size() const { return fields_.size(); }
  bool empty() const { return fields_.empty(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<DensityField>& fields() const { return fields_; }
  const DensityField& operator[](std::size_t k) const { return fields_[k]; }
  const DensityField& front() const { return fields_.front(); }
  const DensityField& back() const { return fields_.back(); }
  const Grid1D& grid() const { return fields_.front().grid(); }

  /// Index of the snapshot at time t (within 1e-12); throws if absent.
  std::size_t index_of(double t) const;
  /// Density at (t, x): linear in x within a snapshot, linear in t between snapshots.
  double value_at(double t, double x) const;
  /// Snapshot-level linear interpolation in time.
  DensityField field_at(double t) const;

  /// Forward-Euler steps taken to produce the curve (0 when assembled by hand).
  std::size_t steps = 0;
  /// Cells whose roundoff-level negative values were reset to zero.
  std::size_t clamped_cells = 0;

 private:
  std::vector<double> times_;
  std::vector<DensityField> fields_;
};

/// Face fluxes J_{i+1/2} (n+1 entries, zero at both ends; see FluxScheme).
std::vector<double> face_flux(const MobilityModel& model, const DensityField& p,
                              FluxScheme scheme = FluxScheme::Balanced);

/// dp/dt = -face_divergence(J).
std::vector<double> rhs(const MobilityModel& model, const DensityField& p,
                        FluxScheme scheme = FluxScheme::Balanced);

/// cfl_safety * min(dx^2 / (2 max f'(p)), dx / max |u|) with u = -Phi'(x_face) b(pbar).
double stable_dt(const MobilityModel& model, const DensityField& p, double cfl_safety = 0.45);

/// Largest |Phi'(x_face)| max|h'| dx / (2 min f') over the faces. The second
/// order schemes are monotone, hence positivity preserving, when this is <= 1.
double cell_peclet(const MobilityModel& model, const DensityField& p);

/// Forward Euler from init.time() to t_end. The returned curve starts with
/// init and holds one snapshot per requested time (t_end is always included).
DensityCurve evolve(const MobilityModel& model, const DensityField& init, double t_end,
                    std::vector<double> snapshot_times = {}, const FpeOptions& options = {});

/// Directory layout: index.csv (snapshot,time,file) and snapshot_NNNNN.csv files.
void write_curve(const std::filesystem::path& dir, const DensityCurve& curve,
                 const std::string& header = {});
DensityCurve read_curve(const std::filesystem::path& dir);

}  // namespace mvgf

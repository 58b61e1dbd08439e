#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mvgf/fpe.hpp"
#include "mvgf/grid.hpp"
#include "mvgf/models.hpp"

namespace mvgf {

// ---------------------------------------------------------------------------
// Random numbers

/// Philox4x32-10 block function (Salmon, Moraes, Dror, Shaw 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// What a stream is used for; folded into the key so the same
/// (trajectory, branch) pair never reuses a counter across purposes.
enum class StreamPurpose : std::uint32_t { Increments = 0, Initial = 1 };

/// Counter-based stream keyed by (master_seed, trajectory, branch, purpose).
/// Every draw is a pure function of the key and its index, so results do not
/// depend on evaluation order or thread count.
class NormalStream {
 public:
  NormalStream(std::uint64_t master_seed, std::uint32_t trajectory, std::uint32_t branch,
               StreamPurpose purpose = StreamPurpose::Increments);

  /// Uniform on (0, 1), 53 random bits.
  double uniform(std::uint64_t index) const;
  /// Standard normal by Box-Muller; draws 2k and 2k+1 share one Philox block.
  double normal(std::uint64_t index) const;
  /// 64-bit id of the stream, recorded in ensemble output.
  std::uint64_t id() const;

 private:
  std::array<std::uint32_t, 2> block_key_{};
  std::uint32_t trajectory_ = 0;
  std::uint32_t branch_ = 0;
};

// ---------------------------------------------------------------------------
// Densities seen by the particles

struct PointDensity {
  double p = 0.0;
  double px = 0.0;
  double pxx = 0.0;
};

/// Density and its first two spatial derivatives at (t, x).
class DensityProvider {
 public:
  virtual ~DensityProvider() = default;
  virtual PointDensity at(double t, double x) const = 0;
};

/// PDE density: grid values and central-difference derivatives, linear in x
/// within a snapshot and linear in t between snapshots. Points outside
/// [-L, L] use the nearest boundary cell.
class CurveDensity final : public DensityProvider {
 public:
  explicit CurveDensity(const DensityCurve& curve);
  PointDensity at(double t, double x) const override;
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

 private:
  Grid1D grid_;
  std::vector<double> times_;
  std::vector<std::vector<double>> p_, px_, pxx_;
};

/// Gaussian kernel estimate with analytic derivatives.
class KdeDensity final : public DensityProvider {
 public:
  /// bandwidth <= 0 selects Silverman's rule 1.06 sigma n^{-1/5}.
  explicit KdeDensity(std::vector<double> samples, double bandwidth = 0.0);
  PointDensity at(double t, double x) const override { return (void)t, at(x); }
  PointDensity at(double x) const;
  double bandwidth() const { return h_; }

 private:
  std::vector<double> samples_;
  double h_ = 0.0;
};

/// Silverman's rule of thumb 1.06 sigma n^{-1/5}; throws for a degenerate cloud.
double silverman_bandwidth(const std::vector<double>& samples);

// ---------------------------------------------------------------------------
// Ensembles

enum class DensityMode { PdeCoupled, Kde };

struct ParticleOptions {
  std::size_t n = 500;
  double t_end = 1.0;
  double dt = 1e-3;
  std::uint64_t master_seed = 20240601;
  /// Positions are stored every `record_stride` steps and at t_end.
  std::size_t record_stride = 1;
  /// 0 uses std::thread::hardware_concurrency().
  unsigned threads = 0;
  /// Kde mode only; <= 0 selects Silverman's rule at every step.
  double kde_bandwidth = 0.0;
};

struct ParticleEnsemble {
  std::size_t n = 0;
  std::vector<double> times;
  /// Row-major n x times.size().
  std::vector<double> positions;
  std::uint64_t master_seed = 0;
  DensityMode mode = DensityMode::PdeCoupled;
  std::vector<std::uint64_t> stream_ids;

  double at(std::size_t path, std::size_t k) const { return positions[path * times.size() + k]; }
  std::vector<double> cloud(std::size_t k) const;
};

/// Positions drawn from p0 by inverting the cell-wise linear CDF.
std::vector<double> sample_initial(const DensityField& p0, std::size_t n, std::uint64_t master_seed);

/// Euler-Maruyama for dX = -Phi'(X) b(p) dt + sqrt(2 f(p)/p) dW with p taken from the PDE curve.
ParticleEnsemble simulate(const MobilityModel& model, const DensityCurve& curve, const ParticleOptions& options);

/// Same dynamics with p replaced by a KDE of the current cloud.
ParticleEnsemble simulate_kde(const MobilityModel& model, const DensityField& p0, const ParticleOptions& options);

/// KDE of each recorded cloud, selected by the nearest recorded time.
class EnsembleKde final : public DensityProvider {
 public:
  EnsembleKde(const ParticleEnsemble& ensemble, double bandwidth = 0.0);
  PointDensity at(double t, double x) const override;

 private:
  std::vector<double> times_;
  std::vector<KdeDensity> kdes_;
};

// ---------------------------------------------------------------------------
// Energy along trajectories

struct TrajectoryEnergyPath {
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> D_integral;
  std::vector<double> martingale_residual;
};

/// theta = phi(p) + Phi and D along every path; D integrated by the trapezoid rule.
std::vector<TrajectoryEnergyPath> trajectory_energy(const ParticleEnsemble& ensemble, const MobilityModel& model,
                                                    const DensityProvider& density, unsigned threads = 0);

/// Mean of theta(t_k) - theta(0) over paths, with its standard error.
struct MeanEnergy {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> standard_error;
};
MeanEnergy mean_energy(const std::vector<TrajectoryEnergyPath>& paths);

struct MartingaleTest {
  std::vector<double> times;
  std::vector<double> mean_residual;
  std::vector<double> variance;
  std::vector<double> standard_error;
  bool pass = false;
  /// Largest |mean| / SE over times with SE > 0.
  double worst_z = 0.0;
};

/// Zero-mean check at 4 standard errors per time. Needs >= 100 paths.
MartingaleTest martingale_test(const std::vector<TrajectoryEnergyPath>& paths, double z_band = 4.0);

// ---------------------------------------------------------------------------
// Conditional rates by branching

struct BranchOptions {
  std::vector<double> horizons{0.08, 0.04, 0.02};
  std::size_t branches = 1000;
  double dt = 1e-3;
  std::uint64_t master_seed = 20240601;
  unsigned threads = 0;
  /// Multiplier on the Monte-Carlo standard error in the error bar.
  double z_band = 3.0;
};

struct PathRate {
  std::size_t path = 0;
  double x0 = 0.0;
  /// (E[theta(t0+h) | X(t0)] - theta(t0, X(t0))) / h per horizon.
  std::vector<double> rates;
  std::vector<double> standard_errors;
  /// Least-squares intercept of rate(h) at h = 0 and its standard error.
  double extrapolated = 0.0;
  double extrapolated_se = 0.0;
  /// |fitted slope| * smallest horizon: size of the first-order bias still
  /// present at the finest horizon, used as the bias part of the error bar.
  double bias_bar = 0.0;
  double D = 0.0;
  bool within = false;
};

struct ConditionalRateReport {
  double t0 = 0.0;
  std::vector<PathRate> paths;
  double fraction_within = 0.0;
  double population_mean = 0.0;
  double population_se = 0.0;
};

/// Branches `options.branches` sub-paths from X(t0) for each listed path.
ConditionalRateReport conditional_rate_estimate(const ParticleEnsemble& ensemble, const MobilityModel& model,
                                                const DensityProvider& density, std::size_t t0_index,
                                                const std::vector<std::size_t>& paths, const BranchOptions& options);

// ---------------------------------------------------------------------------
// Diagnostics and output

/// E|X(t_k)|^2 over the ensemble.
std::vector<double> ensemble_second_moments(const ParticleEnsemble& ensemble);

/// int |F_emp - F_p| dx between the recorded cloud and a grid density.
double w1_to_density(const std::vector<double>& samples, const DensityField& p);

/// Long format: path_id,t,x,theta,D_integral,residual.
void write_energy_paths(std::ostream& out, const ParticleEnsemble& ensemble,
                        const std::vector<TrajectoryEnergyPath>& paths, const std::vector<std::string>& header = {});

/// Long format: path_id,stream_id,t,x.
void write_ensemble(std::ostream& out, const ParticleEnsemble& ensemble, const std::vector<std::string>& header = {});

std::string density_mode_name(DensityMode mode);

}  // namespace mvgf

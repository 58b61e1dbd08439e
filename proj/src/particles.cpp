#include "mvgf/particles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <ostream>
#include <thread>

#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"

namespace mvgf {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(work, 1)));
}

// Static contiguous chunks; every index writes only its own output slot, so
// the result does not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  const unsigned t = resolve_threads(threads, n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / t, hi = n * (w + 1) / t;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double u53(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t step_count(double t_end, double dt) {
  if (!(t_end > 0.0) || !(dt > 0.0)) throw ValidationError("particles: t_end and dt must be positive");
  return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
}

std::vector<double> record_times(double t0, double t_end, std::size_t steps, std::size_t stride) {
  if (stride == 0) throw ValidationError("particles: record_stride must be positive");
  std::vector<double> t;
  const double h = t_end / static_cast<double>(steps);
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k % stride == 0 || k == steps) t.push_back(t0 + static_cast<double>(k) * h);
  }
  return t;
}

double theta_at(const MobilityModel& model, double p, double x) {
  if (!(p > 0.0)) throw NumericalError("theta: density vanished at x = " + std::to_string(x));
  return model.phi(p) + model.potential().value(x);
}

}  // namespace

// ---------------------------------------------------------------------------

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
  return c;
}

NormalStream::NormalStream(std::uint64_t master_seed, std::uint32_t trajectory, std::uint32_t branch,
                           StreamPurpose purpose)
    : block_key_{static_cast<std::uint32_t>(master_seed),
                 static_cast<std::uint32_t>(master_seed >> 32) ^ (static_cast<std::uint32_t>(purpose) * 0x85EBCA6Bu)},
      trajectory_(trajectory),
      branch_(branch) {}

double NormalStream::uniform(std::uint64_t index) const {
  const std::uint64_t block = index >> 1;
  const auto w = philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                             trajectory_, branch_},
                            block_key_);
  return (index & 1) ? u53(w[2], w[3]) : u53(w[0], w[1]);
}

double NormalStream::normal(std::uint64_t index) const {
  const std::uint64_t block = index >> 1;
  const auto w = philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                             trajectory_, branch_},
                            block_key_);
  const double r = std::sqrt(-2.0 * std::log(u53(w[0], w[1])));
  const double a = 2.0 * std::numbers::pi * u53(w[2], w[3]);
  return (index & 1) ? r * std::sin(a) : r * std::cos(a);
}

std::uint64_t NormalStream::id() const { return (static_cast<std::uint64_t>(trajectory_) << 32) | branch_; }

// ---------------------------------------------------------------------------

CurveDensity::CurveDensity(const DensityCurve& curve) {
  if (curve.empty()) throw ValidationError("CurveDensity: empty curve");
  grid_ = curve.grid();
  times_ = curve.times();
  for (const auto& f : curve.fields()) {
    p_.push_back(f.values());
    px_.push_back(calculus::gradient(grid_, f.view()));
    pxx_.push_back(calculus::laplacian(grid_, f.view()));
  }
}

PointDensity CurveDensity::at(double t, double x) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(times_.back()));
  if (t < times_.front() - tol || t > times_.back() + tol) {
    throw ValidationError("CurveDensity: time " + std::to_string(t) + " outside the curve");
  }
  std::size_t k = 0;
  double wt = 0.0;
  if (times_.size() > 1) {
    k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    k = std::clamp<std::size_t>(k, 1, times_.size() - 1) - 1;
    wt = std::clamp((t - times_[k]) / (times_[k + 1] - times_[k]), 0.0, 1.0);
  }
  const double s = grid_.cell_coordinate(x);
  const std::size_t i = std::min(static_cast<std::size_t>(s), grid_.size() - 2);
  const double wx = s - static_cast<double>(i);
  auto lerp = [&](const std::vector<std::vector<double>>& f) {
    const double a = (1 - wx) * f[k][i] + wx * f[k][i + 1];
    if (wt == 0.0) return a;
    const double b = (1 - wx) * f[k + 1][i] + wx * f[k + 1][i + 1];
    return (1 - wt) * a + wt * b;
  };
  return {lerp(p_), lerp(px_), lerp(pxx_)};
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) throw ValidationError("kde: need at least two samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size() - 1);
  const double sigma = std::sqrt(var);
  if (!(sigma > 1e-12 * std::max(1.0, std::abs(mean)))) throw ValidationError("kde: sample cloud has zero variance");
  return 1.06 * sigma * std::pow(static_cast<double>(samples.size()), -0.2);
}

KdeDensity::KdeDensity(std::vector<double> samples, double bandwidth) : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw ValidationError("kde: need at least two samples");
  h_ = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples_);
}

PointDensity KdeDensity::at(double x) const {
  const double inv_h = 1.0 / h_;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (double xi : samples_) {
    const double u = (x - xi) * inv_h;
    const double k = std::exp(-0.5 * u * u);
    s0 += k;
    s1 -= u * k;
    s2 += (u * u - 1.0) * k;
  }
  const double norm = 1.0 / (static_cast<double>(samples_.size()) * h_ * std::sqrt(2.0 * std::numbers::pi));
  return {s0 * norm, s1 * norm * inv_h, s2 * norm * inv_h * inv_h};
}

// ---------------------------------------------------------------------------

std::vector<double> ParticleEnsemble::cloud(std::size_t k) const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i, k);
  return out;
}

std::vector<double> sample_initial(const DensityField& p0, std::size_t n, std::uint64_t master_seed) {
  const Grid1D& grid = p0.grid();
  std::vector<double> cum(grid.size() + 1, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) cum[i + 1] = cum[i] + p0[i] * grid.dx();
  const double total = cum.back();
  if (!(total > 0.0)) throw ValidationError("sample_initial: density has zero mass");
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = NormalStream(master_seed, static_cast<std::uint32_t>(j), 0, StreamPurpose::Initial).uniform(0);
    const double target = u * total;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
    i = std::clamp<std::size_t>(i, 1, grid.size()) - 1;
    while (p0[i] <= 0.0 && i + 1 < grid.size()) ++i;
    x[j] = grid.face(i) + std::clamp((target - cum[i]) / (p0[i] * grid.dx()), 0.0, 1.0) * grid.dx();
  }
  return x;
}

ParticleEnsemble simulate(const MobilityModel& model, const DensityCurve& curve, const ParticleOptions& opt) {
  if (opt.n == 0) throw ValidationError("simulate: need at least one particle");
  if (opt.n > 0xFFFFFFFFull) throw ValidationError("simulate: too many particles for 32-bit stream ids");
  const std::size_t steps = step_count(opt.t_end, opt.dt);
  CurveDensity density(curve);
  const double t0 = density.t_begin();
  if (t0 + opt.t_end > density.t_end() + 1e-9) throw ValidationError("simulate: curve does not cover [t0, t0 + t_end]");

  ParticleEnsemble ens;
  ens.n = opt.n;
  ens.master_seed = opt.master_seed;
  ens.mode = DensityMode::PdeCoupled;
  ens.times = record_times(t0, opt.t_end, steps, opt.record_stride);
  ens.positions.assign(opt.n * ens.times.size(), 0.0);
  ens.stream_ids.resize(opt.n);
  const auto x0 = sample_initial(curve.front(), opt.n, opt.master_seed);
  const double h = opt.t_end / static_cast<double>(steps), sqrt_h = std::sqrt(h);
  const Potential& pot = model.potential();

  parallel_for(opt.n, opt.threads, [&](std::size_t path) {
    NormalStream noise(opt.master_seed, static_cast<std::uint32_t>(path), 0);
    ens.stream_ids[path] = noise.id();
    double* row = &ens.positions[path * ens.times.size()];
    double x = x0[path];
    std::size_t slot = 0;
    row[slot++] = x;
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = t0 + static_cast<double>(k) * h;
      const double p = density.at(t, x).p;
      const double drift = -pot.gradient(x) * model.b(p);
      const double sigma = std::sqrt(2.0 * model.f_over_p(p));
      x += drift * h + sigma * sqrt_h * noise.normal(k);
      if (!std::isfinite(x)) throw NumericalError("simulate: non-finite position on path " + std::to_string(path));
      if ((k + 1) % opt.record_stride == 0 || k + 1 == steps) row[slot++] = x;
    }
  });
  return ens;
}

ParticleEnsemble simulate_kde(const MobilityModel& model, const DensityField& p0, const ParticleOptions& opt) {
  if (opt.n < 2) throw ValidationError("simulate_kde: need at least two particles");
  const std::size_t steps = step_count(opt.t_end, opt.dt);
  ParticleEnsemble ens;
  ens.n = opt.n;
  ens.master_seed = opt.master_seed;
  ens.mode = DensityMode::Kde;
  ens.times = record_times(p0.time(), opt.t_end, steps, opt.record_stride);
  ens.positions.assign(opt.n * ens.times.size(), 0.0);
  ens.stream_ids.resize(opt.n);
  std::vector<NormalStream> noise;
  for (std::size_t i = 0; i < opt.n; ++i) {
    noise.emplace_back(opt.master_seed, static_cast<std::uint32_t>(i), 0);
    ens.stream_ids[i] = noise.back().id();
  }
  auto x = sample_initial(p0, opt.n, opt.master_seed);
  const double h = opt.t_end / static_cast<double>(steps), sqrt_h = std::sqrt(h);
  const Potential& pot = model.potential();
  std::size_t slot = 0;
  auto record = [&] {
    for (std::size_t i = 0; i < opt.n; ++i) ens.positions[i * ens.times.size() + slot] = x[i];
    ++slot;
  };
  record();
  std::vector<double> next(opt.n);
  for (std::size_t k = 0; k < steps; ++k) {
    const KdeDensity kde(x, opt.kde_bandwidth);
    parallel_for(opt.n, opt.threads, [&](std::size_t i) {
      const double p = kde.at(x[i]).p;
      if (!(p > 0.0)) throw NumericalError("simulate_kde: estimated density vanished; bandwidth too small");
      const double sigma = std::sqrt(2.0 * model.f_over_p(p));
      next[i] = x[i] - pot.gradient(x[i]) * model.b(p) * h + sigma * sqrt_h * noise[i].normal(k);
      if (!std::isfinite(next[i])) throw NumericalError("simulate_kde: non-finite position");
    });
    x.swap(next);
    if ((k + 1) % opt.record_stride == 0 || k + 1 == steps) record();
  }
  return ens;
}

EnsembleKde::EnsembleKde(const ParticleEnsemble& ensemble, double bandwidth) : times_(ensemble.times) {
  for (std::size_t k = 0; k < times_.size(); ++k) kdes_.emplace_back(ensemble.cloud(k), bandwidth);
}

PointDensity EnsembleKde::at(double t, double x) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (std::abs(times_[k] - t) < std::abs(times_[best] - t)) best = k;
  }
  return kdes_[best].at(x);
}

// ---------------------------------------------------------------------------

std::vector<TrajectoryEnergyPath> trajectory_energy(const ParticleEnsemble& ens, const MobilityModel& model,
                                                    const DensityProvider& density, unsigned threads) {
  std::vector<TrajectoryEnergyPath> out(ens.n);
  const std::size_t T = ens.times.size();
  parallel_for(ens.n, threads, [&](std::size_t path) {
    auto& e = out[path];
    e.times = ens.times;
    e.theta.resize(T);
    e.D_integral.assign(T, 0.0);
    e.martingale_residual.assign(T, 0.0);
    double D_prev = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      const double x = ens.at(path, k);
      const PointDensity d = density.at(ens.times[k], x);
      e.theta[k] = theta_at(model, d.p, x);
      const double D = rate_D_pointwise(model, d.p, d.px, d.pxx, x);
      if (k > 0) e.D_integral[k] = e.D_integral[k - 1] + 0.5 * (ens.times[k] - ens.times[k - 1]) * (D + D_prev);
      D_prev = D;
      e.martingale_residual[k] = e.theta[k] - e.theta[0] - e.D_integral[k];
    }
  });
  return out;
}

MeanEnergy mean_energy(const std::vector<TrajectoryEnergyPath>& paths) {
  if (paths.empty()) throw ValidationError("mean_energy: no paths");
  MeanEnergy m;
  m.times = paths.front().times;
  const double n = static_cast<double>(paths.size());
  for (std::size_t k = 0; k < m.times.size(); ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& p : paths) {
      const double v = p.theta[k] - p.theta[0];
      s += v;
      s2 += v * v;
    }
    const double mean = s / n;
    const double var = paths.size() > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0.0;
    m.mean.push_back(mean);
    m.standard_error.push_back(std::sqrt(var / n));
  }
  return m;
}

MartingaleTest martingale_test(const std::vector<TrajectoryEnergyPath>& paths, double z_band) {
  if (paths.size() < 100) throw ValidationError("martingale_test: need at least 100 paths");
  MartingaleTest r;
  r.times = paths.front().times;
  r.pass = true;
  const double n = static_cast<double>(paths.size());
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    double s = 0.0;
    for (const auto& p : paths) s += p.martingale_residual[k];
    const double mean = s / n;
    double ss = 0.0;
    for (const auto& p : paths) ss += (p.martingale_residual[k] - mean) * (p.martingale_residual[k] - mean);
    const double var = ss / (n - 1);
    const double se = std::sqrt(var / n);
    r.mean_residual.push_back(mean);
    r.variance.push_back(var);
    r.standard_error.push_back(se);
    if (!std::isfinite(var)) r.pass = false;
    if (se > 0.0) r.worst_z = std::max(r.worst_z, std::abs(mean) / se);
    if (std::abs(mean) > z_band * se + 1e-14) r.pass = false;
  }
  return r;
}

// ---------------------------------------------------------------------------

ConditionalRateReport conditional_rate_estimate(const ParticleEnsemble& ens, const MobilityModel& model,
                                                const DensityProvider& density, std::size_t t0_index,
                                                const std::vector<std::size_t>& paths, const BranchOptions& opt) {
  if (t0_index >= ens.times.size()) throw ValidationError("conditional_rate: t0 index out of range");
  if (opt.branches < 2) throw ValidationError("conditional_rate: insufficient branches (need >= 2)");
  const auto& H = opt.horizons;
  if (H.empty()) throw ValidationError("conditional_rate: no horizons");
  for (std::size_t j = 0; j < H.size(); ++j) {
    if (!(H[j] > 0.0) || (j > 0 && !(H[j] < H[j - 1]))) {
      throw ValidationError("conditional_rate: horizons must be positive and decreasing");
    }
  }
  // Common step that lands on every horizon.
  const double h_min = H.back();
  const double step = h_min / std::max(1.0, std::round(h_min / opt.dt));
  std::vector<std::size_t> landing;
  for (double h : H) {
    const double q = h / step;
    if (std::abs(q - std::round(q)) > 1e-6) throw ValidationError("conditional_rate: horizons must be multiples of dt");
    landing.push_back(static_cast<std::size_t>(std::llround(q)));
  }
  const std::size_t steps = landing.front();
  const double t0 = ens.times[t0_index];

  // Least-squares intercept and slope weights for rate(h) = r0 + a h.
  const double K = static_cast<double>(H.size());
  double sh = 0.0, shh = 0.0;
  for (double h : H) sh += h, shh += h * h;
  const double det = K * shh - sh * sh;
  std::vector<double> w_int(H.size()), w_slope(H.size());
  for (std::size_t j = 0; j < H.size(); ++j) {
    w_int[j] = H.size() > 1 ? (shh - H[j] * sh) / det : 1.0;
    w_slope[j] = H.size() > 1 ? (K * H[j] - sh) / det : 0.0;
  }

  ConditionalRateReport rep;
  rep.t0 = t0;
  rep.paths.resize(paths.size());
  const Potential& pot = model.potential();
  const double sqrt_step = std::sqrt(step);
  const double M = static_cast<double>(opt.branches);

  parallel_for(paths.size(), opt.threads, [&](std::size_t slot) {
    const std::size_t path = paths[slot];
    if (path >= ens.n) throw ValidationError("conditional_rate: path index out of range");
    PathRate& pr = rep.paths[slot];
    pr.path = path;
    pr.x0 = ens.at(path, t0_index);
    const PointDensity d0 = density.at(t0, pr.x0);
    const double theta0 = theta_at(model, d0.p, pr.x0);
    pr.D = rate_D_pointwise(model, d0.p, d0.px, d0.pxx, pr.x0);

    std::vector<double> sum(H.size(), 0.0), sum2(H.size(), 0.0);
    double z_sum = 0.0, z_sum2 = 0.0;
    std::vector<double> y(H.size());
    for (std::size_t b = 0; b < opt.branches; ++b) {
      NormalStream noise(opt.master_seed, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(b + 1));
      double x = pr.x0;
      std::size_t next = H.size();  // landing index, walked from the smallest horizon
      for (std::size_t k = 1; k <= steps; ++k) {
        const double t = t0 + static_cast<double>(k - 1) * step;
        const double p = density.at(t, x).p;
        x += -pot.gradient(x) * model.b(p) * step + std::sqrt(2.0 * model.f_over_p(p)) * sqrt_step * noise.normal(k - 1);
        if (!std::isfinite(x)) throw NumericalError("conditional_rate: non-finite branch position");
        while (next > 0 && landing[next - 1] == k) {
          --next;
          const double tk = t0 + static_cast<double>(k) * step;
          y[next] = (theta_at(model, density.at(tk, x).p, x) - theta0) / H[next];
        }
      }
      double z = 0.0;
      for (std::size_t j = 0; j < H.size(); ++j) {
        sum[j] += y[j];
        sum2[j] += y[j] * y[j];
        z += w_int[j] * y[j];
      }
      z_sum += z;
      z_sum2 += z * z;
    }
    double slope = 0.0;
    for (std::size_t j = 0; j < H.size(); ++j) {
      const double mean = sum[j] / M;
      pr.rates.push_back(mean);
      pr.standard_errors.push_back(std::sqrt(std::max(0.0, (sum2[j] - M * mean * mean) / (M - 1)) / M));
      slope += w_slope[j] * mean;
    }
    pr.extrapolated = z_sum / M;
    pr.extrapolated_se = std::sqrt(std::max(0.0, (z_sum2 - M * pr.extrapolated * pr.extrapolated) / (M - 1)) / M);
    pr.bias_bar = std::abs(slope) * h_min;
    pr.within = std::abs(pr.extrapolated - pr.D) <= opt.z_band * pr.extrapolated_se + pr.bias_bar;
  });

  double s = 0.0, s2 = 0.0, inside = 0.0;
  for (const auto& pr : rep.paths) {
    s += pr.extrapolated;
    s2 += pr.extrapolated * pr.extrapolated;
    inside += pr.within ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(rep.paths.size());
  if (n > 0) {
    rep.fraction_within = inside / n;
    rep.population_mean = s / n;
    rep.population_se = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * rep.population_mean * rep.population_mean) / (n - 1)) / n) : 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<double> ensemble_second_moments(const ParticleEnsemble& ens) {
  std::vector<double> m(ens.times.size(), 0.0);
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < ens.n; ++i) s += ens.at(i, k) * ens.at(i, k);
    m[k] = s / static_cast<double>(ens.n);
  }
  return m;
}

double w1_to_density(const std::vector<double>& samples, const DensityField& p) {
  if (samples.empty()) throw ValidationError("w1_to_density: no samples");
  const Grid1D& grid = p.grid();
  const double mass = p.mass();
  if (!(mass > 0.0)) throw ValidationError("w1_to_density: density has zero mass");
  std::vector<double> xs(samples);
  std::sort(xs.begin(), xs.end());
  // Breakpoints: faces and samples. Between two breakpoints F_emp is constant
  // and F_p is linear, so |F_emp - F_p| integrates exactly.
  std::vector<double> cum(grid.size() + 1, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) cum[i + 1] = cum[i] + p[i] * grid.dx() / mass;
  auto F = [&](double x) {
    if (x <= grid.face(0)) return 0.0;
    if (x >= grid.face(grid.size())) return 1.0;
    const std::size_t i = std::min(grid.size() - 1, static_cast<std::size_t>((x - grid.face(0)) / grid.dx()));
    return cum[i] + (x - grid.face(i)) * p[i] / mass;
  };
  std::vector<double> pts(xs);
  for (std::size_t i = 0; i <= grid.size(); ++i) pts.push_back(grid.face(i));
  std::sort(pts.begin(), pts.end());
  const double n = static_cast<double>(xs.size());
  double total = 0.0;
  std::size_t below = 0;
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    const double a = pts[j], b = pts[j + 1];
    if (!(b > a)) continue;
    while (below < xs.size() && xs[below] <= a) ++below;
    const double fe = static_cast<double>(below) / n;
    const double d0 = F(a) - fe, d1 = F(b) - fe;
    if (d0 * d1 >= 0.0) {
      total += 0.5 * (std::abs(d0) + std::abs(d1)) * (b - a);
    } else {
      const double c = d0 / (d0 - d1);
      total += 0.5 * (std::abs(d0) * c + std::abs(d1) * (1.0 - c)) * (b - a);
    }
  }
  return total;
}

std::string density_mode_name(DensityMode mode) { return mode == DensityMode::PdeCoupled ? "pde-coupled" : "kde"; }

void write_energy_paths(std::ostream& out, const ParticleEnsemble& ens, const std::vector<TrajectoryEnergyPath>& paths,
                        const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  out << "# master_seed=" << ens.master_seed << ", mode=" << density_mode_name(ens.mode) << '\n';
  out << "path_id,t,x,theta,D_integral,residual\n";
  char buf[256];
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, ens.times[k], ens.at(i, k),
                    paths[i].theta[k], paths[i].D_integral[k], paths[i].martingale_residual[k]);
      out << buf;
    }
  }
}

void write_ensemble(std::ostream& out, const ParticleEnsemble& ens, const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
  out << "# master_seed=" << ens.master_seed << ", mode=" << density_mode_name(ens.mode) << '\n';
  out << "path_id,stream_id,t,x\n";
  char buf[160];
  for (std::size_t i = 0; i < ens.n; ++i) {
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g\n", i, static_cast<unsigned long long>(ens.stream_ids[i]),
                    ens.times[k], ens.at(i, k));
      out << buf;
    }
  }
}

}  // namespace mvgf

#include "mvgf/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvgf/errors.hpp"
#include "mvgf/experiments.hpp"
#include "mvgf/functionals.hpp"
#include "mvgf/verify.hpp"

namespace mvgf {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

// Output sink that records every file it opens.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  const fs::path& dir() const { return dir_; }

  std::ofstream open(const std::string& name) {
    const auto path = dir_ / name;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.precision(17);
    files_.push_back(path.string());
    return out;
  }

  void add(const fs::path& path) { files_.push_back(path.string()); }
  std::vector<std::string> files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

struct Setup {
  MobilityModel model;
  Grid1D grid;
  DensityField p0;
};

Setup setup(const ExperimentConfig& c, std::size_t n_cells) {
  auto model = MobilityModel::build(c.model);
  Grid1D grid(c.half_width, n_cells);
  auto p0 = make_initial(model, grid, c.initial);
  return {std::move(model), grid, std::move(p0)};
}

DensityCurve solve(const ExperimentConfig& c, const Setup& s) {
  return evolve(s.model, s.p0, c.t_end, uniform_snapshots(c.t_end, c.snapshots), fpe_options(c));
}

RunReport fpe_solve(const ExperimentConfig& c) {
  const auto s = setup(c, c.n_cells);
  const auto curve = solve(c, s);
  Artifacts out(c.output_dir);
  const fs::path dir = out.dir() / "curve";
  write_curve(dir, curve, join(provenance_header(c, "fpe-solve", false), ", "));
  out.add(dir / "index.csv");

  double drift = 0.0, change = 0.0;
  const double m0 = s.p0.mass();
  for (const auto& p : curve.fields()) {
    drift = std::max(drift, std::abs(p.mass() - m0));
    for (std::size_t i = 0; i < p.size(); ++i) change = std::max(change, std::abs(p[i] - s.p0[i]));
  }
  RunReport r;
  r.text = fmt("fpe-solve %s: %zu snapshots to t=%g in %zu steps, %zu clamped cells\n", s.model.name().c_str(),
               curve.size(), c.t_end, curve.steps, curve.clamped_cells) +
           fmt("  mass %.12g, max drift %.3e\n  max |p(t) - p(0)| %.3e\n  written to %s\n", m0, drift, change,
               dir.string().c_str());
  r.files = out.files();
  return r;
}

RunReport energy_report_cmd(const ExperimentConfig& c) {
  const auto s = setup(c, c.n_cells);
  const auto curve = solve(c, s);
  const auto reference = stationary_density(s.model, s.p0.mass(), c.half_width).on_grid(s.grid);
  const auto report = energy_report(s.model, curve, reference);
  Artifacts out(c.output_dir);
  {
    auto f = out.open("energy_report.csv");
    write_energy_report(f, report, provenance_header(c, "energy-report", false));
  }
  RunReport r;
  const double ratio = report.max_I() > 0.0 ? report.max_interior_residual() / report.max_I() : 0.0;
  r.text = fmt("energy-report %s: %zu snapshots to t=%g\n", s.model.name().c_str(), report.times.size(), c.t_end) +
           fmt("  F %.8g -> %.8g, H_g %.6g -> %.6g\n", report.F.front(), report.F.back(), report.H_g.front(),
               report.H_g.back()) +
           fmt("  max interior |dF/dt + I| %.3e (%.3e of max I)\n", report.max_interior_residual(), ratio);
  r.files = out.files();
  return r;
}

RunReport particles_cmd(const ExperimentConfig& c) {
  const auto s = setup(c, c.n_cells);
  const auto curve = solve(c, s);
  const auto opt = particle_options(c);
  const bool kde = c.mode == "kde";
  const auto ensemble = kde ? simulate_kde(s.model, s.p0, opt) : simulate(s.model, curve, opt);
  std::vector<TrajectoryEnergyPath> paths;
  if (kde) {
    paths = trajectory_energy(ensemble, s.model, EnsembleKde(ensemble, c.kde_bandwidth), opt.threads);
  } else {
    paths = trajectory_energy(ensemble, s.model, CurveDensity(curve), opt.threads);
  }
  const auto mean = mean_energy(paths);
  const auto median = median_energy(paths);

  const auto header = provenance_header(c, "particles", true);
  Artifacts out(c.output_dir);
  {
    auto f = out.open("ensemble.csv");
    write_ensemble(f, ensemble, header);
  }
  {
    auto f = out.open("energy_paths.csv");
    write_energy_paths(f, ensemble, paths, header);
  }

  RunReport r;
  r.text = fmt("particles %s: %zu paths, mode %s, dt %g, t_end %g\n", s.model.name().c_str(), ensemble.n,
               density_mode_name(ensemble.mode).c_str(), c.dt, c.t_end);
  std::vector<double> mres(mean.times.size(), 0.0), mse(mean.times.size(), 0.0);
  if (paths.size() >= 100) {
    const auto mt = martingale_test(paths);
    mres = mt.mean_residual;
    mse = mt.standard_error;
    r.passed = mt.pass;
    r.text += fmt("  martingale residual: worst |mean|/SE %.2f (band 4): %s\n", mt.worst_z, mt.pass ? "pass" : "FAIL");
  } else {
    r.text += "  martingale residual: test skipped (needs at least 100 paths)\n";
  }
  {
    auto f = out.open("mean_energy.csv");
    for (const auto& h : header) f << "# " << h << '\n';
    f << "time,mean,standard_error,median,martingale_mean,martingale_se\n";
    for (std::size_t k = 0; k < mean.times.size(); ++k) {
      f << mean.times[k] << ',' << mean.mean[k] << ',' << mean.standard_error[k] << ',' << median[k] << ','
        << mres[k] << ',' << mse[k] << '\n';
    }
  }
  const double w1 = w1_to_density(ensemble.cloud(ensemble.times.size() - 1), curve.back().normalized(1.0));
  r.text += fmt("  mean energy at t_end %.6g (SE %.2e)\n  W1(cloud, PDE) at t_end %.3e\n", mean.mean.back(),
                mean.standard_error.back(), w1);
  r.files = out.files();
  return r;
}

RunReport metric_derivative_cmd(const ExperimentConfig& c) {
  const auto s = setup(c, c.transport_cells);
  std::vector<double> snaps{c.t0};
  for (double d : c.deltas) snaps.push_back(c.t0 + d);
  const double t_end = c.t0 + c.deltas.front();
  const auto curve = evolve(s.model, s.p0, t_end, snaps, fpe_options(c));
  const auto report = metric_derivative(s.model, curve, c.t0, c.deltas, c.transport);
  Artifacts out(c.output_dir);
  {
    auto f = out.open("metric_derivative.csv");
    write_metric_derivative(f, report, provenance_header(c, "metric-derivative", false));
  }
  RunReport r;
  r.text = fmt("metric-derivative %s at t0=%g on %zu cells, K=%zu\n", s.model.name().c_str(), c.t0,
               c.transport_cells, c.transport.n_time);
  for (std::size_t j = 0; j < report.deltas.size(); ++j) {
    r.text += fmt("  delta %-8g W_h/delta %.6g%s\n", report.deltas[j], report.estimates[j],
                  report.converged[j] ? "" : "  (not converged)");
  }
  r.text += fmt("  extrapolated %.6g, sqrt(I) %.6g, relative gap %.3e\n", report.extrapolated,
                report.sqrt_dissipation, report.limit_check);
  r.files = out.files();
  return r;
}

RunReport wh_distance_cmd(const ExperimentConfig& c) {
  const auto s = setup(c, c.transport_cells);
  const auto p1 = make_initial(s.model, s.grid, c.target).normalized(s.p0.mass());
  const auto sol = wh_distance({s.model, s.p0, p1, c.transport});
  Artifacts out(c.output_dir);
  {
    auto f = out.open("transport.csv");
    write_transport_solution(f, s.grid, sol, provenance_header(c, "wh-distance", false));
  }
  RunReport r;
  r.text = fmt("wh-distance %s: %s -> %s on %zu cells, K=%zu\n", s.model.name().c_str(), c.initial.kind.c_str(),
               c.target.kind.c_str(), c.transport_cells, sol.n_time) +
           fmt("  distance %.8g, action %.8g\n  %s after %zu iterations, constraint residual %.2e\n", sol.distance,
               sol.action, sol.converged ? "converged" : "NOT converged", sol.iterations, sol.constraint_residual);
  if (s.model.family() == Family::Linear) {
    const double w2 = w2_quantile_oracle(s.p0, p1);
    r.text += fmt("  quantile W2 %.8g, relative gap %.3e\n", w2, w2 > 0.0 ? std::abs(sol.distance - w2) / w2 : 0.0);
  }
  r.files = out.files();
  if (!sol.converged) {
    throw NumericalError("wh-distance did not converge within " + std::to_string(c.transport.max_iters) +
                         " iterations (partial solution in " + r.files.front() + ")");
  }
  return r;
}

int parse_figure(const std::string& arg) {
  std::string digits = arg;
  if (digits.rfind("fig", 0) == 0) digits = digits.substr(3);
  if (digits.size() != 1 || digits[0] < '1' || digits[0] > '8') {
    throw ValidationError("reproduce: expected fig1..fig8, got '" + arg + "'");
  }
  return digits[0] - '0';
}

RunReport reproduce_cmd(const ExperimentConfig& c, const std::string& arg) {
  const int figure = parse_figure(arg);
  FigureSpec spec = figure_spec(figure);
  // Figures fix model, grid and initial density; the particle controls come
  // from the config so seeds and ensemble sizes can be varied.
  spec.particles.n = c.n_particles;
  spec.particles.dt = c.dt;
  spec.particles.master_seed = c.master_seed;
  spec.particles.record_stride = c.record_stride;
  spec.particles.threads = c.threads;
  const auto res = run_figure(spec);
  const bool power = MobilityModel::build(spec.model).family() == Family::Power;

  auto header = provenance_header(c, "reproduce fig" + std::to_string(figure), true);
  header.push_back(fmt("figure model=%s, L=%g, n_cells=%zu, initial=%s, t_end=%g", spec.model.family.c_str(),
                       spec.half_width, spec.n_cells, spec.initial.kind.c_str(), spec.t_end));
  const std::string stem = fmt("fig%d_", figure);
  Artifacts out(fs::path(c.output_dir) / fmt("fig%d", figure));
  {
    auto f = out.open(stem + "trajectories.csv");
    for (const auto& h : header) f << "# " << h << '\n';
    f << "path_id,time,energy\n";
    for (std::size_t i = 0; i < res.paths.size(); ++i) {
      const auto& p = res.paths[i];
      for (std::size_t k = 0; k < p.times.size(); ++k) f << i << ',' << p.times[k] << ',' << p.theta[k] - p.theta[0] << '\n';
    }
  }
  {
    auto f = out.open(stem + "mean.csv");
    for (const auto& h : header) f << "# " << h << '\n';
    f << "# limit=" << res.limit << ", fit_available=" << (res.fit_available ? 1 : 0) << ", rate=" << res.fit.rate
      << ", intercept=" << res.fit.intercept << ", r_squared=" << res.fit.r_squared
      << ", window_end=" << res.fit.window_end << '\n';
    f << "time,mean,standard_error,median\n";
    for (std::size_t k = 0; k < res.mean.times.size(); ++k) {
      f << res.mean.times[k] << ',' << res.mean.mean[k] << ',' << res.mean.standard_error[k] << ','
        << res.median[k] << '\n';
    }
  }
  {
    auto f = out.open(stem + "pde.csv");
    for (const auto& h : header) f << "# " << h << '\n';
    if (!res.fit_note.empty()) f << "# note=" << res.fit_note << '\n';
    f << "time,energy\n";
    for (std::size_t k = 0; k < res.pde_energy.size(); ++k) f << res.pde_times[k] << ',' << res.pde_energy[k] << '\n';
  }
  {
    auto f = out.open(stem + "plot.py");
    f << plot_script(figure);
  }

  RunReport r;
  r.text = fmt("reproduce fig%d: %s, %zu trajectories to t=%g\n", figure, spec.model.family.c_str(), res.paths.size(),
               spec.t_end) +
           fmt("  monotone decrease: worst step z %.2f (threshold %.2f), %zu upticks: %s\n", res.monotone.worst_z,
               res.monotone.threshold, res.monotone.upticks, res.monotone.pass ? "pass" : "FAIL");
  if (res.fit_available) {
    r.text += fmt("  exponential fit: rate %.4f, R^2 %.4f over %zu points to t=%.2f\n", res.fit.rate,
                  res.fit.r_squared, res.fit.points, res.fit.window_end);
  } else {
    r.text += "  exponential fit unavailable: " + res.fit_note + "\n";
  }
  if (power) {
    r.text += "  power mobility: decay shape reported only, no exponential rate is expected\n";
  } else {
    r.passed = res.monotone.pass && res.fit_available && res.fit.r_squared >= 0.98;
  }
  r.files = out.files();
  return r;
}

std::vector<int> parse_criteria(const std::string& arg) {
  std::vector<int> ids;
  if (arg.empty() || arg == "all") {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
    return ids;
  }
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.size() != 1 || tok[0] < '1' || tok[0] - '0' > kCriterionCount) {
      throw ValidationError("verify: criteria must be 1.." + std::to_string(kCriterionCount) + ", got '" + tok + "'");
    }
    ids.push_back(tok[0] - '0');
  }
  return ids;
}

RunReport verify_cmd(const ExperimentConfig& c, const std::string& arg) {
  VerifyOptions opt;
  opt.master_seed = c.master_seed;
  opt.threads = c.threads;
  std::vector<CriterionResult> results;
  for (int id : parse_criteria(arg)) results.push_back(verify_criterion(id, opt));
  std::ostringstream table;
  write_verify_table(table, results);
  Artifacts out(c.output_dir);
  {
    auto f = out.open("verify.txt");
    for (const auto& h : provenance_header(c, "verify", true)) f << "# " << h << '\n';
    write_verify_table(f, results);
  }
  RunReport r;
  r.text = table.str();
  r.passed = std::all_of(results.begin(), results.end(), [](const auto& x) { return x.pass(); });
  r.files = out.files();
  return r;
}

}  // namespace

std::vector<std::string> provenance_header(const ExperimentConfig& config, const std::string& command,
                                           bool with_seed) {
  std::vector<std::string> h{std::string("mvgf_version=") + MVGF_VERSION, "config_hash=" + config_hash_hex(config),
                             "command=" + command};
  if (with_seed) h.push_back("master_seed=" + std::to_string(config.master_seed));
  return h;
}

RunReport run_command(const ExperimentConfig& config, const std::string& command, const std::string& argument) {
  validate_config(config);
  if (command == "fpe-solve") return fpe_solve(config);
  if (command == "energy-report") return energy_report_cmd(config);
  if (command == "particles") return particles_cmd(config);
  if (command == "metric-derivative") return metric_derivative_cmd(config);
  if (command == "wh-distance") return wh_distance_cmd(config);
  if (command == "reproduce") return reproduce_cmd(config, argument);
  if (command == "verify") return verify_cmd(config, argument);
  throw ValidationError("unknown command '" + command + "'");
}

std::string plot_script(int figure) {
  const bool trajectories = figure % 2 == 1;
  std::string s = fmt(
      "#!/usr/bin/env python3\n"
      "# Figure %d from the CSVs next to this script. Needs numpy and matplotlib.\n"
      "import sys\n"
      "from pathlib import Path\n"
      "\n"
      "import matplotlib\n"
      "matplotlib.use(\"Agg\")\n"
      "import matplotlib.pyplot as plt\n"
      "import numpy as np\n"
      "\n"
      "here = Path(__file__).resolve().parent\n"
      "stem = \"fig%d_\"\n"
      "\n"
      "\n"
      "def load(name):\n"
      "    with open(here / (stem + name)) as f:\n"
      "        rows = [line for line in f if not line.startswith(\"#\")]\n"
      "    return np.genfromtxt(rows, delimiter=\",\", names=True)\n"
      "\n"
      "\n"
      "fig, ax = plt.subplots(figsize=(6, 4))\n",
      figure, figure);
  if (trajectories) {
    s +=
        "traj = load(\"trajectories.csv\")\n"
        "for pid in np.unique(traj[\"path_id\"]):\n"
        "    sel = traj[\"path_id\"] == pid\n"
        "    ax.plot(traj[\"time\"][sel], traj[\"energy\"][sel], lw=0.3, alpha=0.4)\n"
        "ax.set_ylabel(\"energy along trajectory\")\n";
  } else {
    s +=
        "mean = load(\"mean.csv\")\n"
        "t, m, se = mean[\"time\"], mean[\"mean\"], mean[\"standard_error\"]\n"
        "ax.plot(t, m, label=\"particle mean\")\n"
        "ax.fill_between(t, m - 2 * se, m + 2 * se, alpha=0.3, label=\"2 SE\")\n"
        "ax.plot(t, mean[\"median\"], ls=\":\", label=\"particle median\")\n"
        "pde = load(\"pde.csv\")\n"
        "if pde.size > 1:\n"
        "    ax.plot(pde[\"time\"], pde[\"energy\"], ls=\"--\", label=\"PDE\")\n"
        "ax.set_ylabel(\"mean energy\")\n"
        "ax.legend()\n";
  }
  s += fmt(
      "ax.set_xlabel(\"t\")\n"
      "fig.tight_layout()\n"
      "out = Path(sys.argv[1]) if len(sys.argv) > 1 else here / \"fig%d.png\"\n"
      "fig.savefig(out, dpi=150)\n"
      "print(out)\n",
      figure);
  return s;
}

}  // namespace mvgf

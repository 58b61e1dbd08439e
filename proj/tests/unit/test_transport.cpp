#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"
#include "mvgf/transport.hpp"

using namespace mvgf;

namespace {

DensityField fd_density(const Grid1D& grid) {
  auto env = [](double c, double x) { return 1.0 / (1.0 + c * std::exp(0.5 * x * x)); };
  return DensityField::sample(grid, [&](double x) {
    return env(4.0, x) + 0.6 * (env(0.5, x) - env(4.0, x)) * (1 + std::tanh(x - 1)) / 2;
  });
}

DensityField mixture(const Grid1D& grid, double a, double b, double w) {
  return DensityField::sample(grid, [&](double x) {
    const double g = 1.0 / std::sqrt(2 * M_PI * 0.5);
    return w * g * std::exp(-(x - a) * (x - a)) + (1 - w) * g * std::exp(-(x - b) * (x - b));
  });
}

TransportSolution solve(const MobilityModel& m, const DensityField& a, const DensityField& b, std::size_t K = 16) {
  TransportControls c;
  c.n_time = K;
  return wh_distance({m, a, b.normalized(a.mass()), c});
}

}  // namespace

TEST_CASE("quantile oracle closed forms") {
  Grid1D grid(10.0, 2000);
  const auto n01 = DensityField::gaussian(grid, 0, 1).normalized();
  CHECK(w2_quantile_oracle(n01, n01) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w2_quantile_oracle(n01, DensityField::gaussian(grid, 2, 1).normalized()) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(w2_quantile_oracle(n01, DensityField::gaussian(grid, 0, 4).normalized()) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(w2_quantile_oracle(n01, DensityField::gaussian(grid, 1, 0.25).normalized()) ==
        doctest::Approx(std::sqrt(1.0 + 0.25)).epsilon(1e-4));
  // Two-cell translation: uniform on a cell moved by three cells.
  Grid1D coarse(2.0, 4);
  DensityField a(coarse, {1.0, 0.0, 0.0, 0.0}), b(coarse, {0.0, 0.0, 0.0, 1.0});
  CHECK(w2_quantile_oracle(a, b) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(w2_quantile_oracle(n01, DensityField::gaussian(grid, 0, 1).normalized(2.0)), ValidationError);
}

TEST_CASE("linear W_h equals the quantile W2") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(8.0, 160);
  const auto n01 = DensityField::gaussian(grid, 0, 1).normalized();

  SUBCASE("identical densities") {
    const auto s = solve(m, n01, n01);
    CHECK(s.converged);
    CHECK(s.distance < 1e-8);
    double mmax = 0.0;
    for (double v : s.m) mmax = std::max(mmax, std::abs(v));
    CHECK(mmax < 1e-8);
  }

  SUBCASE("translated Gaussians") {
    const auto s = solve(m, n01, DensityField::gaussian(grid, 2, 1));
    CHECK(s.converged);
    CHECK(s.distance == doctest::Approx(2.0).epsilon(0.02));
    CHECK(s.constraint_residual < 1e-8);
    CHECK(s.action >= 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(s.u_at(0, i) == n01[i]);
      CHECK(s.m_at(0, 0) == 0.0);
    }
    CHECK(transport_action(m, grid, s) == doctest::Approx(s.action).epsilon(1e-12));
    std::ostringstream out;
    write_transport_solution(out, grid, s, {"test"});
    CHECK(out.str().rfind("# test\n# distance=", 0) == 0);
  }

  SUBCASE("five pairs against the oracle") {
    const std::vector<std::pair<DensityField, DensityField>> pairs = {
        {n01, DensityField::gaussian(grid, 1.5, 1)},
        {n01, DensityField::gaussian(grid, 0, 2.25)},
        {DensityField::gaussian(grid, -1, 0.5), DensityField::gaussian(grid, 1, 1.5)},
        {n01, mixture(grid, -1.5, 1.5, 0.5)},
        {mixture(grid, -2, 0.5, 0.3), mixture(grid, -0.5, 2, 0.7)},
    };
    for (const auto& [a, b] : pairs) {
      const auto an = a.normalized(), bn = b.normalized();
      const auto s = solve(m, an, bn);
      CHECK(s.converged);
      CHECK(s.distance == doctest::Approx(w2_quantile_oracle(an, bn)).epsilon(0.02));
    }
  }
}

TEST_CASE("metric properties") {
  auto m = MobilityModel::build({"fermi-dirac"});
  Grid1D grid(8.0, 160);
  const auto a = DensityField::gaussian(grid, -1.0, 1.0).normalized();
  const auto b = DensityField::gaussian(grid, 0.5, 0.8).normalized();
  const auto c = DensityField::gaussian(grid, 1.0, 1.5).normalized();
  const double ab = solve(m, a, b).distance, ba = solve(m, b, a).distance;
  const double bc = solve(m, b, c).distance, ac = solve(m, a, c).distance;
  const double tol = TransportControls{}.primal_tol;
  CHECK(std::abs(ab - ba) <= std::max(1e-4, 2 * tol * ab) * ab);
  CHECK(ac <= ab + bc + 3 * tol);
  // Saturation lowers mobility, so W_h is at least the W2 distance.
  CHECK(ab >= w2_quantile_oracle(a, b) * 0.999);

  // Time refinement: the midpoint face average slightly under-weights the
  // action on coarse K, so the sequence approaches its limit from below at
  // second order instead of decreasing.
  const double a4 = solve(m, a, c, 4).action, a8 = solve(m, a, c, 8).action, a16 = solve(m, a, c, 16).action;
  CHECK(std::abs(a16 - a8) < 0.5 * std::abs(a8 - a4));
  CHECK(std::abs(a16 - a8) < 1e-3 * a16);
}

TEST_CASE("fermi-dirac W_h against the length of the PDE path") {
  auto m = MobilityModel::build({"fermi-dirac"});
  Grid1D grid(12.0, 240);
  std::vector<double> snaps;
  for (int k = 1; k <= 20; ++k) snaps.push_back(0.0025 * k);
  auto curve = evolve(m, fd_density(grid), 0.05, snaps);
  double length = 0.0;
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    length += 0.5 * (curve.times()[k + 1] - curve.times()[k]) *
              (std::sqrt(dissipation(m, curve[k])) + std::sqrt(dissipation(m, curve[k + 1])));
  }
  const auto s = solve(m, curve.front(), curve.back(), 8);
  CHECK(s.converged);
  // The PDE path is admissible, so its length bounds W_h up to discretization.
  CHECK(s.distance <= length * 1.01);
  CHECK(s.distance == doctest::Approx(length).epsilon(0.05));
}

TEST_CASE("metric derivative") {
  std::vector<double> snaps;
  for (int k = 1; k <= 40; ++k) snaps.push_back(0.005 * k);
  TransportControls c;
  c.n_time = 8;

  SUBCASE("linear from N(2, 1)") {
    auto m = MobilityModel::build({"linear"});
    Grid1D grid(12.0, 240);
    auto curve = evolve(m, DensityField::gaussian(grid, 2.0, 1.0), 0.2, snaps);
    const auto r = metric_derivative(m, curve, 0.0, {0.04, 0.02, 0.01}, c);
    CHECK(r.sqrt_dissipation == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(r.limit_check < 0.05);
    std::ostringstream out;
    write_metric_derivative(out, r);
    CHECK(out.str().find("delta,distance,estimate,converged\n") != std::string::npos);
  }

  SUBCASE("fermi-dirac at an interior time") {
    auto m = MobilityModel::build({"fermi-dirac"});
    Grid1D grid(12.0, 240);
    auto curve = evolve(m, fd_density(grid), 0.2, snaps);
    const auto r = metric_derivative(m, curve, 0.1, {0.04, 0.02}, c);
    CHECK(r.limit_check < 0.05);
  }

  SUBCASE("stationary curve") {
    auto m = MobilityModel::build({"linear"});
    Grid1D grid(8.0, 160);
    auto st = stationary_density(m, 1.0, 8.0);
    auto curve = evolve(m, st.on_grid(grid), 0.2, snaps);
    const auto r = metric_derivative(m, curve, 0.0, {0.04, 0.02}, c);
    for (double e : r.estimates) CHECK(e < 1e-3);
  }

  auto m = MobilityModel::build({"linear"});
  Grid1D grid(8.0, 80);
  auto curve = evolve(m, DensityField::gaussian(grid, 1.0, 1.0), 0.2, snaps);
  CHECK_THROWS_AS(metric_derivative(m, curve, 0.0, {0.01, 0.02}, c), ValidationError);
  CHECK_THROWS_AS(metric_derivative(m, curve, 0.0, {0.3}, c), ValidationError);
}

TEST_CASE("transport input validation") {
  Grid1D grid(8.0, 80);
  const auto a = DensityField::gaussian(grid, 0, 1).normalized();
  CHECK_THROWS_AS(solve(MobilityModel::build({"bose", 1.0}), a, a), ValidationError);
  CHECK_THROWS_AS(solve(MobilityModel::build({"power", 1, 2}), a, a), ValidationError);
  auto lin = MobilityModel::build({"linear"});
  TransportControls c;
  CHECK_THROWS_AS(wh_distance({lin, a, a.normalized(1.1), c}), ValidationError);
  CHECK_THROWS_AS(wh_distance({lin, a, DensityField::gaussian(Grid1D(8.0, 100), 0, 1).normalized(), c}), ValidationError);
  const auto tall = DensityField::gaussian(grid, 0, 0.01).normalized();
  CHECK_THROWS_AS(wh_distance({MobilityModel::build({"fermi-dirac"}), tall, tall, c}), ValidationError);
  c.tau = 2.0;
  c.sigma = 1.0;
  CHECK_THROWS_AS(wh_distance({lin, a, a, c}), ValidationError);
}

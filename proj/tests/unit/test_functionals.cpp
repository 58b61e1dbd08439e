#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"

using namespace mvgf;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Gaussian oracles against the OU equilibrium N(0, 1).
double gaussian_F(double m, double s2) { return -0.5 * std::log(2 * kPi * s2) - 0.5 - 1.0 + 0.5 * (m * m + s2); }
double gaussian_H(double m, double s2) { return 0.5 * (m * m + s2 - 1.0 - std::log(s2)); }
double gaussian_I(double m, double s2) { return m * m + (s2 - 1.0) * (s2 - 1.0) / s2; }

DensityField fd_test_density(const Grid1D& grid) {
  auto env = [](double c, double x) { return 1.0 / (1.0 + c * std::exp(0.5 * x * x)); };
  return DensityField::sample(grid, [&](double x) {
    return env(4.0, x) + 0.6 * (env(0.5, x) - env(4.0, x)) * (1 + std::tanh(x - 1)) / 2;
  });
}

}  // namespace

TEST_CASE("free energy of Gaussians under the linear model") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 2400);
  CHECK(free_energy(m, DensityField::gaussian(grid, 0.0, 1.0)) ==
        doctest::Approx(-0.5 * std::log(2 * kPi * std::numbers::e) - 0.5).epsilon(1e-9));
  CHECK(free_energy(m, DensityField::gaussian(grid, 1.5, 0.6)) == doctest::Approx(gaussian_F(1.5, 0.6)).epsilon(1e-9));
}

TEST_CASE("the stationary density minimizes F") {
  Grid1D grid(10.0, 800);
  for (auto spec : {ModelSpec{"linear"}, ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}, ModelSpec{"bose", 3.0}}) {
    auto m = MobilityModel::build(spec);
    auto pinf = stationary_density(m, 1.0, 10.0).on_grid(grid);
    CAPTURE(m.name());
    CHECK(relative_entropy(m, pinf, pinf) == 0.0);
    for (int k = 1; k <= 5; ++k) {
      const double shift = 0.3 * k, amp = 0.1 * k;
      auto q = DensityField::sample(grid, [&](double x) {
                 return pinf.interpolate(x - shift) * (1.0 + amp * std::sin(x));
               }).normalized(pinf.mass());
      const double H = relative_entropy(m, q, pinf);
      CHECK(H > 0.0);
      // Bregman form of the same quantity.
      CHECK(bregman_entropy(m, q, pinf) == doctest::Approx(H).epsilon(1e-6));
    }
  }
}

TEST_CASE("relative entropy closed forms and mass guard") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 2400);
  auto ref = DensityField::gaussian(grid, 0.0, 1.0);
  CHECK(relative_entropy(m, DensityField::gaussian(grid, 2.0, 1.0), ref) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(relative_entropy(m, DensityField::gaussian(grid, -1.0, 2.5), ref) ==
        doctest::Approx(gaussian_H(-1.0, 2.5)).epsilon(1e-8));
  auto heavy = DensityField(grid, std::vector<double>(grid.size(), 1.0 / 24.0 * 1.01));
  CHECK_THROWS_AS(relative_entropy(m, heavy, ref), ValidationError);
  CHECK_THROWS_AS(relative_entropy(m, DensityField::gaussian(Grid1D(12.0, 1200), 0, 1), ref), ValidationError);
}

TEST_CASE("dissipation closed forms") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 2400);
  for (auto [mu, s2] : {std::pair{2.0, 1.0}, {0.0, 0.5}, {-1.0, 3.0}}) {
    CAPTURE(mu);
    CHECK(dissipation(m, DensityField::gaussian(grid, mu, s2)) == doctest::Approx(gaussian_I(mu, s2)).epsilon(1e-5));
  }
  for (auto spec : {ModelSpec{"linear"}, ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 3.0}, ModelSpec{"power", 1, 1}}) {
    auto mm = MobilityModel::build(spec);
    auto pinf = stationary_density(mm, 1.0, 12.0).on_grid(grid);
    CAPTURE(mm.name());
    CHECK(dissipation(mm, pinf) < 1e-12);
  }
}

TEST_CASE("relative Fisher information") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 2400);
  auto p = DensityField::gaussian(grid, 2.0, 1.0), q = DensityField::gaussian(grid, 0.0, 1.0);
  CHECK(relative_fisher(m, p, p) == 0.0);
  CHECK(relative_fisher(m, p, q) == doctest::Approx(4.0).epsilon(1e-6));
  for (auto spec : {ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}}) {
    auto mm = MobilityModel::build(spec);
    auto pinf = stationary_density(mm, 1.0, 12.0).on_grid(grid);
    auto r = DensityField::sample(grid, [&](double x) { return pinf.interpolate(x - 0.7); }).normalized(pinf.mass());
    CHECK(relative_fisher(mm, r, pinf) == doctest::Approx(dissipation(mm, r)).epsilon(1e-8));
  }
}

TEST_CASE("generic rate D: linear oracles") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 2400);
  // Stationary OU: theta = ln p + Phi - 1 is constant, so D vanishes.
  auto pinf = DensityField::gaussian(grid, 0.0, 1.0);
  auto D0 = rate_D_field(m, pinf);
  // Central differences of e^{-x^2/2} carry a relative error of order x^4 dx^2.
  const double dx2 = grid.dx() * grid.dx();
  for (std::size_t i = 0; i < grid.size(); i += 97) {
    const double x = grid.center(i);
    if (std::abs(x) < 8.0) CHECK(std::abs(D0[i]) < dx2 * (1.0 + x * x * x * x));
  }
  // Field average equals -I = -4 for N(2, 1).
  auto p = DensityField::gaussian(grid, 2.0, 1.0);
  auto D = rate_D_field(m, p);
  std::vector<double> Dp(D.size());
  for (std::size_t i = 0; i < D.size(); ++i) Dp[i] = D[i] * p[i];
  CHECK(calculus::integrate(grid, Dp) == doctest::Approx(-4.0).epsilon(1e-2));
  // Same value through the curve accessor.
  DensityCurve curve;
  curve.append(p);
  CHECK(rate_D_generic(m, curve, 0, 1500) == D[1500]);
  CHECK_THROWS_AS(rate_D_generic(m, curve, 1, 0), ValidationError);
  CHECK_THROWS_AS(rate_D_generic(m, curve, 0, grid.size()), ValidationError);
}

TEST_CASE("rate average equals -I plus the boundary flux") {
  Grid1D grid(12.0, 1200);
  for (auto spec : {ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}, ModelSpec{"power", 1, 1}, ModelSpec{"power", 1, 2}}) {
    auto m = MobilityModel::build(spec);
    const auto st = stationary_density(m, 1.0, 12.0);
    const auto pinf = st.on_grid(grid);
    const auto shifted = DensityField::sample(grid, [&](double x) { return st(x - 0.5); }).normalized(1.0);
    for (const DensityField* q : {&pinf, &shifted}) {
      auto D = rate_D_field(m, *q);
      std::vector<double> Dp(D.size());
      for (std::size_t i = 0; i < D.size(); ++i) Dp[i] = D[i] * (*q)[i];
      const double avg = calculus::integrate(grid, Dp);
      const double expect = -dissipation(m, *q) + rate_D_boundary_term(m, *q);
      CAPTURE(m.name());
      CHECK(std::abs(avg - expect) < 1e-3 * std::max(1.0, std::abs(expect)));
    }
  }
  // Heavy power tails leave an O(1) boundary flux on [-12, 12].
  auto pw = MobilityModel::build({"power", 1, 1});
  CHECK(rate_D_boundary_term(pw, stationary_density(pw, 1.0, 12.0).on_grid(grid)) > 1.0);
}

TEST_CASE("generic rate D against symbolic power-mobility expansions") {
  const double p = 0.3, px = -0.2, pxx = 0.1, x = 0.7;
  // Symbolic expansion of the general formula with b = p, eta = -ln p + p - 1.
  CHECK(rate_D_pointwise(MobilityModel::build({"power", 1, 1}), p, px, pxx, x) ==
        doctest::Approx(2.5841943594157497).epsilon(1e-13));
  // b = p^2, eta = p/2 + 1/(2p).
  CHECK(rate_D_pointwise(MobilityModel::build({"power", 1, 2}), p, px, pxx, x) ==
        doctest::Approx(8.2966407407407407).epsilon(1e-13));
}

TEST_CASE("specialized closed forms: frozen values") {
  const double p = 0.3, px = -0.2, pxx = 0.1, x = 0.7;
  CHECK(rate_D_specialized({"fermi-dirac"}, p, px, pxx, x) == doctest::Approx(2.0264068157722468).epsilon(1e-13));
  CHECK(rate_D_specialized({"bose", 1.0}, p, px, pxx, x) == doctest::Approx(1.5250115982157584).epsilon(1e-13));
  CHECK(rate_D_specialized({"bose", 3.0}, p, px, pxx, x) == doctest::Approx(1.6914090005049358).epsilon(1e-13));
  CHECK(rate_D_specialized({"power", 1, 1}, p, px, pxx, x) == doctest::Approx(-0.45190130287276906).epsilon(1e-13));
  CHECK(rate_D_specialized({"power", 1, 2}, p, px, pxx, x) == doctest::Approx(-1.4355777777777778).epsilon(1e-13));
  CHECK(rate_D_specialized({"power", 1, 3}, p, px, pxx, x) == doctest::Approx(-1.0611058024691358).epsilon(1e-13));
  CHECK_THROWS_AS(rate_D_specialized({"linear"}, p, px, pxx, x), ValidationError);
  CHECK_THROWS_AS(rate_D_specialized({"fermi-dirac"}, 1.0, px, pxx, x), ValidationError);
  CHECK_THROWS_AS(rate_D_specialized({"bose", 1.0}, 0.0, px, pxx, x), ValidationError);
  CHECK_THROWS_AS(rate_D_specialized({"power", 1, 0.5}, p, px, pxx, x), ValidationError);
}

TEST_CASE("bose A against closed forms") {
  for (double r : {1e-6, 0.05, 0.7, 3.0, 40.0}) {
    CAPTURE(r);
    const double a1 = (r * std::log(r) - r) - ((1 + r) * std::log1p(r) - r);
    const double a2 = 2 * (r * std::log(r) - r) - (r * std::log1p(r * r) - 2 * r + 2 * std::atan(r));
    CHECK(bose_A(1.0, r) == doctest::Approx(a1).epsilon(1e-13));
    CHECK(bose_A(2.0, r) == doctest::Approx(a2).epsilon(1e-13));
  }
  CHECK(bose_A(2.5, 1.7) == doctest::Approx(-3.0160334891307951).epsilon(1e-13));
  CHECK(bose_A(1.0, 0.0) == 0.0);
}

TEST_CASE("specialized D matches the generic rate on evolved snapshots") {
  Grid1D grid(10.0, 800);
  for (auto spec : {ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}, ModelSpec{"bose", 3.0}}) {
    auto m = MobilityModel::build(spec);
    auto init = spec.family == "fermi-dirac" ? fd_test_density(grid) : DensityField::gaussian(grid, 2.0, 1.0);
    auto curve = evolve(m, init, 0.2);
    const auto& p = curve.back();
    const auto px = calculus::gradient(grid, p.view());
    const auto pxx = calculus::laplacian(grid, p.view());
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (p[i] < 1e-14 * p.max()) continue;
      const double dg = rate_D_generic(m, curve, 1, i);
      const double ds = rate_D_specialized(spec, p[i], px[i], pxx[i], grid.center(i));
      worst = std::max(worst, std::abs(ds - dg) / std::abs(dg));
    }
    CAPTURE(m.name());
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("W_h gradient is the negative PDE right-hand side") {
  for (auto spec : {ModelSpec{"linear"}, ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}}) {
    auto m = MobilityModel::build(spec);
    CAPTURE(m.name());
    auto err = [&](std::size_t n) {
      Grid1D grid(10.0, n);
      auto p = spec.family == "fermi-dirac" ? fd_test_density(grid) : DensityField::gaussian(grid, 1.0, 1.5);
      auto w = wh_gradient(m, p);
      auto r = rhs(m, p);
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(w[i] + r[i]));
      return e;
    };
    const double e1 = err(200), e2 = err(400), e3 = err(800);
    CHECK(std::log2(e1 / e2) > 1.9);
    CHECK(std::log2(e2 / e3) > 1.9);
    Grid1D grid(10.0, 400);
    auto pinf = stationary_density(m, 1.0, 10.0).on_grid(grid);
    CHECK(max_abs(wh_gradient(m, pinf)) < 1e-3);
    auto p = DensityField::gaussian(grid, 1.0, 1.5);
    if (spec.family == "fermi-dirac") p = fd_test_density(grid);
    CHECK(std::abs(wh_gradient_norm2(m, p) - dissipation(m, p)) <= 1e-10 * dissipation(m, p));
  }
}

TEST_CASE("log-gradient energy") {
  Grid1D grid(12.0, 2400);
  DensityCurve curve;
  curve.append(DensityField::gaussian(grid, 0.0, 1.0, 0.0));
  curve.append(DensityField::gaussian(grid, 0.0, 1.0, 1.0));
  CHECK(log_gradient_energy(curve) == doctest::Approx(1.0).epsilon(1e-5));
  auto m = MobilityModel::build({"fermi-dirac"});
  Grid1D g2(8.0, 400);
  auto fd_curve = evolve(m, fd_test_density(g2), 0.5, {0.1, 0.2, 0.3, 0.4});
  CHECK(std::isfinite(log_gradient_energy(fd_curve)));
  DensityCurve single;
  single.append(DensityField::gaussian(grid, 0.0, 1.0));
  CHECK_THROWS_AS(log_gradient_energy(single), ValidationError);
}

TEST_CASE("Gronwall envelope for the second moment") {
  auto m = MobilityModel::build({"linear"});
  // C = 1, R = 0, b = 1, f' = 1: s(t) = (m0 + 1) e^{2t} - 1.
  const std::vector<double> t{0.0, 0.5, 1.0, 2.0};
  auto s = gronwall_bound(m, t, 3.0, {1.0, 1.0});
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(s[k] == doctest::Approx(4.0 * std::exp(2 * t[k]) - 1.0).epsilon(1e-10));

  Grid1D grid(12.0, 1200);
  auto curve = evolve(m, DensityField::gaussian(grid, 2.0, 1.0), 1.0, {0.25, 0.5, 0.75});
  auto check = second_moment_check(m, curve);
  CHECK(check.ok);
  CHECK(check.moments[0] == check.bound[0]);
  for (std::size_t k = 0; k < check.times.size(); ++k) {
    // OU moment m(t)^2 + 1 with m(t) = 2 e^{-t}.
    CHECK(check.moments[k] == doctest::Approx(4 * std::exp(-2 * check.times[k]) + 1).epsilon(1e-3));
    CHECK(std::isfinite(check.bound[k]));
  }
  auto fd = MobilityModel::build({"fermi-dirac"});
  CHECK(second_moment_check(fd, evolve(fd, fd_test_density(grid), 0.5, {0.25})).ok);
  CHECK_THROWS_AS(second_moment_check(m, std::vector<double>{0.0}, std::vector<double>{}, 1.0), ValidationError);
}

TEST_CASE("time derivative stencils are exact on quadratics") {
  const std::vector<double> t{0.0, 0.1, 0.25, 0.3, 0.6};
  std::vector<double> y;
  for (double s : t) y.push_back(3 * s * s - 2 * s + 1);
  auto d = time_derivative(t, y);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(d[k] == doctest::Approx(6 * t[k] - 2).epsilon(1e-12));
}

TEST_CASE("energy report along an OU curve") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 1200);
  std::vector<double> snaps;
  for (int k = 1; k < 20; ++k) snaps.push_back(0.05 * k);
  auto curve = evolve(m, DensityField::gaussian(grid, 2.0, 1.0), 1.0, snaps);
  auto rep = energy_report(m, curve, DensityField::gaussian(grid, 0.0, 1.0));
  REQUIRE(rep.times.size() == 21);
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const double mu = 2 * std::exp(-rep.times[k]);
    CHECK(rep.H_g[k] == doctest::Approx(gaussian_H(mu, 1.0)).epsilon(1e-3));
    CHECK(rep.I[k] == doctest::Approx(gaussian_I(mu, 1.0)).epsilon(1e-3));
    CHECK(rep.H_g[k] >= -1e-8);
  }
  CHECK(rep.max_interior_residual() <= 0.02 * rep.max_I());

  std::ostringstream out;
  write_energy_report(out, rep, {"model=linear"});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# model=linear");
  std::getline(in, line);
  CHECK(line == "time,F,H_g,I,dFdt_numeric,residual,metric_deriv");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 21);
}

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mvgf/errors.hpp"
#include "mvgf/functionals.hpp"
#include "mvgf/perturbation.hpp"

using namespace mvgf;

namespace {

std::vector<double> snapshots(double t_end, int count) {
  std::vector<double> s;
  for (int k = 1; k < count; ++k) s.push_back(t_end * k / count);
  return s;
}

DensityField fd_density(const Grid1D& grid) {
  auto env = [](double c, double x) { return 1.0 / (1.0 + c * std::exp(0.5 * x * x)); };
  return DensityField::sample(grid, [&](double x) {
    return env(4.0, x) + 0.6 * (env(0.5, x) - env(4.0, x)) * (1 + std::tanh(x - 1)) / 2;
  });
}

}  // namespace

TEST_CASE("bump field") {
  const BumpField b{0.5, 2.0, 1.5};
  CHECK(b.value(0.5) == doctest::Approx(1.5 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(b.gradient(0.5) == 0.0);
  // beta'' at the centre: A e^{-1} (-2) / r^2.
  CHECK(b.laplacian(0.5) == doctest::Approx(-2.0 * 1.5 * std::exp(-1.0) / 4.0).epsilon(1e-14));
  for (double x : {-1.2, -0.3, 0.9, 2.1}) {
    const double e = 1e-5;
    CHECK(b.gradient(x) == doctest::Approx((b.value(x + e) - b.value(x - e)) / (2 * e)).epsilon(1e-7));
    CHECK(b.laplacian(x) == doctest::Approx((b.gradient(x + e) - b.gradient(x - e)) / (2 * e)).epsilon(1e-6));
  }
  for (double x : {-1.5, 2.5, -7.0, 10.0}) {
    CHECK(b.value(x) == 0.0);
    CHECK(b.gradient(x) == 0.0);
    CHECK(b.laplacian(x) == 0.0);
  }
  // Smooth closing at the support edge.
  for (double x : {0.5 - 2.0 * 0.999, 0.5 + 2.0 * 0.999}) {
    CHECK(std::abs(b.value(x)) < 1e-10);
    CHECK(std::abs(b.gradient(x)) < 1e-10);
    CHECK(std::abs(b.laplacian(x)) < 1e-10);
  }
  CHECK_THROWS_AS(BumpField({0.0, 0.0, 1.0}).validate(), ValidationError);
  CHECK_THROWS_AS(BumpField({0.0, -1.0, 1.0}).validate(), ValidationError);
}

TEST_CASE("perturbed potential") {
  const BumpField b{1.0, 0.8, -0.4};
  const auto base = Potential::harmonic();
  const auto pert = perturbed_potential(base, b);
  for (double x : {-3.0, 0.7, 1.2, 5.0}) {
    CHECK(pert.value(x) == base.value(x) + b.value(x));
    CHECK(pert.gradient(x) == base.gradient(x) + b.gradient(x));
    CHECK(pert.laplacian(x) == base.laplacian(x) + b.laplacian(x));
  }
  CHECK(pert.growth_R == doctest::Approx(1.8));
}

TEST_CASE("perturbed curves") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 600);
  const auto p0 = DensityField::gaussian(grid, 1.0, 1.0);

  SUBCASE("zero amplitude is bit-identical to evolve") {
    const auto a = perturbed_curve(m, {0.5, 1.0, 0.0}, p0, 0.2, snapshots(0.2, 4));
    const auto b = evolve(m, p0, 0.2, snapshots(0.2, 4));
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].values() == b[k].values());
  }

  SUBCASE("a bump keeps mass and positivity") {
    const auto c = perturbed_curve(m, {0.5, 1.0, 0.5}, p0, 0.5, snapshots(0.5, 5));
    for (const auto& f : c.fields()) {
      CHECK(std::abs(f.mass() - p0.mass()) < 1e-10);
      for (double v : f.values()) CHECK(v >= 0.0);
    }
    // The bump changes the solution.
    CHECK(c.back().values() != evolve(m, p0, 0.5).back().values());
  }
}

TEST_CASE("perturbed dissipation identity") {
  Grid1D grid(12.0, 1200);

  SUBCASE("zero bump reduces to the plain identity") {
    auto m = MobilityModel::build({"linear"});
    const auto curve = evolve(m, DensityField::gaussian(grid, 2.0, 1.0), 0.5, snapshots(0.5, 50));
    const auto r = perturbed_dissipation_residual(m, {0.0, 1.0, 0.0}, curve);
    const auto e = energy_report(m, curve, curve.front());
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      CHECK(r.cross[k] == 0.0);
      CHECK(r.residual[k] == doctest::Approx(e.residual[k]).epsilon(1e-12));
    }
  }

  SUBCASE("linear, amplitude 0.1") {
    auto m = MobilityModel::build({"linear"});
    const BumpField b{1.0, 1.0, 0.1};
    const auto curve = perturbed_curve(m, b, DensityField::gaussian(grid, 2.0, 1.0), 1.0, snapshots(1.0, 100));
    const auto r = perturbed_dissipation_residual(m, b, curve);
    CHECK(r.max_interior_residual() <= 0.02 * r.scale);
    double cmax = 0.0;
    for (double c : r.cross) cmax = std::max(cmax, std::abs(c));
    CHECK(cmax > 1e-3);
    std::ostringstream out;
    write_perturbed_residual(out, r, {"x"});
    CHECK(out.str().rfind("# x\ntime,F,I,cross,dFdt,residual\n", 0) == 0);
  }

  SUBCASE("fermi-dirac, larger bump") {
    auto m = MobilityModel::build({"fermi-dirac"});
    const BumpField b{0.5, 1.5, 0.8};
    const auto curve = perturbed_curve(m, b, fd_density(grid), 1.0, snapshots(1.0, 100));
    const auto r = perturbed_dissipation_residual(m, b, curve);
    CHECK(r.max_interior_residual() <= 0.02 * r.scale);
  }
}

TEST_CASE("Cauchy-Schwarz slope comparison") {
  Grid1D grid(12.0, 1200);
  auto fd = MobilityModel::build({"fermi-dirac"});
  const auto curve = evolve(fd, fd_density(grid), 0.3, {0.3});
  const auto& p = curve.back();

  const auto zero = slope_comparison(fd, p, {{0.0, 1.0, 0.0}});
  CHECK(zero[0].lhs == doctest::Approx(zero[0].rhs).epsilon(1e-15));
  CHECK(zero[0].aligned);
  CHECK(zero[0].holds);

  const auto bumps = random_bumps(7, 5, 3.0);
  CHECK(bumps.size() == 5);
  CHECK(random_bumps(7, 5, 3.0)[4].center == bumps[4].center);
  for (const auto& c : slope_comparison(fd, p, bumps)) {
    CHECK(c.holds);
    CHECK(c.gap > 0.0);
    CHECK_FALSE(c.aligned);
  }

  // Bumps far in the tails, where h(p) is negligible, leave both sides unchanged.
  auto lin = MobilityModel::build({"linear"});
  const auto g = DensityField::gaussian(grid, 0.0, 0.5);
  const auto far = slope_comparison(lin, g, {{11.0, 0.5, 1.0}});
  CHECK(far[0].gap == doctest::Approx(0.0).epsilon(1e-12));
  const auto far_r = perturbed_dissipation_residual(lin, {11.0, 0.5, 1.0}, evolve(lin, g, 0.1, {0.05}));
  for (double c : far_r.cross) CHECK(std::abs(c) < 1e-14);

  std::ostringstream out;
  write_slope_report(out, slope_comparison(fd, p, bumps), {"seed=7"});
  CHECK(out.str().rfind("# seed=7\ncenter,radius,amplitude,lhs,rhs,gap,holds\n", 0) == 0);

  CHECK_THROWS_AS(slope_comparison(fd, DensityField(grid, std::vector<double>(grid.size(), 0.0)), {{0.0, 1.0, 0.0}}),
                  ValidationError);
}

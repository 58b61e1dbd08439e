#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "mvgf/errors.hpp"
#include "mvgf/fpe.hpp"

using namespace mvgf;

namespace {

double sup_diff(const DensityField& a, const DensityField& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// OU Gaussian N(m, s2): dp/dt = p + x p_x + p_xx.
double ou_dpdt(double x, double m, double s2) {
  const double p = std::exp(-(x - m) * (x - m) / (2 * s2)) / std::sqrt(2 * std::numbers::pi * s2);
  const double px = -(x - m) / s2 * p;
  const double pxx = ((x - m) * (x - m) / (s2 * s2) - 1.0 / s2) * p;
  return p + x * px + pxx;
}

// Fermi-Dirac envelope 1 / (1 + c e^{x^2/2}).
double fd_envelope(double c, double x) { return 1.0 / (1.0 + c * std::exp(0.5 * x * x)); }

}  // namespace

TEST_CASE("rhs vanishes on sampled stationary densities") {
  Grid1D grid(12.0, 1200);
  for (auto spec : {ModelSpec{"linear"}, ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 1.0}, ModelSpec{"bose", 3.0}}) {
    auto m = MobilityModel::build(spec);
    auto pinf = stationary_density(m, 1.0, 12.0).on_grid(grid);
    auto r = rhs(m, pinf);
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, std::abs(v));
    CAPTURE(m.name());
    CHECK(worst < 1e-10);
    // The spec-form central flux is only second-order accurate there.
    auto rc = rhs(m, pinf, FluxScheme::Central);
    double wc = 0.0;
    for (double v : rc) wc = std::max(wc, std::abs(v));
    CHECK(wc < 10.0 * grid.dx() * grid.dx());
  }
}

TEST_CASE("linear rhs matches the OU Gaussian time derivative at second order") {
  auto m = MobilityModel::build({"linear"});
  auto err = [&](std::size_t n, FluxScheme scheme) {
    Grid1D grid(10.0, n);
    auto p = DensityField::gaussian(grid, 0.5, 2.0);
    auto r = rhs(m, p, scheme);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(r[i] - ou_dpdt(grid.center(i), 0.5, 2.0)));
    return e;
  };
  for (auto scheme : {FluxScheme::Balanced, FluxScheme::Central}) {
    const double e1 = err(400, scheme), e2 = err(800, scheme);
    CHECK(e1 < 1e-3);
    CHECK(std::log2(e1 / e2) > 1.9);
  }
  // Donor-cell advection is first order.
  const double u1 = err(400, FluxScheme::Upwind), u2 = err(800, FluxScheme::Upwind);
  CHECK(std::log2(u1 / u2) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("fermi-dirac constant density: interior rhs is the drift divergence") {
  // div(x (1-p) p) = (1-p) p for constant p.
  auto m = MobilityModel::build({"fermi-dirac"});
  Grid1D grid(4.0, 80);
  DensityField p(grid, std::vector<double>(80, 0.3));
  for (auto scheme : {FluxScheme::Balanced, FluxScheme::Central}) {
    auto r = rhs(m, p, scheme);
    for (std::size_t i = 1; i + 1 < 80; ++i) CHECK(r[i] == doctest::Approx(0.7 * 0.3).epsilon(1e-12));
  }
}

TEST_CASE("stable_dt follows the CFL formula") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(5.0, 1000);  // dx = 0.01
  auto p = DensityField::gaussian(grid, 0.0, 1.0);
  const double max_face = 5.0 - grid.dx();
  CHECK(stable_dt(m, p) == doctest::Approx(0.45 * std::min(5e-5, 0.01 / max_face)).epsilon(1e-12));
  auto fine = DensityField::gaussian(Grid1D(5.0, 2000), 0.0, 1.0);
  CHECK(stable_dt(m, p) / stable_dt(m, fine) >= 2.0);
  CHECK(stable_dt(m, p) / stable_dt(m, fine) == doctest::Approx(4.0));
  auto fd = MobilityModel::build({"fermi-dirac"});
  DensityField q(grid, std::vector<double>(1000, 0.9));
  CHECK(stable_dt(fd, q) == doctest::Approx(0.45 * 5e-5));
  CHECK_THROWS_AS(stable_dt(m, p, 0.0), ValidationError);
}

TEST_CASE("OU evolution from N(2,1)") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(12.0, 1200);
  auto curve = evolve(m, DensityField::gaussian(grid, 2.0, 1.0), 1.0, {0.25, 0.5, 0.75});
  REQUIRE(curve.size() == 5);
  CHECK(curve.times() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const auto& p = curve[k];
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      mean += grid.center(i) * p[i] * grid.dx();
      m2 += grid.center(i) * grid.center(i) * p[i] * grid.dx();
    }
    const double t = curve.times()[k];
    CHECK(mean == doctest::Approx(2.0 * std::exp(-t)).epsilon(1e-3));
    CHECK(m2 - mean * mean == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(p.mass() - 1.0) < 1e-10);
    CHECK(*std::min_element(p.values().begin(), p.values().end()) >= 0.0);
  }
}

TEST_CASE("stationary initial data stays put") {
  Grid1D grid(12.0, 1200);
  for (auto spec : {ModelSpec{"linear"}, ModelSpec{"fermi-dirac"}, ModelSpec{"bose", 3.0}}) {
    auto m = MobilityModel::build(spec);
    auto pinf = stationary_density(m, 1.0, 12.0).on_grid(grid);
    auto curve = evolve(m, pinf, 0.5);
    CHECK(sup_diff(curve.back(), pinf) < 1e-6);
  }
}

TEST_CASE("fermi-dirac comparison principle and saturation bound") {
  auto m = MobilityModel::build({"fermi-dirac"});
  Grid1D grid(8.0, 640);
  const double c1 = 0.5, c2 = 4.0;  // p_{c2} <= p_{c1}
  // Two ordered initial data inside the envelopes, off-centre so they move.
  auto lower = DensityField::sample(grid, [&](double x) {
    return fd_envelope(c2, x) + 0.2 * (fd_envelope(c1, x) - fd_envelope(c2, x)) * (1 + std::tanh(x - 1)) / 2;
  });
  auto upper = DensityField::sample(grid, [&](double x) {
    return fd_envelope(c2, x) + 0.9 * (fd_envelope(c1, x) - fd_envelope(c2, x)) * (1 + std::tanh(x - 1)) / 2;
  });
  const std::vector<double> snaps{0.1, 0.3, 0.6, 1.0};
  auto pl = evolve(m, lower, 1.0, snaps);
  auto pu = evolve(m, upper, 1.0, snaps);
  const double cap = 1.0 / (1.0 + c1);
  for (std::size_t k = 0; k < pl.size(); ++k) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(pl[k][i] <= pu[k][i] + 1e-8);
      CHECK(pu[k][i] <= cap + 1e-8);
    }
  }
}

TEST_CASE("positivity guard and upwind fallback") {
  auto m = MobilityModel::build({"linear"});
  Grid1D coarse(30.0, 60);  // dx = 1, |Phi'| up to 29
  auto p = DensityField::gaussian(coarse, 20.0, 4.0);
  CHECK(cell_peclet(m, p) > 1.0);
  CHECK_THROWS_AS(evolve(m, p, 0.1), ValidationError);
  FpeOptions up;
  up.scheme = FluxScheme::Upwind;
  auto curve = evolve(m, p, 0.1, {}, up);
  CHECK(std::abs(curve.back().mass() - p.mass()) < 1e-10);
  CHECK(*std::min_element(curve.back().values().begin(), curve.back().values().end()) >= 0.0);
}

TEST_CASE("evolve argument validation") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(5.0, 100);
  auto p = DensityField::gaussian(grid, 0.0, 1.0);
  CHECK_THROWS_AS(evolve(m, p, 0.0), ValidationError);
  CHECK_THROWS_AS(evolve(m, p, 1.0, {2.0}), ValidationError);
  auto fd = MobilityModel::build({"fermi-dirac"});
  DensityField over(grid, std::vector<double>(100, 1.5));
  CHECK_THROWS_AS(evolve(fd, over, 1.0), ValidationError);
}

TEST_CASE("curve interpolation and serialization") {
  auto m = MobilityModel::build({"linear"});
  Grid1D grid(6.0, 120);
  auto curve = evolve(m, DensityField::gaussian(grid, 1.0, 0.5), 0.4, {0.2});
  CHECK(curve.index_of(0.2) == 1);
  CHECK_THROWS_AS(curve.index_of(0.3), ValidationError);
  const double x = grid.center(60);
  CHECK(curve.value_at(0.1, x) == doctest::Approx(0.5 * (curve[0][60] + curve[1][60])));
  CHECK(curve.field_at(0.3)[10] == doctest::Approx(0.5 * (curve[1][10] + curve[2][10])));

  auto dir = std::filesystem::temp_directory_path() / "mvgf_curve_roundtrip";
  std::filesystem::remove_all(dir);
  write_curve(dir, curve, "model=linear");
  auto back = read_curve(dir);
  REQUIRE(back.size() == curve.size());
  for (std::size_t k = 0; k < curve.size(); ++k) {
    CHECK(back.times()[k] == curve.times()[k]);
    CHECK(sup_diff(back[k], curve[k]) == 0.0);
  }
  std::filesystem::remove_all(dir);
}

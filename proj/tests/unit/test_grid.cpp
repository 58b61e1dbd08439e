#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "mvgf/errors.hpp"
#include "mvgf/grid.hpp"

using namespace mvgf;

TEST_CASE("grid geometry") {
  Grid1D g(10.0, 4000);
  CHECK(g.dx() == doctest::Approx(0.005));
  CHECK(g.center(0) == -10.0 + 0.5 * g.dx());
  CHECK(g.center(3999) == doctest::Approx(10.0 - 0.0025));
  CHECK(g.face(0) == -10.0);
  CHECK(g.face(4000) == doctest::Approx(10.0));
  CHECK_THROWS_AS(Grid1D(0.0, 10), ValidationError);
  CHECK_THROWS_AS(Grid1D(1.0, 3), ValidationError);
}

TEST_CASE("density field validation") {
  Grid1D g(1.0, 8);
  CHECK_THROWS_AS(DensityField(g, std::vector<double>(7, 1.0)), ValidationError);
  std::vector<double> v(8, 1.0);
  v[2] = -1e-3;
  CHECK_THROWS_AS(DensityField(g, v), ValidationError);
  v[2] = std::nan("");
  CHECK_THROWS_AS(DensityField(g, v), ValidationError);
}

TEST_CASE("standard gaussian integrates to one") {
  // erf oracle: mass of N(0,1) on [-10,10] is 1 - erfc(10/sqrt2) = 1 to double precision.
  Grid1D g(10.0, 4000);
  auto p = DensityField::gaussian(g, 0.0, 1.0);
  CHECK(std::abs(p.mass() - std::erf(10.0 / std::numbers::sqrt2)) < 1e-8);
  CHECK(p.normalized(2.0).mass() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gradient of constant is zero, laplacian of x^2 is 2") {
  Grid1D g(3.0, 60);
  std::vector<double> c(60, 4.2), sq(60);
  for (std::size_t i = 0; i < 60; ++i) sq[i] = g.center(i) * g.center(i);
  for (double v : calculus::gradient(g, c)) CHECK(v == doctest::Approx(0.0));
  // Both interior and boundary stencils are exact on quadratics.
  for (double v : calculus::laplacian(g, sq)) CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
  auto grad = calculus::gradient(g, sq);
  for (std::size_t i = 0; i < 60; ++i) CHECK(grad[i] == doctest::Approx(2.0 * g.center(i)).epsilon(1e-9));
}

TEST_CASE("face divergence telescopes to zero mass change") {
  Grid1D g(2.0, 16);
  std::vector<double> J(17);
  for (std::size_t i = 1; i < 16; ++i) J[i] = std::sin(3.0 * static_cast<double>(i)) + 0.1 * i;
  auto div = calculus::face_divergence(g, J);
  CHECK(std::abs(calculus::integrate(g, div)) < 1e-14);
  J[0] = 1.0;
  CHECK_THROWS_AS(calculus::face_divergence(g, J), ValidationError);
  CHECK_THROWS_AS(calculus::face_divergence(g, std::vector<double>(16)), ValidationError);
}

TEST_CASE("derivative stencils converge at second order") {
  auto max_errors = [](std::size_t n) {
    Grid1D g(2.0, n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(g.center(i));
    auto d1 = calculus::gradient(g, v);
    auto d2 = calculus::laplacian(g, v);
    double e1 = 0, e2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      e1 = std::max(e1, std::abs(d1[i] - std::cos(g.center(i))));
      e2 = std::max(e2, std::abs(d2[i] + std::sin(g.center(i))));
    }
    return std::pair{e1, e2};
  };
  auto [a1, a2] = max_errors(50);
  auto [b1, b2] = max_errors(100);
  auto [c1, c2] = max_errors(200);
  auto [d1, d2] = max_errors(400);
  for (auto [coarse, fine] : {std::pair{a1, b1}, {b1, c1}, {c1, d1}}) CHECK(std::log2(coarse / fine) >= 1.9);
  for (auto [coarse, fine] : {std::pair{a2, b2}, {b2, c2}, {c2, d2}}) CHECK(std::log2(coarse / fine) >= 1.9);
}

TEST_CASE("masked ratio applies the 0/0 convention") {
  std::vector<double> num{1.0, 2.0, 3.0}, p{0.0, 1e-20, 1.0};
  auto r = calculus::masked_ratio(num, p);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 3.0);
}

TEST_CASE("interpolation is linear and clamps outside the domain") {
  Grid1D g(1.0, 4);
  DensityField p(g, {1.0, 2.0, 3.0, 4.0});
  CHECK(p.interpolate(g.center(1)) == doctest::Approx(2.0));
  CHECK(p.interpolate(0.5 * (g.center(1) + g.center(2))) == doctest::Approx(2.5));
  CHECK(p.interpolate(-5.0) == 1.0);
  CHECK(p.interpolate(5.0) == 4.0);
}

TEST_CASE("field csv round trip") {
  Grid1D g(3.0, 12);
  auto p = DensityField::gaussian(g, 0.3, 0.7, 1.25);
  std::stringstream ss;
  write_field_csv(ss, p, "model=linear");
  auto q = read_field_csv(ss);
  CHECK(q.grid() == p.grid());
  CHECK(q.time() == 1.25);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == p[i]);
}

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "mvgf/mvgf.h"

// Links only the shared library: everything below goes through the C symbols.

namespace {

double gaussian(double x, double m, double v) { return std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * M_PI * v); }

std::vector<double> sampled(double L, size_t n, double m, double v) {
  std::vector<double> out(n);
  const double dx = 2 * L / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) out[i] = gaussian(-L + (static_cast<double>(i) + 0.5) * dx, m, v);
  return out;
}

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::string(mvgf_version()) == MVGF_VERSION);
  mvgf_model* m = nullptr;
  CHECK(mvgf_model_create("quantum", 1.0, &m) == MVGF_VALIDATION_ERROR);
  CHECK(m == nullptr);
  CHECK(std::string(mvgf_last_error()).find("quantum") != std::string::npos);
  REQUIRE(mvgf_model_create("linear", 0.0, &m) == MVGF_OK);
  CHECK(std::string(mvgf_last_error()).empty());
  CHECK(mvgf_model_create(nullptr, 0.0, &m) == MVGF_VALIDATION_ERROR);
  mvgf_model_destroy(m);
}

TEST_CASE("model evaluation against closed forms") {
  mvgf_model* lin = nullptr;
  mvgf_model* fd = nullptr;
  mvgf_model* bose3 = nullptr;
  mvgf_model* m1 = nullptr;
  REQUIRE(mvgf_model_create("linear", 0.0, &lin) == MVGF_OK);
  REQUIRE(mvgf_model_create("fermi-dirac", 0.0, &fd) == MVGF_OK);
  REQUIRE(mvgf_model_create("bose", 3.0, &bose3) == MVGF_OK);
  double v = 0.0;
  REQUIRE(mvgf_model_eval(lin, MVGF_FN_ETA, 2.0, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(2 * std::log(2.0) - 2.0));
  REQUIRE(mvgf_model_eval(lin, MVGF_FN_G, std::exp(1.0), &v) == MVGF_OK);
  CHECK(v == doctest::Approx(1.0));
  REQUIRE(mvgf_model_eval(fd, MVGF_FN_B, 0.25, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(0.75));
  REQUIRE(mvgf_model_eval(fd, MVGF_FN_H, 0.25, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(0.1875));
  REQUIRE(mvgf_model_eval(bose3, MVGF_FN_B, 0.5, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(1.125));
  REQUIRE(mvgf_model_eval(lin, MVGF_FN_PSI, 3.0, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(3.0));
  CHECK(mvgf_model_eval(fd, MVGF_FN_B, 1.5, &v) == MVGF_VALIDATION_ERROR);
  CHECK(mvgf_model_eval(lin, MVGF_FN_G, -1.0, &v) == MVGF_VALIDATION_ERROR);
  CHECK(mvgf_model_eval(lin, static_cast<mvgf_function>(42), 1.0, &v) == MVGF_VALIDATION_ERROR);
  REQUIRE(mvgf_model_critical_mass(bose3, &v) == MVGF_OK);
  CHECK(v == doctest::Approx(5.8721001545).epsilon(1e-8));
  REQUIRE(mvgf_model_create("bose", 1.0, &m1) == MVGF_OK);
  REQUIRE(mvgf_model_critical_mass(m1, &v) == MVGF_OK);
  CHECK(std::isinf(v));
  mvgf_model_destroy(m1);
  CHECK(mvgf_model_critical_mass(lin, &v) == MVGF_VALIDATION_ERROR);
  mvgf_model_destroy(lin);
  mvgf_model_destroy(fd);
  mvgf_model_destroy(bose3);
}

TEST_CASE("fields, evolution and functionals") {
  mvgf_model* lin = nullptr;
  REQUIRE(mvgf_model_create("linear", 0.0, &lin) == MVGF_OK);
  const auto values = sampled(12.0, 600, 2.0, 1.0);
  mvgf_field* p0 = nullptr;
  REQUIRE(mvgf_field_create(12.0, values.size(), values.data(), 0.0, &p0) == MVGF_OK);
  CHECK(mvgf_field_size(p0) == 600);
  CHECK(mvgf_field_mass(p0) == doctest::Approx(1.0).epsilon(1e-8));

  // Free energy of N(m, s2) with eta(p) = p log p - p: (m^2 + s2 - 1 - ln(2 pi s2)) / 2 - 1.
  double F = 0.0, I = 0.0;
  REQUIRE(mvgf_free_energy(lin, p0, &F) == MVGF_OK);
  CHECK(F == doctest::Approx((4.0 + 1.0 - 1.0 - std::log(2 * M_PI)) / 2.0 - 1.0).epsilon(1e-4));
  REQUIRE(mvgf_dissipation(lin, p0, &I) == MVGF_OK);
  CHECK(I == doctest::Approx(4.0).epsilon(1e-3));

  mvgf_field* named = nullptr;
  REQUIRE(mvgf_field_initial(lin, 12.0, 600, R"({"kind": "gaussian", "mean": 2})", &named) == MVGF_OK);
  std::vector<double> got(600);
  REQUIRE(mvgf_field_values(named, got.data(), got.size()) == MVGF_OK);
  for (size_t i = 0; i < got.size(); i += 50) CHECK(got[i] == doctest::Approx(values[i]).epsilon(1e-12));
  CHECK(mvgf_field_initial(lin, 12.0, 600, R"({"kind": "gaussian", "width": 2})", &named) == MVGF_VALIDATION_ERROR);

  mvgf_curve* curve = nullptr;
  REQUIRE(mvgf_evolve(lin, p0, 1.0, 11, &curve) == MVGF_OK);
  REQUIRE(mvgf_curve_size(curve) == 11);
  double t = 0.0;
  REQUIRE(mvgf_curve_time(curve, 10, &t) == MVGF_OK);
  CHECK(t == doctest::Approx(1.0));
  CHECK(mvgf_curve_time(curve, 11, &t) == MVGF_VALIDATION_ERROR);
  mvgf_field* p1 = nullptr;
  REQUIRE(mvgf_curve_field(curve, 10, &p1) == MVGF_OK);
  CHECK(mvgf_field_time(p1) == doctest::Approx(1.0));
  double F1 = 0.0;
  REQUIRE(mvgf_free_energy(lin, p1, &F1) == MVGF_OK);
  CHECK(F1 < F);
  double H = 0.0;
  REQUIRE(mvgf_relative_entropy(lin, p1, p0, &H) == MVGF_OK);
  CHECK(H == doctest::Approx(F1 - F).epsilon(1e-12));

  mvgf_field_destroy(p1);
  mvgf_curve_destroy(curve);
  mvgf_field_destroy(named);
  mvgf_field_destroy(p0);
  mvgf_model_destroy(lin);
}

TEST_CASE("transport distances match the Gaussian W2 oracle") {
  mvgf_model* lin = nullptr;
  REQUIRE(mvgf_model_create("linear", 0.0, &lin) == MVGF_OK);
  const auto a = sampled(8.0, 160, -0.5, 1.0);
  const auto b = sampled(8.0, 160, 0.5, 1.0);
  mvgf_field *pa = nullptr, *pb = nullptr;
  REQUIRE(mvgf_field_create(8.0, a.size(), a.data(), 0.0, &pa) == MVGF_OK);
  REQUIRE(mvgf_field_create(8.0, b.size(), b.data(), 0.0, &pb) == MVGF_OK);
  double w2 = 0.0, wh = 0.0;
  REQUIRE(mvgf_w2_quantile(pa, pb, &w2) == MVGF_OK);
  CHECK(w2 == doctest::Approx(1.0).epsilon(1e-3));
  REQUIRE(mvgf_wh_distance(lin, pa, pb, 8, &wh) == MVGF_OK);
  CHECK(wh == doctest::Approx(w2).epsilon(0.02));
  mvgf_field* wrong = nullptr;
  REQUIRE(mvgf_field_create(4.0, a.size(), a.data(), 0.0, &wrong) == MVGF_OK);
  CHECK(mvgf_w2_quantile(pa, wrong, &w2) == MVGF_VALIDATION_ERROR);
  mvgf_field_destroy(wrong);
  mvgf_field_destroy(pa);
  mvgf_field_destroy(pb);
  mvgf_model_destroy(lin);
}

TEST_CASE("config handles") {
  mvgf_config* c = nullptr;
  REQUIRE(mvgf_config_create(nullptr, &c) == MVGF_OK);
  const uint64_t h0 = mvgf_config_hash(c);
  const std::string json0 = mvgf_config_json(c);
  REQUIRE(mvgf_config_set(c, "particles.n", "77") == MVGF_OK);
  CHECK(mvgf_config_hash(c) != h0);
  CHECK(std::string(mvgf_config_json(c)).find("\"n\": 77") != std::string::npos);
  CHECK(mvgf_config_set(c, "particles.m", "77") == MVGF_VALIDATION_ERROR);
  REQUIRE(mvgf_config_set(c, "output.directory", "elsewhere") == MVGF_OK);
  mvgf_config* d = nullptr;
  REQUIRE(mvgf_config_create(mvgf_config_json(c), &d) == MVGF_OK);
  CHECK(mvgf_config_hash(d) == mvgf_config_hash(c));
  CHECK(mvgf_config_create("{\"grid\": {\"size\": 3}}", &d) == MVGF_VALIDATION_ERROR);
  CHECK(mvgf_config_load("/nonexistent/config.json", &d) == MVGF_VALIDATION_ERROR);
  REQUIRE(mvgf_config_set(c, "grid.n_cells", "2") == MVGF_OK);
  CHECK(mvgf_config_validate(c) == MVGF_VALIDATION_ERROR);
  mvgf_report* r = nullptr;
  CHECK(mvgf_run(c, "fpe-solve", nullptr, &r) == MVGF_VALIDATION_ERROR);
  CHECK(r == nullptr);
  mvgf_config_destroy(d);
  mvgf_config_destroy(c);
}

TEST_CASE("run through the C interface") {
  mvgf_config* c = nullptr;
  REQUIRE(mvgf_config_create(R"({"grid": {"n_cells": 300}, "time": {"t_end": 0.5, "snapshots": 5},
                                 "output": {"directory": "capi_run_output"}})",
                             &c) == MVGF_OK);
  mvgf_report* r = nullptr;
  REQUIRE(mvgf_run(c, "energy-report", nullptr, &r) == MVGF_OK);
  CHECK(mvgf_report_passed(r) == 1);
  CHECK(mvgf_report_file_count(r) == 1);
  CHECK(std::string(mvgf_report_file(r, 0)).find("energy_report.csv") != std::string::npos);
  CHECK(std::string(mvgf_report_text(r)).find("dF/dt + I") != std::string::npos);
  CHECK(std::string(mvgf_report_file(r, 5)).empty());
  mvgf_report_destroy(r);
  CHECK(mvgf_run(c, "nonsense", nullptr, &r) == MVGF_VALIDATION_ERROR);
  mvgf_config_destroy(c);
}

#include "mvgf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mvgf/errors.hpp"

namespace mvgf {

Grid1D::Grid1D(double half_width, std::size_t n_cells)
    : half_width_(half_width), n_cells_(n_cells) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw ValidationError("grid half-width must be positive and finite");
  }
  if (n_cells < 4) throw ValidationError("grid needs at least 4 cells");
  dx_ = 2.0 * half_width / static_cast<double>(n_cells);
  centers_.resize(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) centers_[i] = center(i);
}

double Grid1D::cell_coordinate(double x) const {
  const double s = (x + half_width_) / dx_ - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(n_cells_ - 1));
}

DensityField::DensityField(Grid1D grid, std::vector<double> values, double time)
    : grid_(std::move(grid)), values_(std::move(values)), time_(time) {
  if (values_.size() != grid_.size()) {
    throw ValidationError("density field has " + std::to_string(values_.size()) +
                          " values for a grid of " + std::to_string(grid_.size()) + " cells");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("density values must be finite and non-negative");
    }
  }
}

DensityField DensityField::sample(const Grid1D& grid, const std::function<double(double)>& density,
                                  double time) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = density(grid.center(i));
  return DensityField(grid, std::move(v), time);
}

DensityField DensityField::gaussian(const Grid1D& grid, double mean, double variance, double time) {
  if (!(variance > 0.0)) throw ValidationError("gaussian variance must be positive");
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  return sample(
      grid, [&](double x) { return norm * std::exp(-(x - mean) * (x - mean) / (2.0 * variance)); },
      time);
}

double DensityField::mass() const { return calculus::integrate(grid_, values_); }

double DensityField::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

DensityField DensityField::normalized(double target_mass) const {
  const double m = mass();
  if (!(m > 0.0)) throw ValidationError("cannot normalize a field with zero mass");
  std::vector<double> v(values_);
  for (double& x : v) x *= target_mass / m;
  return DensityField(grid_, std::move(v), time_);
}

double DensityField::interpolate(double x) const {
  const double s = grid_.cell_coordinate(x);
  const auto i = static_cast<std::size_t>(std::floor(s));
  if (i + 1 >= values_.size()) return values_.back();
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

namespace calculus {

namespace {
void check_size(const Grid1D& grid, std::size_t n, const char* what) {
  if (n != grid.size()) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(grid.size()) +
                          " values, got " + std::to_string(n));
  }
}
}  // namespace

std::vector<double> gradient(const Grid1D& grid, std::span<const double> p) {
  check_size(grid, p.size(), "gradient");
  const std::size_t n = p.size();
  const double inv2dx = 0.5 / grid.dx();
  std::vector<double> out(n);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (p[i + 1] - p[i - 1]) * inv2dx;
  out[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) * inv2dx;
  out[n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) * inv2dx;
  return out;
}

std::vector<double> laplacian(const Grid1D& grid, std::span<const double> p) {
  check_size(grid, p.size(), "laplacian");
  const std::size_t n = p.size();
  const double inv = 1.0 / (grid.dx() * grid.dx());
  std::vector<double> out(n);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (p[i + 1] - 2.0 * p[i] + p[i - 1]) * inv;
  out[0] = (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * inv;
  out[n - 1] = (2.0 * p[n - 1] - 5.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4]) * inv;
  return out;
}

std::vector<double> face_divergence(const Grid1D& grid, std::span<const double> flux) {
  if (flux.size() != grid.size() + 1) {
    throw ValidationError("face_divergence: expected " + std::to_string(grid.size() + 1) +
                          " face values, got " + std::to_string(flux.size()));
  }
  if (flux.front() != 0.0 || flux.back() != 0.0) {
    throw ValidationError("face_divergence: boundary fluxes must be zero (no-flux)");
  }
  std::vector<double> out(grid.size());
  const double inv = 1.0 / grid.dx();
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = (flux[i + 1] - flux[i]) * inv;
  return out;
}

double integrate(const Grid1D& grid, std::span<const double> values) {
  check_size(grid, values.size(), "integrate");
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.dx();
}

std::vector<double> masked_ratio(std::span<const double> num, std::span<const double> p) {
  if (num.size() != p.size()) throw ValidationError("masked_ratio: size mismatch");
  double pmax = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  const double cut = 1e-14 * pmax;
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= cut && p[i] > 0.0) out[i] = num[i] / std::max(p[i], 1e-300);
  }
  return out;
}

}  // namespace calculus

void write_field_csv(std::ostream& out, const DensityField& field, const std::string& extra_header) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# time=%.17g, L=%.17g, n_cells=%zu", field.time(),
                field.grid().half_width(), field.grid().size());
  out << buf;
  if (!extra_header.empty()) out << ", " << extra_header;
  out << "\nx,value\n";
  for (std::size_t i = 0; i < field.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", field.grid().center(i), field[i]);
    out << buf;
  }
}

DensityField read_field_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#", 0) != 0) {
    throw ValidationError("field CSV: missing '#' header line");
  }
  double time = 0.0, L = 0.0;
  std::size_t n = 0;
  if (std::sscanf(header.c_str(), "# time=%lf, L=%lf, n_cells=%zu", &time, &L, &n) != 3) {
    throw ValidationError("field CSV: malformed header '" + header + "'");
  }
  std::string line;
  std::getline(in, line);  // column names
  std::vector<double> values;
  values.reserve(n);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("field CSV: malformed row '" + line + "'");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return DensityField(Grid1D(L, n), std::move(values), time);
}

}  // namespace mvgf

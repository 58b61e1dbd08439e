#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mvgf {

/// Uniform cell-centred grid on [-L, L].
class Grid1D {
 public:
  Grid1D() = default;
  Grid1D(double half_width, std::size_t n_cells);

  double half_width() const { return half_width_; }
  std::size_t size() const { return n_cells_; }
  double dx() const { return dx_; }

  double center(std::size_t i) const { return -half_width_ + (static_cast<double>(i) + 0.5) * dx_; }
  /// Position of face i, i = 0..n; face 0 is -L and face n is +L.
  double face(std::size_t i) const { return -half_width_ + static_cast<double>(i) * dx_; }
  const std::vector<double>& centers() const { return centers_; }

  /// Fractional cell coordinate of x, clamped to [0, n-1].
  double cell_coordinate(double x) const;

  bool operator==(const Grid1D& other) const {
    return half_width_ == other.half_width_ && n_cells_ == other.n_cells_;
  }

 private:
  double half_width_ = 0.0;
  std::size_t n_cells_ = 0;
  double dx_ = 0.0;
  std::vector<double> centers_;
};

/// Non-negative density sampled at cell centres.
class DensityField {
 public:
  DensityField() = default;
  DensityField(Grid1D grid, std::vector<double> values, double time = 0.0);

  /// Samples `density` at the cell centres.
  static DensityField sample(const Grid1D& grid, const std::function<double(double)>& density,
                             double time = 0.0);
  /// Gaussian N(mean, variance) sampled at cell centres.
  static DensityField gaussian(const Grid1D& grid, double mean, double variance, double time = 0.0);

  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> view() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }
  std::size_t size() const { return values_.size(); }

  double mass() const;
  double max() const;
  /// Copy rescaled to the given total mass.
  DensityField normalized(double target_mass = 1.0) const;
  /// Linear interpolation at x; points outside [-L, L] use the nearest boundary cell.
  double interpolate(double x) const;

 private:
  Grid1D grid_;
  std::vector<double> values_;
  double time_ = 0.0;
};

namespace calculus {

/// Second-order central differences; second-order one-sided at the ends.
std::vector<double> gradient(const Grid1D& grid, std::span<const double> values);
std::vector<double> laplacian(const Grid1D& grid, std::span<const double> values);
/// (J_{i+1/2} - J_{i-1/2}) / dx for a face vector of n+1 entries with zero end entries.
std::vector<double> face_divergence(const Grid1D& grid, std::span<const double> face_flux);
/// Midpoint quadrature.
double integrate(const Grid1D& grid, std::span<const double> values);

/// Ratio num/p with the 0/0 convention: zero wherever p < 1e-14 * max(p).
std::vector<double> masked_ratio(std::span<const double> num, std::span<const double> p);

}  // namespace calculus

/// CSV with a `# time=..., L=..., n_cells=...` header line and columns x,value.
void write_field_csv(std::ostream& out, const DensityField& field, const std::string& extra_header = {});
DensityField read_field_csv(std::istream& in);

}  // namespace mvgf

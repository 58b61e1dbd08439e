#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "mvgf/grid.hpp"

namespace mvgf {

enum class Family { Linear, FermiDirac, BoseEinstein, Power, Custom };

std::string_view family_name(Family f);

/// Confining potential and its derivatives (one space dimension).
struct Potential {
  std::string name = "harmonic";
  std::function<double(double)> value;
  std::function<double(double)> gradient;
  std::function<double(double)> laplacian;
  /// Growth constants: |grad(x)| <= C |x| for |x| > R.
  double growth_C = 0.0;
  double growth_R = 0.0;

  /// Phi(x) = |x|^2 / 2 with C = 1, R = 0.
  static Potential harmonic();
};

/// Family name plus numeric parameters, as read from a config file.
struct ModelSpec {
  std::string family = "linear";  ///< linear | fermi-dirac | bose | power
  double gamma = 1.0;             ///< Bose exponent, b(p) = 1 + p^gamma
  double alpha = 1.0;             ///< power exponent, b(p) = p^alpha
};

/// User-supplied mobility and diffusion nonlinearity. g and eta fall back
/// to adaptive quadrature.
struct CustomCallables {
  std::function<double(double)> b;
  std::function<double(double)> b_prime;
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  std::function<double(double)> f_second;
  double g_base_point = 1.0;
  bool h_concave = false;
  std::optional<double> saturation;
};

enum class Derived { G, Eta, Phi, H, Psi };

namespace detail {
class ModelKernel;
}

/// Mobility model (b, f, Phi) with the derived scalar functions
///   g(s)   = int_a^s f'(w) / (w b(w)) dw
///   eta(r) = int_0^r g          (family-specific base point for power mobility)
///   phi(u) = eta(u) / u,   h(r) = r b(r),   psi(s) = s b(s) / f'(s).
///
/// Instances are immutable and safe to share between threads.
class MobilityModel {
 public:
  static MobilityModel build(const ModelSpec& spec);
  static MobilityModel build(const ModelSpec& spec, Potential potential);
  static MobilityModel custom(std::string name, CustomCallables callables, Potential potential);

  /// Same mobility with another potential (perturbations use this).
  MobilityModel with_potential(Potential potential) const;

  const std::string& name() const { return name_; }
  Family family() const { return family_; }
  /// gamma for Bose, alpha for power, 0 otherwise.
  double parameter() const { return parameter_; }
  int dim() const { return 1; }
  const Potential& potential() const { return potential_; }
  const ModelSpec& spec() const { return spec_; }

  std::pair<double, double> b_bounds() const { return b_bounds_; }
  std::pair<double, double> f_slope_bounds() const { return f_slope_bounds_; }
  bool unbounded_below() const { return unbounded_below_; }
  bool h_concave() const;
  /// Density level where b vanishes (Fermi-Dirac: 1).
  std::optional<double> saturation() const;
  double g_base_point() const;

  // Raw scalar functions. No argument checking; callers apply conventions.
  double b(double s) const;
  double b_prime(double s) const;
  double f(double r) const;
  double f_prime(double r) const;
  double f_second(double r) const;
  double h(double r) const { return r * b(r); }
  double h_prime(double r) const { return b(r) + r * b_prime(r); }
  double g(double s) const;
  /// g'(s) = f'(s) / (s b(s)) = 1 / psi(s).
  double g_prime(double s) const { return f_prime(s) / (s * b(s)); }
  double eta(double r) const;
  double psi(double s) const { return s * b(s) / f_prime(s); }
  double phi(double u) const;
  double phi_prime(double u) const;
  double phi_second(double u) const;
  /// f(p)/p with the p -> 0 limit f'(0).
  double f_over_p(double p) const { return p > 0.0 ? f(p) / p : f_prime(0.0); }

  /// Inverse of g where available in closed form (or by bisection for custom models).
  double g_inverse(double y) const;
  /// g^{-1}(c - phi), accurate in phi even when c is close to g_range_sup().
  double g_inverse_shifted(double c, double phi) const;
  /// Supremum of the range of g (g_inverse is defined for y below it).
  double g_range_sup() const;

  /// Checked evaluation: rejects s < 0, singular points without a finite
  /// limit, and points beyond the saturation level.
  double eval(Derived which, double s) const;

  // Field-level helpers with the p = 0 conventions (eta(0) = 0, phi(0) = 0).
  double eta_or_zero(double r) const;
  double phi_or_zero(double u) const;

 private:
  MobilityModel() = default;
  void probe_bounds();

  std::shared_ptr<const detail::ModelKernel> kernel_;
  Potential potential_;
  ModelSpec spec_;
  std::string name_;
  Family family_ = Family::Custom;
  double parameter_ = 0.0;
  std::pair<double, double> b_bounds_{0.0, 0.0};
  std::pair<double, double> f_slope_bounds_{0.0, 0.0};
  bool unbounded_below_ = false;
};

enum class ClosedFormTag { FermiDirac, BoseEinstein, Gaussian, PowerAlpha1, PowerAlphaGt1, NumericInverse };

/// p_inf = g^{-1}(-Phi + c), normalized to `mass` on [-L, L].
struct StationaryDensity {
  double c = 0.0;
  double mass = 1.0;
  double half_width = 0.0;
  ClosedFormTag closed_form_tag = ClosedFormTag::NumericInverse;
  /// Constant in the family's usual parametrization, e.g. 1/(1 + c0 e^{x^2/2})
  /// for Fermi-Dirac, (c0 e^{gamma x^2/2} - 1)^{-1/gamma} for Bose.
  double family_constant = 0.0;
  bool finite_second_moment = true;
  std::function<double(double)> density;

  double operator()(double x) const { return density(x); }
  DensityField on_grid(const Grid1D& grid) const { return DensityField::sample(grid, density); }
};

/// Bisection on c so that int_{-L}^{L} g^{-1}(c - Phi) dx matches `mass` to 1e-10.
StationaryDensity stationary_density(const MobilityModel& model, double mass, double half_width);

/// m_c = int (e^{gamma |x|^2/2} - 1)^{-1/gamma} dx over R^dim; +inf when 2/gamma >= dim.
double critical_mass(const MobilityModel& model, int dim);

/// Generalized-entropy kit built from psi: g_psi = g, G_psi(s) = int_1^s g.
double G_psi(const MobilityModel& model, double s);
/// omega_psi(x) = (x - 1) G_psi(0) - x G_psi(1/x).
double omega_psi(const MobilityModel& model, double x);

/// E_g(p) = int omega_psi(1/p) p dx. Throws for models with divergent G_psi(0).
double generalized_entropy(const MobilityModel& model, const DensityField& p);

}  // namespace mvgf

#include "mvgf/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "mvgf/errors.hpp"
#include "mvgf/quadrature.hpp"

namespace mvgf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

namespace detail {

// Per-family closed forms. Q(u) = u g(u) - eta(u) is carried separately
// because phi' = Q / u^2 loses accuracy when formed as a difference.
class ModelKernel {
 public:
  virtual ~ModelKernel() = default;
  virtual double b(double s) const = 0;
  virtual double b_prime(double s) const = 0;
  virtual double f(double r) const { return r; }
  virtual double f_prime(double) const { return 1.0; }
  virtual double f_second(double) const { return 0.0; }
  virtual double g(double s) const = 0;
  virtual double eta(double r) const = 0;
  virtual double Q(double u) const = 0;
  virtual double g_inverse(double y) const = 0;
  /// g^{-1}(c - phi) with the c-dependent part grouped so that phi keeps full
  /// relative accuracy when c sits close to the supremum of g.
  virtual double g_inverse_shifted(double c, double phi) const { return g_inverse(c - phi); }
  virtual double g_sup() const { return kInf; }
  virtual double base_point() const { return 1.0; }
  virtual std::optional<double> saturation() const { return std::nullopt; }
  virtual bool h_concave() const { return false; }
  /// Whether eta has a finite value at 0 (then it is 0 by construction).
  virtual bool eta_finite_at_zero() const { return true; }
  virtual double phi_second(double u) const {
    return f_prime(u) / (u * b(u)) / u - 2.0 * Q(u) / (u * u * u);
  }
};

namespace {

class LinearKernel final : public ModelKernel {
 public:
  double b(double) const override { return 1.0; }
  double b_prime(double) const override { return 0.0; }
  double g(double s) const override { return std::log(s); }
  double eta(double r) const override { return xlogx(r) - r; }
  double Q(double u) const override { return u; }
  double g_inverse(double y) const override { return std::exp(y); }
  bool h_concave() const override { return true; }
  double phi_second(double u) const override { return -1.0 / (u * u); }
};

class FermiDiracKernel final : public ModelKernel {
 public:
  double b(double s) const override { return 1.0 - s; }
  double b_prime(double) const override { return -1.0; }
  double g(double s) const override { return std::log(s) - std::log1p(-s); }
  double eta(double r) const override { return xlogx(r) + xlogx(1.0 - r); }
  double Q(double u) const override { return -std::log1p(-u); }
  double g_inverse(double y) const override {
    if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
    const double e = std::exp(y);
    return e / (1.0 + e);
  }
  double base_point() const override { return 0.5; }
  std::optional<double> saturation() const override { return 1.0; }
  bool h_concave() const override { return true; }
};

class BoseKernel final : public ModelKernel {
 public:
  explicit BoseKernel(double gamma) : gamma_(gamma) {}
  double b(double s) const override { return 1.0 + std::pow(s, gamma_); }
  double b_prime(double s) const override {
    return gamma_ == 1.0 ? 1.0 : gamma_ * std::pow(s, gamma_ - 1.0);
  }
  double g(double s) const override {
    return std::log(s) + (std::numbers::ln2 - std::log1p(std::pow(s, gamma_))) / gamma_;
  }
  // eta = [gamma (r ln r - r) - int_0^r ln(1 + s^gamma) ds] / gamma + r ln2 / gamma
  double eta(double r) const override {
    if (r <= 0.0) return 0.0;
    return (gamma_ * (xlogx(r) - r) - log_integral(r)) / gamma_ + r * std::numbers::ln2 / gamma_;
  }
  // Q(u) = int_0^u ds / (1 + s^gamma)
  double Q(double u) const override {
    if (u <= 0.0) return 0.0;
    if (gamma_ == 1.0) return std::log1p(u);
    if (gamma_ == 2.0) return std::atan(u);
    if (u < 1e-3) {
      const double ug = std::pow(u, gamma_);
      return u * (1.0 - ug / (gamma_ + 1.0) + ug * ug / (2.0 * gamma_ + 1.0));
    }
    const double gm = gamma_;
    return quad::integrate([gm](double s) { return 1.0 / (1.0 + std::pow(s, gm)); }, 0.0, u,
                           1e-14 * std::max(1.0, u))
        .value;
  }
  double g_inverse(double y) const override {
    // 2 e^{-gamma y} - 1 written as expm1(ln2 - gamma y) to keep accuracy near the supremum.
    const double z = std::numbers::ln2 - gamma_ * y;
    if (z <= 0.0) return kInf;
    return std::pow(std::expm1(z), -1.0 / gamma_);
  }
  double g_inverse_shifted(double c, double phi) const override {
    const double z = (std::numbers::ln2 - gamma_ * c) + gamma_ * phi;
    if (z <= 0.0) return kInf;
    return std::pow(std::expm1(z), -1.0 / gamma_);
  }
  double g_sup() const override { return std::numbers::ln2 / gamma_; }

 private:
  double log_integral(double r) const {
    if (gamma_ == 1.0) return (1.0 + r) * std::log1p(r) - r;
    if (gamma_ == 2.0) return r * std::log1p(r * r) - 2.0 * r + 2.0 * std::atan(r);
    // Integration by parts: int_0^r ln(1+s^g) = r ln(1+r^g) - g (r - Q(r)).
    return r * std::log1p(std::pow(r, gamma_)) - gamma_ * (r - Q(r));
  }
  double gamma_;
};

class PowerKernel final : public ModelKernel {
 public:
  explicit PowerKernel(double alpha) : alpha_(alpha) {}
  double b(double s) const override { return std::pow(s, alpha_); }
  double b_prime(double s) const override {
    return alpha_ == 1.0 ? 1.0 : alpha_ * std::pow(s, alpha_ - 1.0);
  }
  double g(double s) const override { return (1.0 - std::pow(s, -alpha_)) / alpha_; }
  double eta(double r) const override {
    if (alpha_ == 1.0) return -std::log(r) + r - 1.0;
    return r / alpha_ + std::pow(r, 1.0 - alpha_) / (alpha_ * (alpha_ - 1.0));
  }
  double Q(double u) const override {
    if (alpha_ == 1.0) return std::log(u);
    return -std::pow(u, 1.0 - alpha_) / (alpha_ - 1.0);
  }
  double phi_second(double u) const override {
    if (alpha_ == 1.0) return (1.0 - 2.0 * std::log(u)) / (u * u * u);
    return (1.0 + alpha_) * std::pow(u, -2.0 - alpha_) / (alpha_ - 1.0);
  }
  double g_inverse(double y) const override {
    const double t = 1.0 - alpha_ * y;
    if (t <= 0.0) return kInf;
    return alpha_ == 1.0 ? 1.0 / t : std::pow(t, -1.0 / alpha_);
  }
  double g_inverse_shifted(double c, double phi) const override {
    const double t = (1.0 - alpha_ * c) + alpha_ * phi;
    if (t <= 0.0) return kInf;
    return alpha_ == 1.0 ? 1.0 / t : std::pow(t, -1.0 / alpha_);
  }
  double g_sup() const override { return 1.0 / alpha_; }
  bool eta_finite_at_zero() const override { return false; }

 private:
  double alpha_;
};

class CustomKernel final : public ModelKernel {
 public:
  explicit CustomKernel(CustomCallables c) : c_(std::move(c)) {}
  double b(double s) const override { return c_.b(s); }
  double b_prime(double s) const override { return c_.b_prime(s); }
  double f(double r) const override { return c_.f(r); }
  double f_prime(double r) const override { return c_.f_prime(r); }
  double f_second(double r) const override { return c_.f_second(r); }
  double g(double s) const override {
    return quad::integrate([this](double w) { return c_.f_prime(w) / (w * c_.b(w)); },
                           c_.g_base_point, s)
        .value;
  }
  // int_0^r g = r g(r) - int_0^r f'/b
  double eta(double r) const override { return r > 0.0 ? r * g(r) - Q(r) : 0.0; }
  double Q(double u) const override {
    return quad::integrate([this](double w) { return c_.f_prime(w) / c_.b(w); }, 0.0, u).value;
  }
  double g_inverse(double y) const override {
    double lo = 1e-300, hi = c_.saturation.value_or(1.0);
    if (c_.saturation) {
      hi *= 1.0 - 1e-15;
    } else {
      while (g(hi) < y) {
        hi *= 2.0;
        if (hi > 1e300) throw NumericalError("custom g_inverse: value " + fmt(y) + " out of range");
      }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = lo < 1e-200 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
      (g(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  double base_point() const override { return c_.g_base_point; }
  std::optional<double> saturation() const override { return c_.saturation; }
  bool h_concave() const override { return c_.h_concave; }

 private:
  CustomCallables c_;
};

}  // namespace
}  // namespace detail

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::FermiDirac: return "fermi-dirac";
    case Family::BoseEinstein: return "bose";
    case Family::Power: return "power";
    case Family::Custom: return "custom";
  }
  return "unknown";
}

Potential Potential::harmonic() {
  Potential p;
  p.name = "harmonic";
  p.value = [](double x) { return 0.5 * x * x; };
  p.gradient = [](double x) { return x; };
  p.laplacian = [](double) { return 1.0; };
  p.growth_C = 1.0;
  p.growth_R = 0.0;
  return p;
}

MobilityModel MobilityModel::build(const ModelSpec& spec) { return build(spec, Potential::harmonic()); }

MobilityModel MobilityModel::build(const ModelSpec& spec, Potential potential) {
  MobilityModel m;
  m.spec_ = spec;
  m.potential_ = std::move(potential);
  const std::string& fam = spec.family;
  if (fam == "linear") {
    m.family_ = Family::Linear;
    m.name_ = "linear";
    m.kernel_ = std::make_shared<detail::LinearKernel>();
  } else if (fam == "fermi-dirac" || fam == "fermi_dirac") {
    m.family_ = Family::FermiDirac;
    m.name_ = "fermi-dirac";
    m.kernel_ = std::make_shared<detail::FermiDiracKernel>();
  } else if (fam == "bose" || fam == "bose-einstein") {
    if (!(spec.gamma >= 1.0) || !std::isfinite(spec.gamma)) {
      throw ValidationError("bose model needs gamma >= 1, got " + fmt(spec.gamma));
    }
    m.family_ = Family::BoseEinstein;
    m.parameter_ = spec.gamma;
    m.name_ = "bose(gamma=" + fmt(spec.gamma) + ")";
    m.kernel_ = std::make_shared<detail::BoseKernel>(spec.gamma);
  } else if (fam == "power") {
    if (!(spec.alpha >= 1.0) || !std::isfinite(spec.alpha)) {
      throw ValidationError("power model needs alpha >= 1, got " + fmt(spec.alpha));
    }
    m.family_ = Family::Power;
    m.parameter_ = spec.alpha;
    m.name_ = "power(alpha=" + fmt(spec.alpha) + ")";
    m.unbounded_below_ = true;
    m.kernel_ = std::make_shared<detail::PowerKernel>(spec.alpha);
  } else {
    throw ValidationError("unknown model family '" + fam +
                          "' (expected linear, fermi-dirac, bose or power)");
  }
  m.probe_bounds();
  return m;
}

MobilityModel MobilityModel::custom(std::string name, CustomCallables c, Potential potential) {
  if (!c.b || !c.b_prime || !c.f || !c.f_prime || !c.f_second) {
    throw ValidationError("custom model: b, b', f, f', f'' callables are all required");
  }
  if (c.f(0.0) != 0.0) throw ValidationError("custom model: f(0) must be exactly 0");
  if (!(c.g_base_point > 0.0)) throw ValidationError("custom model: g base point must be positive");
  MobilityModel m;
  m.family_ = Family::Custom;
  m.name_ = std::move(name);
  m.spec_.family = "custom";
  m.potential_ = std::move(potential);
  m.kernel_ = std::make_shared<detail::CustomKernel>(std::move(c));
  m.probe_bounds();
  if (!(m.b_bounds_.first > 0.0)) m.unbounded_below_ = true;
  return m;
}

MobilityModel MobilityModel::with_potential(Potential potential) const {
  MobilityModel m = *this;
  m.potential_ = std::move(potential);
  return m;
}

void MobilityModel::probe_bounds() {
  const auto sat = kernel_->saturation();
  const double top = sat ? *sat * (1.0 - 1e-6) : 10.0;
  const double lo = 1e-6;
  double b0 = kInf, b1 = -kInf, f0 = kInf, f1 = -kInf;
  constexpr int n = 400;
  for (int i = 0; i <= n; ++i) {
    const double s = lo * std::pow(top / lo, static_cast<double>(i) / n);
    const double bv = kernel_->b(s), fv = kernel_->f_prime(s);
    b0 = std::min(b0, bv);
    b1 = std::max(b1, bv);
    f0 = std::min(f0, fv);
    f1 = std::max(f1, fv);
  }
  b_bounds_ = {b0, b1};
  f_slope_bounds_ = {f0, f1};
}

bool MobilityModel::h_concave() const { return kernel_->h_concave(); }
std::optional<double> MobilityModel::saturation() const { return kernel_->saturation(); }
double MobilityModel::g_base_point() const { return kernel_->base_point(); }

double MobilityModel::b(double s) const { return kernel_->b(s); }
double MobilityModel::b_prime(double s) const { return kernel_->b_prime(s); }
double MobilityModel::f(double r) const { return kernel_->f(r); }
double MobilityModel::f_prime(double r) const { return kernel_->f_prime(r); }
double MobilityModel::f_second(double r) const { return kernel_->f_second(r); }
double MobilityModel::g(double s) const { return kernel_->g(s); }
double MobilityModel::eta(double r) const { return kernel_->eta(r); }
double MobilityModel::phi(double u) const { return kernel_->eta(u) / u; }
double MobilityModel::phi_prime(double u) const { return kernel_->Q(u) / (u * u); }
double MobilityModel::phi_second(double u) const { return kernel_->phi_second(u); }
double MobilityModel::g_inverse(double y) const { return kernel_->g_inverse(y); }
double MobilityModel::g_inverse_shifted(double c, double phi) const {
  return kernel_->g_inverse_shifted(c, phi);
}
double MobilityModel::g_range_sup() const { return kernel_->g_sup(); }

double MobilityModel::eval(Derived which, double s) const {
  if (!(s >= 0.0) || !std::isfinite(s)) {
    throw ValidationError("derived functions need a finite s >= 0, got " + fmt(s));
  }
  if (const auto sat = saturation(); sat && s > *sat) {
    throw ValidationError("s = " + fmt(s) + " exceeds the saturation level " + fmt(*sat) + " of " +
                          name_);
  }
  const bool at_sat = saturation() && s == *saturation();
  auto singular = [&](const char* what) -> double {
    throw ValidationError(std::string(what) + " of " + name_ + " has no finite value at s = " + fmt(s));
  };
  switch (which) {
    case Derived::H: return h(s);
    case Derived::Psi: return psi(s);
    case Derived::G:
      if (s == 0.0 || at_sat) return singular("g");
      return g(s);
    case Derived::Eta:
      if (s == 0.0) return kernel_->eta_finite_at_zero() ? 0.0 : singular("eta");
      return eta(s);
    case Derived::Phi:
      // phi(0) = lim eta(u)/u = g(0+), which is -inf for every family here.
      if (s == 0.0) return singular("phi");
      return phi(s);
  }
  return 0.0;
}

double MobilityModel::eta_or_zero(double r) const { return r > 0.0 ? eta(r) : 0.0; }
double MobilityModel::phi_or_zero(double u) const { return u > 0.0 ? phi(u) : 0.0; }

namespace {

double stationary_mass(const MobilityModel& model, double c, double L) {
  const Potential& pot = model.potential();
  auto dens = [&](double x) { return model.g_inverse_shifted(c, pot.value(x)); };
  // Split at the origin where the profile peaks.
  return quad::integrate(dens, -L, 0.0, 1e-12, 20000).value + quad::integrate(dens, 0.0, L, 1e-12, 20000).value;
}

// Minimum of Phi on [-L, L]: coarse scan, then Brent around the best sample.
double potential_minimum(const Potential& pot, double L) {
  constexpr int kScan = 4001;
  const double h = 2.0 * L / (kScan - 1);
  int best = 0;
  double vbest = pot.value(-L);
  for (int j = 1; j < kScan; ++j) {
    const double v = pot.value(-L + h * j);
    if (v < vbest) vbest = v, best = j;
  }
  const double a = std::max(-L, -L + h * (best - 1)), b = std::min(L, -L + h * (best + 1));
  auto [xm, vm] = boost::math::tools::brent_find_minima(pot.value, a, b, 52);
  (void)xm;
  return std::min(vm, vbest);
}

}  // namespace

StationaryDensity stationary_density(const MobilityModel& model, double mass, double L) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("stationary mass must be positive");
  if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("stationary domain half-width must be positive");

  const double sup = model.g_range_sup();
  auto m_of = [&](double c) { return stationary_mass(model, c, L); };

  // Upper end of the bracket.
  double hi;
  if (std::isfinite(sup)) {
    // Approach the supremum; a mass map that stays bounded there means the
    // requested mass lies in the condensation regime.
    // g^{-1}(c - Phi) is finite everywhere only for c < sup + min Phi.
    const double top = sup + potential_minimum(model.potential(), L);
    double gap = 1.0;
    hi = top - gap;
    double mh = m_of(hi);
    while (mh <= mass) {
      gap *= 0.1;
      if (gap < 1e-12) {
        throw ValidationError("condensation regime, no regular stationary density: mass " + fmt(mass) +
                              " exceeds the largest attainable mass (about " + fmt(mh) + ") for " +
                              model.name());
      }
      hi = top - gap;
      mh = m_of(hi);
    }
  } else {
    hi = 0.0;
    for (int i = 0; m_of(hi) <= mass; ++i) {
      if (i > 200) throw NumericalError("stationary_density: bracket failure (upper)");
      hi = hi * 2.0 + 1.0;
    }
  }
  double lo = std::min(hi, 0.0) - 1.0;
  for (int i = 0; m_of(lo) >= mass; ++i) {
    if (i > 200) throw NumericalError("stationary_density: bracket failure (lower)");
    lo = lo * 2.0 - 1.0;
  }

  double c = 0.5 * (lo + hi);
  double err = kInf;
  for (int it = 0; it < 300; ++it) {
    c = 0.5 * (lo + hi);
    const double m = m_of(c);
    err = m - mass;
    if (std::abs(err) < 1e-11) break;
    if (c == lo || c == hi) break;  // bracket exhausted in floating point
    (err < 0.0 ? lo : hi) = c;
  }
  if (std::abs(err) > 1e-10) {
    throw NumericalError("stationary_density: bisection stalled with mass error " + fmt(err));
  }

  StationaryDensity out;
  out.c = c;
  out.mass = mass;
  out.half_width = L;
  switch (model.family()) {
    case Family::Linear:
      out.closed_form_tag = ClosedFormTag::Gaussian;
      out.family_constant = std::exp(c);
      break;
    case Family::FermiDirac:
      out.closed_form_tag = ClosedFormTag::FermiDirac;
      out.family_constant = std::exp(-c);
      break;
    case Family::BoseEinstein:
      out.closed_form_tag = ClosedFormTag::BoseEinstein;
      out.family_constant = 2.0 * std::exp(-model.parameter() * c);
      break;
    case Family::Power:
      out.closed_form_tag =
          model.parameter() == 1.0 ? ClosedFormTag::PowerAlpha1 : ClosedFormTag::PowerAlphaGt1;
      out.family_constant = 1.0 - model.parameter() * c;
      out.finite_second_moment = false;  // tails decay like |x|^{-2/alpha}
      break;
    case Family::Custom:
      out.closed_form_tag = ClosedFormTag::NumericInverse;
      out.family_constant = c;
      break;
  }
  auto kernel_model = std::make_shared<MobilityModel>(model);
  out.density = [kernel_model, c](double x) {
    return kernel_model->g_inverse_shifted(c, kernel_model->potential().value(x));
  };
  return out;
}

double critical_mass(const MobilityModel& model, int dim) {
  if (model.family() != Family::BoseEinstein) {
    throw ValidationError("critical mass is defined for the bose family only, not " + model.name());
  }
  if (dim < 1) throw ValidationError("dimension must be positive");
  const double gamma = model.parameter();
  const double d = dim;
  if (2.0 / gamma >= d) return kInf;
  auto radial = [gamma, d](double r) {
    if (r <= 0.0) return 0.0;
    // Log form keeps r^2 from underflowing near the origin.
    const double lr = std::log(r);
    const double x = 0.5 * gamma * r * r;
    const double log_em1 = x < 1e-8 ? std::log(0.5 * gamma) + 2.0 * lr + 0.5 * x : std::log(std::expm1(x));
    return std::exp((d - 1.0) * lr - log_em1 / gamma);
  };
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
  const double inner = quad::integrate_singular(radial, 0.0, 1.0).value;
  const double outer = quad::integrate_to_infinity(radial, 1.0).value;
  return sphere * (inner + outer);
}

double G_psi(const MobilityModel& model, double s) {
  if (s == 0.0 && model.unbounded_below()) {
    throw ValidationError("G_psi(0) diverges for " + model.name());
  }
  return model.eval(Derived::Eta, s) - model.eta(1.0);
}

double omega_psi(const MobilityModel& model, double x) {
  if (!(x > 0.0)) throw ValidationError("omega_psi needs x > 0");
  return (x - 1.0) * G_psi(model, 0.0) - x * G_psi(model, 1.0 / x);
}

double generalized_entropy(const MobilityModel& model, const DensityField& p) {
  if (model.family() == Family::Power || model.unbounded_below()) {
    throw ValidationError("generalized entropy needs a finite G_psi(0); it diverges for " +
                          model.name() + " (use F(p) - F(p_inf) instead)");
  }
  const double G0 = G_psi(model, 0.0);
  const double eta1 = model.eta(1.0);
  std::vector<double> integrand(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    if (v > 0.0 && !(model.psi(v) > 0.0)) {
      throw ValidationError("psi is non-positive at density value " + fmt(v) + " for " + model.name());
    }
    // omega(1/p) p = (1 - p) G(0) - G(p), which tends to 0 as p -> 0.
    integrand[i] = v > 0.0 ? (1.0 - v) * G0 - (model.eta(v) - eta1) : 0.0;
  }
  return calculus::integrate(p.grid(), integrand);
}

}  // namespace mvgf

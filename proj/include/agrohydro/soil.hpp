#pragma once

// Pointwise van Genuchten-Mualem constitutive relations: effective
// saturation, hydraulic conductivity, capillary capacity and moisture
// content as functions of pressure head.  All quantities in SI units
// (head in m, conductivity in m/s).

#include <cmath>
#include <stdexcept>
#include <string>

namespace agrohydro {

/// Per-node soil parameter set.
struct SoilParams {
  double k_sat;          ///< saturated hydraulic conductivity [m/s]
  double alpha;          ///< retention shape factor [1/m]
  double n;              ///< retention shape factor, n > 1 [-]
  double theta_s;        ///< saturated water content [m3/m3]
  double theta_r;        ///< residual water content [m3/m3]
  double s_r = 1e-4;     ///< specific storage under positive pressure [1/m]
  double lambda = 0.5;   ///< Mualem pore-connectivity exponent [-]

  /// m = 1 - 1/n, always derived.
  double m() const { return 1.0 - 1.0 / n; }

  bool valid() const {
    return std::isfinite(k_sat) && k_sat > 0.0 && std::isfinite(alpha) &&
           alpha > 0.0 && std::isfinite(n) && n > 1.0 &&
           std::isfinite(theta_r) && std::isfinite(theta_s) &&
           theta_r >= 0.0 && theta_r < theta_s && theta_s <= 1.0 &&
           std::isfinite(s_r) && s_r >= 0.0 && std::isfinite(lambda);
  }

  void validate() const {
    if (!valid()) throw std::invalid_argument("SoilParams: invalid parameter set");
  }
};

/// Loam parameter set used by the bundled small-field scenarios.
inline SoilParams loam() {
  return SoilParams{2.889e-6, 3.60, 1.56, 0.430, 0.0780, 1e-4, 0.5};
}

namespace detail {

// (-alpha*h) clamped away from zero so pow/log stay finite as h -> 0-.
inline double suction_arg(double h, const SoilParams& p) {
  constexpr double tiny = 1e-12;
  const double a = -p.alpha * h;
  return a < tiny ? tiny : a;
}

inline void check_head(double h) {
  if (!std::isfinite(h))
    throw std::domain_error("pressure head must be finite, got " + std::to_string(h));
}

}  // namespace detail

/// Effective saturation S_e(h) = (1 + (-alpha h)^n)^(-m) for h < 0, else 1.
inline double effective_saturation(double h, const SoilParams& p) {
  detail::check_head(h);
  if (h >= 0.0) return 1.0;
  const double a = detail::suction_arg(h, p);
  return std::pow(1.0 + std::pow(a, p.n), -p.m());
}

/// Mualem conductivity K(h) = K_sat S_e^lambda [1 - (1 - S_e^(1/m))^m]^2.
inline double conductivity(double h, const SoilParams& p) {
  detail::check_head(h);
  const double se = effective_saturation(h, p);
  if (se >= 1.0) return p.k_sat;
  const double m = p.m();
  const double b = 1.0 - std::pow(1.0 - std::pow(se, 1.0 / m), m);
  return p.k_sat * std::pow(se, p.lambda) * b * b;
}

/// Capillary capacity c(h) = d theta / d h for h < 0; S_r when ponded.
inline double capacity(double h, const SoilParams& p) {
  detail::check_head(h);
  if (h >= 0.0) return p.s_r;
  const double a = detail::suction_arg(h, p);
  const double m = p.m();
  const double an = std::pow(a, p.n);
  return (p.theta_s - p.theta_r) * p.alpha * p.n * m * std::pow(a, p.n - 1.0) *
         std::pow(1.0 + an, -(m + 1.0));
}

/// Moisture content theta(h) = theta_r + (theta_s - theta_r) S_e(h).
inline double water_content(double h, const SoilParams& p) {
  detail::check_head(h);
  if (h >= 0.0) return p.theta_s;
  return p.theta_r + (p.theta_s - p.theta_r) * effective_saturation(h, p);
}

/// dK/dh, used by the analytic dynamics Jacobian.  Zero for h >= 0.
inline double conductivity_dh(double h, const SoilParams& p) {
  detail::check_head(h);
  if (h >= 0.0) return 0.0;
  const double a = detail::suction_arg(h, p);
  const double m = p.m();
  const double an = std::pow(a, p.n);
  const double se = std::pow(1.0 + an, -m);
  if (se >= 1.0) return 0.0;
  const double dse_dh = p.alpha * m * p.n * std::pow(a, p.n - 1.0) *
                        std::pow(1.0 + an, -(m + 1.0));
  const double s1m = std::pow(se, 1.0 / m);
  const double b = 1.0 - std::pow(1.0 - s1m, m);
  const double db_dse = std::pow(1.0 - s1m, m - 1.0) * std::pow(se, 1.0 / m - 1.0);
  const double dk_dse =
      p.k_sat * (p.lambda * std::pow(se, p.lambda - 1.0) * b * b +
                 2.0 * std::pow(se, p.lambda) * b * db_dse);
  return dk_dse * dse_dh;
}

/// dc/dh, used by the analytic dynamics Jacobian.  Zero for h >= 0.
inline double capacity_dh(double h, const SoilParams& p) {
  detail::check_head(h);
  if (h >= 0.0) return 0.0;
  const double a = detail::suction_arg(h, p);
  const double m = p.m();
  const double an = std::pow(a, p.n);
  const double common = (p.theta_s - p.theta_r) * p.alpha * p.alpha * p.n * m;
  // d/dh [a^(n-1) (1+a^n)^-(m+1)] with da/dh = -alpha
  return -common * ((p.n - 1.0) * std::pow(a, p.n - 2.0) * std::pow(1.0 + an, -(m + 1.0)) -
                    p.n * (m + 1.0) * std::pow(a, 2.0 * p.n - 2.0) *
                        std::pow(1.0 + an, -(m + 2.0)));
}

}  // namespace agrohydro

#pragma once

// Closed forms for the open nearest-neighbour chain with the sink at the
// centre (odd L).

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "enaqt/bounds.hpp"
#include "enaqt/error.hpp"
#include "enaqt/superop.hpp"

namespace enaqt {

struct ChainSpectrum {
  Eigen::VectorXd energies;  ///< E_a = 2J cos(pi a/(L+1)), a = 1..L
  Eigen::MatrixXd overlaps;  ///< (k, a) -> <k|a> = sqrt(2/(L+1)) sin(pi a k/(L+1))
};

inline ChainSpectrum chain_spectrum(int L, double J = 1.0) {
  if (L < 1) throw InvalidSpec("chain needs L >= 1");
  ChainSpectrum c;
  c.energies.resize(L);
  c.overlaps.resize(L, L);
  const double norm = std::sqrt(2.0 / (L + 1));
  for (int a = 1; a <= L; ++a) {
    c.energies(a - 1) = 2.0 * J * std::cos(M_PI * a / (L + 1));
    for (int k = 1; k <= L; ++k) c.overlaps(k - 1, a - 1) = norm * std::sin(M_PI * a * k / (L + 1.0));
  }
  return c;
}

namespace detail {

inline void require_odd(int L) {
  if (L < 1 || L % 2 == 0)
    throw UnsupportedConfiguration("chain closed forms need odd L with a centred sink, got L=" +
                                   std::to_string(L));
}

inline double eta_coh_1d_formula(double L, const RateSet& r) {
  const double num = (r.gamma_s / L) * (L * r.gamma + (L + 1.0) * r.mu);
  const double den = 2.0 * r.mu * (r.gamma_s + 0.5 * (L + 1.0) * r.mu) + r.gamma * (r.gamma_s + L * r.mu);
  return num / den;
}

inline void require_rates(const RateSet& r) {
  r.validate();
  if (!(r.mu > 0.0)) throw InvalidSpec("chain bounds need mu > 0");
}

}  // namespace detail

/// Coherent bound of the chain; J drops out.
inline double eta_coh_1d(int L, const RateSet& rates) {
  detail::require_odd(L);
  detail::require_rates(rates);
  return detail::eta_coh_1d_formula(L, rates);
}

/// Chebyshev polynomial of the second kind by the three-term recurrence.
inline double chebyshev_u(int n, double x) {
  if (n < 0) throw InvalidSpec("Chebyshev degree must be non-negative");
  double u0 = 1.0, u1 = 2.0 * x;
  if (n == 0) return u0;
  for (int k = 1; k < n; ++k) {
    const double u2 = 2.0 * x * u1 - u0;
    u0 = u1;
    u1 = u2;
  }
  return u1;
}

/// det S_n(q) for the n x n tridiagonal matrix with 1 on the diagonal and -q/2 beside it.
inline double det_s(int n, double q) {
  if (n < 0) throw InvalidSpec("size must be non-negative");
  double d0 = 1.0, d1 = 1.0;  // D_0, D_1
  if (n == 0) return 1.0;
  for (int k = 1; k < n; ++k) {
    const double d2 = d1 - 0.25 * q * q * d0;
    d0 = d1;
    d1 = d2;
  }
  return d1;
}

enum class ResolventForm { Exact, SmallMu };

inline std::string to_string(ResolventForm f) {
  return f == ResolventForm::Exact ? "exact" : "small_mu";
}

/// <s|(mu + K)^-1|s> for the chain.
inline double chain_incoherent_resolvent(int L, const RateSet& r, ResolventForm form) {
  const double hop = 4.0 * r.J * r.J / (r.mu + r.gamma);
  const double a = r.mu + hop;
  if (form == ResolventForm::SmallMu) return 1.0 / (r.mu * L) + (double(L) * L - 1.0) / (6.0 * L * a);
  detail::require_odd(L);
  if (L == 1) return 1.0 / r.mu;
  const double q = hop / a;
  if (!(q < 1.0)) throw SolverError("q must be below 1 for mu > 0");
  // Determinants D_n = det S_n(q) through ratios r_n = D_n / D_{n-1}, kept in logs.
  const int m = (L - 1) / 2;
  double log_d = 0.0, log_dm = 0.0, ratio = 1.0, ratio_m = 1.0;
  for (int n = 2; n <= L; ++n) {
    ratio = 1.0 - 0.25 * q * q / ratio;
    log_d += std::log(ratio);
    if (n == m) {
      log_dm = log_d;
      ratio_m = ratio;
    }
  }
  if (m == 1) {
    log_dm = 0.0;
    ratio_m = 1.0;
  }
  const double g_m = 1.0 / ratio_m;                    // D_{m-1}/D_m
  const double g11 = 1.0 / ratio;                      // D_{L-1}/D_L
  const double g1l = std::exp((L - 1) * std::log(0.5 * q) - log_d);  // (q/2)^{L-1}/D_L
  const double num = std::pow(1.0 - 0.5 * q * g_m, 2);
  const double den = std::pow(1.0 - 0.5 * q * g11, 2) - 0.25 * q * q * g1l * g1l;
  return std::exp(2.0 * log_dm - log_d) / a * num / den;
}

/// Incoherent bound of the chain.
inline double eta_incoh_1d(int L, const RateSet& rates, ResolventForm form = ResolventForm::Exact) {
  detail::require_odd(L);
  detail::require_rates(rates);
  const double g = chain_incoherent_resolvent(L, rates, form);
  return rates.gamma_s / (rates.mu * L) / (1.0 + rates.gamma_s * g);
}

/// Root gamma0 of eta_coh_1d = eta_incoh_1d. The default SmallMu form is the
/// displayed optimal-dephasing equation, which is a closed formula and is
/// also evaluated for even L; the Exact form needs odd L.
inline std::optional<double> gamma0_equation(int L, double mu, double gamma_s, double J = 1.0,
                                             ResolventForm form = ResolventForm::SmallMu,
                                             const CrossingOptions& opt = {}) {
  if (L < 1) throw InvalidSpec("chain needs L >= 1");
  if (form == ResolventForm::Exact) detail::require_odd(L);
  const RateSet base{J, mu, gamma_s, 0.0};
  detail::require_rates(base);
  return find_crossing(
      [&](double g) {
        const RateSet r = base.with_gamma(g);
        const double incoh =
            r.gamma_s / (r.mu * L) / (1.0 + r.gamma_s * chain_incoherent_resolvent(L, r, form));
        return detail::eta_coh_1d_formula(L, r) - incoh;
      },
      opt);
}

/// Large-L, small-mu asymptote 5J/L - mu of the crossing.
inline double gamma0_asymptote(int L, double mu, double J = 1.0) {
  if (L < 1) throw InvalidSpec("chain needs L >= 1");
  return 5.0 * J / L - mu;
}

}  // namespace enaqt

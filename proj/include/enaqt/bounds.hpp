#pragma once

// Analytic upper bounds on the transfer efficiency.
//
//   eta_abs   = Gamma_s / (N mu + Gamma_s)
//   eta_coh   = 1 - (mu/N) <1| Omega^-1 |1>          (hopping eigenbasis)
//   eta_incoh = Gamma_s/(mu N) / (1 + Gamma_s <s|(mu + K)^-1|s>)
//
// Omega_ab = (mu + Gamma_s |<a|s>|^2) d_ab + gamma (d_ab - W_ab),
// W_ab = sum_k |<a|k>|^2 |<b|k>|^2, and
// K_mn = 2/(mu+gamma) (d_mn (J^2)_mm - J_mn^2).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "enaqt/error.hpp"
#include "enaqt/lattice.hpp"
#include "enaqt/spectral.hpp"
#include "enaqt/superop.hpp"

namespace enaqt {

struct AbsorptionLimit {
  double eta = 1.0;
  double tau_lower = 0.0;   ///< N / (N mu + Gamma_s)
  double size_limit = 0.0;  ///< sqrt(Gamma_s / mu)
  bool degenerate = false;  ///< mu = 0: no background loss, the limit is trivial
};

inline AbsorptionLimit absorption_limit(const RateSet& rates, int sites) {
  rates.validate();
  if (sites < 1) throw InvalidSpec("need at least one site");
  AbsorptionLimit a;
  const double n = sites;
  a.size_limit = rates.extraction_size_limit();
  if (rates.mu == 0.0) {
    a.degenerate = true;
    a.eta = 1.0;
    a.tau_lower = rates.gamma_s > 0.0 ? n / rates.gamma_s : std::numeric_limits<double>::infinity();
    return a;
  }
  a.eta = rates.gamma_s / (n * rates.mu + rates.gamma_s);
  a.tau_lower = n / (n * rates.mu + rates.gamma_s);
  return a;
}

inline double eta_abs(const RateSet& rates, int sites) {
  return absorption_limit(rates, sites).eta;
}

struct OmegaMatrix {
  Eigen::MatrixXd omega;
  Eigen::MatrixXd eigenbasis;  ///< columns |alpha>
  Eigen::VectorXd overlaps;    ///< |<alpha|s>|^2
  Eigen::MatrixXd w;           ///< doubly stochastic W
};

/// W_ab = sum_k |<a|k>|^2 |<b|k>|^2 for an orthonormal basis (columns).
inline Eigen::MatrixXd stochastic_matrix(const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd p = basis.cwiseAbs2();  // p(k, a) = |<k|a>|^2
  return p.transpose() * p;
}

inline OmegaMatrix omega_matrix(const Eigen::MatrixXd& basis, int sink, const RateSet& rates) {
  const Eigen::Index n = basis.rows();
  if (basis.cols() != n) throw InvalidSpec("eigenbasis must be square");
  if (sink < 0 || sink >= n) throw InvalidSpec("sink index out of range");
  OmegaMatrix o;
  o.eigenbasis = basis;
  o.overlaps = basis.row(sink).transpose().cwiseAbs2();
  o.w = stochastic_matrix(basis);
  o.omega = -rates.gamma * o.w;
  o.omega.diagonal().array() += rates.mu + rates.gamma + rates.gamma_s * o.overlaps.array();
  return o;
}

inline double eta_coh(const Eigen::MatrixXd& basis, int sink, const RateSet& rates) {
  rates.validate();
  const Eigen::Index n = basis.rows();
  const OmegaMatrix o = omega_matrix(basis, sink, rates);
  Eigen::LLT<Eigen::MatrixXd> llt(o.omega);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  if (llt.info() != Eigen::Success)
    throw NonDecayingSubspace("Omega is singular: dark states without loss or dephasing");
  const Eigen::VectorXd x = llt.solve(ones);
  if (!x.allFinite()) throw NonDecayingSubspace("Omega is numerically singular");
  return 1.0 - rates.mu / double(n) * ones.dot(x);
}

/// K_mn = 2/(mu+gamma) (d_mn (J^2)_mm - J_mn^2); positive semidefinite with K e = 0.
inline Eigen::MatrixXd k_matrix(const HoppingMatrix& hopping, const RateSet& rates) {
  const double denom = rates.mu + rates.gamma;
  if (!(denom > 0.0)) throw InvalidSpec("K needs mu + gamma > 0");
  Eigen::MatrixXd k = -hopping.cwiseAbs2();
  k.diagonal() += (hopping * hopping).diagonal();
  return (2.0 / denom) * k;
}

/// <s|(mu + K)^-1|s>.
inline double incoherent_resolvent(const HoppingMatrix& hopping, int sink, const RateSet& rates) {
  if (!(rates.mu > 0.0)) throw InvalidSpec("incoherent bound needs mu > 0");
  Eigen::MatrixXd a = k_matrix(hopping, rates);
  a.diagonal().array() += rates.mu;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw SolverError("mu + K is not positive definite");
  const Eigen::VectorXd e = Eigen::VectorXd::Unit(hopping.rows(), sink);
  return e.dot(llt.solve(e));
}

/// Sherman-Morrison form of the incoherent bound.
inline double eta_incoh(const HoppingMatrix& hopping, int sink, const RateSet& rates) {
  rates.validate();
  const double n = double(hopping.rows());
  const double g = incoherent_resolvent(hopping, sink, rates);
  return rates.gamma_s / (rates.mu * n) / (1.0 + rates.gamma_s * g);
}

/// D = Gamma_s |s><s| + mu + K.
inline Eigen::MatrixXd d_matrix(const HoppingMatrix& hopping, int sink, const RateSet& rates) {
  Eigen::MatrixXd d = k_matrix(hopping, rates);
  d.diagonal().array() += rates.mu;
  d(sink, sink) += rates.gamma_s;
  return d;
}

/// Incoherent bound from a dense inverse of D: Gamma_s/(mu N) (1 - Gamma_s (D^-1)_ss).
inline double eta_incoh_direct(const HoppingMatrix& hopping, int sink, const RateSet& rates) {
  rates.validate();
  if (!(rates.mu > 0.0)) throw InvalidSpec("incoherent bound needs mu > 0");
  const Eigen::MatrixXd dinv = d_matrix(hopping, sink, rates).inverse();
  const double n = double(hopping.rows());
  return rates.gamma_s / (rates.mu * n) * (1.0 - rates.gamma_s * dinv(sink, sink));
}

// ---------------------------------------------------------------------------
// Crossing of two monotone curves in gamma.

struct CrossingOptions {
  double gamma_min = 1e-8;
  double gamma_max = 1e3;
  int points_per_decade = 10;
  double abs_tol = 1e-6;
};

/// Root of f on {0} u [gamma_min, gamma_max], found by a grid scan and bisection.
/// Returns nullopt without a sign change, or when f(0) >= 0 already.
inline std::optional<double> find_crossing(const std::function<double(double)>& f,
                                           const CrossingOptions& opt = {}) {
  std::vector<double> grid{0.0};
  const double lo = std::log10(opt.gamma_min), hi = std::log10(opt.gamma_max);
  const int steps = std::max(2, int(std::ceil((hi - lo) * opt.points_per_decade)));
  for (int k = 0; k <= steps; ++k) grid.push_back(std::pow(10.0, lo + (hi - lo) * k / steps));
  std::vector<double> vals;
  vals.reserve(grid.size());
  for (double g : grid) vals.push_back(f(g));

  std::vector<std::size_t> changes;
  for (std::size_t k = 1; k < grid.size(); ++k)
    if ((vals[k - 1] < 0.0) != (vals[k] < 0.0)) changes.push_back(k);
  if (changes.empty()) return std::nullopt;
  if (changes.size() > 1) {
    std::string msg = "several sign changes at gamma ~";
    for (auto k : changes) msg += " " + std::to_string(grid[k]);
    throw BracketError(msg);
  }
  std::size_t k = changes.front();
  if (vals[k - 1] >= 0.0) return std::nullopt;  // curve starts above: no positive crossing
  double a = grid[k - 1], b = grid[k];
  double fa = vals[k - 1];
  while (b - a > opt.abs_tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------

struct BoundReport {
  double eta_abs = 1.0;
  double eta_coh = 1.0;
  double eta_incoh = 1.0;
  double eta_min_estimate = 1.0;
  std::optional<double> gamma0;
  double tau_lower = 0.0;
  double size_limit = 0.0;
  std::vector<std::string> flags;
};

/// Bound machinery for one hopping matrix and sink; the eigenbasis is computed once.
class BoundCalculator {
 public:
  BoundCalculator(HoppingMatrix hopping, int sink)
      : hopping_(std::move(hopping)), sink_(sink), basis_(hopping_, sink) {}

  BoundCalculator(const LatticeSpec& spec, double J = 1.0)
      : BoundCalculator(build_hopping(spec, J), spec.sink_index()) {}

  [[nodiscard]] int sites() const { return int(hopping_.rows()); }
  [[nodiscard]] int sink() const { return sink_; }
  [[nodiscard]] const HoppingMatrix& hopping() const { return hopping_; }
  [[nodiscard]] const SinkAlignedBasis& basis() const { return basis_; }

  [[nodiscard]] OmegaMatrix omega(const RateSet& rates) const {
    return omega_matrix(basis_.vectors(), sink_, rates);
  }
  [[nodiscard]] double eta_abs(const RateSet& rates) const {
    return absorption_limit(rates, sites()).eta;
  }
  [[nodiscard]] double eta_coh(const RateSet& rates) const {
    if (!(rates.mu > 0.0)) throw InvalidSpec("coherent bound needs mu > 0");
    return enaqt::eta_coh(basis_.vectors(), sink_, rates);
  }
  [[nodiscard]] double eta_incoh(const RateSet& rates) const {
    return enaqt::eta_incoh(hopping_, sink_, rates);
  }
  [[nodiscard]] double eta_incoh_direct(const RateSet& rates) const {
    return enaqt::eta_incoh_direct(hopping_, sink_, rates);
  }

  /// Crossing gamma0 of eta_coh (rising) and eta_incoh (falling); rates.gamma is ignored.
  [[nodiscard]] std::optional<double> find_gamma0(const RateSet& rates,
                                                  const CrossingOptions& opt = {}) const {
    if (!(rates.mu > 0.0)) throw InvalidSpec("gamma0 needs mu > 0");
    return find_crossing(
        [&](double g) {
          const RateSet r = rates.with_gamma(g);
          return eta_coh(r) - eta_incoh(r);
        },
        opt);
  }

  [[nodiscard]] BoundReport report(const RateSet& rates, bool with_gamma0 = true,
                                   const CrossingOptions& opt = {}) const {
    if (!(rates.mu > 0.0)) throw InvalidSpec("bounds need mu > 0");
    BoundReport b;
    const auto lim = absorption_limit(rates, sites());
    b.eta_abs = lim.eta;
    b.tau_lower = lim.tau_lower;
    b.size_limit = lim.size_limit;
    b.eta_coh = eta_coh(rates);
    b.eta_incoh = eta_incoh(rates);
    b.eta_min_estimate = std::min(b.eta_coh, b.eta_incoh);
    if (with_gamma0) {
      try {
        b.gamma0 = find_gamma0(rates, opt);
        if (!b.gamma0) b.flags.push_back("no_enaqt_crossing");
      } catch (const BracketError& e) {
        b.flags.push_back(std::string("gamma0_bracket_error: ") + e.what());
      }
    }
    return b;
  }

 private:
  HoppingMatrix hopping_;
  int sink_;
  SinkAlignedBasis basis_;
};

inline double eta_coh(const LatticeSpec& spec, const RateSet& rates) {
  return BoundCalculator(spec, rates.J).eta_coh(rates);
}
inline double eta_incoh(const LatticeSpec& spec, const RateSet& rates) {
  return eta_incoh(build_hopping(spec, rates.J), spec.sink_index(), rates);
}
inline BoundReport min_estimate(const LatticeSpec& spec, const RateSet& rates,
                                bool with_gamma0 = true) {
  return BoundCalculator(spec, rates.J).report(rates, with_gamma0);
}
inline std::optional<double> find_gamma0(const LatticeSpec& spec, const RateSet& rates,
                                         const CrossingOptions& opt = {}) {
  return BoundCalculator(spec, rates.J).find_gamma0(rates, opt);
}

}  // namespace enaqt

#pragma once

// Green's-function solver: efficiency and transfer time from resolvents of
// the vectorized generator, plus the dark-state census of H_nh.
//
// With A = iH = G + i H0 the time integrals of the sink population become
//
//   eta = Gamma_s <pi_s| A^-1 |rho0>
//   tau = (Gamma_s / eta) <pi_s| A^-2 |rho0>
//   lost = mu Tr(devec(A^-1 rho0))

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "enaqt/error.hpp"
#include "enaqt/lattice.hpp"
#include "enaqt/spectral.hpp"
#include "enaqt/superop.hpp"

namespace enaqt {

enum class Method { GF, MCWF };

inline std::string to_string(Method m) { return m == Method::GF ? "gf" : "mcwf"; }

struct TransportResult {
  double eta = 0.0;
  double tau = 0.0;
  double lost_fraction = 0.0;
  Method method = Method::GF;
  double eta_se = 0.0;  ///< standard error (MCWF only)
  double tau_se = 0.0;
  std::map<std::string, double> metadata;
  std::vector<std::string> flags;
};

enum class LinearSolver { Auto, Cholesky, ComplexLU };

struct GfOptions {
  LinearSolver solver = LinearSolver::Auto;
  bool compute_tau = true;
  double residual_tol = 1e-10;
  double max_condition = 1e10;  ///< Auto uses the real reduction below this estimate
  double min_rcond = 1e-14;
};

namespace detail {

// M = G + H0 G^-1 H0 written out from the Kronecker structure of H0.
//   (H0 D H0)[(n,m),(k,l)] = d_ml (J D_m J)[n,k] + d_nk (J D_n J)[m,l]
//                           - J[n,k] J[m,l] (d_km + d_nl)
// where D_m = diag_p(d_{pm}) and d = 1/g.
inline Eigen::MatrixXd reduced_spd_matrix(const Superoperator& op) {
  const Eigen::Index n = op.sites();
  const Eigen::Index n2 = n * n;
  const Eigen::MatrixXd& J = op.hopping();
  const Eigen::VectorXd d = op.g_diagonal().cwiseInverse();
  auto dv = [&](Eigen::Index p, Eigen::Index q) { return d(p + q * n); };

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n2, n2);
  // Column (k, l), row (n, m).
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index k = 0; k < n; ++k) {
      double* col = M.col(k + l * n).data();
      for (Eigen::Index m = 0; m < n; ++m) {
        const double jml = J(m, l);
        if (jml == 0.0) continue;
        for (Eigen::Index nn = 0; nn < n; ++nn) {
          const double jnk = J(nn, k);
          if (jnk != 0.0) col[nn + m * n] -= jnk * jml * (dv(k, m) + dv(nn, l));
        }
      }
    }
  // Diagonal-block terms.
  Eigen::MatrixXd T(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    // (J D_m J)[n,k] with D_m = diag_p d(p, m); enters where l = m.
    T.noalias() = J * d.segment(m * n, n).asDiagonal() * J;
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index nn = 0; nn < n; ++nn) M(nn + m * n, k + m * n) += T(nn, k);
  }
  Eigen::VectorXd dn(n);
  for (Eigen::Index nn = 0; nn < n; ++nn) {
    // (J D'_n J)[m,l] with D'_n = diag_q d(n, q); enters where k = n.
    for (Eigen::Index q = 0; q < n; ++q) dn(q) = dv(nn, q);
    T.noalias() = J * dn.asDiagonal() * J;
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index m = 0; m < n; ++m) M(nn + m * n, nn + l * n) += T(m, l);
  }
  M.diagonal() += op.g_diagonal();
  return M;
}

inline double generator_scale(const Superoperator& op) {
  return 2.0 * op.hopping().cwiseAbs().rowwise().sum().maxCoeff();
}

// Solves (G + i H0) x = b for a batch of right-hand sides.
class ResolventSolver {
 public:
  ResolventSolver(const Superoperator& op, const GfOptions& opt) : op_(op), opt_(opt) {
    const double gmin = op.g_diagonal().minCoeff();
    const double gmax = op.g_diagonal().maxCoeff();
    const double h = generator_scale(op);
    bool spd = false;
    if (opt.solver == LinearSolver::Cholesky) {
      if (!(gmin > 0.0)) throw SolverError("real reduction needs mu > 0");
      spd = true;
    } else if (opt.solver == LinearSolver::Auto && gmin > 0.0) {
      const double kappa = (gmax + h * h / gmin) / gmin;
      spd = kappa < opt.max_condition;
    }
    if (spd) {
      llt_.compute(reduced_spd_matrix(op));
      if (llt_.info() == Eigen::Success) {
        use_llt_ = true;
        return;
      }
      if (opt.solver == LinearSolver::Cholesky) throw SolverError("Cholesky factorization failed");
    }
    factor_lu();
  }

  [[nodiscard]] std::string name() const { return use_llt_ ? "cholesky" : "complex_lu"; }
  [[nodiscard]] double rcond() const { return rcond_; }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) {
    Eigen::VectorXcd x = raw_solve(b);
    double res = residual(x, b);
    if (use_llt_ && opt_.solver == LinearSolver::Auto && !(res < opt_.residual_tol)) {
      use_llt_ = false;
      factor_lu();
      x = raw_solve(b);
      res = residual(x, b);
    }
    max_residual_ = std::max(max_residual_, res);
    return x;
  }

  [[nodiscard]] double max_residual() const { return max_residual_; }

 private:
  Eigen::VectorXcd raw_solve(const Eigen::VectorXcd& b) const {
    if (!use_llt_) return lu_.solve(b);
    const Eigen::VectorXd& g = op_.g_diagonal();
    const Eigen::VectorXd br = b.real();
    const Eigen::VectorXd bi = b.imag();
    Eigen::VectorXd rhs = br + op_.h0() * bi.cwiseQuotient(g);
    Eigen::VectorXd u = llt_.solve(rhs);
    Eigen::VectorXd v = (bi - op_.h0() * u).cwiseQuotient(g);
    Eigen::VectorXcd x(u.size());
    x.real() = u;
    x.imag() = v;
    return x;
  }

  double residual(const Eigen::VectorXcd& x, const Eigen::VectorXcd& b) const {
    const double nb = b.norm();
    const double r = (op_.apply_resolvent_operator(x) - b).norm();
    return nb > 0 ? r / nb : r;
  }

  void factor_lu() {
    const std::complex<double> i(0.0, 1.0);
    Eigen::MatrixXcd A = op_.h0_dense().cast<std::complex<double>>() * i;
    A.diagonal() += op_.g_diagonal().cast<std::complex<double>>();
    lu_.compute(A);
    rcond_ = lu_.rcond();
    if (!(rcond_ > opt_.min_rcond))
      throw NonDecayingSubspace("generator is singular (rcond " + std::to_string(rcond_) +
                                "): a non-decaying subspace traps the excitation");
  }

  const Superoperator& op_;
  GfOptions opt_;
  bool use_llt_ = false;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  double rcond_ = 1.0;
  double max_residual_ = 0.0;
};

}  // namespace detail

/// Efficiency, transfer time and lost fraction by direct resolvent solves.
inline TransportResult efficiency_gf(const Superoperator& op, const GfOptions& opt = {}) {
  const RateSet& r = op.rates();
  if (r.mu == 0.0 && r.gamma == 0.0) {
    SinkAlignedBasis basis(op.hopping(), op.sink());
    if (basis.dark_count() > 0)
      throw NonDecayingSubspace("mu = gamma = 0 with " + std::to_string(basis.dark_count()) +
                                " dark states: the excitation is partly trapped forever");
  }
  if (r.gamma_s == 0.0 && r.mu == 0.0) throw NonDecayingSubspace("no loss channel at all");

  detail::ResolventSolver solver(op, opt);
  const Eigen::Index s = op.slot(op.sink(), op.sink());
  const Eigen::VectorXcd x = solver.solve(op.rho0().cast<std::complex<double>>());

  TransportResult out;
  out.method = Method::GF;
  out.eta = r.gamma_s * x(s).real();
  double trace = 0.0;
  for (int k = 0; k < op.sites(); ++k) trace += x(op.slot(k, k)).real();
  out.lost_fraction = r.mu * trace;
  if (opt.compute_tau) {
    const Eigen::VectorXcd y = solver.solve(x);
    out.tau = out.eta > 0.0 ? r.gamma_s * y(s).real() / out.eta
                            : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.tau = std::numeric_limits<double>::quiet_NaN();
  }
  out.metadata["residual"] = solver.max_residual();
  out.metadata["unknowns"] = double(op.dim());
  out.metadata["sink_imag"] = std::abs(x(s).imag());
  out.flags.push_back("solver=" + solver.name());
  return out;
}

inline TransportResult efficiency_gf(const LatticeSpec& spec, const RateSet& rates,
                                     const GfOptions& opt = {}) {
  return efficiency_gf(build_generator(spec, rates), opt);
}

/// tau = -d ln(eta)/d mu by central differences with absolute step h.
inline double tau_via_mu_derivative(const HoppingMatrix& hopping, int sink, const RateSet& rates,
                                    double h = -1.0, const GfOptions& opt = {}) {
  if (!(rates.mu > 0.0)) throw InvalidSpec("derivative route needs mu > 0");
  if (h < 0.0) h = 1e-4 * rates.mu;
  if (!(h > rates.mu * 1e-12) || !(rates.mu - h > 0.0))
    throw SolverError("finite-difference step underflow or larger than mu");
  GfOptions o = opt;
  o.compute_tau = false;
  const double ep = efficiency_gf(build_generator(hopping, sink, rates.with_mu(rates.mu + h)), o).eta;
  const double em = efficiency_gf(build_generator(hopping, sink, rates.with_mu(rates.mu - h)), o).eta;
  if (!(ep > 0.0) || !(em > 0.0)) throw SolverError("efficiency vanishes; ln(eta) undefined");
  return -(std::log(ep) - std::log(em)) / (2.0 * h);
}

inline double tau_via_mu_derivative(const LatticeSpec& spec, const RateSet& rates, double h = -1.0,
                                    const GfOptions& opt = {}) {
  return tau_via_mu_derivative(build_hopping(spec, rates.J), spec.sink_index(), rates, h, opt);
}

// ---------------------------------------------------------------------------
// Dark-state census of H_nh = J - i Gamma_s |s><s|.

enum class CensusMethod { Deflated, Direct };

struct SpectrumCensus {
  std::vector<std::complex<double>> eigenvalues;  ///< sorted by |Im| descending
  int dark_count = 0;
  double dark_threshold = 0.0;
  int sites = 0;

  [[nodiscard]] double dark_fraction() const {
    return sites > 0 ? double(dark_count) / sites : 0.0;
  }
};

inline double default_dark_threshold(double gamma_s) {
  return gamma_s > 0.0 ? 1e-10 * gamma_s : 1e-10;
}

inline SpectrumCensus dark_census(const HoppingMatrix& hopping, int sink, double gamma_s,
                                  std::optional<double> threshold = std::nullopt,
                                  CensusMethod method = CensusMethod::Deflated) {
  if (gamma_s < 0.0) throw InvalidSpec("gamma_s must be non-negative");
  const Eigen::Index n = hopping.rows();
  SpectrumCensus c;
  c.sites = int(n);
  c.dark_threshold = threshold.value_or(default_dark_threshold(gamma_s));
  const std::complex<double> i(0.0, 1.0);

  if (method == CensusMethod::Direct) {
    Eigen::MatrixXcd h = hopping.cast<std::complex<double>>();
    h(sink, sink) -= i * gamma_s;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, false);
    if (es.info() != Eigen::Success) throw SolverError("complex eigensolver did not converge");
    for (Eigen::Index k = 0; k < n; ++k) c.eigenvalues.push_back(es.eigenvalues()(k));
  } else {
    SinkAlignedBasis basis(hopping, sink);
    const auto bright = basis.bright_indices();
    for (Eigen::Index a : basis.dark_indices()) c.eigenvalues.emplace_back(basis.values()(a), 0.0);
    const Eigen::Index nb = Eigen::Index(bright.size());
    if (nb > 0) {
      Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(nb, nb);
      Eigen::VectorXd amp(nb);
      for (Eigen::Index p = 0; p < nb; ++p) amp(p) = basis.vectors()(sink, bright[p]);
      for (Eigen::Index p = 0; p < nb; ++p) {
        b(p, p) = basis.values()(bright[p]);
        for (Eigen::Index q = 0; q < nb; ++q) b(p, q) -= i * gamma_s * amp(p) * amp(q);
      }
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(b, false);
      if (es.info() != Eigen::Success) throw SolverError("complex eigensolver did not converge");
      for (Eigen::Index k = 0; k < nb; ++k) c.eigenvalues.push_back(es.eigenvalues()(k));
    }
  }
  std::stable_sort(c.eigenvalues.begin(), c.eigenvalues.end(),
                   [](auto a, auto b) { return std::abs(a.imag()) > std::abs(b.imag()); });
  for (auto e : c.eigenvalues) c.dark_count += std::abs(e.imag()) < c.dark_threshold ? 1 : 0;
  return c;
}

inline SpectrumCensus dark_census(const LatticeSpec& spec, double gamma_s,
                                  std::optional<double> threshold = std::nullopt,
                                  CensusMethod method = CensusMethod::Deflated) {
  return dark_census(build_hopping(spec), spec.sink_index(), gamma_s, threshold, method);
}

/// Number of hopping eigenvectors with vanishing sink overlap, counted in the
/// sink-aligned basis so the result does not depend on degenerate mixing.
inline int dark_count_from_hopping(const HoppingMatrix& hopping, int sink,
                                   double overlap_tol = 1e-12) {
  SpectralOptions o;
  o.overlap_tol = overlap_tol;
  return SinkAlignedBasis(hopping, sink, o).dark_count();
}

}  // namespace enaqt

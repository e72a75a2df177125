#pragma once

// Vectorized single-particle generator.
//
// The single-particle density matrix p (N x N) is column-stacked into an
// N^2 vector, slot(n, m) = n + m*N, so that vec(U p V) = (V^T kron U) vec(p).
// The master equation then reads d/dt vec(p) = -i (H0 - i G) vec(p) with
//
//   H0 = 1 kron J - J kron 1
//   G  = gamma (1 - Pi) + mu 1 + Gamma_s/2 (1 kron |s><s| + |s><s| kron 1)
//
// where Pi projects onto the population slots (k, k).

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "enaqt/error.hpp"
#include "enaqt/lattice.hpp"

namespace enaqt {

/// Rates of the transport problem, all in the same energy unit as J.
struct RateSet {
  double J = 1.0;
  double mu = 0.0;       ///< uniform background decay
  double gamma_s = 0.0;  ///< sink extraction
  double gamma = 0.0;    ///< dephasing (coherence decay rate)

  void validate() const {
    if (!(J > 0.0)) throw InvalidSpec("hopping J must be positive");
    if (!(mu >= 0.0) || !(gamma_s >= 0.0) || !(gamma >= 0.0))
      throw InvalidSpec("rates mu, gamma_s, gamma must be non-negative and finite");
    if (!std::isfinite(mu) || !std::isfinite(gamma_s) || !std::isfinite(gamma))
      throw InvalidSpec("rates must be finite");
  }

  /// Coherent absorption length J/mu (infinite without background loss).
  [[nodiscard]] double absorption_length() const {
    return mu > 0.0 ? J / mu : std::numeric_limits<double>::infinity();
  }
  /// Strong-dephasing absorption length J^2 / ((gamma + mu) mu).
  [[nodiscard]] double incoherent_absorption_length() const {
    return mu > 0.0 ? J * J / ((gamma + mu) * mu) : std::numeric_limits<double>::infinity();
  }
  /// Linear size sqrt(Gamma_s/mu) beyond which extraction becomes inefficient.
  [[nodiscard]] double extraction_size_limit() const {
    return mu > 0.0 ? std::sqrt(gamma_s / mu) : std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] RateSet with_gamma(double g) const {
    RateSet r = *this;
    r.gamma = g;
    return r;
  }
  [[nodiscard]] RateSet with_mu(double m) const {
    RateSet r = *this;
    r.mu = m;
    return r;
  }
};

/// Column-stacking vectorization.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vectorize(
    const Eigen::MatrixBase<Derived>& m) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = m;
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>(
      dense.data(), dense.size());
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> devectorize(
    const Eigen::MatrixBase<Derived>& v, Eigen::Index rows) {
  if (rows <= 0 || v.size() % rows != 0)
    throw InvalidSpec("vector length is not a multiple of the row count");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> dense = v;
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>>(
      dense.data(), rows, v.size() / rows);
}

/// Dense Kronecker product A kron B.
template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                                        a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// The doubled-space generator H = H0 - iG and its projector structures.
class Superoperator {
 public:
  Superoperator(HoppingMatrix hopping, int sink, RateSet rates)
      : hopping_(std::move(hopping)), sink_(sink), rates_(rates) {
    rates_.validate();
    const Eigen::Index n = hopping_.rows();
    if (n < 1 || hopping_.cols() != n) throw InvalidSpec("hopping matrix must be square");
    if (sink < 0 || sink >= n) throw InvalidSpec("sink index out of range");
    if (!hopping_.isApprox(hopping_.transpose(), 0.0) && (hopping_ - hopping_.transpose()).norm() > 0)
      throw InvalidSpec("hopping matrix must be symmetric");
    build();
  }

  [[nodiscard]] int sites() const { return int(hopping_.rows()); }
  [[nodiscard]] Eigen::Index dim() const { return hopping_.rows() * hopping_.rows(); }
  [[nodiscard]] int sink() const { return sink_; }
  [[nodiscard]] const RateSet& rates() const { return rates_; }
  [[nodiscard]] const HoppingMatrix& hopping() const { return hopping_; }

  [[nodiscard]] Eigen::Index slot(Eigen::Index n, Eigen::Index m) const {
    return n + m * hopping_.rows();
  }

  /// H0 = 1 kron J - J kron 1 (real symmetric, stored sparse).
  [[nodiscard]] const Eigen::SparseMatrix<double>& h0() const { return h0_; }
  /// Diagonal of G; G has no off-diagonal entries.
  [[nodiscard]] const Eigen::VectorXd& g_diagonal() const { return g_; }
  /// Diagonal of Pi (1 on population slots).
  [[nodiscard]] const Eigen::VectorXd& pi_diagonal() const { return pi_; }
  /// vec(|s><s|).
  [[nodiscard]] const Eigen::VectorXd& pi_s() const { return pi_s_; }
  /// vec(1/N): the uniformly distributed initial excitation.
  [[nodiscard]] const Eigen::VectorXd& rho0() const { return rho0_; }
  /// vec(1), used for traces: Tr(p) = <vec(1)|vec(p)>.
  [[nodiscard]] const Eigen::VectorXd& identity_vec() const { return id_; }

  [[nodiscard]] Eigen::MatrixXd h0_dense() const {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(sites(), sites());
    return kron(one, hopping_) - kron(hopping_, one);
  }
  [[nodiscard]] Eigen::MatrixXd g_dense() const { return g_.asDiagonal(); }

  /// Right-hand side of the master equation: -i (H0 - iG) vec(p).
  [[nodiscard]] Eigen::VectorXcd apply(const Eigen::VectorXcd& p) const {
    const std::complex<double> i(0.0, 1.0);
    return -i * (h0_ * p) - (g_.cast<std::complex<double>>().array() * p.array()).matrix();
  }

  /// A = iH = G + i H0 applied to x (the operator inverted by the Green's-function solver).
  [[nodiscard]] Eigen::VectorXcd apply_resolvent_operator(const Eigen::VectorXcd& x) const {
    const std::complex<double> i(0.0, 1.0);
    return (g_.cast<std::complex<double>>().array() * x.array()).matrix() + i * (h0_ * x);
  }

 private:
  void build() {
    const Eigen::Index n = hopping_.rows();
    const Eigen::Index n2 = n * n;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index m = 0; m < n; ++m) {
      for (Eigen::Index k = 0; k < n; ++k) {
        // (1 kron J): slot(k', m) <- J(k', k) p(k, m)
        // (J kron 1): slot(k, m') <- J(m', m) p(k, m)   (J symmetric)
        const Eigen::Index col = slot(k, m);
        for (Eigen::Index r = 0; r < n; ++r) {
          if (hopping_(r, k) != 0.0) trip.emplace_back(slot(r, m), col, hopping_(r, k));
          if (hopping_(r, m) != 0.0) trip.emplace_back(slot(k, r), col, -hopping_(r, m));
        }
      }
    }
    h0_.resize(n2, n2);
    h0_.setFromTriplets(trip.begin(), trip.end());

    g_.resize(n2);
    pi_.setZero(n2);
    pi_s_.setZero(n2);
    rho0_.setZero(n2);
    id_.setZero(n2);
    for (Eigen::Index m = 0; m < n; ++m) {
      for (Eigen::Index k = 0; k < n; ++k) {
        double g = rates_.mu;
        if (k != m) g += rates_.gamma;
        if (k == sink_) g += 0.5 * rates_.gamma_s;
        if (m == sink_) g += 0.5 * rates_.gamma_s;
        g_(slot(k, m)) = g;
      }
      pi_(slot(m, m)) = 1.0;
      id_(slot(m, m)) = 1.0;
      rho0_(slot(m, m)) = 1.0 / double(n);
    }
    pi_s_(slot(sink_, sink_)) = 1.0;
  }

  HoppingMatrix hopping_;
  int sink_;
  RateSet rates_;
  Eigen::SparseMatrix<double> h0_;
  Eigen::VectorXd g_, pi_, pi_s_, rho0_, id_;
};

inline Superoperator build_generator(const HoppingMatrix& hopping, int sink, const RateSet& rates) {
  return Superoperator(hopping, sink, rates);
}

inline Superoperator build_generator(const LatticeSpec& spec, const RateSet& rates) {
  rates.validate();
  return Superoperator(build_hopping(spec, rates.J), spec.sink_index(), rates);
}

/// vec(1/N): one excitation spread uniformly over all N sites.
inline Eigen::VectorXd initial_state(int sites) {
  if (sites < 1) throw InvalidSpec("need at least one site");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(Eigen::Index(sites) * sites);
  for (int k = 0; k < sites; ++k) v(k + Eigen::Index(k) * sites) = 1.0 / sites;
  return v;
}

inline Eigen::VectorXd initial_state(const LatticeSpec& spec) {
  validate(spec);
  return initial_state(spec.site_count());
}

}  // namespace enaqt

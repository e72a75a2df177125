#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "enaqt/superop.hpp"

using namespace enaqt;
using cd = std::complex<double>;

namespace {

// Right-hand side of the single-particle master equation, evaluated entrywise.
Eigen::MatrixXcd master_rhs(const Eigen::MatrixXd& J, int s, const RateSet& r,
                            const Eigen::MatrixXcd& p) {
  const cd i(0, 1);
  const Eigen::Index n = J.rows();
  Eigen::MatrixXcd Jc = J.cast<cd>();
  Eigen::MatrixXcd out = -i * (Jc * p - p * Jc);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a != b) out(a, b) -= r.gamma * p(a, b);
      out(a, b) -= r.mu * p(a, b);
      double sinkterm = 0.0;
      if (a == s) sinkterm += 0.5 * r.gamma_s;
      if (b == s) sinkterm += 0.5 * r.gamma_s;
      out(a, b) -= sinkterm * p(a, b);
    }
  return out;
}

}  // namespace

TEST(Superop, VectorizeColumnStacking) {
  Eigen::Matrix2d m;
  m << 1, 2, 3, 4;
  const Eigen::VectorXd v = vectorize(m);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v(0), 1);
  EXPECT_EQ(v(1), 3);
  EXPECT_EQ(v(2), 2);
  EXPECT_EQ(v(3), 4);
}

TEST(Superop, DevectorizeRoundTrip) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(5, 5);
  EXPECT_EQ(devectorize(vectorize(m), 5), m);
  EXPECT_THROW(devectorize(Eigen::VectorXd::Zero(7), 3), InvalidSpec);
}

TEST(Superop, KroneckerVectorizationIdentity) {
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXcd u = Eigen::MatrixXcd::Random(3, 3), p = Eigen::MatrixXcd::Random(3, 3),
                           v = Eigen::MatrixXcd::Random(3, 3);
    const Eigen::VectorXcd lhs = vectorize(u * p * v);
    const Eigen::VectorXcd rhs = kron(v.transpose(), u) * vectorize(p);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Superop, PureDecayOnTwoSites) {
  RateSet r{1.0, 1.0, 0.0, 0.0};
  const auto op = build_generator(LatticeSpec::chain(2), r);
  const Eigen::VectorXcd p = op.rho0().cast<cd>();
  const Eigen::VectorXcd d = op.apply(p);
  EXPECT_LT((d + r.mu * p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Superop, MatchesMasterEquationEntrywise) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (auto spec : {LatticeSpec::chain(3), LatticeSpec::chain(4, HoppingModel::Dipolar),
                    LatticeSpec::square(3)}) {
    RateSet r{1.0, u(rng), u(rng), u(rng)};
    const auto op = build_generator(spec, r);
    const int n = op.sites();
    const Eigen::MatrixXcd p = Eigen::MatrixXcd::Random(n, n);
    const Eigen::MatrixXcd expect = master_rhs(op.hopping(), op.sink(), r, p);
    const Eigen::MatrixXcd got = devectorize(op.apply(vectorize(p)), n);
    EXPECT_LT((got - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Superop, SparseH0MatchesKroneckerForm) {
  const auto op = build_generator(LatticeSpec::square(3), RateSet{1.0, 0.1, 0.5, 0.2});
  const Eigen::MatrixXd sparse = Eigen::MatrixXd(op.h0());
  EXPECT_EQ((sparse - op.h0_dense()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Superop, SinkSlotAndDiagonalG) {
  RateSet r{1.0, 0.3, 0.7, 1.9};
  const auto op = build_generator(LatticeSpec::square(3), r);
  const auto s = op.slot(op.sink(), op.sink());
  EXPECT_DOUBLE_EQ(op.g_diagonal()(s), r.mu + r.gamma_s);
  EXPECT_DOUBLE_EQ(op.g_diagonal()(op.slot(0, 0)), r.mu);
  EXPECT_DOUBLE_EQ(op.g_diagonal()(op.slot(0, 1)), r.mu + r.gamma);
  EXPECT_DOUBLE_EQ(op.g_diagonal()(op.slot(op.sink(), 1)), r.mu + r.gamma + 0.5 * r.gamma_s);
  EXPECT_GE(op.g_diagonal().minCoeff(), r.mu);
}

TEST(Superop, PiIsProjector) {
  const auto op = build_generator(LatticeSpec::chain(4), RateSet{1.0, 0.1, 1.0, 0.1});
  const Eigen::VectorXd pi = op.pi_diagonal();
  EXPECT_EQ(pi.cwiseProduct(pi), pi);
  EXPECT_EQ(pi.sum(), 4.0);
}

TEST(Superop, InitialState) {
  const Eigen::VectorXd v = initial_state(2);
  EXPECT_EQ(v, Eigen::Vector4d(0.5, 0, 0, 0.5));
  const auto op = build_generator(LatticeSpec::square(5), RateSet{1.0, 0.01, 1.0, 0.3});
  EXPECT_LT((op.h0() * op.rho0()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(initial_state(LatticeSpec::square(5)), op.rho0());
  const Eigen::VectorXd off = (Eigen::VectorXd::Ones(op.dim()) - op.pi_diagonal()).cwiseProduct(op.rho0());
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Superop, GActsOnInitialState) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 5; ++t) {
    RateSet r{1.0, u(rng), u(rng), u(rng)};
    const auto op = build_generator(LatticeSpec::square(5), r);
    const Eigen::VectorXd lhs = op.g_diagonal().cwiseProduct(op.rho0());
    const Eigen::VectorXd rhs = r.mu * op.rho0() + (r.gamma_s / op.sites()) * op.pi_s();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Superop, TraceConservedWithoutLoss) {
  RateSet r{1.0, 0.0, 0.0, 0.8};
  const auto op = build_generator(LatticeSpec::square(3), r);
  const Eigen::MatrixXcd p = Eigen::MatrixXcd::Random(9, 9);
  const cd tr = op.identity_vec().cast<cd>().dot(op.apply(vectorize(p)));
  EXPECT_LT(std::abs(tr), 1e-12);
}

TEST(Superop, HermiticityPreserved) {
  RateSet r{1.0, 0.2, 0.5, 0.4};
  const auto op = build_generator(LatticeSpec::chain(5, HoppingModel::Dipolar), r);
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Random(5, 5);
  p = (p + p.adjoint()).eval();
  const Eigen::MatrixXcd d = devectorize(op.apply(vectorize(p)), 5);
  EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Superop, RateValidationAndLengths) {
  EXPECT_THROW((RateSet{1.0, -1.0, 0.0, 0.0}.validate()), InvalidSpec);
  EXPECT_THROW((RateSet{0.0, 1.0, 0.0, 0.0}.validate()), InvalidSpec);
  RateSet r{2.0, 0.01, 1.0, 3.0};
  EXPECT_DOUBLE_EQ(r.absorption_length(), 200.0);
  EXPECT_DOUBLE_EQ(r.incoherent_absorption_length(), 4.0 / (3.01 * 0.01));
  EXPECT_DOUBLE_EQ(r.extraction_size_limit(), 10.0);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
  asym(0, 1) = 1.0;
  EXPECT_THROW(build_generator(asym, 0, RateSet{}), InvalidSpec);
}

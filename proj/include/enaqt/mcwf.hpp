#pragma once

// Monte-Carlo wavefunction trajectories for the single-excitation dynamics.
//
// Jump operators: sqrt(mu) sigma^-_j on every site, sqrt(Gamma_s) sigma^-_s at
// the sink, and N dephasing channels. Two dephasing unravellings give the same
// master equation (coherences decay at exactly gamma):
//
//   SigmaZ         sqrt(gamma/4) sigma^z_j, total rate N gamma/4, uniform site;
//                  in the one-excitation sector the jump flips the sign of psi_j
//   SiteProjector  sqrt(gamma) |j><j|, total rate gamma, site ~ |psi_j|^2;
//                  the jump collapses psi onto |j>
//
// In both cases sum_j L_j^dag L_j is a constant, as is the background decay
// term mu * 1. Only the sink term depends on the state, so the exact
// waiting-time integrator runs two state-independent Poisson clocks and
// propagates psi with H_s = J - (i/2) Gamma_s |s><s| between events; the sink
// fires when ||psi||^2 first drops below a uniform draw.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "enaqt/error.hpp"
#include "enaqt/gf.hpp"
#include "enaqt/lattice.hpp"
#include "enaqt/rng.hpp"
#include "enaqt/spectral.hpp"
#include "enaqt/superop.hpp"

namespace enaqt {

enum class Integrator { Euler, WaitingTime };
enum class Unravelling { SigmaZ, SiteProjector };
enum class Fate { Absorbed, Decayed, Censored };

inline std::string to_string(Integrator i) {
  return i == Integrator::Euler ? "euler" : "waiting_time";
}
inline std::string to_string(Unravelling u) {
  return u == Unravelling::SigmaZ ? "sigma_z" : "site_projector";
}

struct TrajectoryConfig {
  double dt = 0.0;       ///< Euler step; 0 selects it from the rates
  double t_final = 0.0;  ///< horizon; 0 selects 5/mu (1e6/J without background loss)
  std::uint64_t n_traj = 10000;
  std::uint64_t seed = 1;
  Integrator integrator = Integrator::Euler;
  Unravelling unravelling = Unravelling::SigmaZ;
  unsigned threads = 0;  ///< 0 uses all hardware threads
};

struct TrajectoryOutcome {
  Fate fate = Fate::Censored;
  double end_time = 0.0;
  std::optional<double> absorption_time;
  std::optional<int> decay_site;
  std::uint64_t dephasing_jumps = 0;

  [[nodiscard]] bool absorbed_at_sink() const { return fate == Fate::Absorbed; }
  [[nodiscard]] bool censored() const { return fate == Fate::Censored; }
};

class TrajectoryEngine {
 public:
  using cd = std::complex<double>;

  TrajectoryEngine(HoppingMatrix hopping, int sink, RateSet rates, TrajectoryConfig cfg)
      : J_(std::move(hopping)), sink_(sink), rates_(rates), cfg_(cfg) {
    rates_.validate();
    const Eigen::Index n = J_.rows();
    if (n < 1 || J_.cols() != n) throw InvalidSpec("hopping matrix must be square");
    if (sink < 0 || sink >= n) throw InvalidSpec("sink index out of range");
    if (cfg_.n_traj == 0) throw InvalidSpec("n_traj must be positive");
    n_ = int(n);
    deph_rate_ = cfg_.unravelling == Unravelling::SigmaZ ? 0.25 * rates_.gamma * n_ : rates_.gamma;
    setup_horizon();
    setup_propagator();
    setup_dt();
  }

  TrajectoryEngine(const LatticeSpec& spec, const RateSet& rates, const TrajectoryConfig& cfg)
      : TrajectoryEngine(build_hopping(spec, rates.J), spec.sink_index(), rates, cfg) {}

  [[nodiscard]] int sites() const { return n_; }
  [[nodiscard]] const TrajectoryConfig& config() const { return cfg_; }
  [[nodiscard]] const RateSet& rates() const { return rates_; }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] double horizon() const { return t_final_; }
  /// Total dephasing jump rate sum_j <L_j^dag L_j> (state independent).
  [[nodiscard]] double dephasing_jump_rate() const { return deph_rate_; }
  /// Squared prefactor of each dephasing jump operator.
  [[nodiscard]] double dephasing_operator_weight() const {
    return cfg_.unravelling == Unravelling::SigmaZ ? 0.25 * rates_.gamma : rates_.gamma;
  }
  /// True when the no-jump propagator is evaluated by Taylor substeps only.
  [[nodiscard]] bool uses_taylor_fallback() const { return taylor_only_; }

  /// Trajectory `index`: initial site drawn uniformly from the stream.
  [[nodiscard]] TrajectoryOutcome run(std::uint64_t index) const {
    Philox4x32 rng(cfg_.seed, index);
    const int k0 = int(rng.below(std::uint32_t(n_)));
    return simulate(site_state(k0), t_final_, rng, nullptr);
  }

  /// Trajectory `index` started from a fixed site.
  [[nodiscard]] TrajectoryOutcome run_from(int site, std::uint64_t index) const {
    if (site < 0 || site >= n_) throw InvalidSpec("start site out of range");
    Philox4x32 rng(cfg_.seed, index);
    return simulate(site_state(site), t_final_, rng, nullptr);
  }

  struct Snapshot {
    TrajectoryOutcome outcome;
    Eigen::VectorXcd psi;  ///< normalized state at t_stop (zero if the excitation left)
  };

  /// Evolves an arbitrary normalized state up to t_stop along trajectory `index`.
  [[nodiscard]] Snapshot evolve(const Eigen::VectorXcd& psi0, double t_stop,
                                std::uint64_t index) const {
    if (psi0.size() != n_) throw InvalidSpec("state has the wrong dimension");
    if (!(t_stop >= 0.0)) throw InvalidSpec("t_stop must be non-negative");
    Philox4x32 rng(cfg_.seed, index);
    State s;
    s.psi = psi0 / psi0.norm();
    Snapshot snap;
    snap.outcome = simulate(s, t_stop, rng, &snap.psi);
    return snap;
  }

  /// exp(-i H_s t) psi0 via the spectral route (Taylor substeps in the fallback).
  [[nodiscard]] Eigen::VectorXcd no_jump_propagate(const Eigen::VectorXcd& psi0, double t) const {
    State s;
    s.psi = psi0;
    return propagate(s, t);
  }
  /// exp(-i H_s t) psi0 by Taylor substeps with dense matrix-vector products.
  [[nodiscard]] Eigen::VectorXcd no_jump_propagate_taylor(const Eigen::VectorXcd& psi0,
                                                          double t) const {
    return taylor_substeps(psi0, t);
  }

 private:
  struct State {
    int site = -1;       ///< >= 0: psi = scale * |site>
    double scale = 1.0;  ///< amplitude of the site state
    Eigen::VectorXcd psi;
  };

  static State site_state(int k) {
    State s;
    s.site = k;
    return s;
  }

  void setup_horizon() {
    if (cfg_.t_final > 0.0) {
      t_final_ = cfg_.t_final;
      if (rates_.mu > 0.0 && t_final_ < 1.0 / rates_.mu)
        throw InvalidSpec("horizon must be at least 1/mu");
    } else {
      t_final_ = rates_.mu > 0.0 ? 5.0 / rates_.mu : 1e6 / rates_.J;
    }
  }

  void setup_dt() {
    const double max_rate = rates_.mu + rates_.gamma_s + deph_rate_;
    if (cfg_.dt > 0.0) {
      dt_ = cfg_.dt;
      if (dt_ * max_rate > 0.05)
        throw InvalidSpec("dt * (total jump rate) = " + std::to_string(dt_ * max_rate) +
                          " exceeds 0.05");
    } else {
      // Also resolve the coherent oscillations, not only the jump rates.
      dt_ = 0.05 / (max_rate + spectral_radius_);
    }
  }

  void setup_propagator() {
    const Eigen::Index n = n_;
    Hs_ = J_.cast<cd>();
    Hs_(sink_, sink_) -= cd(0.0, 0.5 * rates_.gamma_s);
    h_norm_ = Hs_.cwiseAbs().colwise().sum().maxCoeff();

    SinkAlignedBasis basis(J_, sink_);
    spectral_radius_ = basis.values().cwiseAbs().maxCoeff();
    const auto dark = basis.dark_indices();
    const auto bright = basis.bright_indices();
    const Eigen::Index nd = Eigen::Index(dark.size()), nb = Eigen::Index(bright.size());

    lambda_.resize(n);
    R_.resize(n, n);
    W_.resize(n, n);
    for (Eigen::Index p = 0; p < nd; ++p) {
      lambda_(p) = basis.values()(dark[p]);
      R_.col(p) = basis.vectors().col(dark[p]).cast<cd>();
      W_.row(p) = basis.vectors().col(dark[p]).transpose().cast<cd>();
    }
    if (nb > 0) {
      Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(nb, nb);
      Eigen::MatrixXd ub(n, nb);
      for (Eigen::Index p = 0; p < nb; ++p) ub.col(p) = basis.vectors().col(bright[p]);
      const Eigen::VectorXd amp = ub.row(sink_).transpose();
      block = -cd(0.0, 0.5 * rates_.gamma_s) * (amp * amp.transpose()).cast<cd>();
      for (Eigen::Index p = 0; p < nb; ++p) block(p, p) += basis.values()(bright[p]);
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(block);
      if (es.info() != Eigen::Success) {
        taylor_only_ = true;
      } else {
        const Eigen::MatrixXcd& v = es.eigenvectors();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
        const auto sv = svd.singularValues();
        const double cond = sv(0) / sv(sv.size() - 1);
        if (!(cond < 1e8)) {
          // Close to an exceptional point the eigenvector basis is unusable.
          taylor_only_ = true;
        } else {
          const Eigen::MatrixXcd vinv = v.partialPivLu().inverse();
          lambda_.tail(nb) = es.eigenvalues();
          R_.rightCols(nb) = ub.cast<cd>() * v;
          W_.bottomRows(nb) = vinv * ub.transpose().cast<cd>();
        }
      }
    }
    // Powers H_s^k for short-time Taylor propagation of site states.
    powers_.assign(kTaylorTerms, Eigen::MatrixXcd());
    powers_[0] = Eigen::MatrixXcd::Identity(n, n);
    for (int k = 1; k < kTaylorTerms; ++k) powers_[k] = Hs_ * powers_[k - 1];
  }

  // Short-time Taylor series of exp(-i H_s t) applied to |k>.
  Eigen::VectorXcd taylor_site(int k, double t) const {
    Eigen::VectorXcd out = powers_[0].col(k);
    cd c = 1.0;
    const double th = t * h_norm_;
    double bound = 1.0;
    for (int m = 1; m < kTaylorTerms; ++m) {
      c *= cd(0.0, -t) / double(m);
      bound *= th / m;
      out += c * powers_[m].col(k);
      if (bound < 1e-17) break;
    }
    return out;
  }

  Eigen::VectorXcd taylor_substeps(const Eigen::VectorXcd& psi0, double t) const {
    const int steps = std::max(1, int(std::ceil(t * h_norm_ / 0.5)));
    const double h = t / steps;
    Eigen::VectorXcd psi = psi0;
    for (int s = 0; s < steps; ++s) {
      Eigen::VectorXcd term = psi, acc = psi;
      double bound = 1.0;
      for (int m = 1; m < 40; ++m) {
        term = (cd(0.0, -h) / double(m)) * (Hs_ * term);
        acc += term;
        bound *= h * h_norm_ / m;
        if (bound < 1e-17) break;
      }
      psi = acc;
    }
    return psi;
  }

  Eigen::VectorXcd spectral(const Eigen::VectorXcd& coords, double t) const {
    Eigen::VectorXcd ph(n_);
    for (int p = 0; p < n_; ++p) ph(p) = std::exp(cd(0.0, -t) * lambda_(p)) * coords(p);
    return R_ * ph;
  }

  Eigen::VectorXcd propagate(const State& s, double t) const {
    if (s.site >= 0) {
      if (t * h_norm_ <= kTaylorReach) return s.scale * taylor_site(s.site, t);
      if (taylor_only_) return s.scale * taylor_substeps(powers_[0].col(s.site), t);
      return s.scale * spectral(W_.col(s.site), t);
    }
    if (taylor_only_ || t * h_norm_ <= 0.5) return taylor_substeps(s.psi, t);
    return spectral(W_ * s.psi, t);
  }

  template <typename Vec>
  static int sample_site(const Vec& psi, Philox4x32& rng) {
    const Eigen::VectorXd w = psi.cwiseAbs2();
    const double target = rng.uniform() * w.sum();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      acc += w(j);
      if (target < acc) return int(j);
    }
    // Rounding at the top end: last site with non-zero weight.
    for (Eigen::Index j = w.size() - 1; j >= 0; --j)
      if (w(j) > 0.0) return int(j);
    return 0;
  }

  TrajectoryOutcome simulate(State s, double t_stop, Philox4x32& rng,
                             Eigen::VectorXcd* final_psi) const {
    return cfg_.integrator == Integrator::Euler ? simulate_euler(s, t_stop, rng, final_psi)
                                                : simulate_waiting(s, t_stop, rng, final_psi);
  }

  TrajectoryOutcome simulate_waiting(State s, double t_stop, Philox4x32& rng,
                                     Eigen::VectorXcd* final_psi) const {
    TrajectoryOutcome out;
    const double r = rng.uniform();
    const double t_decay = rng.exponential(rates_.mu);
    double t = 0.0;
    double norm2 = s.site >= 0 ? s.scale * s.scale : s.psi.squaredNorm();
    for (;;) {
      const double t_jump = t + rng.exponential(deph_rate_);
      const double t_end = std::min({t_jump, t_decay, t_stop});
      Eigen::VectorXcd psi = propagate(s, t_end - t);
      const double n_end = psi.squaredNorm();
      if (n_end <= r) {
        // Sink fires inside (t, t_end]; the norm decreases monotonically.
        double lo = 0.0, hi = t_end - t;
        for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + t + hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          (propagate(s, mid).squaredNorm() > r ? lo : hi) = mid;
        }
        out.fate = Fate::Absorbed;
        out.end_time = t + 0.5 * (lo + hi);
        out.absorption_time = out.end_time;
        if (final_psi) *final_psi = Eigen::VectorXcd::Zero(n_);
        return out;
      }
      norm2 = n_end;
      t = t_end;
      if (t_end == t_stop && t_stop <= t_decay && t_stop <= t_jump) {
        out.fate = Fate::Censored;
        out.end_time = t_stop;
        if (final_psi) *final_psi = psi / std::sqrt(norm2);
        return out;
      }
      if (t_end == t_decay) {
        out.fate = Fate::Decayed;
        out.end_time = t;
        out.decay_site = sample_site(psi, rng);
        if (final_psi) *final_psi = Eigen::VectorXcd::Zero(n_);
        return out;
      }
      ++out.dephasing_jumps;
      if (cfg_.unravelling == Unravelling::SiteProjector) {
        s.site = sample_site(psi, rng);
        s.scale = std::sqrt(norm2);
        s.psi.resize(0);
      } else {
        const int j = int(rng.below(std::uint32_t(n_)));
        psi(j) = -psi(j);
        s.site = -1;
        s.psi = std::move(psi);
      }
    }
  }

  TrajectoryOutcome simulate_euler(State s, double t_stop, Philox4x32& rng,
                                   Eigen::VectorXcd* final_psi) const {
    TrajectoryOutcome out;
    Eigen::VectorXcd psi = s.site >= 0 ? Eigen::VectorXcd(powers_[0].col(s.site)) : s.psi;
    psi /= psi.norm();
    const cd i(0.0, 1.0);
    const double uniform_damp = 0.5 * (rates_.mu + deph_rate_);
    const std::uint64_t steps = std::uint64_t(std::ceil(t_stop / dt_ - 1e-9));
    Eigen::VectorXcd next(n_);
    for (std::uint64_t step = 0; step < steps; ++step) {
      const double t = double(step) * dt_;
      const double p_sink = dt_ * rates_.gamma_s * std::norm(psi(sink_));
      const double p_decay = dt_ * rates_.mu;
      const double p_deph = dt_ * deph_rate_;
      const double p = p_sink + p_decay + p_deph;
      if (p > 0.1) throw StepSizeViolation("jump probability " + std::to_string(p) + " per step");
      const double eps = rng.uniform();
      if (eps < p) {
        const double u = rng.uniform() * p;
        if (u < p_sink) {
          out.fate = Fate::Absorbed;
          out.end_time = t + dt_;
          out.absorption_time = out.end_time;
          if (final_psi) *final_psi = Eigen::VectorXcd::Zero(n_);
          return out;
        }
        if (u < p_sink + p_decay) {
          out.fate = Fate::Decayed;
          out.end_time = t + dt_;
          out.decay_site = sample_site(psi, rng);
          if (final_psi) *final_psi = Eigen::VectorXcd::Zero(n_);
          return out;
        }
        ++out.dephasing_jumps;
        if (cfg_.unravelling == Unravelling::SiteProjector) {
          const int j = sample_site(psi, rng);
          const cd phase = psi(j) / std::abs(psi(j));
          psi.setZero();
          psi(j) = phase;
        } else {
          const int j = int(rng.below(std::uint32_t(n_)));
          psi(j) = -psi(j);
        }
        continue;
      }
      // psi <- (1 - i H_nh dt) psi with H_nh = J - (i/2)(Gamma_s |s><s| + mu + dephasing).
      next.noalias() = J_.cast<cd>() * psi;
      next(sink_) -= i * 0.5 * rates_.gamma_s * psi(sink_);
      next -= i * uniform_damp * psi;
      psi -= i * dt_ * next;
      psi /= psi.norm();
    }
    out.fate = Fate::Censored;
    out.end_time = double(steps) * dt_;
    if (final_psi) *final_psi = psi;
    return out;
  }

  static constexpr int kTaylorTerms = 28;
  static constexpr double kTaylorReach = 2.0;

  HoppingMatrix J_;
  int sink_;
  RateSet rates_;
  TrajectoryConfig cfg_;
  int n_ = 0;
  double deph_rate_ = 0.0;
  double t_final_ = 0.0;
  double dt_ = 0.0;
  double spectral_radius_ = 0.0;
  double h_norm_ = 0.0;
  bool taylor_only_ = false;
  Eigen::MatrixXcd Hs_;
  Eigen::VectorXcd lambda_;
  Eigen::MatrixXcd R_, W_;
  std::vector<Eigen::MatrixXcd> powers_;
};

namespace detail {

struct TrajectoryTally {
  std::uint64_t absorbed = 0, decayed = 0, censored = 0, jumps = 0;
  double sum_t = 0.0, sum_t2 = 0.0;

  void add(const TrajectoryOutcome& o) {
    jumps += o.dephasing_jumps;
    switch (o.fate) {
      case Fate::Absorbed:
        ++absorbed;
        sum_t += *o.absorption_time;
        sum_t2 += *o.absorption_time * *o.absorption_time;
        break;
      case Fate::Decayed:
        ++decayed;
        break;
      case Fate::Censored:
        ++censored;
        break;
    }
  }
  void merge(const TrajectoryTally& b) {
    absorbed += b.absorbed;
    decayed += b.decayed;
    censored += b.censored;
    jumps += b.jumps;
    sum_t += b.sum_t;
    sum_t2 += b.sum_t2;
  }
};

}  // namespace detail

/// Runs cfg.n_traj trajectories. Blocks of consecutive indices are tallied
/// independently and merged in index order, so the result does not depend on
/// the number of threads.
inline TransportResult estimate_transport(const TrajectoryEngine& engine) {
  const auto& cfg = engine.config();
  constexpr std::uint64_t kBlock = 256;
  const std::uint64_t n = cfg.n_traj;
  const std::uint64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<detail::TrajectoryTally> tallies(nblocks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= nblocks || failed.load()) return;
      try {
        detail::TrajectoryTally t;
        for (std::uint64_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) t.add(engine.run(i));
        tallies[b] = t;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = unsigned(std::min<std::uint64_t>(threads, nblocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  detail::TrajectoryTally total;
  for (const auto& t : tallies) total.merge(t);

  TransportResult res;
  res.method = Method::MCWF;
  const double nd = double(n);
  res.eta = double(total.absorbed) / nd;
  res.eta_se = std::sqrt(res.eta * (1.0 - res.eta) / nd);
  res.lost_fraction = double(total.decayed) / nd;
  if (total.absorbed > 0) {
    const double na = double(total.absorbed);
    res.tau = total.sum_t / na;
    const double var = std::max(0.0, total.sum_t2 / na - res.tau * res.tau);
    res.tau_se = total.absorbed > 1 ? std::sqrt(var / (na - 1.0)) : 0.0;
  } else {
    res.tau = std::numeric_limits<double>::quiet_NaN();
    res.tau_se = std::numeric_limits<double>::quiet_NaN();
    res.flags.push_back("tau_undefined");
  }
  res.metadata["n_traj"] = nd;
  res.metadata["absorbed"] = double(total.absorbed);
  res.metadata["decayed"] = double(total.decayed);
  res.metadata["censored"] = double(total.censored);
  res.metadata["censored_fraction"] = double(total.censored) / nd;
  res.metadata["mean_dephasing_jumps"] = double(total.jumps) / nd;
  res.metadata["t_final"] = engine.horizon();
  if (cfg.integrator == Integrator::Euler) res.metadata["dt"] = engine.dt();
  res.flags.push_back("integrator=" + to_string(cfg.integrator));
  res.flags.push_back("unravelling=" + to_string(cfg.unravelling));
  return res;
}

inline TransportResult estimate_transport(const LatticeSpec& spec, const RateSet& rates,
                                          const TrajectoryConfig& cfg) {
  return estimate_transport(TrajectoryEngine(spec, rates, cfg));
}

inline TransportResult estimate_transport(const HoppingMatrix& hopping, int sink,
                                          const RateSet& rates, const TrajectoryConfig& cfg) {
  return estimate_transport(TrajectoryEngine(hopping, sink, rates, cfg));
}

}  // namespace enaqt

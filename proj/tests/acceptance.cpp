// Acceptance report: one PASS/FAIL line per criterion.
// Usage: acceptance [n_traj]   (criterion 1 uses 20000 trajectories per point by default)

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "enaqt/enaqt.hpp"

using namespace enaqt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("CRITERION %-3s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

void criterion(int n, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  report(std::to_string(n).c_str(), pass, detail);
}

std::string f(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(std::pow(10.0, std::log10(a) + (std::log10(b) - std::log10(a)) * k / (n - 1)));
  return v;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "[acceptance] %s\n", s.c_str());
}

struct Sample {
  LatticeSpec spec;
  RateSet rates;
};

std::vector<Sample> random_samples(std::uint64_t stream, int n) {
  const std::vector<LatticeSpec> specs = {LatticeSpec::square(3), LatticeSpec::square(4, HoppingModel::NearestNeighbor),
                                          LatticeSpec::square(5), LatticeSpec::chain(7),
                                          LatticeSpec::chain(6, HoppingModel::Dipolar)};
  Philox4x32 rng(2024, stream);
  std::vector<Sample> out;
  for (int k = 0; k < n; ++k) {
    Sample s;
    s.spec = specs[rng.below(specs.size())];
    s.rates.J = 1.0;
    s.rates.mu = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    s.rates.gamma_s = std::pow(10.0, -1.0 + 2.0 * rng.uniform());
    s.rates.gamma = std::pow(10.0, -3.0 + 5.0 * rng.uniform());
    out.push_back(s);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t n_traj = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;

  // points used for bound dominance, collected along the way
  std::vector<std::pair<Sample, double>> dominance;

  // 1 + 2: MCWF vs GF on the 7x7 grid
  {
    const auto spec = LatticeSpec::square(7);
    const auto gammas = logspace(1e-3, 1e2, 12);
    TrajectoryConfig tc;
    tc.n_traj = n_traj;
    tc.seed = 1;
    tc.integrator = Integrator::WaitingTime;
    tc.unravelling = Unravelling::SiteProjector;
    tc.t_final = 30.0 / 0.01;
    double worst = 0.0;
    int bad = 0;
    std::string worst_at;
    std::vector<double> eta_gs1;
    for (double gs : {0.1, 1.0, 10.0}) {
      for (double g : gammas) {
        const RateSet r{1.0, 0.01, gs, g};
        const double eg = efficiency_gf(spec, r).eta;
        const auto m = estimate_transport(spec, r, tc);
        const double z = std::abs(m.eta - eg) / m.eta_se;
        progress("c1 gamma_s=" + f(gs) + " gamma=" + f(g) + " GF=" + f(eg, 6) + " MCWF=" + f(m.eta, 6) + " z=" + f(z, 3));
        if (z >= 3.0) ++bad;
        if (z > worst) {
          worst = z;
          worst_at = "gamma_s=" + f(gs) + ", gamma=" + f(g);
        }
        if (gs == 1.0) eta_gs1.push_back(eg);
        dominance.push_back({{spec, r}, eg});
      }
    }
    criterion(1, bad == 0,
              "36 points, n_traj=" + std::to_string(n_traj) + ", max |dEta|/SE = " + f(worst, 3) + " at " + worst_at +
                  ", points >= 3 SE: " + std::to_string(bad));

    const auto it = std::max_element(eta_gs1.begin(), eta_gs1.end());
    const std::size_t k = std::size_t(it - eta_gs1.begin());
    const double lo = std::max(eta_gs1.front(), eta_gs1.back());
    const bool interior = k > 0 && k + 1 < eta_gs1.size();
    const double rel = (*it - lo) / lo;
    criterion(2, interior && rel >= 0.05,
              "Gamma_s=1: max eta " + f(*it) + " at gamma=" + f(gammas[k]) + ", endpoints " + f(eta_gs1.front()) +
                  " / " + f(eta_gs1.back()) + ", excess " + f(100 * rel, 3) + "%");
  }

  // 3: conservation on 50 random points
  {
    progress("c3");
    const auto samples = random_samples(3, 50);
    double worst = 0.0;
    for (const auto& s : samples) {
      const auto r = efficiency_gf(s.spec, s.rates);
      worst = std::max(worst, std::abs(r.eta + r.lost_fraction - 1.0));
      dominance.push_back({s, r.eta});
    }
    criterion(3, worst < 1e-8, "50 random points, max |eta + mu*int Tr p - 1| = " + f(worst, 3));
  }

  // 4: tau against the mu-derivative of ln eta
  {
    progress("c4");
    const auto samples = random_samples(4, 20);
    double worst = 0.0;
    for (const auto& s : samples) {
      const auto r = efficiency_gf(s.spec, s.rates);
      const double d = tau_via_mu_derivative(s.spec, s.rates);
      worst = std::max(worst, std::abs(r.tau - d) / r.tau);
      dominance.push_back({s, r.eta});
    }
    criterion(4, worst < 1e-3, "20 random points, max relative deviation = " + f(worst, 3));
  }

  // 6 (computed before 5 so its points join the dominance set)
  std::string c6_detail;
  bool c6_pass = true;
  {
    progress("c6");
    const auto spec = LatticeSpec::square(5);
    BoundCalculator bc(spec);
    double coh_gap = 0.0, inc_gap = 0.0;
    for (double g : logspace(1e-3, 1e-2, 5)) {
      const RateSet r{1.0, 0.01, 0.1, g};
      const double e = efficiency_gf(spec, r).eta;
      coh_gap = std::max(coh_gap, std::abs(e - bc.eta_coh(r)) / bc.eta_coh(r));
      dominance.push_back({{spec, r}, e});
    }
    for (double g : logspace(10, 1e3, 5)) {
      const RateSet r{1.0, 0.01, 0.1, g};
      const double e = efficiency_gf(spec, r).eta;
      inc_gap = std::max(inc_gap, std::abs(e - bc.eta_incoh(r)) / bc.eta_incoh(r));
      dominance.push_back({{spec, r}, e});
    }
    c6_pass = coh_gap < 0.1 && inc_gap < 0.15;
    c6_detail = "coherent side (gamma <= 1e-2) max gap " + f(coh_gap, 3) + " < 0.1; Zeno side (gamma >= 10) max gap " +
                f(inc_gap, 3) + " < 0.15";
  }

  // 5: bound dominance on every sampled point
  {
    progress("c5");
    double worst = -1.0, incoh_abs = -1.0;
    for (const auto& [s, eta] : dominance) {
      const auto b = min_estimate(s.spec, s.rates, false);
      worst = std::max({worst, eta - b.eta_abs, eta - b.eta_coh, eta - b.eta_incoh});
      incoh_abs = std::max(incoh_abs, b.eta_incoh - b.eta_abs);
    }
    criterion(5, worst <= 1e-9 && incoh_abs <= 1e-9,
              std::to_string(dominance.size()) + " points, max(eta_GF - bound) = " + f(worst, 3) +
                  ", max(eta_incoh - eta_abs) = " + f(incoh_abs, 3));
  }
  criterion(6, c6_pass, c6_detail);

  // 7: dark-state fractions
  {
    progress("c7");
    std::string detail = "periodic NN centre sink:";
    bool ok = true;
    double prev_dev = 1.0;
    for (int L : {21, 41, 51}) {
      const auto spec = LatticeSpec::square(L, HoppingModel::NearestNeighbor, Boundary::Periodic);
      const double frac = dark_census(spec, 1.0).dark_fraction();
      const double dev = std::abs(frac - 0.75);
      ok = ok && dev <= 0.05 && dev <= prev_dev;
      prev_dev = dev;
      detail += " L=" + std::to_string(L) + " " + f(frac);
      progress("c7 periodic L=" + std::to_string(L) + " fraction " + f(frac, 6));
    }
    detail += " (target 0.75 +- 0.05, trending);";
    const double open = dark_census(LatticeSpec::square(51), 1.0).dark_fraction();
    const bool open_ok = open >= 0.85 && open <= 0.95;
    detail += " open dipolar L=51 " + f(open) + (open_ok ? " in" : " outside") + " [0.85, 0.95]";
    criterion(7, ok && open_ok, detail);
  }

  // 8: trapped fraction for vanishing loss
  {
    progress("c8");
    bool ok = true;
    std::string detail;
    for (const auto& spec : {LatticeSpec::chain(5), LatticeSpec::square(5, HoppingModel::NearestNeighbor)}) {
      const int dark = dark_count_from_hopping(build_hopping(spec), spec.sink_index());
      const int n = spec.site_count();
      const double target = 1.0 - double(dark) / n;
      const double eta = efficiency_gf(spec, RateSet{1.0, 1e-6, 1.0, 0.0}).eta;
      ok = ok && std::abs(eta - target) < 1e-3;
      detail += std::string(detail.empty() ? "" : "; ") + (spec.dims == Dimension::One ? "1D" : "2D NN") +
                " L=5: eta=" + f(eta, 6) + " vs 1-" + std::to_string(dark) + "/" + std::to_string(n) + "=" +
                f(target, 6);
    }
    criterion(8, ok, detail);
  }

  // 9: chain closed forms against the generic bounds
  {
    progress("c9");
    double worst = 0.0;
    int count = 0;
    for (int L = 3; L <= 11; L += 2) {
      BoundCalculator bc(LatticeSpec::chain(L));
      for (double mu : {1e-3, 1e-2, 0.1})
        for (double gs : {0.1, 1.0, 10.0})
          for (double g : {1e-2, 1.0, 100.0}) {
            const RateSet r{1.0, mu, gs, g};
            worst = std::max({worst, std::abs(eta_coh_1d(L, r) - bc.eta_coh(r)),
                              std::abs(eta_incoh_1d(L, r) - bc.eta_incoh(r))});
            ++count;
          }
    }
    criterion(9, worst < 1e-10, "odd L = 3..11 x 27 rate points (" + std::to_string(count) +
                                    "), max deviation " + f(worst, 3));
  }

  // 10: optimal-dephasing crossing
  {
    progress("c10");
    const auto g50 = gamma0_equation(50, 1e-3, 0.1);
    const double asym = gamma0_asymptote(50, 1e-3);
    const bool asym_ok = g50 && std::abs(*g50 - asym) / asym < 0.15;
    bool mono = true;
    double prev = INFINITY;
    int critical = 0;
    for (int L = 3; L <= 101; L += 2) {
      const auto g = gamma0_equation(L, 0.1, 0.1);
      if (!g) {
        if (!critical) critical = L;
        continue;
      }
      if (critical) mono = false;  // root came back
      mono = mono && *g < prev;
      prev = *g;
    }
    criterion(10, asym_ok && mono && critical > 0,
              "L=50: gamma0=" + (g50 ? f(*g50) : std::string("none")) + " vs 5J/L-mu=" + f(asym) + " (" +
                  (g50 ? f(100 * std::abs(*g50 - asym) / asym, 3) : std::string("-")) +
                  "%); mu=0.1: decreasing, no root from L=" + std::to_string(critical));
  }

  // 11: transfer-time phenomenology on coarse grids
  {
    progress("c11");
    const auto spec = LatticeSpec::square(7);
    auto tau = [&](double mu, double gs, double g) { return efficiency_gf(spec, RateSet{1.0, mu, gs, g}).tau; };
    // mu = 0
    const std::vector<double> fall{1e-3, 3e-3, 1e-2, 3e-2, 0.1};
    const std::vector<double> flat{0.1, 0.3, 1.0, 2.0, 5.0};
    const std::vector<double> rise{5.0, 20.0, 100.0, 1000.0};
    std::vector<double> tf, tp, tr;
    for (double g : fall) tf.push_back(tau(0.0, 1.0, g));
    for (double g : flat) tp.push_back(tau(0.0, 1.0, g));
    for (double g : rise) tr.push_back(tau(0.0, 1.0, g));
    const bool dec = std::is_sorted(tf.rbegin(), tf.rend()) && tf.front() > 10 * tf.back();
    const double pmax = *std::max_element(tp.begin(), tp.end()), pmin = *std::min_element(tp.begin(), tp.end());
    const bool plateau = pmax / pmin < 1.5;
    const bool inc = std::is_sorted(tr.begin(), tr.end()) && tr.back() > 10 * tr.front();
    // mu = 0.01: local maximum at gamma ~ mu, minimum near gamma ~ J
    const auto grid = logspace(1e-4, 1e2, 25);
    std::vector<double> t2;
    for (double g : grid) t2.push_back(tau(0.01, 1.0, g));
    std::size_t kmax = 0;
    for (std::size_t k = 1; k + 1 < grid.size(); ++k)
      if (t2[k] > t2[k - 1] && t2[k] > t2[k + 1]) {
        kmax = k;
        break;
      }
    std::size_t kmin = kmax;
    for (std::size_t k = kmax; k < grid.size(); ++k)
      if (t2[k] < t2[kmin]) kmin = k;
    const bool has_max = kmax > 0 && grid[kmax] >= 1e-3 && grid[kmax] <= 1e-1;
    const bool has_min = kmin > kmax && grid[kmin] >= 0.1 && grid[kmin] <= 10.0 && kmin + 1 < grid.size();
    criterion(11, dec && plateau && inc && has_max && has_min,
              "mu=0: tau " + f(tf.front()) + " -> " + f(tf.back()) + " (gamma 1e-3..0.1), plateau max/min " +
                  f(pmax / pmin, 3) + " on [0.1, 5], " + f(tr.front()) + " -> " + f(tr.back()) +
                  " (gamma 5..1e3); mu=0.01, Gamma_s=1: local max at gamma=" + (has_max ? f(grid[kmax]) : "none") +
                  ", min at gamma=" + (has_min ? f(grid[kmin]) : "none"));
  }

  // 12: byte-identical validate reports
  {
    progress("c12");
    const fs::path dir = fs::temp_directory_path() / "enaqt_acceptance_c12";
    fs::remove_all(dir);
    bool ran = true;
    for (const char* sub : {"a", "b"}) {
      const std::string cmd = std::string(ENAQT_CLI_PATH) + " validate --seed 7 -o " + (dir / sub).string() +
                              " >/dev/null 2>&1";
      ran = ran && std::system(cmd.c_str()) == 0;
    }
    const std::string a = slurp(dir / "a" / "validate.csv"), b = slurp(dir / "b" / "validate.csv");
    criterion(12, ran && !a.empty() && a == b,
              std::string("two `validate --seed 7` runs: ") + (ran ? "exit 0" : "non-zero exit") + ", CSV " +
                  std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different"));
  }

  // Additional checks from the operation examples (not numbered criteria).
  {
    const auto spec = LatticeSpec::square(7);
    const RateSet r{1.0, 1.0, 1.0, 0.0};
    const double eta = efficiency_gf(spec, r).eta, bound = eta_abs(r, 49);
    const double gap = (bound - eta) / bound;
    report("x1", gap < 0.1,
           "eta_abs example mu/J=1, L=7, Gamma_s/J=1: GF " + f(eta) + " vs eta_abs " + f(bound) + ", gap " +
               f(100 * gap, 3) + "% (stated: within 10%)");
  }

  std::printf("%d of 12 criteria failed\n", failures);
  return failures ? 1 : 0;
}

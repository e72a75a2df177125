#pragma once

// Sweep execution and result files for the enaqt command-line tool.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "enaqt_cli/config.hpp"
#include "enaqt_cli/output.hpp"

namespace enaqt::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kConfigError = 1, kInvariantFailure = 2, kSolverFailure = 3 };

struct Point {
  std::vector<double> coords;  // one per axis
  LatticeSpec lattice;
  RateSet rates;
};

struct Record {
  std::size_t point = 0;
  SolverKind solver = SolverKind::GF;
  int L = 0, sites = 0;
  RateSet rates;
  std::optional<double> eta, eta_se, tau, tau_se, lost;
  std::optional<double> eta_abs, eta_coh, eta_incoh, eta_min, gamma0, tau_lower;
  std::vector<std::string> flags;
  std::map<std::string, double> metadata;
  std::string error;
  double wall = 0.0;  // seconds; goes to meta.json only
};

// ---------------------------------------------------------------------------
// helpers

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string resolve_output_dir(const ExperimentConfig& c, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("ENAQT_OUTPUT_DIR"); env && *env) return (fs::path(env) / c.name).string();
  return (fs::path("enaqt_output") / c.name).string();
}

inline unsigned worker_count(unsigned requested) {
  if (requested) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, n) on a pool; results are addressed by index so the
/// outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& f) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
  };
  workers = unsigned(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    body();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < workers; ++k) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

inline std::string describe(const std::exception& e) {
  if (dynamic_cast<const NonDecayingSubspace*>(&e)) return std::string("non_decaying_subspace: ") + e.what();
  if (dynamic_cast<const StepSizeViolation*>(&e)) return std::string("step_size_violation: ") + e.what();
  if (dynamic_cast<const BracketError*>(&e)) return std::string("bracket_error: ") + e.what();
  if (dynamic_cast<const UnsupportedConfiguration*>(&e)) return std::string("unsupported: ") + e.what();
  if (dynamic_cast<const InvalidSpec*>(&e)) return std::string("invalid_spec: ") + e.what();
  if (dynamic_cast<const SolverError*>(&e)) return std::string("solver_error: ") + e.what();
  return std::string("error: ") + e.what();
}

inline std::string group_label(Param p, double v) { return to_string(p) + "=" + fmt(v); }

// ---------------------------------------------------------------------------
// grid

inline LatticeSpec lattice_for(const ExperimentConfig& c, int L) {
  LatticeSpec s = c.lattice;
  s.L = L;
  if (c.sink_xy) {
    s.sink.reset();
    s.sink = site_index(s, (*c.sink_xy)[0], (*c.sink_xy)[1]);
  }
  return s;
}

inline std::vector<Point> make_points(const ExperimentConfig& c) {
  std::vector<Point> pts;
  const std::size_t n0 = c.axes.empty() ? 1 : c.axes[0].values.size();
  const std::size_t n1 = c.axes.size() > 1 ? c.axes[1].values.size() : 1;
  for (std::size_t j = 0; j < n1; ++j)
    for (std::size_t i = 0; i < n0; ++i) {
      Point p;
      p.rates = c.rates;
      int L = c.lattice.L;
      for (std::size_t a = 0; a < c.axes.size(); ++a) {
        const double v = c.axes[a].values[a == 0 ? i : j];
        p.coords.push_back(v);
        switch (c.axes[a].param) {
          case Param::J: p.rates.J = v; break;
          case Param::Mu: p.rates.mu = v; break;
          case Param::GammaS: p.rates.gamma_s = v; break;
          case Param::Gamma: p.rates.gamma = v; break;
          case Param::L: L = int(v); break;
        }
      }
      p.lattice = lattice_for(c, L);
      pts.push_back(std::move(p));
    }
  return pts;
}

// Bound calculators are shared by every point with the same (L, J).
class BoundCache {
 public:
  const BoundCalculator& get(const LatticeSpec& s, double J) {
    std::lock_guard<std::mutex> lock(m_);
    const auto key = std::make_pair(s.L, J);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, std::make_unique<BoundCalculator>(s, J)).first;
    return *it->second;
  }

 private:
  std::mutex m_;
  std::map<std::pair<int, double>, std::unique_ptr<BoundCalculator>> cache_;
};

// ---------------------------------------------------------------------------
// solvers

inline void evaluate(const ExperimentConfig& c, const Point& p, SolverKind s, BoundCache& bounds,
                     bool nested_parallel, Record& rec) {
  rec.solver = s;
  rec.L = p.lattice.L;
  rec.sites = p.lattice.site_count();
  rec.rates = p.rates;
  switch (s) {
    case SolverKind::GF: {
      const auto r = efficiency_gf(p.lattice, p.rates, c.gf);
      rec.eta = r.eta;
      if (c.gf.compute_tau) rec.tau = r.tau;
      rec.lost = r.lost_fraction;
      rec.flags = r.flags;
      rec.metadata = r.metadata;
      break;
    }
    case SolverKind::MCWF: {
      TrajectoryConfig tc = c.mcwf;
      if (nested_parallel && tc.threads == 0) tc.threads = 1;
      const auto r = estimate_transport(p.lattice, p.rates, tc);
      rec.eta = r.eta;
      rec.eta_se = r.eta_se;
      rec.tau = r.tau;
      rec.tau_se = r.tau_se;
      rec.lost = r.lost_fraction;
      rec.flags = r.flags;
      rec.metadata = r.metadata;
      break;
    }
    case SolverKind::Bounds: {
      const auto& bc = bounds.get(p.lattice, p.rates.J);
      const auto b = bc.report(p.rates, c.bounds_gamma0);
      rec.eta_abs = b.eta_abs;
      rec.eta_coh = b.eta_coh;
      rec.eta_incoh = b.eta_incoh;
      rec.eta_min = b.eta_min_estimate;
      rec.gamma0 = b.gamma0;
      rec.tau_lower = b.tau_lower;
      rec.flags = b.flags;
      break;
    }
    case SolverKind::OneD: {
      const int L = p.lattice.L;
      const auto lim = absorption_limit(p.rates, L);
      rec.eta_abs = lim.eta;
      rec.tau_lower = lim.tau_lower;
      rec.eta_coh = eta_coh_1d(L, p.rates);
      rec.eta_incoh = eta_incoh_1d(L, p.rates, c.oned_form);
      rec.eta_min = std::min(*rec.eta_coh, *rec.eta_incoh);
      if (c.bounds_gamma0) {
        rec.gamma0 = gamma0_equation(L, p.rates.mu, p.rates.gamma_s, p.rates.J, c.oned_form);
        if (!rec.gamma0) rec.flags.push_back("no_enaqt_crossing");
      }
      rec.flags.push_back("form=" + to_string(c.oned_form));
      break;
    }
  }
}

inline std::vector<Record> run_sweep(const ExperimentConfig& c, const std::vector<Point>& pts) {
  std::vector<Record> recs(pts.size() * c.solvers.size());
  BoundCache cache;
  const unsigned workers = worker_count(c.workers);
  parallel_for(recs.size(), workers, [&](std::size_t k) {
    const std::size_t pi = k / c.solvers.size();
    Record& rec = recs[k];
    rec.point = pi;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      evaluate(c, pts[pi], c.solvers[k % c.solvers.size()], cache, workers > 1, rec);
    } catch (const std::exception& e) {
      rec.error = describe(e);
    }
    rec.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return recs;
}

// ---------------------------------------------------------------------------
// serialisation

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "point",      "L",          "sites",        "J[E]",          "mu[E]",        "gamma_s[E]",
      "gamma[E]",   "solver",     "eta[1]",       "eta_se[1]",     "tau[hbar/E]",  "tau_se[hbar/E]",
      "lost[1]",    "eta_abs[1]", "eta_coh[1]",   "eta_incoh[1]",  "eta_min[1]",   "gamma0[E]",
      "tau_lower[hbar/E]", "status", "flags", "error"};
  return cols;
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline std::string records_csv(const std::vector<Record>& recs) {
  std::string out = csv_line(record_columns());
  for (const auto& r : recs) {
    out += csv_line({std::to_string(r.point), std::to_string(r.L), std::to_string(r.sites), fmt(r.rates.J),
                     fmt(r.rates.mu), fmt(r.rates.gamma_s), fmt(r.rates.gamma), to_string(r.solver), fmt(r.eta),
                     fmt(r.eta_se), fmt(r.tau), fmt(r.tau_se), fmt(r.lost), fmt(r.eta_abs), fmt(r.eta_coh),
                     fmt(r.eta_incoh), fmt(r.eta_min), fmt(r.gamma0), fmt(r.tau_lower),
                     r.error.empty() ? "ok" : "error", join(r.flags, ";"), r.error});
  }
  return out;
}

inline json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline json records_json(const ExperimentConfig& c, const std::vector<Record>& recs) {
  json j;
  j["name"] = c.name;
  j["axes"] = json::array();
  for (const auto& a : c.axes) j["axes"].push_back({{"param", to_string(a.param)}, {"spacing", a.spacing}, {"values", a.values}});
  j["records"] = json::array();
  for (const auto& r : recs) {
    json e = {{"point", r.point},
              {"solver", to_string(r.solver)},
              {"L", r.L},
              {"sites", r.sites},
              {"J", r.rates.J},
              {"mu", r.rates.mu},
              {"gamma_s", r.rates.gamma_s},
              {"gamma", r.rates.gamma},
              {"eta", opt_json(r.eta)},
              {"eta_se", opt_json(r.eta_se)},
              {"tau", opt_json(r.tau)},
              {"tau_se", opt_json(r.tau_se)},
              {"lost", opt_json(r.lost)},
              {"eta_abs", opt_json(r.eta_abs)},
              {"eta_coh", opt_json(r.eta_coh)},
              {"eta_incoh", opt_json(r.eta_incoh)},
              {"eta_min", opt_json(r.eta_min)},
              {"gamma0", opt_json(r.gamma0)},
              {"tau_lower", opt_json(r.tau_lower)},
              {"flags", r.flags},
              {"status", r.error.empty() ? "ok" : "error"}};
    if (!r.error.empty()) e["error"] = r.error;
    json md = json::object();
    for (const auto& [k, v] : r.metadata) md[k] = std::isfinite(v) ? json(v) : json(nullptr);
    e["metadata"] = md;
    j["records"].push_back(std::move(e));
  }
  return j;
}

struct RunClock {
  std::string started = utc_now();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  [[nodiscard]] double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

inline json meta_json(const std::string& verb, const ExperimentConfig& c, const RunClock& clock,
                      const std::vector<double>& walls) {
  return {{"verb", verb},
          {"name", c.name},
          {"config", c.source},
          {"started_utc", clock.started},
          {"finished_utc", utc_now()},
          {"wall_time_s", clock.elapsed()},
          {"workers", worker_count(c.workers)},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"record_wall_time_s", walls}};
}

// ---------------------------------------------------------------------------
// plots

inline std::string axis_label(Param p) {
  switch (p) {
    case Param::Gamma: return "dephasing gamma [E]";
    case Param::Mu: return "background decay mu [E]";
    case Param::GammaS: return "extraction Gamma_s [E]";
    case Param::J: return "hopping J [E]";
    case Param::L: return "linear size L";
  }
  return "";
}

inline bool axis_is_log(const SweepAxis& a) {
  if (a.param == Param::L) return false;
  if (a.spacing == "log") return true;
  if (a.spacing == "linear") return false;
  const auto [lo, hi] = std::minmax_element(a.values.begin(), a.values.end());
  return *lo > 0 && *hi / *lo > 100.0;
}

inline std::vector<Chart> sweep_charts(const ExperimentConfig& c, const std::vector<Point>& pts,
                                       const std::vector<Record>& recs) {
  const auto& xa = c.axes[0];
  const std::size_t n0 = xa.values.size();
  const std::size_t groups = c.axes.size() > 1 ? c.axes[1].values.size() : 1;
  Chart eta{c.name + ": efficiency", axis_label(xa.param), "eta", axis_is_log(xa), false, {}, {}};
  Chart tau{c.name + ": transfer time", axis_label(xa.param), "tau [hbar/E]", axis_is_log(xa), std::nullopt, {}, {}};

  struct Q {
    SolverKind solver;
    std::string name;
    std::optional<double> Record::*field;
    std::string dash;
    bool line;
    bool is_tau;
  };
  const std::vector<Q> qs = {
      {SolverKind::GF, "GF eta", &Record::eta, "", true, false},
      {SolverKind::MCWF, "MCWF eta", &Record::eta, "", false, false},
      {SolverKind::Bounds, "eta_abs", &Record::eta_abs, "2,3", true, false},
      {SolverKind::Bounds, "eta_coh", &Record::eta_coh, "7,3", true, false},
      {SolverKind::Bounds, "eta_incoh", &Record::eta_incoh, "9,3,2,3", true, false},
      {SolverKind::OneD, "1d eta_coh", &Record::eta_coh, "4,2", true, false},
      {SolverKind::OneD, "1d eta_incoh", &Record::eta_incoh, "12,3", true, false},
      {SolverKind::GF, "GF tau", &Record::tau, "", true, true},
      {SolverKind::MCWF, "MCWF tau", &Record::tau, "", false, true},
      {SolverKind::Bounds, "tau lower bound", &Record::tau_lower, "2,3", true, true},
  };
  const std::size_t ns = c.solvers.size();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::string suffix = groups > 1 ? " (" + group_label(c.axes[1].param, c.axes[1].values[g]) + ")" : "";
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      const auto& q = qs[qi];
      const auto si = std::find(c.solvers.begin(), c.solvers.end(), q.solver) - c.solvers.begin();
      if (std::size_t(si) == ns) continue;
      Series s{q.name + suffix, {}, {}, palette(groups > 1 ? g : qi % 7), q.dash, q.dash.empty(), q.line};
      for (std::size_t i = 0; i < n0; ++i) {
        const auto& r = recs[(g * n0 + i) * ns + std::size_t(si)];
        if (!r.error.empty() || !(r.*q.field)) continue;
        s.x.push_back(c.axes[0].values[i]);
        s.y.push_back(*(r.*q.field));
      }
      if (s.x.empty()) continue;
      (q.is_tau ? tau : eta).series.push_back(std::move(s));
    }
    // crossing and length-scale markers
    if (xa.param == Param::Gamma) {
      for (SolverKind sk : {SolverKind::Bounds, SolverKind::OneD}) {
        const auto si = std::find(c.solvers.begin(), c.solvers.end(), sk) - c.solvers.begin();
        if (std::size_t(si) == ns) continue;
        const auto& r = recs[(g * n0) * ns + std::size_t(si)];
        if (r.gamma0) eta.vlines.push_back({*r.gamma0, "gamma0" + suffix, palette(g)});
      }
    }
    if (xa.param == Param::Mu) {
      const auto& p = pts[g * n0];
      const double mu_edge = p.rates.J / p.lattice.L;  // L_abs = J/mu = L
      bool seen = false;
      for (const auto& v : eta.vlines) seen = seen || v.x == mu_edge;
      if (!seen) eta.vlines.push_back({mu_edge, "L_abs = L", "#555555"});
    }
  }
  std::vector<Chart> out{eta};
  if (!tau.series.empty()) out.push_back(tau);
  return out;
}

// ---------------------------------------------------------------------------
// optimal dephasing analysis

struct OptimalRow {
  std::optional<double> group;
  int L = 0;
  double mu = 0, gamma_s = 0, J = 1;
  double gamma_opt_grid = 0, gamma_opt = 0, eta_max = 0;
  std::optional<double> gamma0_bounds, gamma0_equation, gamma0_equation_exact, gamma0_asymptote;
  std::vector<std::string> flags;
};

inline bool is_open_centre_chain(const LatticeSpec& s) {
  return s.dims == Dimension::One && s.hopping == HoppingModel::NearestNeighbor && s.boundary == Boundary::Open &&
         s.sink_index() == s.center_site();
}

inline std::vector<OptimalRow> optimal_gamma(const ExperimentConfig& c, const std::vector<Point>& pts,
                                             const std::vector<Record>& recs) {
  const std::size_t gi = std::size_t(std::find_if(c.axes.begin(), c.axes.end(),
                                                  [](const SweepAxis& a) { return a.param == Param::Gamma; }) -
                                     c.axes.begin());
  const std::size_t oi = 1 - gi;
  const bool two = c.axes.size() > 1;
  const std::size_t n0 = c.axes[0].values.size();
  const std::size_t ng = c.axes[gi].values.size();
  const std::size_t groups = two ? c.axes[oi].values.size() : 1;
  const std::size_t ns = c.solvers.size();
  const std::size_t gf = std::size_t(std::find(c.solvers.begin(), c.solvers.end(), SolverKind::GF) - c.solvers.begin());

  std::vector<OptimalRow> rows(groups);
  parallel_for(groups, worker_count(c.workers), [&](std::size_t g) {
    auto point_index = [&](std::size_t k) { return gi == 0 ? g * n0 + k : k * n0 + g; };
    OptimalRow& row = rows[g];
    const Point& p0 = pts[point_index(0)];
    if (two) row.group = c.axes[oi].values[g];
    row.L = p0.lattice.L;
    row.mu = p0.rates.mu;
    row.gamma_s = p0.rates.gamma_s;
    row.J = p0.rates.J;

    std::size_t best = ng;
    double best_eta = -1;
    for (std::size_t k = 0; k < ng; ++k) {
      const auto& r = recs[point_index(k) * ns + gf];
      if (r.error.empty() && r.eta && *r.eta > best_eta) {
        best_eta = *r.eta;
        best = k;
      }
    }
    if (best == ng) {
      row.flags.push_back("no_gf_data");
      return;
    }
    const auto& gv = c.axes[gi].values;
    row.gamma_opt_grid = gv[best];
    row.gamma_opt = gv[best];
    row.eta_max = best_eta;
    GfOptions opt = c.gf;
    opt.compute_tau = false;
    auto eta_at = [&](double g) { return efficiency_gf(p0.lattice, p0.rates.with_gamma(g), opt).eta; };
    if (best == 0 || best + 1 == ng) {
      row.flags.push_back("argmax_at_grid_edge");
    } else {
      // golden-section refinement between the neighbouring grid points
      const bool lg = gv[best - 1] > 0;
      auto to = [&](double g) { return lg ? std::log(g) : g; };
      auto from = [&](double u) { return lg ? std::exp(u) : u; };
      double a = to(gv[best - 1]), b = to(gv[best + 1]);
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
      double f1 = eta_at(from(x1)), f2 = eta_at(from(x2));
      for (int it = 0; it < 60 && (b - a) > 1e-6 * std::max(1.0, std::abs(a)); ++it) {
        if (f1 > f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - phi * (b - a);
          f1 = eta_at(from(x1));
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + phi * (b - a);
          f2 = eta_at(from(x2));
        }
      }
      const double u = 0.5 * (a + b);
      const double fu = eta_at(from(u));
      if (fu >= best_eta) {
        row.gamma_opt = from(u);
        row.eta_max = fu;
      }
    }
    if (row.mu > 0) {
      try {
        row.gamma0_bounds = BoundCalculator(p0.lattice, row.J).find_gamma0(p0.rates);
      } catch (const BracketError&) {
        row.flags.push_back("gamma0_bracket_error");
      }
      if (is_open_centre_chain(p0.lattice)) {
        row.gamma0_equation = enaqt::gamma0_equation(row.L, row.mu, row.gamma_s, row.J, ResolventForm::SmallMu);
        if (row.L % 2 == 1)
          row.gamma0_equation_exact = enaqt::gamma0_equation(row.L, row.mu, row.gamma_s, row.J, ResolventForm::Exact);
        row.gamma0_asymptote = enaqt::gamma0_asymptote(row.L, row.mu, row.J);
      }
    }
  });
  return rows;
}

inline std::string optimal_csv(const ExperimentConfig& c, const std::vector<OptimalRow>& rows) {
  std::optional<Param> group;
  for (const auto& a : c.axes)
    if (a.param != Param::Gamma && a.param != Param::L) group = a.param;
  std::vector<std::string> head = {"L", "J[E]", "mu[E]", "gamma_s[E]", "gamma_opt_grid[E]", "gamma_opt[E]",
                                   "eta_max[1]", "gamma0_bounds[E]", "gamma0_equation[E]",
                                   "gamma0_equation_exact[E]", "gamma0_asymptote[E]", "flags"};
  if (group) head.insert(head.begin(), to_string(*group) + "[E]");
  std::string out = csv_line(head);
  for (const auto& r : rows) {
    std::vector<std::string> cells = {std::to_string(r.L), fmt(r.J), fmt(r.mu), fmt(r.gamma_s),
                                      fmt(r.gamma_opt_grid), fmt(r.gamma_opt), fmt(r.eta_max),
                                      fmt(r.gamma0_bounds), fmt(r.gamma0_equation), fmt(r.gamma0_equation_exact),
                                      fmt(r.gamma0_asymptote), join(r.flags, ";")};
    if (group) cells.insert(cells.begin(), fmt(r.group));
    out += csv_line(cells);
  }
  return out;
}

inline Chart optimal_chart(const ExperimentConfig& c, const std::vector<OptimalRow>& rows) {
  const SweepAxis* other = nullptr;
  for (const auto& a : c.axes)
    if (a.param != Param::Gamma) other = &a;
  Chart ch{c.name + ": optimal dephasing", other ? axis_label(other->param) : "", "gamma [E]",
           other ? axis_is_log(*other) : false, true, {}, {}};
  Series opt{"gamma_opt (GF argmax)", {}, {}, palette(0), "", true, false};
  Series bnd{"gamma0 (bound crossing)", {}, {}, palette(2), "7,3", true, true};
  Series eq{"gamma0 (1d equation)", {}, {}, palette(3), "", true, false};
  Series asym{"5J/L - mu", {}, {}, palette(4), "2,3", false, true};
  for (const auto& r : rows) {
    const double x = r.group.value_or(r.L);
    opt.x.push_back(x);
    opt.y.push_back(r.gamma_opt);
    if (r.gamma0_bounds) {
      bnd.x.push_back(x);
      bnd.y.push_back(*r.gamma0_bounds);
    }
    if (r.gamma0_equation) {
      eq.x.push_back(x);
      eq.y.push_back(*r.gamma0_equation);
    }
    if (r.gamma0_asymptote && *r.gamma0_asymptote > 0) {
      asym.x.push_back(x);
      asym.y.push_back(*r.gamma0_asymptote);
    }
  }
  for (auto* s : {&opt, &bnd, &eq, &asym})
    if (!s->x.empty()) ch.series.push_back(*s);
  // first L without a crossing
  if (other && other->param == Param::L)
    for (const auto& r : rows)
      if (!r.gamma0_equation && r.gamma0_asymptote) {
        ch.vlines.push_back({double(r.L), "no gamma0 root", "#d62728"});
        break;
      }
  return ch;
}

// ---------------------------------------------------------------------------
// verbs

struct RunSummary {
  std::string directory;
  std::size_t records = 0, failures = 0;
};

inline void write_charts(const std::string& dir, const std::string& stem, const std::vector<Chart>& charts,
                         const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < charts.size(); ++i)
    write_text((fs::path(dir) / (stem + "_" + names[i] + ".svg")).string(), render_svg(charts[i]));
}

inline RunSummary run_experiment(const ExperimentConfig& c, const std::string& out_override = "",
                                 const std::string& verb = "run") {
  RunClock clock;
  const auto pts = make_points(c);
  const auto recs = run_sweep(c, pts);
  RunSummary sum;
  sum.directory = resolve_output_dir(c, out_override);
  fs::create_directories(sum.directory);
  const fs::path dir(sum.directory);
  if (c.formats.count("csv")) write_text((dir / (c.name + ".csv")).string(), records_csv(recs));
  if (c.formats.count("json")) write_text((dir / (c.name + ".json")).string(), records_json(c, recs).dump(2) + "\n");
  if (c.formats.count("svg")) {
    const auto charts = sweep_charts(c, pts, recs);
    write_charts(sum.directory, c.name, charts, {"eta", "tau"});
  }
  for (const auto& an : c.analyses) {
    if (an != "optimal_gamma") continue;
    const auto rows = optimal_gamma(c, pts, recs);
    if (c.formats.count("csv") || c.formats.count("json"))
      write_text((dir / (c.name + "_optimal.csv")).string(), optimal_csv(c, rows));
    if (c.formats.count("svg")) write_charts(sum.directory, c.name, {optimal_chart(c, rows)}, {"optimal"});
  }
  std::vector<double> walls;
  for (const auto& r : recs) walls.push_back(r.wall);
  write_text((dir / "meta.json").string(), meta_json(verb, c, clock, walls).dump(2) + "\n");
  sum.records = recs.size();
  for (const auto& r : recs) sum.failures += r.error.empty() ? 0 : 1;
  return sum;
}

// Dark-state census of H_nh for every case and lattice size.
struct CensusRow {
  std::string label;
  Boundary boundary = Boundary::Open;
  int L = 0, sites = 0, sink = 0;
  SpectrumCensus census;
};

inline std::vector<CensusRow> run_census(const ExperimentConfig& c) {
  std::vector<int> sizes{c.lattice.L};
  for (const auto& a : c.axes) {
    if (a.param != Param::L) throw ConfigError(c.source, 0, "census sweeps accept only an L axis");
    sizes.assign(a.values.begin(), a.values.end());
  }
  auto cases = c.census_cases;
  if (cases.empty()) cases.push_back({"default", std::nullopt, {0, 0}});
  const double gs = c.census_gamma_s.value_or(c.rates.gamma_s);
  std::vector<CensusRow> rows;
  std::vector<LatticeSpec> specs;
  for (const auto& cc : cases)
    for (int L : sizes) {
      LatticeSpec s = lattice_for(c, L);
      if (cc.boundary) s.boundary = *cc.boundary;
      if (cc.sink_offset[0] || cc.sink_offset[1]) {
        const auto xy = site_coordinates(s, s.sink_index());
        s.sink = site_index(s, xy[0] + cc.sink_offset[0], xy[1] + cc.sink_offset[1]);
      }
      validate(s);
      CensusRow row;
      row.label = cc.label;
      row.boundary = s.boundary;
      row.L = L;
      row.sites = s.site_count();
      row.sink = s.sink_index();
      rows.push_back(std::move(row));
      specs.push_back(s);
    }
  parallel_for(rows.size(), worker_count(c.workers), [&](std::size_t i) {
    rows[i].census = dark_census(build_hopping(specs[i], c.rates.J), specs[i].sink_index(), gs);
  });
  return rows;
}

inline RunSummary write_census(const ExperimentConfig& c, const std::vector<CensusRow>& rows,
                               const std::string& out_override, const RunClock& clock) {
  RunSummary sum;
  sum.directory = resolve_output_dir(c, out_override);
  fs::create_directories(sum.directory);
  const fs::path dir(sum.directory);
  const double gs = c.census_gamma_s.value_or(c.rates.gamma_s);
  std::string summary = csv_line({"case", "boundary", "L", "sites", "sink", "gamma_s[E]", "dark_threshold[E]",
                                  "dark_count", "dark_fraction[1]"});
  std::string spectrum = csv_line({"case", "L", "rank", "re[E]", "im[E]"});
  Chart ch{c.name + ": decay rates of H_nh (dark states omitted)", "rank / N", "-Im(lambda) [E]", false, true, {}, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    summary += csv_line({r.label, to_string(r.boundary), std::to_string(r.L), std::to_string(r.sites),
                         std::to_string(r.sink), fmt(gs), fmt(r.census.dark_threshold),
                         std::to_string(r.census.dark_count), fmt(r.census.dark_fraction())});
    Series s{r.label + " L=" + std::to_string(r.L), {}, {}, palette(i), "", false, true};
    const auto& ev = r.census.eigenvalues;
    for (std::size_t k = 0; k < ev.size(); ++k) {
      spectrum += csv_line({r.label, std::to_string(r.L), std::to_string(k), fmt(ev[k].real()), fmt(ev[k].imag())});
      s.x.push_back(double(k) / double(ev.size()));
      s.y.push_back(-ev[k].imag());
    }
    ch.series.push_back(std::move(s));
  }
  if (c.formats.count("csv") || c.formats.count("json")) {
    write_text((dir / (c.name + "_summary.csv")).string(), summary);
    write_text((dir / (c.name + "_spectrum.csv")).string(), spectrum);
  }
  if (c.formats.count("svg")) write_text((dir / (c.name + "_spectrum.svg")).string(), render_svg(ch));
  write_text((dir / "meta.json").string(), meta_json("census", c, clock, {}).dump(2) + "\n");
  sum.records = rows.size();
  return sum;
}

// ---------------------------------------------------------------------------
// invariant suite

struct InvariantResult {
  std::string name;
  std::size_t samples = 0, violations = 0;
  double max_residual = 0.0;
  double threshold = 0.0;
  std::string note;
  [[nodiscard]] bool pass() const { return samples > 0 && violations == 0; }
};

struct ValidateOptions {
  bool fast = false;
  std::uint64_t seed = 1;
  LatticeSpec lattice = LatticeSpec::square(5);
  unsigned workers = 0;
};

inline std::vector<InvariantResult> validate_suite(const ValidateOptions& o) {
  std::vector<InvariantResult> out;
  const auto spec = o.lattice;
  const std::vector<double> mus = o.fast ? std::vector<double>{1e-2} : std::vector<double>{1e-3, 1e-2, 1e-1};
  const std::vector<double> gss{0.1, 1.0, 10.0};
  std::vector<double> gammas;
  const int ng = o.fast ? 4 : 6;
  for (int k = 0; k < ng; ++k) gammas.push_back(std::pow(10.0, -3.0 + 5.0 * k / (ng - 1)));

  std::vector<RateSet> grid;
  for (double mu : mus)
    for (double gs : gss)
      for (double g : gammas) grid.push_back({1.0, mu, gs, g});
  Philox4x32 rng(o.seed, 0);
  const int nrand = o.fast ? 6 : 20;
  for (int k = 0; k < nrand; ++k) {
    const double mu = std::pow(10.0, -3.0 + 2.0 * rng.uniform());
    const double gs = std::pow(10.0, -1.0 + 2.0 * rng.uniform());
    const double g = std::pow(10.0, -3.0 + 5.0 * rng.uniform());
    grid.push_back({1.0, mu, gs, g});
  }

  BoundCalculator bc(spec);
  std::vector<TransportResult> gf(grid.size());
  std::vector<BoundReport> rep(grid.size());
  parallel_for(grid.size(), worker_count(o.workers), [&](std::size_t i) {
    gf[i] = efficiency_gf(spec, grid[i]);
    rep[i] = bc.report(grid[i], false);
  });

  {
    InvariantResult r{"conservation", grid.size(), 0, 0.0, 1e-8, "|eta + mu*int Tr p - 1|"};
    for (const auto& t : gf) {
      const double res = std::abs(t.eta + t.lost_fraction - 1.0);
      r.max_residual = std::max(r.max_residual, res);
      r.violations += res < r.threshold ? 0 : 1;
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"bound_dominance", grid.size(), 0, 0.0, 1e-9, "max(eta_GF - bound), eta_incoh - eta_abs"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double e = gf[i].eta;
      for (double v : {e - rep[i].eta_abs, e - rep[i].eta_coh, e - rep[i].eta_incoh, rep[i].eta_incoh - rep[i].eta_abs}) {
        r.max_residual = std::max(r.max_residual, v);
        r.violations += v <= r.threshold ? 0 : 1;
      }
    }
    r.max_residual = std::max(r.max_residual, 0.0);
    out.push_back(r);
  }
  {
    InvariantResult r{"derivative_identity", 0, 0, 0.0, 1e-3, "|tau - (-d ln eta / d mu)| / tau"};
    const std::size_t n = o.fast ? 4 : 10;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rt = grid[grid.size() - nrand + i % std::size_t(nrand)];
      const double d = tau_via_mu_derivative(spec, rt);
      const double tau = efficiency_gf(spec, rt).tau;
      const double res = std::abs(tau - d) / tau;
      ++r.samples;
      r.max_residual = std::max(r.max_residual, res);
      r.violations += res < r.threshold ? 0 : 1;
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"linear_solver_agreement", 0, 0, 0.0, 1e-10, "|eta_cholesky - eta_lu|"};
    for (std::size_t i = 0; i < grid.size(); i += o.fast ? 7 : 5) {
      GfOptions a, b;
      a.solver = LinearSolver::Cholesky;
      b.solver = LinearSolver::ComplexLU;
      const double res = std::abs(efficiency_gf(spec, grid[i], a).eta - efficiency_gf(spec, grid[i], b).eta);
      ++r.samples;
      r.max_residual = std::max(r.max_residual, res);
      r.violations += res < r.threshold ? 0 : 1;
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"gf_vs_mcwf", 0, 0, 0.0, 4.0, "max |eta_MCWF - eta_GF| / SE"};
    TrajectoryConfig tc;
    tc.n_traj = o.fast ? 1000 : 4000;
    tc.seed = o.seed;
    tc.integrator = Integrator::WaitingTime;
    tc.unravelling = Unravelling::SiteProjector;
    tc.threads = 1;
    std::vector<double> gs = o.fast ? std::vector<double>{1e-2, 1.0} : std::vector<double>{1e-2, 0.3, 10.0, 100.0};
    std::vector<double> z(gs.size());
    parallel_for(gs.size(), worker_count(o.workers), [&](std::size_t i) {
      const RateSet rt{1.0, 0.01, 1.0, gs[i]};
      TrajectoryConfig t = tc;
      t.t_final = 30.0 / rt.mu;
      const auto m = estimate_transport(spec, rt, t);
      const double g = efficiency_gf(spec, rt).eta;
      z[i] = std::abs(m.eta - g) / std::max(m.eta_se, 1.0 / double(t.n_traj));
    });
    for (double v : z) {
      ++r.samples;
      r.max_residual = std::max(r.max_residual, v);
      r.violations += v < r.threshold ? 0 : 1;
    }
    out.push_back(r);
  }
  {
    InvariantResult r{"closed_form_1d", 0, 0, 0.0, 1e-10, "|closed form - generic bound|"};
    const int Lmax = o.fast ? 7 : 11;
    for (int L = 3; L <= Lmax; L += 2) {
      BoundCalculator b1(LatticeSpec::chain(L));
      for (double mu : {1e-3, 1e-2, 0.1})
        for (double gs : {0.1, 1.0, 10.0})
          for (double g : {1e-2, 1.0, 100.0}) {
            const RateSet rt{1.0, mu, gs, g};
            const double d = std::max(std::abs(eta_coh_1d(L, rt) - b1.eta_coh(rt)),
                                      std::abs(eta_incoh_1d(L, rt) - b1.eta_incoh(rt)));
            ++r.samples;
            r.max_residual = std::max(r.max_residual, d);
            r.violations += d < r.threshold ? 0 : 1;
          }
    }
    out.push_back(r);
  }
  return out;
}

inline std::string validate_csv(const std::vector<InvariantResult>& res) {
  std::string out = csv_line({"invariant", "samples", "violations", "max_residual", "threshold", "pass", "measure"});
  for (const auto& r : res)
    out += csv_line({r.name, std::to_string(r.samples), std::to_string(r.violations), fmt(r.max_residual),
                     fmt(r.threshold), r.pass() ? "true" : "false", r.note});
  return out;
}

inline json validate_json(const std::vector<InvariantResult>& res) {
  json j = json::array();
  for (const auto& r : res)
    j.push_back({{"invariant", r.name},
                 {"samples", r.samples},
                 {"violations", r.violations},
                 {"max_residual", r.max_residual},
                 {"threshold", r.threshold},
                 {"pass", r.pass()},
                 {"measure", r.note}});
  return j;
}

}  // namespace enaqt::cli

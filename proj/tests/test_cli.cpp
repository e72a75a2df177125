#include <cstdlib>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "enaqt_cli/runner.hpp"

using namespace enaqt;
using namespace enaqt::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "name": "small",
  "lattice": {"dims": 2, "L": 3},
  "rates": {"J": 1, "mu": 0.05, "gamma_s": 1},
  "sweep": [
    {"param": "gamma", "spacing": "log", "min": 0.01, "max": 10, "points": 4},
    {"param": "gamma_s", "values": [0.5, 2]}
  ],
  "solver": ["gf", "mcwf", "bounds"],
  "mcwf": {"n_traj": 300, "seed": 7, "integrator": "waiting_time", "unravelling": "site_projector"}
})";

int line_of_error(const std::string& text) {
  try {
    (void)config_from_string(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("enaqt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(ENAQT_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(CliConfig, ParsesSweepAxes) {
  const auto c = config_from_string(kSmall);
  ASSERT_EQ(c.axes.size(), 2u);
  EXPECT_EQ(c.axes[0].param, Param::Gamma);
  ASSERT_EQ(c.axes[0].values.size(), 4u);
  EXPECT_EQ(c.axes[0].values.front(), 0.01);
  EXPECT_EQ(c.axes[0].values.back(), 10.0);
  EXPECT_NEAR(c.axes[0].values[1], 0.1, 1e-15);
  EXPECT_EQ(c.axes[1].values, (std::vector<double>{0.5, 2}));
  EXPECT_EQ(c.solvers.size(), 3u);
  EXPECT_EQ(c.mcwf.n_traj, 300u);
  EXPECT_EQ(c.mcwf.integrator, Integrator::WaitingTime);

  const auto pts = make_points(c);
  ASSERT_EQ(pts.size(), 8u);
  // first axis varies fastest
  EXPECT_EQ(pts[1].rates.gamma, c.axes[0].values[1]);
  EXPECT_EQ(pts[1].rates.gamma_s, 0.5);
  EXPECT_EQ(pts[4].rates.gamma_s, 2.0);
  EXPECT_EQ(pts[4].rates.mu, 0.05);
}

TEST(CliConfig, LinearAxisAndLSweep) {
  const auto c = config_from_string(R"({"lattice": {"dims": 1, "L": 5},
    "rates": {"mu": 0.1, "gamma_s": 0.1},
    "sweep": [{"param": "mu", "spacing": "linear", "min": 0.1, "max": 0.5, "points": 5},
              {"param": "L", "values": [3, 7]}],
    "solver": ["bounds", "oned"]})");
  EXPECT_NEAR(c.axes[0].values[2], 0.3, 1e-15);
  const auto pts = make_points(c);
  EXPECT_EQ(pts[7].lattice.L, 7);
  EXPECT_EQ(pts[7].lattice.sink_index(), 3);
}

TEST(CliConfig, PresetsParse) {
  for (const auto& e : fs::directory_iterator(fs::path(ENAQT_SOURCE_DIR) / "configs")) {
    SCOPED_TRACE(e.path().string());
    const bool census = e.path().stem().string().rfind("census", 0) == 0;
    EXPECT_NO_THROW((void)load_config(e.path().string(), !census));
  }
}

TEST(CliConfig, ErrorsCarryLineNumbers) {
  EXPECT_EQ(line_of_error("{\n  \"lattice\": {\"L\": 3},\n  \"sweep\": [{\"param\": \"gamma\", \"values\": [1]}],\n"
                          "  \"bogus\": 1\n}"),
            4);
  EXPECT_EQ(line_of_error("{\n  \"lattice\": {\n    \"L\": 3,\n    \"dims\": 4\n  }\n}"), 4);
  EXPECT_EQ(line_of_error("{\n  \"lattice\": {\"L\": 3},\n  \"rates\": {\"mu\": -1}\n}"), 3);
  // syntax error: missing comma
  EXPECT_EQ(line_of_error("{\n  \"lattice\": {\"L\": 3}\n  \"rates\": {}\n}"), 3);
  EXPECT_EQ(line_of_error("{\"lattice\": {\"L\": 3},\n \"sweep\": [\n  {\"param\": \"gamma\", \"values\": [1]},\n"
                          "  {\"param\": \"gamma\", \"values\": [2]}]}"),
            4);
  EXPECT_EQ(line_of_error("{\"lattice\": {\"L\": 3},\n\"sweep\": [{\"param\": \"gamma\",\n \"spacing\": \"log\", "
                          "\"min\": 0, \"max\": 1, \"points\": 3}]}"),
            3);
}

TEST(CliConfig, RejectsInapplicableSetups) {
  auto bad = [](const std::string& s) {
    EXPECT_THROW((void)config_from_string(s), ConfigError) << s;
  };
  // no sweep / three axes
  bad(R"({"lattice": {"L": 3}})");
  bad(R"({"lattice": {"L": 3}, "sweep": [{"param": "gamma", "values": [1]}, {"param": "mu", "values": [1]},
         {"param": "gamma_s", "values": [1]}]})");
  // closed forms on a 2D lattice, on an even chain with the exact resolvent
  bad(R"({"lattice": {"L": 3}, "rates": {"mu": 0.1}, "sweep": [{"param": "gamma", "values": [1]}], "solver": "oned"})");
  bad(R"({"lattice": {"dims": 1, "L": 4}, "rates": {"mu": 0.1}, "sweep": [{"param": "gamma", "values": [1]}],
         "solver": "oned", "oned": {"form": "exact"}})");
  // bounds without background loss
  bad(R"({"lattice": {"L": 3}, "rates": {"mu": 0}, "sweep": [{"param": "gamma", "values": [1]}], "solver": "bounds"})");
  // Euler integrator with the site-projector unravelling
  bad(R"({"lattice": {"L": 3}, "sweep": [{"param": "gamma", "values": [1]}],
         "mcwf": {"integrator": "euler", "unravelling": "site_projector"}})");
  bad(R"({"lattice": {"L": 3, "sink": 9}, "sweep": [{"param": "gamma", "values": [1]}]})");
  bad(R"({"lattice": {"L": 3}, "sweep": [{"param": "gamma", "values": [1]}], "solver": "magic"})");
}

TEST(CliOutput, FloatsRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int k = 0; k < 2000; ++k) {
    const double x = std::pow(10.0, u(rng)) * (k % 2 ? -1 : 1);
    EXPECT_EQ(std::stod(fmt(x)), x);
  }
  EXPECT_EQ(fmt(0.1), "0.1");
  EXPECT_EQ(fmt(std::optional<double>{}), "");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
}

TEST(CliOutput, SvgIsWellFormed) {
  Chart c{"t", "x", "y", true, std::nullopt, {}, {}};
  c.series.push_back({"a<b", {1e-3, 1, 10}, {0.1, 0.5, 0.2}, palette(0), "", true, true});
  c.vlines.push_back({0.3, "marker"});
  const auto s = render_svg(c);
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(s.find("a&lt;b"), std::string::npos);
  EXPECT_NE(s.find("stroke-dasharray"), std::string::npos);
}

TEST(CliRun, RecordsMatchLibraryAndAreDeterministic) {
  auto c = config_from_string(kSmall);
  const auto pts = make_points(c);
  c.workers = 1;
  const auto a = run_sweep(c, pts);
  c.workers = 3;
  const auto b = run_sweep(c, pts);
  EXPECT_EQ(records_csv(a), records_csv(b));
  ASSERT_EQ(a.size(), 24u);
  const auto direct = efficiency_gf(pts[2].lattice, pts[2].rates);
  EXPECT_EQ(*a[6].eta, direct.eta);
  EXPECT_EQ(a[7].solver, SolverKind::MCWF);
  EXPECT_TRUE(a[7].eta_se.has_value());
  EXPECT_TRUE(a[8].eta_coh.has_value());
  const auto csv = records_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "point,L,sites,J[E],mu[E],gamma_s[E],gamma[E],solver,eta[1],eta_se[1],tau[hbar/E],tau_se[hbar/E],"
            "lost[1],eta_abs[1],eta_coh[1],eta_incoh[1],eta_min[1],gamma0[E],tau_lower[hbar/E],status,flags,error");
}

TEST(CliRun, SolverErrorsAreRecordedPerPoint) {
  // no loss and no dephasing traps the dark states at gamma = 0
  const auto c = config_from_string(R"({"lattice": {"dims": 1, "L": 5},
    "rates": {"mu": 0, "gamma_s": 1}, "sweep": [{"param": "gamma", "values": [0, 1]}], "gf": {"tau": false}})");
  const auto recs = run_sweep(c, make_points(c));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_NE(recs[0].error.find("non_decaying_subspace"), std::string::npos);
  EXPECT_TRUE(recs[1].error.empty());
  EXPECT_NEAR(*recs[1].eta, 1.0, 1e-9);
}

TEST(CliRun, OptimalGammaAnalysis) {
  const auto c = config_from_string(R"({"lattice": {"dims": 1, "L": 11},
    "rates": {"mu": 0.1, "gamma_s": 0.1},
    "sweep": [{"param": "gamma", "spacing": "log", "min": 1e-3, "max": 10, "points": 17}],
    "solver": "gf", "gf": {"tau": false}, "analysis": ["optimal_gamma"]})");
  const auto pts = make_points(c);
  const auto rows = optimal_gamma(c, pts, run_sweep(c, pts));
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  EXPECT_TRUE(r.flags.empty());
  // refined maximum beats the grid and is a stationary point
  const auto eta = [&](double g) { return efficiency_gf(pts[0].lattice, pts[0].rates.with_gamma(g)).eta; };
  EXPECT_GE(r.eta_max, eta(r.gamma_opt_grid));
  EXPECT_GE(r.eta_max, eta(r.gamma_opt * 1.01) - 1e-12);
  EXPECT_GE(r.eta_max, eta(r.gamma_opt / 1.01) - 1e-12);
  ASSERT_TRUE(r.gamma0_equation && r.gamma0_equation_exact && r.gamma0_bounds);
  EXPECT_NEAR(*r.gamma0_equation_exact, *r.gamma0_bounds, 1e-6 * *r.gamma0_bounds);
}

TEST(CliBinary, ExitCodes) {
  const auto dir = scratch("codes");
  const auto good = dir / "good.json";
  write_text(good.string(), kSmall);
  const auto broken = dir / "broken.json";
  write_text(broken.string(), "{\"lattice\": {\"L\": 3},\n \"sweep\": [}");
  const auto trapped = dir / "trapped.json";
  write_text(trapped.string(), R"({"lattice": {"dims": 1, "L": 5}, "rates": {"mu": 0, "gamma_s": 1},
    "sweep": [{"param": "gamma", "values": [0, 1]}]})");

  EXPECT_EQ(run_cli("run " + good.string() + " -o " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "small.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "small.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "small_eta.svg"));
  EXPECT_TRUE(fs::exists(dir / "out" / "meta.json"));
  EXPECT_EQ(run_cli("run " + broken.string()), 1);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("run " + trapped.string() + " -o " + (dir / "trap").string()), 3);
  EXPECT_NE(slurp(dir / "trap" / "trapped.csv").find("non_decaying_subspace"), std::string::npos);
  EXPECT_EQ(run_cli("bounds " + good.string() + " -o " + (dir / "bnd").string()), 0);
  EXPECT_EQ(slurp(dir / "bnd" / "small.csv").find(",gf,"), std::string::npos);
}

TEST(CliBinary, RepeatedRunsAreByteIdentical) {
  const auto dir = scratch("repeat");
  const auto cfg = dir / "small.json";
  write_text(cfg.string(), kSmall);
  ASSERT_EQ(run_cli("run " + cfg.string() + " -j 1 -o " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("run " + cfg.string() + " -j 4 -o " + (dir / "b").string()), 0);
  for (const char* f : {"small.csv", "small.json", "small_eta.svg", "small_tau.svg"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_NE(slurp(dir / "a" / "meta.json").find("started_utc"), std::string::npos);
}

TEST(CliBinary, OutputDirectoryFromEnvironment) {
  const auto dir = scratch("env");
  const auto cfg = dir / "small.json";
  write_text(cfg.string(), kSmall);
  const std::string cmd = "ENAQT_OUTPUT_DIR=" + (dir / "envout").string() + " " + ENAQT_CLI_PATH + " bounds " +
                          cfg.string() + " >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "envout" / "small" / "small.csv"));
}

TEST(CliBinary, ValidateFastPassesAndIsDeterministic) {
  const auto dir = scratch("validate");
  ASSERT_EQ(run_cli("validate --fast -o " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("validate --fast -o " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "validate.csv"), slurp(dir / "b" / "validate.csv"));
  EXPECT_EQ(slurp(dir / "a" / "validate.csv").find(",false,"), std::string::npos);
}

TEST(CliBinary, CensusWritesSummary) {
  const auto dir = scratch("census");
  const auto cfg = dir / "c.json";
  write_text(cfg.string(), R"({"name": "c", "lattice": {"dims": 1, "L": 5, "hopping": "nearest_neighbor"},
    "rates": {"gamma_s": 1}, "census": {"cases": [{"label": "mid"}, {"label": "off", "sink_offset": [1, 0]}]}})");
  ASSERT_EQ(run_cli("census " + cfg.string() + " -o " + (dir / "out").string()), 0);
  const auto s = slurp(dir / "out" / "c_summary.csv");
  EXPECT_NE(s.find("mid,open,5,5,2,1,"), std::string::npos);
  EXPECT_NE(s.find(",2,0.4\n"), std::string::npos);  // centre of a 5-chain: 2 dark states
}

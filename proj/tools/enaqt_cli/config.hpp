#pragma once

// Experiment configuration: JSON file -> ExperimentConfig.
// Every value remembers the line it was read from so that validation errors
// point at the offending line.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "enaqt/enaqt.hpp"

namespace enaqt::cli {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, int line, const std::string& msg)
      : std::runtime_error(format(where, line, msg)), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  static std::string format(const std::string& where, int line, const std::string& msg) {
    std::string s = where.empty() ? "config" : where;
    if (line > 0) s += ":" + std::to_string(line);
    return s + ": " + msg;
  }
  int line_;
};

enum class SolverKind { GF, MCWF, Bounds, OneD };

inline std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::GF: return "gf";
    case SolverKind::MCWF: return "mcwf";
    case SolverKind::Bounds: return "bounds";
    case SolverKind::OneD: return "oned";
  }
  return "?";
}

enum class Param { J, Mu, GammaS, Gamma, L };

inline std::string to_string(Param p) {
  switch (p) {
    case Param::J: return "J";
    case Param::Mu: return "mu";
    case Param::GammaS: return "gamma_s";
    case Param::Gamma: return "gamma";
    case Param::L: return "L";
  }
  return "?";
}

struct SweepAxis {
  Param param = Param::Gamma;
  std::string spacing = "values";  // log | linear | values
  std::vector<double> values;
};

struct CensusCase {
  std::string label;
  std::optional<Boundary> boundary;
  std::array<int, 2> sink_offset{0, 0};
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string source;  // file the config came from
  LatticeSpec lattice = LatticeSpec::square(5);
  std::optional<std::array<int, 2>> sink_xy;  // sink given by coordinates
  RateSet rates{1.0, 0.01, 1.0, 0.0};
  std::vector<SweepAxis> axes;
  std::vector<SolverKind> solvers{SolverKind::GF};

  GfOptions gf;
  TrajectoryConfig mcwf;
  bool bounds_gamma0 = true;
  ResolventForm oned_form = ResolventForm::SmallMu;

  std::vector<std::string> analyses;
  std::vector<CensusCase> census_cases;
  std::optional<double> census_gamma_s;

  std::string output_dir;  // empty: derived from env / name
  std::set<std::string> formats{"csv", "json", "svg"};
  unsigned workers = 0;

  [[nodiscard]] bool has(SolverKind s) const {
    return std::find(solvers.begin(), solvers.end(), s) != solvers.end();
  }
  [[nodiscard]] const SweepAxis* axis(Param p) const {
    for (const auto& a : axes)
      if (a.param == p) return &a;
    return nullptr;
  }
};

namespace detail {

// Input iterator over a string that counts the newlines it walks past.
class LineCountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  LineCountingIterator(const char* p, int* line) : p_(p), line_(line) {}
  reference operator*() const { return *p_; }
  LineCountingIterator& operator++() {
    if (*p_ == '\n') ++*line_;
    ++p_;
    return *this;
  }
  LineCountingIterator operator++(int) {
    auto t = *this;
    ++*this;
    return t;
  }
  bool operator==(const LineCountingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const LineCountingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_;
  int* line_;
};

// SAX consumer that records the line of every JSON pointer.
class LineRecorder : public nlohmann::json_sax<json> {
 public:
  explicit LineRecorder(const int* line) : line_(line) {}
  std::map<std::string, int> lines;
  std::size_t error_position = 0;
  std::string error_message;

  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override {
    value();
    stack_.push_back({false, 0, ""});
    return true;
  }
  bool key(string_t& k) override {
    stack_.back().key = k;
    lines[pointer()] = *line_ + 1;
    return true;
  }
  bool end_object() override {
    stack_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    value();
    stack_.push_back({true, 0, ""});
    return true;
  }
  bool end_array() override {
    stack_.pop_back();
    return true;
  }
  bool parse_error(std::size_t pos, const std::string&, const nlohmann::detail::exception& ex) override {
    error_position = pos;
    error_message = ex.what();
    return false;
  }

 private:
  struct Frame {
    bool array;
    std::size_t count;  // elements started so far (arrays)
    std::string key;
  };

  bool value() {
    if (!stack_.empty() && stack_.back().array) {
      ++stack_.back().count;
      lines[pointer()] = *line_ + 1;
    }
    return true;
  }
  std::string pointer() const {
    std::string p;
    for (const auto& f : stack_) p += "/" + (f.array ? std::to_string(f.count - 1) : f.key);
    return p;
  }

  const int* line_;
  std::vector<Frame> stack_;
};

}  // namespace detail

// Parsed document plus the line table used for diagnostics.
class ConfigDocument {
 public:
  ConfigDocument(const std::string& text, std::string where) : where_(std::move(where)) {
    int line = 0;
    detail::LineRecorder rec(&line);
    detail::LineCountingIterator first(text.data(), &line), last(text.data() + text.size(), &line);
    if (!json::sax_parse(first, last, &rec)) {
      int err_line = 1;
      for (std::size_t i = 0; i + 1 < rec.error_position && i < text.size(); ++i)
        err_line += text[i] == '\n' ? 1 : 0;
      std::string msg = rec.error_message;
      if (auto p = msg.find("]: "); p != std::string::npos) msg = msg.substr(p + 3);
      throw ConfigError(where_, err_line, "JSON syntax error: " + msg);
    }
    lines_ = std::move(rec.lines);
    root_ = json::parse(text);
    if (!root_.is_object()) throw ConfigError(where_, 1, "top level must be an object");
  }

  [[nodiscard]] const json& root() const { return root_; }
  [[nodiscard]] const std::string& where() const { return where_; }

  [[nodiscard]] int line_of(std::string ptr) const {
    for (;;) {
      if (auto it = lines_.find(ptr); it != lines_.end()) return it->second;
      const auto p = ptr.rfind('/');
      if (p == std::string::npos || ptr.empty()) return 0;
      ptr = ptr.substr(0, p);
    }
  }

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ConfigError(where_, line_of(ptr), (ptr.empty() ? "" : ptr + ": ") + msg);
  }

 private:
  std::string where_;
  std::map<std::string, int> lines_;
  json root_;
};

namespace detail {

class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  void only_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) doc_.fail(ptr, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* allowed : keys) ok = ok || k == allowed;
      if (!ok) {
        std::string list;
        for (const char* allowed : keys) list += std::string(list.empty() ? "" : ", ") + allowed;
        doc_.fail(ptr + "/" + k, "unknown key '" + k + "' (allowed: " + list + ")");
      }
    }
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) doc_.fail(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) doc_.fail(ptr, "number must be finite");
    return x;
  }
  double nonneg(const json& v, const std::string& ptr) const {
    const double x = number(v, ptr);
    if (x < 0.0) doc_.fail(ptr, "must be >= 0");
    return x;
  }
  std::int64_t integer(const json& v, const std::string& ptr) const {
    if (!v.is_number_integer()) doc_.fail(ptr, "expected an integer");
    return v.get<std::int64_t>();
  }
  std::string str(const json& v, const std::string& ptr) const {
    if (!v.is_string()) doc_.fail(ptr, "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const json& v, const std::string& ptr) const {
    if (!v.is_boolean()) doc_.fail(ptr, "expected true or false");
    return v.get<bool>();
  }
  template <typename E>
  E choice(const json& v, const std::string& ptr, std::initializer_list<std::pair<const char*, E>> opts) const {
    const std::string s = str(v, ptr);
    std::string list;
    for (const auto& [name, e] : opts) {
      if (s == name) return e;
      list += std::string(list.empty() ? "" : ", ") + name;
    }
    doc_.fail(ptr, "'" + s + "' is not one of: " + list);
  }

  const ConfigDocument& doc() const { return doc_; }

 private:
  const ConfigDocument& doc_;
};

inline std::vector<double> axis_values(const Reader& r, const json& a, const std::string& ptr, Param p,
                                       std::string& spacing) {
  std::vector<double> out;
  if (a.contains("values")) {
    if (a.contains("min") || a.contains("max") || a.contains("points") || a.contains("spacing"))
      r.doc().fail(ptr, "give either 'values' or 'spacing/min/max/points', not both");
    const auto& vs = a["values"];
    if (!vs.is_array() || vs.empty()) r.doc().fail(ptr + "/values", "expected a non-empty array");
    for (std::size_t i = 0; i < vs.size(); ++i) out.push_back(r.number(vs[i], ptr + "/values/" + std::to_string(i)));
    spacing = "values";
  } else {
    for (const char* k : {"spacing", "min", "max", "points"})
      if (!a.contains(k)) r.doc().fail(ptr, std::string("missing '") + k + "'");
    spacing = r.str(a["spacing"], ptr + "/spacing");
    const double lo = r.number(a["min"], ptr + "/min"), hi = r.number(a["max"], ptr + "/max");
    const auto n = r.integer(a["points"], ptr + "/points");
    if (n < 2 || n > 100000) r.doc().fail(ptr + "/points", "points must be in [2, 100000]");
    if (!(hi > lo)) r.doc().fail(ptr + "/max", "max must exceed min");
    if (spacing == "log") {
      if (!(lo > 0.0)) r.doc().fail(ptr + "/min", "log spacing needs min > 0");
      const double a0 = std::log10(lo), a1 = std::log10(hi);
      for (std::int64_t k = 0; k < n; ++k) out.push_back(std::pow(10.0, a0 + (a1 - a0) * double(k) / double(n - 1)));
      out.front() = lo;
      out.back() = hi;
    } else if (spacing == "linear") {
      for (std::int64_t k = 0; k < n; ++k) out.push_back(lo + (hi - lo) * double(k) / double(n - 1));
    } else {
      r.doc().fail(ptr + "/spacing", "spacing must be 'log' or 'linear'");
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::string vp = a.contains("values") ? ptr + "/values/" + std::to_string(i) : ptr;
    if (p == Param::L) {
      if (out[i] != std::floor(out[i]) || out[i] < 1) r.doc().fail(vp, "L values must be positive integers");
    } else if (p == Param::J) {
      if (!(out[i] > 0.0)) r.doc().fail(vp, "J must be positive");
    } else if (out[i] < 0.0) {
      r.doc().fail(vp, to_string(p) + " must be >= 0");
    }
  }
  return out;
}

}  // namespace detail

/// Builds and validates a configuration. Throws ConfigError with line numbers.
inline ExperimentConfig parse_config(const ConfigDocument& doc) {
  detail::Reader r(doc);
  const json& root = doc.root();
  r.only_keys(root, "", {"name", "description", "lattice", "rates", "sweep", "solver", "gf", "mcwf", "bounds",
                         "oned", "analysis", "census", "output"});
  ExperimentConfig c;
  c.source = doc.where();
  if (root.contains("name")) {
    c.name = r.str(root["name"], "/name");
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
      doc.fail("/name", "name must be a non-empty file-name-safe string");
  } else if (!doc.where().empty()) {
    c.name = std::filesystem::path(doc.where()).stem().string();
  }
  if (root.contains("description")) (void)r.str(root["description"], "/description");

  // lattice
  if (!root.contains("lattice")) doc.fail("", "missing 'lattice' block");
  {
    const auto& l = root["lattice"];
    const std::string p = "/lattice";
    r.only_keys(l, p, {"dims", "L", "boundary", "hopping", "alpha", "lattice_constant", "sink"});
    const auto dims = l.contains("dims") ? r.integer(l["dims"], p + "/dims") : 2;
    if (dims != 1 && dims != 2) doc.fail(p + "/dims", "dims must be 1 or 2");
    c.lattice.dims = dims == 1 ? Dimension::One : Dimension::Two;
    c.lattice.hopping = dims == 1 ? HoppingModel::NearestNeighbor : HoppingModel::Dipolar;
    if (!l.contains("L")) doc.fail(p, "missing 'L'");
    const auto L = r.integer(l["L"], p + "/L");
    if (L < 2 || L > 100000) doc.fail(p + "/L", "L must be in [2, 100000]");
    c.lattice.L = int(L);
    if (l.contains("boundary"))
      c.lattice.boundary = r.choice<Boundary>(l["boundary"], p + "/boundary",
                                              {{"open", Boundary::Open}, {"periodic", Boundary::Periodic}});
    if (l.contains("hopping"))
      c.lattice.hopping = r.choice<HoppingModel>(
          l["hopping"], p + "/hopping",
          {{"dipolar", HoppingModel::Dipolar}, {"nearest_neighbor", HoppingModel::NearestNeighbor}});
    if (l.contains("alpha")) c.lattice.alpha = r.number(l["alpha"], p + "/alpha");
    if (l.contains("lattice_constant")) c.lattice.lattice_constant = r.number(l["lattice_constant"], p + "/lattice_constant");
    if (l.contains("sink")) {
      const auto& s = l["sink"];
      if (s.is_string()) {
        if (s.get<std::string>() != "center") doc.fail(p + "/sink", "sink must be \"center\", a site index or [x, y]");
      } else if (s.is_array()) {
        if (s.size() != 2) doc.fail(p + "/sink", "sink coordinates must be [x, y]");
        c.sink_xy = {int(r.integer(s[0], p + "/sink/0")), int(r.integer(s[1], p + "/sink/1"))};
      } else {
        c.lattice.sink = int(r.integer(s, p + "/sink"));
      }
    }
    try {
      if (c.sink_xy) c.lattice.sink = site_index(c.lattice, (*c.sink_xy)[0], (*c.sink_xy)[1]);
      validate(c.lattice);
    } catch (const InvalidSpec& e) {
      doc.fail(p, e.what());
    }
  }

  // rates
  if (root.contains("rates")) {
    const auto& rt = root["rates"];
    r.only_keys(rt, "/rates", {"J", "mu", "gamma_s", "gamma"});
    if (rt.contains("J")) {
      c.rates.J = r.number(rt["J"], "/rates/J");
      if (!(c.rates.J > 0.0)) doc.fail("/rates/J", "J must be positive");
    }
    if (rt.contains("mu")) c.rates.mu = r.nonneg(rt["mu"], "/rates/mu");
    if (rt.contains("gamma_s")) c.rates.gamma_s = r.nonneg(rt["gamma_s"], "/rates/gamma_s");
    if (rt.contains("gamma")) c.rates.gamma = r.nonneg(rt["gamma"], "/rates/gamma");
  }

  // sweep axes
  if (root.contains("sweep")) {
    const auto& sw = root["sweep"];
    if (!sw.is_array()) doc.fail("/sweep", "sweep must be an array of axes");
    for (std::size_t i = 0; i < sw.size(); ++i) {
      const std::string p = "/sweep/" + std::to_string(i);
      r.only_keys(sw[i], p, {"param", "spacing", "min", "max", "points", "values"});
      if (!sw[i].contains("param")) doc.fail(p, "missing 'param'");
      SweepAxis a;
      a.param = r.choice<Param>(sw[i]["param"], p + "/param",
                                {{"gamma", Param::Gamma}, {"mu", Param::Mu}, {"gamma_s", Param::GammaS},
                                 {"J", Param::J}, {"L", Param::L}});
      if (c.axis(a.param)) doc.fail(p + "/param", "axis '" + to_string(a.param) + "' given twice");
      a.values = detail::axis_values(r, sw[i], p, a.param, a.spacing);
      c.axes.push_back(std::move(a));
    }
  }

  // solvers
  if (root.contains("solver")) {
    const auto& s = root["solver"];
    auto one = [&](const json& v, const std::string& p) {
      return r.choice<SolverKind>(v, p, {{"gf", SolverKind::GF}, {"mcwf", SolverKind::MCWF},
                                         {"bounds", SolverKind::Bounds}, {"oned", SolverKind::OneD}});
    };
    c.solvers.clear();
    if (s.is_string() && s.get<std::string>() == "all") {
      c.solvers = {SolverKind::GF, SolverKind::MCWF, SolverKind::Bounds};
      if (c.lattice.dims == Dimension::One && c.lattice.hopping == HoppingModel::NearestNeighbor &&
          c.lattice.boundary == Boundary::Open && !c.lattice.sink)
        c.solvers.push_back(SolverKind::OneD);
    } else if (s.is_string()) {
      c.solvers.push_back(one(s, "/solver"));
    } else if (s.is_array() && !s.empty()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto k = one(s[i], "/solver/" + std::to_string(i));
        if (c.has(k)) doc.fail("/solver/" + std::to_string(i), "solver listed twice");
        c.solvers.push_back(k);
      }
    } else {
      doc.fail("/solver", "solver must be a name, a list of names or \"all\"");
    }
  }

  if (root.contains("gf")) {
    const auto& g = root["gf"];
    r.only_keys(g, "/gf", {"linear_solver", "tau"});
    if (g.contains("linear_solver"))
      c.gf.solver = r.choice<LinearSolver>(g["linear_solver"], "/gf/linear_solver",
                                           {{"auto", LinearSolver::Auto}, {"cholesky", LinearSolver::Cholesky},
                                            {"lu", LinearSolver::ComplexLU}});
    if (g.contains("tau")) c.gf.compute_tau = r.boolean(g["tau"], "/gf/tau");
  }

  if (root.contains("mcwf")) {
    const auto& m = root["mcwf"];
    const std::string p = "/mcwf";
    r.only_keys(m, p, {"n_traj", "seed", "dt", "t_final", "integrator", "unravelling", "threads"});
    if (m.contains("n_traj")) {
      const auto n = r.integer(m["n_traj"], p + "/n_traj");
      if (n < 1) doc.fail(p + "/n_traj", "n_traj must be positive");
      c.mcwf.n_traj = std::uint64_t(n);
    }
    if (m.contains("seed")) {
      if (!m["seed"].is_number_unsigned()) doc.fail(p + "/seed", "seed must be a non-negative integer");
      c.mcwf.seed = m["seed"].get<std::uint64_t>();
    }
    for (const char* k : {"dt", "t_final"}) {
      if (!m.contains(k)) continue;
      double& dst = std::string(k) == "dt" ? c.mcwf.dt : c.mcwf.t_final;
      if (m[k].is_string() && m[k].get<std::string>() == "auto") {
        dst = 0.0;
      } else {
        dst = r.number(m[k], p + "/" + k);
        if (!(dst > 0.0)) doc.fail(p + "/" + k, std::string(k) + " must be positive or \"auto\"");
      }
    }
    if (m.contains("integrator"))
      c.mcwf.integrator = r.choice<Integrator>(m["integrator"], p + "/integrator",
                                               {{"euler", Integrator::Euler}, {"waiting_time", Integrator::WaitingTime}});
    if (m.contains("unravelling"))
      c.mcwf.unravelling = r.choice<Unravelling>(
          m["unravelling"], p + "/unravelling",
          {{"sigma_z", Unravelling::SigmaZ}, {"site_projector", Unravelling::SiteProjector}});
    if (m.contains("threads")) {
      const auto t = r.integer(m["threads"], p + "/threads");
      if (t < 0 || t > 4096) doc.fail(p + "/threads", "threads must be in [0, 4096]");
      c.mcwf.threads = unsigned(t);
    }
    if (c.mcwf.integrator == Integrator::Euler && c.mcwf.unravelling == Unravelling::SiteProjector)
      doc.fail(p + "/unravelling", "the Euler integrator supports only the sigma_z unravelling");
  }

  if (root.contains("bounds")) {
    r.only_keys(root["bounds"], "/bounds", {"gamma0"});
    if (root["bounds"].contains("gamma0")) c.bounds_gamma0 = r.boolean(root["bounds"]["gamma0"], "/bounds/gamma0");
  }
  if (root.contains("oned")) {
    r.only_keys(root["oned"], "/oned", {"form"});
    if (root["oned"].contains("form"))
      c.oned_form = r.choice<ResolventForm>(root["oned"]["form"], "/oned/form",
                                            {{"exact", ResolventForm::Exact}, {"small_mu", ResolventForm::SmallMu}});
  }

  if (root.contains("analysis")) {
    const auto& a = root["analysis"];
    if (!a.is_array()) doc.fail("/analysis", "analysis must be an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = "/analysis/" + std::to_string(i);
      const std::string s = r.str(a[i], p);
      if (s != "optimal_gamma") doc.fail(p, "unknown analysis '" + s + "' (available: optimal_gamma)");
      c.analyses.push_back(s);
    }
  }

  if (root.contains("census")) {
    const auto& cs = root["census"];
    r.only_keys(cs, "/census", {"gamma_s", "cases"});
    if (cs.contains("gamma_s")) c.census_gamma_s = r.nonneg(cs["gamma_s"], "/census/gamma_s");
    if (cs.contains("cases")) {
      const auto& cases = cs["cases"];
      if (!cases.is_array() || cases.empty()) doc.fail("/census/cases", "expected a non-empty array");
      for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string p = "/census/cases/" + std::to_string(i);
        r.only_keys(cases[i], p, {"label", "boundary", "sink_offset"});
        CensusCase cc;
        cc.label = cases[i].contains("label") ? r.str(cases[i]["label"], p + "/label") : "case" + std::to_string(i);
        if (cases[i].contains("boundary"))
          cc.boundary = r.choice<Boundary>(cases[i]["boundary"], p + "/boundary",
                                           {{"open", Boundary::Open}, {"periodic", Boundary::Periodic}});
        if (cases[i].contains("sink_offset")) {
          const auto& o = cases[i]["sink_offset"];
          if (!o.is_array() || o.size() != 2) doc.fail(p + "/sink_offset", "sink_offset must be [dx, dy]");
          cc.sink_offset = {int(r.integer(o[0], p + "/sink_offset/0")), int(r.integer(o[1], p + "/sink_offset/1"))};
        }
        c.census_cases.push_back(std::move(cc));
      }
    }
  }

  if (root.contains("output")) {
    const auto& o = root["output"];
    r.only_keys(o, "/output", {"directory", "formats", "workers"});
    if (o.contains("directory")) c.output_dir = r.str(o["directory"], "/output/directory");
    if (o.contains("formats")) {
      const auto& f = o["formats"];
      if (!f.is_array()) doc.fail("/output/formats", "formats must be an array");
      c.formats.clear();
      for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string p = "/output/formats/" + std::to_string(i);
        const std::string s = r.str(f[i], p);
        if (s != "csv" && s != "json" && s != "svg") doc.fail(p, "format must be csv, json or svg");
        c.formats.insert(s);
      }
    }
    if (o.contains("workers")) {
      const auto w = r.integer(o["workers"], "/output/workers");
      if (w < 0 || w > 4096) doc.fail("/output/workers", "workers must be in [0, 4096]");
      c.workers = unsigned(w);
    }
  }
  return c;
}

/// Cross-field checks for sweeps (run / bounds verbs).
inline void check_sweep(const ExperimentConfig& c, const ConfigDocument& doc) {
  if (c.axes.empty() || c.axes.size() > 2) doc.fail("/sweep", "a run needs one or two sweep axes");
  if (c.has(SolverKind::OneD)) {
    const auto& l = c.lattice;
    if (l.dims != Dimension::One || l.hopping != HoppingModel::NearestNeighbor || l.boundary != Boundary::Open)
      doc.fail("/solver", "oned closed forms need an open nearest-neighbour chain (dims 1)");
    if (l.sink && *l.sink != l.center_site()) doc.fail("/lattice/sink", "oned closed forms need the centre sink");
    auto odd = [&](double L) { return int(L) % 2 == 1; };
    if (const auto* a = c.axis(Param::L)) {
      for (double L : a->values)
        if (!odd(L) && c.oned_form == ResolventForm::Exact)
          doc.fail("/sweep", "oned closed forms need odd L, got " + std::to_string(int(L)));
    } else if (!odd(l.L)) {
      doc.fail("/lattice/L", "oned closed forms need odd L");
    }
  }
  if (const auto* a = c.axis(Param::L)) {
    for (double L : a->values)
      if (L < 2) doc.fail("/sweep", "L must be >= 2");
    if (c.lattice.sink && !c.sink_xy) doc.fail("/lattice/sink", "an L sweep needs the centre sink or [x, y] coordinates");
  }
  const bool needs_mu = c.has(SolverKind::Bounds) || c.has(SolverKind::OneD);
  if (needs_mu) {
    const auto* m = c.axis(Param::Mu);
    const bool zero = m ? std::any_of(m->values.begin(), m->values.end(), [](double v) { return v <= 0.0; })
                        : !(c.rates.mu > 0.0);
    if (zero) doc.fail(m ? "/sweep" : "/rates/mu", "bounds and oned solvers need mu > 0 at every point");
  }
  for (const auto& an : c.analyses) {
    if (an == "optimal_gamma") {
      if (!c.axis(Param::Gamma)) doc.fail("/analysis", "optimal_gamma needs a gamma sweep axis");
      if (!c.has(SolverKind::GF)) doc.fail("/analysis", "optimal_gamma needs the gf solver");
    }
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path, bool sweep = true) {
  ConfigDocument doc(read_file(path), path);
  auto c = parse_config(doc);
  if (sweep) check_sweep(c, doc);
  return c;
}

inline ExperimentConfig config_from_string(const std::string& text, bool sweep = true,
                                           const std::string& where = "") {
  ConfigDocument doc(text, where);
  auto c = parse_config(doc);
  if (sweep) check_sweep(c, doc);
  return c;
}

}  // namespace enaqt::cli

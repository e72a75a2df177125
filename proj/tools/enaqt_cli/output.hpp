#pragma once

// CSV cells with round-trip floats, and a minimal SVG line chart.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace enaqt::cli {

/// Shortest decimal that parses back to the same double.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(cells[i]);
  }
  return line + "\n";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  std::string dash;  // stroke-dasharray, empty for solid
  bool markers = true;
  bool line = true;
};

struct VLine {
  double x;
  std::string label;
  std::string color = "#555555";
};

struct Chart {
  std::string title, xlabel, ylabel;
  bool logx = true;
  std::optional<bool> logy;  // unset: log when data spans > 2 decades
  std::vector<Series> series;
  std::vector<VLine> vlines;
};

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
  return colors[i % 10];
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  double map(double v, double p0, double p1) const {
    const double a = log ? std::log10(lo) : lo, b = log ? std::log10(hi) : hi;
    const double t = ((log ? std::log10(v) : v) - a) / (b - a);
    return p0 + t * (p1 - p0);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (int e = int(std::floor(std::log10(lo))); e <= int(std::ceil(std::log10(hi))); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
      }
      if (t.size() < 2) t = {lo, hi};
    } else {
      const double span = hi - lo;
      const double raw = span / 5;
      const double mag = std::pow(10.0, std::floor(std::log10(raw)));
      double step = mag;
      for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
          step = m * mag;
          break;
        }
      for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
        t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    }
    return t;
  }
};

inline Axis fit_axis(std::vector<double> vals, bool log) {
  Axis a;
  a.log = log;
  vals.erase(std::remove_if(vals.begin(), vals.end(),
                            [&](double v) { return !std::isfinite(v) || (log && v <= 0.0); }),
             vals.end());
  if (vals.empty()) {
    a.lo = log ? 0.1 : 0.0;
    a.hi = log ? 10.0 : 1.0;
    return a;
  }
  a.lo = *std::min_element(vals.begin(), vals.end());
  a.hi = *std::max_element(vals.begin(), vals.end());
  if (log) {
    if (a.hi <= a.lo) {
      a.lo /= 2;
      a.hi *= 2;
    }
  } else {
    const double pad = a.hi > a.lo ? 0.05 * (a.hi - a.lo) : std::max(1.0, std::abs(a.lo)) * 0.1;
    a.lo -= pad;
    a.hi += pad;
  }
  return a;
}

}  // namespace detail

inline std::string render_svg(const Chart& c) {
  constexpr double W = 760, H = 480, L = 80, R = 200, T = 40, B = 60;
  const double x0 = L, x1 = W - R, y0 = H - B, y1 = T;

  std::vector<double> xs, ys;
  for (const auto& s : c.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  for (const auto& v : c.vlines) xs.push_back(v.x);
  bool logy = false;
  if (c.logy) {
    logy = *c.logy;
  } else {
    double lo = INFINITY, hi = 0;
    bool positive = true;
    for (double y : ys)
      if (std::isfinite(y)) {
        positive = positive && y > 0;
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    logy = positive && lo > 0 && hi / lo > 100.0;
  }
  const auto ax = detail::fit_axis(xs, c.logx), ay = detail::fit_axis(ys, logy);

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::xml_escape(c.title) << "</text>\n";

  for (double t : ax.ticks()) {
    const double px = ax.map(t, x0, x1);
    o << "<line x1=\"" << detail::num(px) << "\" y1=\"" << y0 << "\" x2=\"" << detail::num(px) << "\" y2=\"" << y1
      << "\" stroke=\"#eeeeee\"/>\n";
    o << "<text x=\"" << detail::num(px) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
      << detail::tick_label(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, y0, y1);
    o << "<line x1=\"" << x0 << "\" y1=\"" << detail::num(py) << "\" x2=\"" << x1 << "\" y2=\"" << detail::num(py)
      << "\" stroke=\"#eeeeee\"/>\n";
    o << "<text x=\"" << x0 - 6 << "\" y=\"" << detail::num(py + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(t) << "</text>\n";
  }
  o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
    << detail::xml_escape(c.xlabel) << "</text>\n";
  o << "<text transform=\"translate(22," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::xml_escape(c.ylabel) << "</text>\n";

  auto inside = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!ax.log || x > 0) && (!ay.log || y > 0);
  };
  for (const auto& v : c.vlines) {
    if (!inside(v.x, ay.log ? ay.lo : 0.0) || v.x < ax.lo || v.x > ax.hi) continue;
    const double px = ax.map(v.x, x0, x1);
    o << "<line x1=\"" << detail::num(px) << "\" y1=\"" << y0 << "\" x2=\"" << detail::num(px) << "\" y2=\"" << y1
      << "\" stroke=\"" << v.color << "\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << detail::num(px + 3) << "\" y=\"" << y1 + 14 << "\" fill=\"" << v.color << "\" font-size=\"10\">"
      << detail::xml_escape(v.label) << "</text>\n";
  }
  for (const auto& s : c.series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!inside(s.x[i], s.y[i])) continue;
      pts += detail::num(ax.map(s.x[i], x0, x1)) + "," + detail::num(ay.map(s.y[i], y0, y1)) + " ";
    }
    if (s.line && !pts.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
      if (!s.dash.empty()) o << " stroke-dasharray=\"" << s.dash << "\"";
      o << " points=\"" << pts << "\"/>\n";
    }
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
        if (inside(s.x[i], s.y[i]))
          o << "<circle cx=\"" << detail::num(ax.map(s.x[i], x0, x1)) << "\" cy=\""
            << detail::num(ay.map(s.y[i], y0, y1)) << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
  }
  double ly = y1 + 6;
  for (const auto& s : c.series) {
    if (s.line) {
      o << "<line x1=\"" << x1 + 12 << "\" y1=\"" << detail::num(ly) << "\" x2=\"" << x1 + 36 << "\" y2=\""
        << detail::num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
      if (!s.dash.empty()) o << " stroke-dasharray=\"" << s.dash << "\"";
      o << "/>\n";
    } else {
      o << "<circle cx=\"" << x1 + 24 << "\" cy=\"" << detail::num(ly) << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    }
    o << "<text x=\"" << x1 + 42 << "\" y=\"" << detail::num(ly + 4) << "\" font-size=\"10\">"
      << detail::xml_escape(s.label) << "</text>\n";
    ly += 15;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace enaqt::cli

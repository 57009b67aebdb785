#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tdscat/duhamel.hpp"
#include "tdscat/nls.hpp"

namespace tdscat {

// Round-trip decimal form; identical inputs give identical bytes.
inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(const char* v) { return v; }
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  template <class... Ts>
  void add(const Ts&... values) {
    if (sizeof...(Ts) != columns.size()) throw ContractViolation("table " + name + ": row width mismatch");
    rows.push_back({fmt(values)...});
  }
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_escape(t.columns[i]);
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_escape(r[i]);
    out += "\n";
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
}

inline void write_csv(const std::filesystem::path& path, const Table& t) { write_text(path, to_csv(t)); }

// Standard tables -----------------------------------------------------------

inline Table ledger_table(const BornLedger& L) {
  Table t{"ledger", {"order", "p", "norm", "majorant", "ratio"}, {}};
  for (const auto& r : L.rows) t.add(r.order, r.p, r.norm, r.majorant, r.ratio);
  return t;
}

inline Table norm_table(const std::vector<NormReport>& reports, const std::string& name = "norms") {
  Table t{name, {"label", "p", "measured", "exact", "bound", "margin", "pass"}, {}};
  for (const auto& r : reports) t.add(r.label, r.p, r.measured, r.exact, r.bound, r.margin, r.pass);
  return t;
}

inline Table audit_table(const std::vector<AuditRow>& rows) {
  Table t{"audit", {"label", "p", "measured", "bound", "margin", "pass", "fixture", "seed"}, {}};
  for (const auto& r : rows) t.add(r.label, r.p, r.measured, r.bound, r.margin, r.pass, r.fixture, r.seed);
  return t;
}

inline Table scan_table(const std::vector<ScanRow>& rows, const std::string& fixture) {
  Table t{"scan", {"fixture", "order", "M", "norm", "skipped"}, {}};
  for (const auto& r : rows) t.add(fixture, r.order, r.M, r.norm, r.skipped);
  return t;
}

inline Table trajectory_table(const Trajectory& tr) {
  Table t{"trajectory", {"t", "l2", "linf"}, {}};
  for (std::size_t i = 0; i < tr.times.size(); ++i) t.add(tr.times[i], lp_norm(tr.states[i], 2.0), lp_norm(tr.states[i], inf));
  return t;
}

// (t, mass, h1, linf, deficit_p...) for an NLS run.
inline Table nls_trajectory_table(const NlsTrajectory& run, const std::vector<double>& ps) {
  Table t{"trajectory", {"t", "mass", "h1", "linf"}, {}};
  for (double p : ps) t.columns.push_back("deficit_" + fmt(p));
  auto rows = free_channel_deficit(run.traj, ps);
  for (std::size_t i = 0; i < run.traj.times.size(); ++i) {
    std::vector<std::string> r{fmt(run.traj.times[i]), fmt(lp_norm(run.traj.states[i], 2.0)), fmt(run.h1[i]),
                               fmt(lp_norm(run.traj.states[i], inf))};
    for (double v : rows[i].norms) r.push_back(fmt(v));
    t.rows.push_back(std::move(r));
  }
  return t;
}

// Binary snapshots ----------------------------------------------------------
// Little-endian layout: int32 dim, int32 N, float64 L, int32 count, then
// count fields of N^dim complex values as interleaved (re, im) float64.

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("truncated snapshot");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_snapshot(const std::filesystem::path& path, const std::vector<Field>& states) {
  if (states.empty()) throw ContractViolation("snapshot needs at least one field");
  const GridSpec& g = states.front().grid;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  detail::put_le<std::int32_t>(f, g.dim);
  detail::put_le<std::int32_t>(f, g.n);
  detail::put_le<double>(f, g.half_length);
  detail::put_le<std::int32_t>(f, static_cast<std::int32_t>(states.size()));
  for (const auto& s : states) {
    if (!(s.grid == g)) throw ContractViolation("snapshot fields must share one grid");
    for (const auto& v : s.values) {
      detail::put_le<double>(f, v.real());
      detail::put_le<double>(f, v.imag());
    }
  }
}

inline std::vector<Field> read_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  int dim = detail::get_le<std::int32_t>(f);
  int n = detail::get_le<std::int32_t>(f);
  double L = detail::get_le<double>(f);
  int count = detail::get_le<std::int32_t>(f);
  GridSpec g(dim, n, L);
  std::vector<Field> out(static_cast<std::size_t>(count), Field(g));
  for (auto& s : out)
    for (auto& v : s.values) {
      double re = detail::get_le<double>(f);
      double im = detail::get_le<double>(f);
      v = {re, im};
    }
  return out;
}

// Minimal SVG line plot ----------------------------------------------------

struct Series {
  std::string label;
  std::vector<double> x, y;
};

inline std::string svg_plot(const std::string& title, const std::vector<Series>& series, bool log_x = false,
                            bool log_y = false) {
  const double W = 640, H = 400, pad = 50;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_x && !(s.x[i] > 0)) || (log_y && !(s.y[i] > 0)) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  auto px = [&](double v) { return pad + (tx(v) - x0) / (x1 - x0) * (W - 2 * pad); };
  auto py = [&](double v) { return H - pad - (ty(v) - y0) / (y1 - y0) * (H - 2 * pad); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n";
  out += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  out += "<rect x=\"50\" y=\"50\" width=\"540\" height=\"300\" fill=\"none\" stroke=\"black\"/>\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "<text x=\"50\" y=\"368\" font-size=\"10\">%s%.3g</text>\n", log_x ? "1e" : "", x0);
  out += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"590\" y=\"368\" font-size=\"10\" text-anchor=\"end\">%s%.3g</text>\n",
                log_x ? "1e" : "", x1);
  out += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"46\" y=\"350\" font-size=\"10\" text-anchor=\"end\">%s%.3g</text>\n",
                log_y ? "1e" : "", y0);
  out += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"46\" y=\"56\" font-size=\"10\" text-anchor=\"end\">%s%.3g</text>\n",
                log_y ? "1e" : "", y1);
  out += buf;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_x && !(s.x[i] > 0)) || (log_y && !(s.y[i] > 0)) || !std::isfinite(s.y[i])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
      pts += buf;
    }
    const char* c = colors[k % 6];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"600\" y=\"%d\" font-size=\"10\" fill=\"%s\" text-anchor=\"end\">",
                  66 + 14 * static_cast<int>(k), c);
    out += buf + s.label + "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace tdscat

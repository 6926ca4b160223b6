#pragma once

// Result persistence: CSV tables, JSON records, and plain SVG line plots.
// All numbers go through to_chars so files are locale-independent and
// byte-reproducible.

#include "dressed/ensemble.hpp"
#include "dressed/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dressed {

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string fixed_number(double v, int digits) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  if (res.ec != std::errc{}) return csv_number(v);
  return std::string(buf.data(), res.ptr);
}

/// Axis column first, then every data column.
inline std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << r.axis_name;
  for (const auto& [name, col] : r.columns) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < r.axis.size(); ++i) {
    os << csv_number(r.axis[i]);
    for (const auto& [name, col] : r.columns) os << ',' << csv_number(col[i]);
    os << '\n';
  }
  return os.str();
}

/// JSON number, or null for values JSON cannot hold.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

inline json quantity_json(const Quantity& q) {
  return json{{"value", json_number(q.value)}, {"sigma", json_number(q.sigma)}, {"unit", q.unit}};
}

inline json fit_json(const FitResult& f) {
  json params = json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    params[f.names[i]] = json{{"value", json_number(f.values[i])}, {"sigma", json_number(f.sigmas[i])}};
  }
  return json{{"parameters", params},
              {"converged", f.converged},
              {"identifiable", f.identifiable},
              {"iterations", f.iterations},
              {"residual_norm", json_number(f.residual_norm)}};
}

inline json sweep_extracted_json(const SweepResult& r) {
  json ex = json::object();
  ex["experiment"] = r.experiment;
  ex["outcome"] = r.outcome;
  json q = json::object();
  for (const auto& [name, v] : r.extracted) q[name] = quantity_json(v);
  ex["quantities"] = q;
  json fits = json::object();
  for (const auto& [name, f] : r.fits) fits[name] = fit_json(f);
  ex["fits"] = fits;
  ex["warnings"] = r.warnings;
  return ex;
}

inline std::string drive_label(const std::optional<DrivePair>& d) {
  if (!d) return "ND";
  return "(" + csv_number(d->omega_plus) + ";" + csv_number(d->omega_minus) + ")";
}

inline json pdf_json(const PdfSummary& s) {
  return json{{"peak", json_optional(s.peak)}, {"fwhm", json_optional(s.fwhm)}, {"n_samples", s.n_samples}};
}

/// One row per drive setting: peaks, widths and ratios to the undriven row.
inline std::string ensemble_csv(const std::vector<DriveSweepRow>& rows) {
  std::ostringstream os;
  os << "omega_plus,omega_minus,driven,delta_peak,delta_fwhm,delta_peak_ratio,delta_fwhm_ratio,"
        "rdd_peak,rdd_fwhm,rdd_peak_ratio,rdd_fwhm_ratio,delta_fwhm_over_peak,rdd_fwhm_over_peak\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
  auto over = [](const PdfSummary& s) -> std::optional<double> {
    if (s.peak && s.fwhm && *s.peak != 0.0) return *s.fwhm / *s.peak;
    return std::nullopt;
  };
  for (const auto& r : rows) {
    os << (r.drive ? csv_number(r.drive->omega_plus) : "") << ',' << (r.drive ? csv_number(r.drive->omega_minus) : "")
       << ',' << (r.drive ? 1 : 0) << ',' << opt(r.delta.peak) << ',' << opt(r.delta.fwhm) << ','
       << opt(r.delta_peak_ratio) << ',' << opt(r.delta_fwhm_ratio) << ',' << opt(r.rdd.peak) << ','
       << opt(r.rdd.fwhm) << ',' << opt(r.rdd_peak_ratio) << ',' << opt(r.rdd_fwhm_ratio) << ','
       << opt(over(r.delta)) << ',' << opt(over(r.rdd)) << '\n';
  }
  return os.str();
}

/// Long-format raw samples: drive, statistic, value.
inline std::string ensemble_samples_csv(const EnsembleRun& run) {
  std::ostringstream os;
  os << "drive,statistic,value\n";
  for (const auto& s : run.per_drive) {
    const std::string label = drive_label(s.drive);
    for (double v : s.delta) os << label << ",delta," << csv_number(v) << '\n';
    for (double v : s.rdd) os << label << ",rdd," << csv_number(v) << '\n';
  }
  return os.str();
}

inline std::string histogram_csv(const std::vector<std::pair<std::string, PdfSummary>>& h) {
  std::ostringstream os;
  os << "series,bin_low,bin_high,count\n";
  for (const auto& [name, s] : h) {
    for (std::size_t k = 0; k < s.counts.size(); ++k) {
      os << name << ',' << csv_number(s.edges[k]) << ',' << csv_number(s.edges[k + 1]) << ',' << s.counts[k] << '\n';
    }
  }
  return os.str();
}

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tick_label(double v) {
  if (v == 0.0) return "0";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 4);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

/// Line plot with a frame, five ticks per axis and a legend.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<PlotSeries>& series) {
  constexpr double W = 720, H = 440, L = 80, R = 170, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto f = [](double v) { return fixed_number(v, 2); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << detail::xml_escape(title) << "</text>\n";
  os << "<rect x=\"" << f(L) << "\" y=\"" << f(T) << "\" width=\"" << f(W - L - R) << "\" height=\"" << f(H - T - B)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<line x1=\"" << f(px(xv)) << "\" y1=\"" << f(H - B) << "\" x2=\"" << f(px(xv)) << "\" y2=\""
       << f(H - B + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << f(px(xv)) << "\" y=\"" << f(H - B + 18) << "\" text-anchor=\"middle\">"
       << detail::tick_label(xv) << "</text>\n";
    os << "<line x1=\"" << f(L - 5) << "\" y1=\"" << f(py(yv)) << "\" x2=\"" << f(L) << "\" y2=\"" << f(py(yv))
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << f(L - 8) << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\">"
       << detail::tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << f(L + (W - L - R) / 2) << "\" y=\"" << f(H - 15) << "\" text-anchor=\"middle\">"
     << detail::xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"18\" y=\"" << f(T + (H - T - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << f(T + (H - T - B) / 2) << ")\">" << detail::xml_escape(ylabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(series[s].x.size(), series[s].y.size()); ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      os << (first ? "" : " ") << f(px(series[s].x[i])) << ',' << f(py(series[s].y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << f(W - R + 12) << "\" y1=\"" << f(ly) << "\" x2=\"" << f(W - R + 32) << "\" y2=\""
       << f(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << f(W - R + 38) << "\" y=\"" << f(ly + 4) << "\">" << detail::xml_escape(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Every data column of a sweep against its axis.
inline std::string sweep_svg(const SweepResult& r) {
  std::vector<PlotSeries> s;
  for (const auto& [name, col] : r.columns) s.push_back({name, r.axis, col});
  return svg_plot(r.experiment, r.axis_name + " (" + r.axis_unit + ")", "value", s);
}

/// Histogram densities of each series over the uniform bins.
inline std::string pdf_svg(const std::string& title, const std::vector<std::pair<std::string, PdfSummary>>& h) {
  std::vector<PlotSeries> s;
  for (const auto& [name, p] : h) {
    PlotSeries ps{name, {}, {}};
    const double n = static_cast<double>(std::max<std::size_t>(p.n_samples, 1));
    for (std::size_t k = 1; k + 1 < p.counts.size(); ++k) {
      const double w = p.edges[k + 1] - p.edges[k];
      if (w <= 0.0) continue;
      ps.x.push_back(0.5 * (p.edges[k] + p.edges[k + 1]));
      ps.y.push_back(static_cast<double>(p.counts[k]) / (n * w));
    }
    s.push_back(std::move(ps));
  }
  return svg_plot(title, "coupling (MHz)", "probability density (1/MHz)", s);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace dressed

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "skaudit/harness.hpp"

namespace skaudit {

namespace {

struct Csv {
  std::string path;
  std::vector<std::string> cols;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_line(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open CSV '" + path + "'");
  Csv csv;
  csv.path = path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      csv.cols = split_line(line);
      first = false;
    } else {
      csv.rows.push_back(split_line(line));
    }
  }
  return csv;
}

int col_index(const Csv& csv, const std::string& name) {
  for (std::size_t i = 0; i < csv.cols.size(); ++i) {
    if (csv.cols[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool cell_number(const std::vector<std::string>& row, int idx, double* out) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= row.size()) return false;
  const std::string& s = row[idx];
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    *out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> pts;
  bool dashed = false;
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string g6(double v) { return format_g(v, 6); }

void write_chart(const std::filesystem::path& path, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;
  const double left = 64, right = 624, top = 40, bottom = 370;
  const auto px = [&](double x) {
    return left + (x - xmin) / (xmax - xmin) * (right - left);
  };
  const auto py = [&](double y) {
    return bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"420\" viewBox=\"0 0 640 420\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n"
      << "<text x=\"320\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" "
         "text-anchor=\"middle\">" << title << "</text>\n";
  // grid and ticks
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    svg << "<line x1=\"" << g6(px(fx)) << "\" y1=\"" << g6(top) << "\" x2=\""
        << g6(px(fx)) << "\" y2=\"" << g6(bottom)
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n"
        << "<line x1=\"" << g6(left) << "\" y1=\"" << g6(py(fy)) << "\" x2=\""
        << g6(right) << "\" y2=\"" << g6(py(fy))
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << g6(px(fx)) << "\" y=\"388\" "
           "font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">" << g6(fx) << "</text>\n"
        << "<text x=\"" << g6(left - 6) << "\" y=\"" << g6(py(fy) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\">" << g6(fy) << "</text>\n";
  }
  svg << "<line x1=\"" << g6(left) << "\" y1=\"" << g6(bottom) << "\" x2=\""
      << g6(right) << "\" y2=\"" << g6(bottom)
      << "\" stroke=\"#303030\" stroke-width=\"1.5\"/>\n"
      << "<line x1=\"" << g6(left) << "\" y1=\"" << g6(top) << "\" x2=\""
      << g6(left) << "\" y2=\"" << g6(bottom)
      << "\" stroke=\"#303030\" stroke-width=\"1.5\"/>\n"
      << "<text x=\"344\" y=\"410\" font-family=\"sans-serif\" "
         "font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n"
      << "<text x=\"16\" y=\"205\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 16 205)\">" << ylabel
      << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % 8];
    if (s.pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\"";
      if (s.dashed) svg << " stroke-dasharray=\"6 4\"";
      svg << " points=\"";
      for (const auto& [x, y] : s.pts) {
        svg << g6(px(x)) << ',' << g6(py(y)) << ' ';
      }
      svg << "\"/>\n";
    }
    for (const auto& [x, y] : s.pts) {
      svg << "<circle cx=\"" << g6(px(x)) << "\" cy=\"" << g6(py(y))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    svg << "<text x=\"618\" y=\"" << g6(44.0 + 15.0 * si)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\" "
           "fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg.str();
}

// Per-n medians of one numeric column, over rows whose status is "ok".
std::vector<std::pair<double, double>> median_by_n(const Csv& csv,
                                                   const std::string& column) {
  const int n_idx = col_index(csv, "n");
  const int v_idx = col_index(csv, column);
  const int s_idx = col_index(csv, "status");
  std::map<double, std::vector<double>> groups;
  for (const auto& row : csv.rows) {
    if (s_idx >= 0 && (static_cast<std::size_t>(s_idx) >= row.size() ||
                       row[s_idx] != "ok")) {
      continue;
    }
    double n = 0, v = 0;
    if (cell_number(row, n_idx, &n) && cell_number(row, v_idx, &v)) {
      groups[n].push_back(v);
    }
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [n, vals] : groups) out.emplace_back(n, median(vals));
  return out;
}

}  // namespace

int cmd_plot(const std::vector<std::string>& csv_paths,
             const std::string& out_dir, std::ostream& log) {
  const Csv* security = nullptr;
  const Csv* delta = nullptr;
  const Csv* curve = nullptr;
  const Csv* bounds = nullptr;
  std::vector<Csv> loaded;
  loaded.reserve(csv_paths.size());
  for (const std::string& path : csv_paths) loaded.push_back(read_csv(path));
  for (const Csv& csv : loaded) {
    if (col_index(csv, "eps") >= 0 && col_index(csv, "distinguish") >= 0) {
      security = &csv;
    } else if (col_index(csv, "best_m") >= 0) {
      delta = &csv;
    } else if (col_index(csv, "distance") >= 0 && col_index(csv, "m") >= 0) {
      curve = &csv;
    } else if (col_index(csv, "gauss_floor") >= 0) {
      bounds = &csv;
    } else {
      log << "error: unrecognized CSV layout in " << csv.path << '\n';
      return 2;
    }
  }
  if (!security && !delta && !curve) {
    log << "error: nothing to plot\n";
    return 2;
  }
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  if (security) {
    const auto deltas = median_by_n(*security, "delta");
    const auto divergences = median_by_n(*security, "D_over_sqrt_n");
    if (deltas.empty() || divergences.empty()) {
      log << "error: " << security->path << " has no usable rows\n";
      return 2;
    }
    write_chart(dir / "delta_metric_vs_n.svg",
                "total variation vs block length", "n", "delta",
                {{"median delta", deltas, false}});
    std::vector<Series> div_series{{"median D/sqrt(n)", divergences, false}};
    if (bounds) {
      const auto floors = median_by_n(*bounds, "gauss_floor");
      if (!floors.empty()) div_series.push_back({"gauss floor", floors, true});
    }
    write_chart(dir / "divergence_root_n_vs_n.svg",
                "scaled divergence vs block length", "n", "D / sqrt(n)",
                div_series);
    log << "wrote " << (dir / "delta_metric_vs_n.svg").string() << '\n'
        << "wrote " << (dir / "divergence_root_n_vs_n.svg").string() << '\n';
  }
  if (delta) {
    const int n_idx = col_index(*delta, "n");
    const int d_idx = col_index(*delta, "delta");
    const int s_idx = col_index(*delta, "status");
    Series s{"best distance", {}, false};
    for (const auto& row : delta->rows) {
      if (s_idx >= 0 && (static_cast<std::size_t>(s_idx) >= row.size() ||
                         row[s_idx] != "ok")) {
        continue;
      }
      double n = 0, d = 0;
      if (cell_number(row, n_idx, &n) && cell_number(row, d_idx, &d)) {
        s.pts.emplace_back(n, d);
      }
    }
    if (s.pts.empty()) {
      log << "error: " << delta->path << " has no usable rows\n";
      return 2;
    }
    write_chart(dir / "delta_vs_n.svg", "best achievable distance vs block length",
                "n", "delta_n", {s});
    log << "wrote " << (dir / "delta_vs_n.svg").string() << '\n';
  }
  if (curve) {
    const int n_idx = col_index(*curve, "n");
    const int m_idx = col_index(*curve, "m");
    const int d_idx = col_index(*curve, "distance");
    std::map<double, Series> by_n;
    for (const auto& row : curve->rows) {
      double n = 0, m = 0, d = 0;
      if (cell_number(row, n_idx, &n) && cell_number(row, m_idx, &m) &&
          cell_number(row, d_idx, &d)) {
        Series& s = by_n[n];
        if (s.label.empty()) s.label = "n=" + format_g(n, 6);
        s.pts.emplace_back(std::log10(m), d);
      }
    }
    if (by_n.empty()) {
      log << "error: " << curve->path << " has no usable rows\n";
      return 2;
    }
    std::vector<Series> series;
    for (auto& [n, s] : by_n) series.push_back(std::move(s));
    write_chart(dir / "delta_m_curve.svg", "distance vs key count",
                "log10(m)", "distance", series);
    log << "wrote " << (dir / "delta_m_curve.svg").string() << '\n';
  }
  return 0;
}

}  // namespace skaudit

#include "scriptenc/trajectories.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"

namespace scriptenc::trajectories {

std::vector<double> smooth(std::span<const double> raw, std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw Error("InvalidArgument", "smoothing window must be odd and positive, got " + std::to_string(window));
  }
  const std::size_t half = window / 2;
  std::vector<double> out(raw.size());
  for (std::size_t t = 0; t < raw.size(); ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(raw.size() - 1, t + half);
    double s = 0;
    for (std::size_t i = lo; i <= hi; ++i) s += raw[i];
    out[t] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<std::vector<double>> rescale(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw Error("InvalidArgument", "rescale: no descriptors selected");
  const std::size_t T = series.front().size();
  for (const auto& s : series)
    if (s.size() != T) throw Error("ShapeMismatch", "rescale: series lengths differ");
  std::vector<std::vector<double>> out(series.size(), std::vector<double>(T));
  for (std::size_t t = 0; t < T; ++t) {
    double total = 0;
    for (const auto& s : series) total += s[t];
    for (std::size_t d = 0; d < series.size(); ++d) {
      out[d][t] = total > 0 ? series[d][t] / total : 1.0 / static_cast<double>(series.size());
    }
  }
  return out;
}

std::vector<std::size_t> select_descriptors(std::string_view spec, const std::vector<std::vector<double>>& weights) {
  const std::size_t k = weights.empty() ? 0 : weights.front().size();
  std::vector<std::size_t> out;
  if (spec == "all") {
    out.resize(k);
    std::iota(out.begin(), out.end(), 0);
  } else if (spec.starts_with("top:")) {
    const auto m = static_cast<std::size_t>(io::parse_double(spec.substr(4)));
    std::vector<double> mean(k, 0.0);
    for (const auto& row : weights)
      for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
    idx.resize(std::min(m, k));
    out = idx;
  } else {
    for (const auto& part : io::split(spec, ',')) {
      const auto trimmed = io::trim(part);
      if (trimmed.empty()) continue;
      const double v = io::parse_double(trimmed);
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)) || static_cast<std::size_t>(v) >= k) {
        throw Error("InvalidArgument", "descriptor index '" + std::string(trimmed) + "' is out of range");
      }
      out.push_back(static_cast<std::size_t>(v));
    }
  }
  if (out.empty()) throw Error("InvalidArgument", "descriptor selection '" + std::string(spec) + "' is empty");
  return out;
}

Trajectories compute(const std::vector<std::vector<double>>& weights, const std::vector<std::size_t>& selected,
                     std::size_t window) {
  if (weights.empty()) throw Error("EmptyScript", "trajectories: no scenes");
  Trajectories t;
  t.descriptors = selected;
  t.window = window;
  for (std::size_t d : selected) {
    std::vector<double> series;
    series.reserve(weights.size());
    for (const auto& row : weights) {
      if (d >= row.size()) throw Error("InvalidArgument", "descriptor " + std::to_string(d) + " out of range");
      series.push_back(row[d]);
    }
    t.smoothed.push_back(smooth(series, window));
    t.raw.push_back(std::move(series));
  }
  t.shares = rescale(t.smoothed);
  return t;
}

Annotation parse_annotation(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error("InvalidArgument", "annotation '" + std::string(text) + "' is not scene:LABEL");
  }
  const double scene = io::parse_double(io::trim(text.substr(0, colon)));
  if (scene < 1 || scene != static_cast<double>(static_cast<std::size_t>(scene))) {
    throw Error("InvalidArgument", "annotation scene must be a positive integer: '" + std::string(text) + "'");
  }
  return {static_cast<std::size_t>(scene), std::string(text.substr(colon + 1))};
}

std::string to_csv(const Trajectories& t) {
  std::ostringstream out;
  out << "scene";
  for (std::size_t d : t.descriptors) out << ",descriptor_" << d;
  out << '\n';
  for (std::size_t s = 0; s < t.scenes(); ++s) {
    out << s + 1;
    for (const auto& series : t.shares) out << ',' << io::format_double(series[s]);
    out << '\n';
  }
  return out.str();
}

CsvTable parse_csv(std::string_view csv) {
  CsvTable table;
  const auto lines = io::split(csv, '\n');
  if (lines.empty() || !lines.front().starts_with("scene")) throw Error("MalformedTable", "trajectory CSV: bad header");
  const auto header = io::split(lines.front(), ',');
  for (std::size_t i = 1; i < header.size(); ++i) {
    constexpr std::string_view prefix = "descriptor_";
    if (!std::string_view(header[i]).starts_with(prefix)) {
      throw Error("MalformedTable", "trajectory CSV: unexpected column '" + header[i] + "'");
    }
    table.descriptors.push_back(static_cast<std::size_t>(io::parse_double(header[i].substr(prefix.size()))));
  }
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    const auto fields = io::split(lines[l], ',');
    if (fields.size() != header.size()) throw Error("MalformedTable", "trajectory CSV: ragged row " + std::to_string(l));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(io::parse_double(fields[i]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---- SVG ---------------------------------------------------------------------------

double SvgLayout::scene_x(std::size_t scene, std::size_t scene_count) const {
  if (scene_count <= 1) return margin_left + plot_width() / 2.0;
  return margin_left + plot_width() * static_cast<double>(scene - 1) / static_cast<double>(scene_count - 1);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

// Layers sorted by peak scene, then dealt alternately outward from the middle.
std::vector<std::size_t> inside_out(const std::vector<std::vector<double>>& shares) {
  std::vector<std::size_t> by_peak(shares.size());
  std::iota(by_peak.begin(), by_peak.end(), 0);
  auto peak = [&](std::size_t d) {
    return static_cast<std::size_t>(std::max_element(shares[d].begin(), shares[d].end()) - shares[d].begin());
  };
  std::stable_sort(by_peak.begin(), by_peak.end(), [&](std::size_t a, std::size_t b) { return peak(a) < peak(b); });
  std::deque<std::size_t> order;
  for (std::size_t i = 0; i < by_peak.size(); ++i) {
    if (i % 2 == 0) {
      order.push_back(by_peak[i]);
    } else {
      order.push_front(by_peak[i]);
    }
  }
  return {order.begin(), order.end()};
}

}  // namespace

std::string to_svg(const Trajectories& t, const std::vector<Annotation>& annotations,
                   const std::vector<std::string>& labels, const SvgLayout& layout) {
  const std::size_t T = t.scenes();
  if (T == 0) throw Error("EmptyScript", "trajectories: no scenes to draw");
  const std::size_t L = t.shares.size();
  const double mid = layout.margin_top + layout.plot_height() / 2.0;
  const double scale_y = layout.plot_height();

  // Silhouette baseline g0 = -sum/2, stacked bottom-up in inside-out order.
  const auto order = inside_out(t.shares);
  std::vector<std::vector<double>> lower(L, std::vector<double>(T)), upper(L, std::vector<double>(T));
  for (std::size_t s = 0; s < T; ++s) {
    double total = 0;
    for (const auto& series : t.shares) total += series[s];
    double y = -total / 2.0;
    for (std::size_t d : order) {
      lower[d][s] = y;
      y += t.shares[d][s];
      upper[d][s] = y;
    }
  }
  auto py = [&](double v) { return mid - v * scale_y; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(layout.width) << "\" height=\""
      << num(layout.height) << "\" viewBox=\"0 0 " << num(layout.width) << ' ' << num(layout.height) << "\">\n";
  out << "<metadata>scenes=" << T << " window=" << t.window << " baseline=silhouette order=inside-out";
  if (!layout.config_hash.empty()) out << " config_hash=" << layout.config_hash;
  out << "</metadata>\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(layout.width) << "\" height=\"" << num(layout.height)
      << "\" fill=\"#ffffff\"/>\n";

  for (std::size_t d : order) {
    out << "<path class=\"layer\" data-descriptor=\"" << t.descriptors[d] << "\" fill=\"" << kPalette[d % 10]
        << "\" fill-opacity=\"0.85\" stroke=\"#ffffff\" stroke-width=\"0.5\" d=\"";
    for (std::size_t s = 0; s < T; ++s) {
      out << (s == 0 ? "M" : " L") << num(layout.scene_x(s + 1, T)) << ',' << num(py(upper[d][s]));
    }
    for (std::size_t s = T; s-- > 0;) out << " L" << num(layout.scene_x(s + 1, T)) << ',' << num(py(lower[d][s]));
    out << " Z\"/>\n";
  }

  // One label per layer, placed where it is thickest.
  for (std::size_t d : order) {
    const auto peak = static_cast<std::size_t>(std::max_element(t.shares[d].begin(), t.shares[d].end()) -
                                               t.shares[d].begin());
    const std::string text = d < labels.size() && !labels[d].empty() ? labels[d]
                                                                      : "descriptor " + std::to_string(t.descriptors[d]);
    out << "<text class=\"layer-label\" x=\"" << num(layout.scene_x(peak + 1, T)) << "\" y=\""
        << num(py((upper[d][peak] + lower[d][peak]) / 2.0)) << "\" font-size=\"11\" text-anchor=\"middle\">"
        << escape(text) << "</text>\n";
  }

  std::vector<Annotation> marks = annotations;
  std::stable_sort(marks.begin(), marks.end(), [](const auto& a, const auto& b) { return a.scene < b.scene; });
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i].scene < 1 || marks[i].scene > T) {
      throw Error("InvalidArgument", "annotation scene " + std::to_string(marks[i].scene) + " outside 1.." +
                                         std::to_string(T));
    }
    const std::string letter(1, static_cast<char>('A' + i % 26));
    const double x = layout.scene_x(marks[i].scene, T);
    out << "<line class=\"marker\" data-scene=\"" << marks[i].scene << "\" x1=\"" << num(x) << "\" y1=\""
        << num(layout.margin_top) << "\" x2=\"" << num(x) << "\" y2=\""
        << num(layout.margin_top + layout.plot_height()) << "\" stroke=\"#333333\" stroke-dasharray=\"4,3\"/>\n";
    out << "<text class=\"marker-letter\" x=\"" << num(x) << "\" y=\"" << num(layout.margin_top - 8)
        << "\" font-size=\"13\" text-anchor=\"middle\">" << letter << "</text>\n";
    out << "<text class=\"marker-legend\" x=\"" << num(layout.margin_left) << "\" y=\""
        << num(layout.margin_top + layout.plot_height() + 20 + 14 * static_cast<double>(i)) << "\" font-size=\"11\">("
        << letter << ") " << escape(marks[i].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string export_as(std::string_view format, const Trajectories& t, const std::vector<Annotation>& annotations,
                      const std::vector<std::string>& labels) {
  if (format == "csv") return to_csv(t);
  if (format == "svg") return to_svg(t, annotations, labels);
  throw Error("UnknownFormat", "unknown export format '" + std::string(format) + "' (csv, svg)");
}

}  // namespace scriptenc::trajectories

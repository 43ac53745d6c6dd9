#pragma once

// Per-script descriptor trajectories: smoothed, rescaled descriptor weights
// over scenes, exported as CSV or as a streamgraph SVG.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scriptenc::trajectories {

// Centered moving average; windows shrink at the edges. window must be odd.
std::vector<double> smooth(std::span<const double> raw, std::size_t window = 5);

// series[d][t] -> shares[d][t] with sum_d shares[d][t] = 1. A scene whose
// values are all zero gets equal shares.
std::vector<std::vector<double>> rescale(const std::vector<std::vector<double>>& series);

// "top:m" (highest mean weight, ties by index), "all", or "i,j,...".
// weights: per scene, k values.
std::vector<std::size_t> select_descriptors(std::string_view spec, const std::vector<std::vector<double>>& weights);

struct Trajectories {
  std::vector<std::size_t> descriptors;           // selected descriptor indices
  std::vector<std::vector<double>> raw;           // [selected][scene]
  std::vector<std::vector<double>> smoothed;
  std::vector<std::vector<double>> shares;
  std::size_t window = 5;

  std::size_t scenes() const { return shares.empty() ? 0 : shares.front().size(); }
};

Trajectories compute(const std::vector<std::vector<double>>& weights, const std::vector<std::size_t>& selected,
                     std::size_t window = 5);

struct Annotation {
  std::size_t scene = 1;  // 1-based
  std::string label;
};

// "scene:LABEL"
Annotation parse_annotation(std::string_view text);

// Header scene,descriptor_<i>,...; one row per scene (1-based) with the shares.
std::string to_csv(const Trajectories& t);

struct CsvTable {
  std::vector<std::size_t> descriptors;
  std::vector<std::vector<double>> rows;  // [scene][selected]
};
CsvTable parse_csv(std::string_view csv);

struct SvgLayout {
  double width = 900;
  double height = 420;
  double margin_left = 40;
  double margin_right = 40;
  double margin_top = 40;
  double margin_bottom = 60;
  std::string config_hash;  // written into <metadata> when set

  double plot_width() const { return width - margin_left - margin_right; }
  double plot_height() const { return height - margin_top - margin_bottom; }
  // x-coordinate of a 1-based scene index.
  double scene_x(std::size_t scene, std::size_t scene_count) const;
};

// Stacked layers around a symmetric (silhouette) baseline, ordered
// inside-out by the scene at which each layer peaks. labels[i] (optional)
// names the i-th selected descriptor.
std::string to_svg(const Trajectories& t, const std::vector<Annotation>& annotations,
                   const std::vector<std::string>& labels = {}, const SvgLayout& layout = {});

// "csv" or "svg"; anything else raises UnknownFormat.
std::string export_as(std::string_view format, const Trajectories& t, const std::vector<Annotation>& annotations,
                      const std::vector<std::string>& labels = {});

}  // namespace scriptenc::trajectories

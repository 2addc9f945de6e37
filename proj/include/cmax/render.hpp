#pragma once

#include <string>
#include <vector>

#include "cmax/iwe.hpp"
#include "cmax/optimize.hpp"
#include "cmax/pipelines.hpp"

namespace cmax {

// 8-bit visualizations. Count images map [min,max] (or [0,max] when
// zero_floor) onto [0,255]; polarity images map v to 127.5*(1 + v/max|v|) so
// zero sits at mid-gray.
struct RenderOptions {
  bool zero_floor = false;
  bool invert = false; // dark events on light background
};

struct Image8 {
  int width = 0, height = 0;
  std::vector<std::uint8_t> gray;        // row-major, when rgb empty
  std::vector<std::uint8_t> rgb;         // row-major triplets, optional
  bool is_rgb() const { return !rgb.empty(); }
};

Image8 render_iwe(const IWE &iwe, const RenderOptions &opt = {});
Image8 render_grid(const Eigen::ArrayXXd &values, const RenderOptions &opt = {});

// Depth maps: near = warm, far = cool; unselected pixels black.
Image8 render_depth(const Eigen::ArrayXXd &depth, double z_min, double z_max);

void save_pgm(const std::string &path, const Image8 &img);
void save_png(const std::string &path, const Image8 &img);

// Raw float grid round-trip: "IWE1\nwidth height mode\n" then float32
// row-major values.
void save_grid(const std::string &path, const IWE &iwe);
IWE load_grid(const std::string &path);

// CSV artifacts.
void save_heatmap_csv(const std::string &path, const Heatmap &hm,
                      const std::string &axis1 = "theta1",
                      const std::string &axis2 = "theta2");
void save_series_csv(const std::string &path,
                     const AngularVelocitySeries &series);
void save_curve_csv(const std::string &path,
                    const std::vector<std::pair<double, double>> &curve,
                    const std::string &xname = "z",
                    const std::string &yname = "f");
void save_boxplot_csv(const std::string &path,
                      const std::vector<SubintervalStats> &stats);

} // namespace cmax

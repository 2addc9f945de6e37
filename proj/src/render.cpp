#include "cmax/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <png.h>

#include "cmax/errors.hpp"

namespace cmax {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(
      std::clamp(std::lround(v), 0l, 255l));
}

void write_csv_value(std::ostream &out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out << buf;
}

std::ofstream open_binary(const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameterError("cannot write " + path);
  return out;
}

std::ofstream open_text(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw InvalidParameterError("cannot write " + path);
  return out;
}

// Hue ramp red(0) -> blue(240 deg), saturation/value 1.
void hue_to_rgb(double h_deg, std::uint8_t rgb[3]) {
  const double h = h_deg / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  if (h < 1)      { r = 1; g = x; }
  else if (h < 2) { r = x; g = 1; }
  else if (h < 3) { g = 1; b = x; }
  else if (h < 4) { g = x; b = 1; }
  else            { r = x; b = 1; }
  rgb[0] = to_byte(255.0 * r);
  rgb[1] = to_byte(255.0 * g);
  rgb[2] = to_byte(255.0 * b);
}

} // namespace

Image8 render_grid(const Eigen::ArrayXXd &values, const RenderOptions &opt) {
  Image8 img;
  img.height = static_cast<int>(values.rows());
  img.width = static_cast<int>(values.cols());
  img.gray.resize(static_cast<std::size_t>(img.width) * img.height);
  const double hi = values.maxCoeff();
  const double lo = opt.zero_floor ? 0.0 : values.minCoeff();
  const double span = hi - lo;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double g = span > 0.0 ? (values(y, x) - lo) / span * 255.0 : 0.0;
      if (opt.invert) g = 255.0 - g;
      img.gray[static_cast<std::size_t>(y) * img.width + x] = to_byte(g);
    }
  return img;
}

Image8 render_iwe(const IWE &iwe, const RenderOptions &opt) {
  if (iwe.mode == AccumMode::count) return render_grid(iwe.values, opt);
  // Polarity: zero at mid-gray, symmetric scaling.
  Image8 img;
  img.height = iwe.height();
  img.width = iwe.width();
  img.gray.resize(static_cast<std::size_t>(img.width) * img.height);
  const double m = iwe.values.abs().maxCoeff();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double g = m > 0.0 ? 127.5 * (1.0 + iwe.values(y, x) / m) : 128.0;
      if (opt.invert) g = 255.0 - g;
      img.gray[static_cast<std::size_t>(y) * img.width + x] = to_byte(g);
    }
  return img;
}

Image8 render_depth(const Eigen::ArrayXXd &depth, double z_min, double z_max) {
  Image8 img;
  img.height = static_cast<int>(depth.rows());
  img.width = static_cast<int>(depth.cols());
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
  const double span = std::max(z_max - z_min, 1e-12);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double z = depth(y, x);
      if (!std::isfinite(z)) continue; // unselected stays black
      const double s = std::clamp((z - z_min) / span, 0.0, 1.0);
      hue_to_rgb(240.0 * s, &img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3]);
    }
  return img;
}

void save_pgm(const std::string &path, const Image8 &img) {
  if (img.is_rgb())
    throw InvalidParameterError("grayscale format cannot hold RGB data");
  auto out = open_binary(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char *>(img.gray.data()),
            static_cast<std::streamsize>(img.gray.size()));
}

void save_png(const std::string &path, const Image8 &img) {
  FILE *fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw InvalidParameterError("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw InvalidParameterError("png encode failed for " + path);
  }
  png_init_io(png, fp);
  const bool rgb = img.is_rgb();
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::uint8_t *base = rgb ? img.rgb.data() : img.gray.data();
  const std::size_t stride =
      static_cast<std::size_t>(img.width) * (rgb ? 3 : 1);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(base + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void save_grid(const std::string &path, const IWE &iwe) {
  auto out = open_binary(path);
  out << "IWE1\n"
      << iwe.width() << ' ' << iwe.height() << ' '
      << (iwe.mode == AccumMode::count ? "count" : "polarity") << '\n';
  std::vector<float> row(static_cast<std::size_t>(iwe.width()));
  for (int y = 0; y < iwe.height(); ++y) {
    for (int x = 0; x < iwe.width(); ++x)
      row[static_cast<std::size_t>(x)] = static_cast<float>(iwe.values(y, x));
    out.write(reinterpret_cast<const char *>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

IWE load_grid(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::string magic;
  if (!std::getline(in, magic) || magic != "IWE1")
    throw ParseError("bad grid magic", 1);
  std::string header;
  if (!std::getline(in, header)) throw ParseError("missing grid header", 2);
  std::istringstream hs(header);
  int width = 0, height = 0;
  std::string mode;
  if (!(hs >> width >> height >> mode) || width <= 0 || height <= 0 ||
      (mode != "count" && mode != "polarity"))
    throw ParseError("bad grid header", 2);
  IWE iwe;
  iwe.grid = {width, height, 0.0, 0.0};
  iwe.mode = mode == "count" ? AccumMode::count : AccumMode::polarity;
  iwe.values.resize(height, width);
  std::vector<float> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    in.read(reinterpret_cast<char *>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw ParseError("truncated grid data", 3);
    for (int x = 0; x < width; ++x)
      iwe.values(y, x) = static_cast<double>(row[static_cast<std::size_t>(x)]);
  }
  return iwe;
}

void save_heatmap_csv(const std::string &path, const Heatmap &hm,
                      const std::string &axis1, const std::string &axis2) {
  if (hm.grid.dims() != 2)
    throw InvalidParameterError("heatmap export expects a 2-D lattice");
  auto out = open_text(path);
  out << axis1 << ',' << axis2 << ",f\n";
  for (std::size_t i = 0; i < hm.f.size(); ++i) {
    const Eigen::VectorXd p = hm.grid.point(i);
    write_csv_value(out, p[0]);
    out << ',';
    write_csv_value(out, p[1]);
    out << ',';
    write_csv_value(out, hm.f[i]);
    out << '\n';
  }
}

void save_series_csv(const std::string &path,
                     const AngularVelocitySeries &series) {
  auto out = open_text(path);
  out << "t,wx,wy,wz,f,n_events\n";
  for (const auto &s : series.samples) {
    write_csv_value(out, s.t_mid);
    out << ',';
    write_csv_value(out, s.omega.x());
    out << ',';
    write_csv_value(out, s.omega.y());
    out << ',';
    write_csv_value(out, s.omega.z());
    out << ',';
    write_csv_value(out, s.f);
    out << ',' << s.n_events << '\n';
  }
}

void save_curve_csv(const std::string &path,
                    const std::vector<std::pair<double, double>> &curve,
                    const std::string &xname, const std::string &yname) {
  auto out = open_text(path);
  out << xname << ',' << yname << '\n';
  for (const auto &[x, y] : curve) {
    write_csv_value(out, x);
    out << ',';
    write_csv_value(out, y);
    out << '\n';
  }
}

void save_boxplot_csv(const std::string &path,
                      const std::vector<SubintervalStats> &stats) {
  auto out = open_text(path);
  out << "t_begin,t_end,q1,median,q3,min,max,rms,n\n";
  for (const auto &s : stats) {
    const double vals[8] = {s.t_begin, s.t_end, s.q1, s.median,
                            s.q3,      s.min,   s.max, s.rms};
    for (double v : vals) {
      write_csv_value(out, v);
      out << ',';
    }
    out << s.n << '\n';
  }
}

} // namespace cmax

#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "cmax/types.hpp"
#include "cmax/warp.hpp"

namespace cmax {

enum class AccumMode : std::uint8_t { count, polarity };
enum class SplatKind : std::uint8_t { nearest, bilinear, gaussian };

// Accumulation target. Warped positions are mapped to grid coordinates by
// subtracting the origin, so patch-local grids just shift the origin.
struct GridSpec {
  int width = 0;
  int height = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
};

struct AccumOptions {
  GridSpec grid;
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  double gauss_eps = 1.0;    // px; the smooth-delta width
  double gauss_radius = 3.0; // px; truncation radius (default 3 eps, cap 16)
  int threads = 1;
};

// Image of warped events: each in-view event deposits b_k (count: 1,
// polarity: p_k) through the chosen splat; out-of-view events only bump
// n_discarded / discarded_mass.
struct IWE {
  Eigen::ArrayXXd values; // (height, width)
  GridSpec grid;
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  std::size_t n_events = 0;
  std::size_t n_discarded = 0;
  double discarded_mass = 0.0;

  int width() const { return grid.width; }
  int height() const { return grid.height; }
  double sum() const { return values.sum(); }
  double discard_fraction() const {
    return n_events == 0 ? 0.0
                         : static_cast<double>(n_discarded) / n_events;
  }
};

struct ContrastValue {
  double f = 0.0;  // population variance over all pixels
  double mean = 0.0;
};

// Variance of H over all width*height pixels, zeros included (Welford).
ContrastValue contrast(const IWE &iwe);

// Variance of the 3x3 patch around (cx, cy) after weighting with the fixed
// Gaussian window (sigma = 1 px, peak weight 1). The patch must be fully
// inside the grid.
double weighted_patch_contrast(const IWE &iwe, int cx, int cy);
double weighted_patch_contrast(const Eigen::ArrayXXd &values, int cx, int cy);

// Discrete truncated-Gaussian stencil, normalized to sum 1 over the
// support. (frac_x, frac_y) place the continuous center inside the
// integer-offset stencil.
struct SplatKernel {
  int radius = 0; // integer stencil radius
  Eigen::ArrayXXd w;
};
SplatKernel gaussian_splat_kernel(double eps, double radius,
                                  double frac_x = 0.0, double frac_y = 0.0);

struct Histogram {
  std::vector<std::size_t> counts;
  double lo = 0.0, hi = 0.0;
  std::size_t zero_pixels = 0; // pixels with exactly no accumulated mass
};
Histogram histogram(const IWE &iwe, int bins);

namespace detail {

// One event deposited into a grid. Gaussian weights are renormalized over
// the truncated support, so interior events always deposit exactly b; the
// part of a border event's kernel falling off-grid is lost.
inline void deposit(Eigen::ArrayXXd &v, const GridSpec &g, double gx,
                    double gy, double b, SplatKind splat, double eps,
                    double radius, bool &in_view) {
  const int W = g.width, H = g.height;
  switch (splat) {
  case SplatKind::nearest: {
    const long ix = std::lround(gx), iy = std::lround(gy);
    if (ix < 0 || ix >= W || iy < 0 || iy >= H) {
      in_view = false;
      return;
    }
    v(iy, ix) += b;
    return;
  }
  case SplatKind::bilinear: {
    if (gx < 0.0 || gx > W - 1 || gy < 0.0 || gy > H - 1) {
      in_view = false;
      return;
    }
    const int ix = static_cast<int>(std::floor(gx));
    const int iy = static_cast<int>(std::floor(gy));
    const double fx = gx - ix, fy = gy - iy;
    v(iy, ix) += b * (1.0 - fx) * (1.0 - fy);
    if (ix + 1 < W) v(iy, ix + 1) += b * fx * (1.0 - fy);
    if (iy + 1 < H) v(iy + 1, ix) += b * (1.0 - fx) * fy;
    if (ix + 1 < W && iy + 1 < H) v(iy + 1, ix + 1) += b * fx * fy;
    return;
  }
  case SplatKind::gaussian: {
    if (gx < 0.0 || gx > W - 1 || gy < 0.0 || gy > H - 1) {
      in_view = false;
      return;
    }
    radius = std::min(radius, 16.0); // stencil storage cap
    const int r = static_cast<int>(std::ceil(radius));
    const int cx = static_cast<int>(std::lround(gx));
    const int cy = static_cast<int>(std::lround(gy));
    const double inv2e2 = 1.0 / (2.0 * eps * eps);
    const double r2 = radius * radius;
    double norm = 0.0;
    double wx[2 * 16 + 1], wy[2 * 16 + 1]; // separable factors
    const int rr = r;
    for (int i = -rr; i <= rr; ++i) {
      const double dx = cx + i - gx;
      const double dy = cy + i - gy;
      wx[i + rr] = std::exp(-dx * dx * inv2e2);
      wy[i + rr] = std::exp(-dy * dy * inv2e2);
    }
    for (int j = -rr; j <= rr; ++j) {
      const double dy = cy + j - gy;
      for (int i = -rr; i <= rr; ++i) {
        const double dx = cx + i - gx;
        if (dx * dx + dy * dy > r2) continue;
        norm += wx[i + rr] * wy[j + rr];
      }
    }
    const double scale = b / norm;
    for (int j = -rr; j <= rr; ++j) {
      const int py = cy + j;
      if (py < 0 || py >= H) continue;
      const double dy = py - gy;
      for (int i = -rr; i <= rr; ++i) {
        const int px = cx + i;
        if (px < 0 || px >= W) continue;
        const double dx = px - gx;
        if (dx * dx + dy * dy > r2) continue;
        v(py, px) += scale * wx[i + rr] * wy[j + rr];
      }
    }
    return;
  }
  }
}

} // namespace detail

// Warps every event and accumulates it. WarpFn is invoked as
// fn(event, index) -> WarpedPoint.
//
// Events are processed in fixed-size chunks whose partial grids are merged
// in chunk order, so the result is bit-identical for any thread count.
template <class WarpFn>
IWE accumulate(const EventSlice &slice, WarpFn &&warp,
               const AccumOptions &opt) {
  constexpr std::size_t kChunk = 1 << 16;

  IWE out;
  out.grid = opt.grid;
  out.mode = opt.mode;
  out.splat = opt.splat;
  out.n_events = slice.size();
  out.values = Eigen::ArrayXXd::Zero(opt.grid.height, opt.grid.width);

  const std::size_t n = slice.size();
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;

  auto run_chunk = [&](std::size_t c, Eigen::ArrayXXd &v,
                       std::size_t &discarded, double &dmass) {
    const std::size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
    for (std::size_t k = lo; k < hi; ++k) {
      const Event &e = slice.events[k];
      const double b = opt.mode == AccumMode::count ? 1.0 : double(e.p);
      WarpedPoint wp = warp(e, k);
      bool in_view = wp.in_view;
      if (in_view) {
        detail::deposit(v, opt.grid, wp.xy.x() - opt.grid.origin_x,
                        wp.xy.y() - opt.grid.origin_y, b, opt.splat,
                        opt.gauss_eps, opt.gauss_radius, in_view);
      }
      if (!in_view) {
        ++discarded;
        dmass += b;
      }
    }
  };

  const int threads = std::max(1, opt.threads);
  if (n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      run_chunk(c, out.values, out.n_discarded, out.discarded_mass);
    return out;
  }
  if (threads == 1) {
    // Same per-chunk partial sums as the threaded path below, so rounding
    // (and therefore the result) is independent of the thread count.
    Eigen::ArrayXXd part;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      part = Eigen::ArrayXXd::Zero(opt.grid.height, opt.grid.width);
      run_chunk(c, part, out.n_discarded, out.discarded_mass);
      out.values += part;
    }
    return out;
  }

  // Wave-parallel: up to `threads` chunk grids in flight, merged in order.
  std::vector<Eigen::ArrayXXd> partial(threads);
  std::vector<std::size_t> pdisc(threads);
  std::vector<double> pmass(threads);
  for (std::size_t wave = 0; wave < n_chunks; wave += threads) {
    const int in_wave =
        static_cast<int>(std::min<std::size_t>(threads, n_chunks - wave));
    std::vector<std::thread> pool;
    pool.reserve(in_wave);
    for (int s = 0; s < in_wave; ++s) {
      partial[s] = Eigen::ArrayXXd::Zero(opt.grid.height, opt.grid.width);
      pdisc[s] = 0;
      pmass[s] = 0.0;
      pool.emplace_back([&, s] {
        run_chunk(wave + s, partial[s], pdisc[s], pmass[s]);
      });
    }
    for (auto &th : pool) th.join();
    for (int s = 0; s < in_wave; ++s) {
      out.values += partial[s];
      out.n_discarded += pdisc[s];
      out.discarded_mass += pmass[s];
    }
  }
  return out;
}

// accumulate ∘ contrast.
template <class WarpFn>
double objective(const EventSlice &slice, WarpFn &&warp,
                 const AccumOptions &opt) {
  return contrast(accumulate(slice, std::forward<WarpFn>(warp), opt)).f;
}

} // namespace cmax

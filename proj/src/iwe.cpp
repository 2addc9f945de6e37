#include "cmax/iwe.hpp"

#include <algorithm>
#include <cmath>

#include "cmax/errors.hpp"

namespace cmax {

ContrastValue contrast(const IWE &iwe) {
  const double *p = iwe.values.data();
  const std::size_t n = static_cast<std::size_t>(iwe.values.size());
  if (n == 0) throw InvalidParameterError("empty grid has no contrast");
  // Welford's single-pass mean/variance recurrence.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = p[k] - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (p[k] - mean);
  }
  return {m2 / static_cast<double>(n), mean};
}

double weighted_patch_contrast(const Eigen::ArrayXXd &values, int cx, int cy) {
  const int W = static_cast<int>(values.cols());
  const int H = static_cast<int>(values.rows());
  if (cx < 1 || cx > W - 2 || cy < 1 || cy > H - 2)
    throw InvalidParameterError("patch center too close to the border");
  // Fixed 3x3 Gaussian window, sigma = 1 px, peak weight 1.
  static const double w1 = std::exp(-0.5), w2 = std::exp(-1.0);
  const double w[3][3] = {{w2, w1, w2}, {w1, 1.0, w1}, {w2, w1, w2}};
  double sum = 0.0, sum2 = 0.0;
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      const double v = w[j + 1][i + 1] * values(cy + j, cx + i);
      sum += v;
      sum2 += v * v;
    }
  const double mean = sum / 9.0;
  return sum2 / 9.0 - mean * mean;
}

double weighted_patch_contrast(const IWE &iwe, int cx, int cy) {
  return weighted_patch_contrast(iwe.values, cx, cy);
}

SplatKernel gaussian_splat_kernel(double eps, double radius, double frac_x,
                                  double frac_y) {
  if (!(eps > 0.0)) throw InvalidParameterError("splat width must be > 0");
  if (radius < 2.0 * eps)
    throw InvalidParameterError("truncation radius must be >= 2 eps");
  SplatKernel k;
  k.radius = static_cast<int>(std::ceil(radius));
  const int r = k.radius;
  k.w = Eigen::ArrayXXd::Zero(2 * r + 1, 2 * r + 1);
  const double inv2e2 = 1.0 / (2.0 * eps * eps);
  const double r2 = radius * radius;
  double total = 0.0;
  for (int j = -r; j <= r; ++j)
    for (int i = -r; i <= r; ++i) {
      const double dx = i - frac_x, dy = j - frac_y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > r2) continue;
      const double v = std::exp(-d2 * inv2e2);
      k.w(j + r, i + r) = v;
      total += v;
    }
  k.w /= total;
  return k;
}

Histogram histogram(const IWE &iwe, int bins) {
  if (bins < 2) throw InvalidParameterError("need at least 2 bins");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  h.lo = iwe.values.minCoeff();
  h.hi = iwe.values.maxCoeff();
  const double *p = iwe.values.data();
  const std::size_t n = static_cast<std::size_t>(iwe.values.size());
  const double span = h.hi - h.lo;
  for (std::size_t k = 0; k < n; ++k) {
    if (p[k] == 0.0) ++h.zero_pixels;
    int b = span > 0.0
                ? static_cast<int>((p[k] - h.lo) / span * bins)
                : 0;
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

} // namespace cmax

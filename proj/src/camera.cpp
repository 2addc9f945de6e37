#include "cmax/camera.hpp"

#include <cmath>

namespace cmax {
namespace {

// Radial-tangential displacement of a calibrated point.
Eigen::Vector2d distortion_map(const Eigen::Vector2d &xc,
                               const std::array<double, 5> &d) {
  const double x = xc.x(), y = xc.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (d[0] + r2 * (d[1] + r2 * d[4]));
  const double dx = 2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x);
  const double dy = d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y;
  return {x * radial + dx, y * radial + dy};
}

} // namespace

Eigen::Vector2d distort_calibrated(const Eigen::Vector2d &xc,
                                   const CameraIntrinsics &K) {
  if (!K.has_distortion()) return xc;
  return distortion_map(xc, K.dist);
}

Eigen::Vector2d pixel_to_calibrated(const Eigen::Vector2d &px,
                                    const CameraIntrinsics &K) {
  Eigen::Vector2d xd((px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy);
  if (!K.has_distortion()) return xd;
  // Fixed-point undistortion: invert x_d = x * radial(x) + tangential(x).
  Eigen::Vector2d x = xd;
  const auto &d = K.dist;
  for (int it = 0; it < 10; ++it) {
    const double r2 = x.squaredNorm();
    const double radial = 1.0 + r2 * (d[0] + r2 * (d[1] + r2 * d[4]));
    const Eigen::Vector2d tang(
        2.0 * d[2] * x.x() * x.y() + d[3] * (r2 + 2.0 * x.x() * x.x()),
        d[2] * (r2 + 2.0 * x.y() * x.y()) + 2.0 * d[3] * x.x() * x.y());
    const Eigen::Vector2d next = (xd - tang) / radial;
    const double step_px =
        std::max(std::abs(next.x() - x.x()) * K.fx,
                 std::abs(next.y() - x.y()) * K.fy);
    x = next;
    if (step_px < 1e-8) break;
  }
  return x;
}

Eigen::Vector2d calibrated_to_pixel(const Eigen::Vector2d &xc,
                                    const CameraIntrinsics &K) {
  const Eigen::Vector2d xd = distort_calibrated(xc, K);
  return {xd.x() * K.fx + K.cx, xd.y() * K.fy + K.cy};
}

EventSlice undistort_events(const EventSlice &slice,
                            const CameraIntrinsics &K) {
  if (!K.has_distortion()) return slice;
  EventSlice out = slice;
  const CameraIntrinsics ideal = undistorted_model(K);
  for (Event &e : out.events) {
    const Eigen::Vector2d xc = pixel_to_calibrated(e.xy(), K);
    const Eigen::Vector2d px = calibrated_to_pixel(xc, ideal);
    e.x = px.x();
    e.y = px.y();
  }
  return out;
}

CameraIntrinsics undistorted_model(const CameraIntrinsics &K) {
  CameraIntrinsics ideal = K;
  ideal.dist = {{0, 0, 0, 0, 0}};
  return ideal;
}

} // namespace cmax

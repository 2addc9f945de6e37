#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "cmax/errors.hpp"

namespace cmax {

// A single brightness-change record. Coordinates are pixels (continuous
// after undistortion), t is seconds, p is the sign of the change.
struct Event {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  int p = +1; // -1 or +1

  Eigen::Vector2d xy() const { return {x, y}; }
};

// A time-ordered group of events plus the reference time that warps
// transport them to.
struct EventSlice {
  std::vector<Event> events;
  double t_ref = 0.0;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }
  double t_first() const { return events.front().t; }
  double t_last() const { return events.back().t; }
  double duration() const { return empty() ? 0.0 : t_last() - t_first(); }
  double t_mid() const { return empty() ? t_ref : 0.5 * (t_first() + t_last()); }
};

// Pinhole model with plumb-bob distortion (k1 k2 p1 p2 k3).
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  std::array<double, 5> dist{{0, 0, 0, 0, 0}};
  int width = 0, height = 0;

  bool has_distortion() const {
    for (double d : dist)
      if (d != 0.0) return true;
    return false;
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw InvalidParameterError("focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw InvalidParameterError("image dimensions must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
      throw InvalidParameterError("principal point outside the image");
  }
};

// Camera-to-world pose: x_world = q * x_cam + p.
struct Pose {
  double t = 0.0;
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();

  Eigen::Isometry3d isometry() const {
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = q.toRotationMatrix();
    T.translation() = p;
    return T;
  }
};

// Strictly time-ordered poses; at least two are required for interpolation.
struct PoseTrajectory {
  static constexpr const char *kConvention = "camera_to_world";

  std::vector<Pose> poses;

  bool empty() const { return poses.empty(); }
  std::size_t size() const { return poses.size(); }
  double t_first() const { return poses.front().t; }
  double t_last() const { return poses.back().t; }
};

} // namespace cmax

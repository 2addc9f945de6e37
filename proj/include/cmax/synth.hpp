#pragma once

#include <cstdint>
#include <vector>

#include "cmax/trajectory.hpp"
#include "cmax/types.hpp"

namespace cmax {

// Scene geometry shared by the generators: a set of edge points, each with a
// contrast sign and a unit edge tangent used to decide event polarity
// against the local image motion.
struct EdgePoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero(); // px (flow) or calibrated
  Eigen::Vector2d dir = Eigen::Vector2d(1, 0);  // unit tangent
  int sign = 1;                                 // edge contrast sign
};

struct EdgeScene {
  std::vector<EdgePoint> points;
};

// Edge layouts centered on the origin. `span` is the half-extent of the
// pattern; `spacing` the sample distance along each segment.
EdgeScene make_bar_scene(double span, double spacing, int n_bars = 6);
EdgeScene make_grid_scene(double span, double spacing, int n_lines = 5);

struct FlowSynthOptions {
  Eigen::Vector2d v = Eigen::Vector2d(-40.0, 0.0); // px/s
  double duration = 0.2;                           // s
  double rate = 120.0; // events per pixel of travel, per edge point
  double noise_px = 0.0;
  double jitter_s = 0.0;
  double noise_fraction = 0.0; // uniform clutter, fraction of signal count
  int width = 240, height = 180;
  std::uint64_t seed = 1;
};

// Events from edges translating with constant image velocity. Each edge
// point fires every 1/rate pixels of travel; timestamps sit at interval
// midpoints so scaling the speed (or duration) scales the count linearly.
// Polarity = edge sign flipped when v opposes the edge normal.
EventSlice gen_flow_scene(const EdgeScene &scene, const FlowSynthOptions &opt);

struct RotationSynthOptions {
  // Piecewise-constant angular velocity; segment i covers
  // [knots[i], knots[i+1]) and the last segment extends to `duration`.
  // knots[0] must be 0.
  std::vector<double> knots = {0.0};
  std::vector<Eigen::Vector3d> omegas = {Eigen::Vector3d(0, 0, 1)};
  double duration = 1.0;
  double rate = 60.0; // events per pixel of image travel per scene point
  double noise_px = 0.0;
  double jitter_s = 0.0;
  double noise_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct RotationSynth {
  EventSlice slice;
  PoseTrajectory trajectory; // dense pose samples of the generating motion
  std::vector<double> knots; // the piecewise-constant schedule
  std::vector<Eigen::Vector3d> omegas;
  Eigen::Vector3d omega_at(double t) const;
};

// Events from far-away points under pure camera rotation. Points live on the
// unit sphere (given as calibrated coordinates at t = 0); each emits an
// event every 1/rate pixels of image-plane travel, starting at t = 0, so a
// motionless camera emits nothing.
RotationSynth gen_rotation_scene(const EdgeScene &scene,
                                 const CameraIntrinsics &K,
                                 const RotationSynthOptions &opt);

struct PlanarSynthOptions {
  // Plane in the world (= t=0 camera) frame, homogeneous (n, d):
  // n . X + d = 0 with d > 0; a visible fronto-parallel plane at depth Z is
  // n = (0,0,-1), d = Z.
  Eigen::Vector3d n = Eigen::Vector3d(0, 0, -1);
  double d = 1.0;
  // Constant world-to-camera twist: x_c = exp(omega^ t) x_w + v t.
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  double duration = 0.25;
  double rate = 60.0;
  double noise_px = 0.0;
  double jitter_s = 0.0;
  double noise_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct PlanarSynth {
  EventSlice slice;
  PoseTrajectory trajectory; // camera-to-world samples of the motion
  Pose ref_pose;             // identity pose at t = 0
};

// Events from edge points lying on a plane, viewed by a moving camera.
// Scene xy are calibrated coordinates in the t=0 view; each point is
// back-projected onto the plane and reprojected along the trajectory.
// Throws InvalidParameterError if any scene point leaves the camera's front
// side (z <= 0) during the motion.
PlanarSynth gen_planar_scene(const EdgeScene &scene, const CameraIntrinsics &K,
                             const PlanarSynthOptions &opt);

// Camera sliding with constant world velocity v_w in front of a
// fronto-parallel plane at depth z (depth measured in the t=0 view).
PlanarSynth gen_translation_scene(const EdgeScene &scene,
                                  const CameraIntrinsics &K, double z,
                                  const Eigen::Vector3d &v_w, double duration,
                                  double rate, std::uint64_t seed = 1);

CameraIntrinsics default_camera(int width = 240, int height = 180);

} // namespace cmax

#pragma once

#include "cmax/types.hpp"

namespace cmax {

// Candidate optical flow, pixels/second.
struct FlowParams {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
};

// Angular velocity in the camera frame, rad/s. Image points follow
// x̄(t) ∝ exp(ŵ (t - t_ref)) x̄(t_ref) in calibrated coordinates.
struct RotationParams {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
};

// Depth of the plane fronto-parallel to the reference view, meters.
struct DepthParams {
  double z = 1.0;
};

// 8-DOF planar motion: camera angular velocity, translation velocity over
// plane distance, and the latitude-longitude angles of the plane normal.
//
// Conventions (fixed here and verified against the projection oracle):
// the homography composes from the world-to-camera motion R(t) = exp(ŵ dt),
// t(t) = v dt, and the scene plane has homogeneous coordinates (n, d) in the
// reference frame, n·X + d = 0 with d > 0. A plane in front of the camera
// therefore has n_z < 0; (v/d, n) and (-v/d, -n) describe the same motion.
struct HomographyParams {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_over_d = Eigen::Vector3d::Zero();
  double phi = 0.0;
  double psi = 0.0;

  Eigen::Vector3d normal() const;
  // H(dt) = exp(ŵ dt) - dt (v/d) n^T, H(0) = Id. Maps reference-view
  // calibrated points into the view at t_ref + dt.
  Eigen::Matrix3d matrix(double dt) const;
};

// Rotation-group exponential, Rodrigues form with a second-order Taylor
// fallback below 1e-8 rad.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d &w);
// Inverse of exp_so3.
Eigen::Vector3d log_so3(const Eigen::Matrix3d &R);

// A warped image position; in_view = false flags points lost to the plane
// at infinity (|z| < 1e-9 before dehomogenization). Such events are counted
// as discarded by the accumulator, never clamped.
struct WarpedPoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  bool in_view = true;
};

// x' = x - (t - t_ref) v.
Eigen::Vector2d warp_flow(const Eigen::Vector2d &x, double t, double t_ref,
                          const FlowParams &params);

// Lift to calibrated homogeneous coordinates, rotate by exp(-ŵ (t - t_ref)),
// reproject.
WarpedPoint warp_rotation(const Eigen::Vector2d &x_px, double t, double t_ref,
                          const RotationParams &params,
                          const CameraIntrinsics &K);

// Transfer through the plane at depth z fronto-parallel to the reference
// view, using the relative pose between P(t) and the reference pose.
WarpedPoint warp_plane_depth(const Eigen::Vector2d &x_px, double t,
                             const DepthParams &params,
                             const PoseTrajectory &traj, const Pose &ref_pose,
                             const CameraIntrinsics &K);

// x̄' ∝ H^{-1}(t - t_ref) x̄. Throws InvalidParameterError when
// |det H| < 1e-12.
WarpedPoint warp_homography(const Eigen::Vector2d &x_px, double t,
                            double t_ref, const HomographyParams &params,
                            const CameraIntrinsics &K);

// Latitude-longitude parametrization of the unit sphere with the pole on
// the optical axis: n(0, 0) = (0, 0, 1).
Eigen::Vector3d normal_from_angles(double phi, double psi);
// Inverse; at the poles (n = ±(0,0,1)) psi is defined as 0.
std::pair<double, double> angles_from_normal(const Eigen::Vector3d &n);

// Precomputes the per-event relative poses of a slice against a reference
// view so that plane sweeps only pay for the depth-dependent part.
class PlaneDepthWarper {
public:
  PlaneDepthWarper(const EventSlice &slice, const PoseTrajectory &traj,
                   const Pose &ref_pose, const CameraIntrinsics &K);

  std::size_t size() const { return cache_.size(); }
  WarpedPoint warp(std::size_t k, double z) const;
  // True when the relative motion is pure rotation for every event, which
  // makes depth unobservable.
  bool has_translation() const { return has_translation_; }

private:
  struct PerEvent {
    Eigen::Matrix3d R_re;  // event-cam -> reference rotation
    Eigen::Vector3d t_re;
    Eigen::Vector3d n_e;   // reference plane normal in the event frame
    double plane_offset;   // n_e · t_er
    Eigen::Vector3d xbar;  // lifted calibrated event position
  };
  std::vector<PerEvent> cache_;
  CameraIntrinsics K_;
  bool has_translation_ = false;
};

} // namespace cmax

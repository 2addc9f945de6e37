#include "cmax/warp.hpp"

#include <cmath>

#include "cmax/errors.hpp"
#include "cmax/trajectory.hpp"

namespace cmax {
namespace {

constexpr double kDehomogenizeTol = 1e-9;

Eigen::Matrix3d hat(const Eigen::Vector3d &w) {
  Eigen::Matrix3d W;
  W << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return W;
}

Eigen::Vector2d lift(const Eigen::Vector2d &px, const CameraIntrinsics &K) {
  return {(px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy};
}

Eigen::Vector2d project(const Eigen::Vector2d &xc, const CameraIntrinsics &K) {
  return {xc.x() * K.fx + K.cx, xc.y() * K.fy + K.cy};
}

WarpedPoint dehomogenize(const Eigen::Vector3d &y, const CameraIntrinsics &K) {
  WarpedPoint out;
  if (std::abs(y.z()) < kDehomogenizeTol) {
    out.in_view = false;
    return out;
  }
  out.xy = project({y.x() / y.z(), y.y() / y.z()}, K);
  return out;
}

struct RelativeView {
  Eigen::Matrix3d R_re;       // event camera -> reference rotation
  Eigen::Vector3d t_re;       // event camera origin in the reference frame
  Eigen::Vector3d n_e;        // reference z-axis seen from the event frame
  double plane_offset = 0.0;  // n_e . t_er
};

// Relative geometry between the event-time camera and the reference view,
// with the fronto-parallel plane n^T X = Z expressed in the event frame as
// n_e^T X = Z + plane_offset.
RelativeView relative_view(const Pose &event_pose, const Pose &ref_pose) {
  const Eigen::Matrix3d R_e = event_pose.q.toRotationMatrix();
  const Eigen::Matrix3d R_v = ref_pose.q.toRotationMatrix();
  RelativeView rv;
  rv.R_re = R_v.transpose() * R_e;
  rv.t_re = R_v.transpose() * (event_pose.p - ref_pose.p);
  const Eigen::Vector3d t_er =
      R_e.transpose() * (ref_pose.p - event_pose.p);
  rv.n_e = rv.R_re.row(2).transpose();
  rv.plane_offset = rv.n_e.dot(t_er);
  return rv;
}

WarpedPoint transfer_through_plane(const RelativeView &rv,
                                   const Eigen::Vector3d &xbar, double z,
                                   const CameraIntrinsics &K) {
  const double d_e = z + rv.plane_offset; // plane offset in the event frame
  if (std::abs(d_e) < 1e-12) return {Eigen::Vector2d::Zero(), false};
  const Eigen::Vector3d y =
      rv.R_re * xbar + rv.t_re * (rv.n_e.dot(xbar) / d_e);
  return dehomogenize(y, K);
}

} // namespace

Eigen::Matrix3d exp_so3(const Eigen::Vector3d &w) {
  const double theta = w.norm();
  const Eigen::Matrix3d W = hat(w);
  if (theta < 1e-8)
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d &R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Eigen::Vector2d warp_flow(const Eigen::Vector2d &x, double t, double t_ref,
                          const FlowParams &params) {
  return x - (t - t_ref) * params.v;
}

WarpedPoint warp_rotation(const Eigen::Vector2d &x_px, double t, double t_ref,
                          const RotationParams &params,
                          const CameraIntrinsics &K) {
  const Eigen::Vector2d xc = lift(x_px, K);
  const Eigen::Matrix3d R = exp_so3(-(t - t_ref) * params.omega);
  return dehomogenize(R * Eigen::Vector3d(xc.x(), xc.y(), 1.0), K);
}

WarpedPoint warp_plane_depth(const Eigen::Vector2d &x_px, double t,
                             const DepthParams &params,
                             const PoseTrajectory &traj, const Pose &ref_pose,
                             const CameraIntrinsics &K) {
  if (!(params.z > 0.0))
    throw InvalidParameterError("plane depth must be positive");
  const RelativeView rv = relative_view(interpolate_pose(traj, t), ref_pose);
  const Eigen::Vector2d xc = lift(x_px, K);
  return transfer_through_plane(rv, {xc.x(), xc.y(), 1.0}, params.z, K);
}

WarpedPoint warp_homography(const Eigen::Vector2d &x_px, double t,
                            double t_ref, const HomographyParams &params,
                            const CameraIntrinsics &K) {
  const Eigen::Matrix3d H = params.matrix(t - t_ref);
  const double det = H.determinant();
  if (std::abs(det) < 1e-12)
    throw InvalidParameterError("homography is singular");
  const Eigen::Vector2d xc = lift(x_px, K);
  const Eigen::Vector3d y =
      H.inverse() * Eigen::Vector3d(xc.x(), xc.y(), 1.0);
  return dehomogenize(y, K);
}

Eigen::Vector3d normal_from_angles(double phi, double psi) {
  const double sp = std::sin(phi);
  return {sp * std::cos(psi), sp * std::sin(psi), std::cos(phi)};
}

std::pair<double, double> angles_from_normal(const Eigen::Vector3d &n) {
  const Eigen::Vector3d u = n.normalized();
  const double phi = std::acos(std::clamp(u.z(), -1.0, 1.0));
  const double s = std::hypot(u.x(), u.y());
  const double psi = s < 1e-12 ? 0.0 : std::atan2(u.y(), u.x());
  return {phi, psi};
}

Eigen::Vector3d HomographyParams::normal() const {
  return normal_from_angles(phi, psi);
}

Eigen::Matrix3d HomographyParams::matrix(double dt) const {
  return exp_so3(dt * omega) - dt * v_over_d * normal().transpose();
}

PlaneDepthWarper::PlaneDepthWarper(const EventSlice &slice,
                                   const PoseTrajectory &traj,
                                   const Pose &ref_pose,
                                   const CameraIntrinsics &K)
    : K_(K) {
  cache_.reserve(slice.size());
  for (const Event &e : slice.events) {
    const RelativeView rv = relative_view(interpolate_pose(traj, e.t),
                                          ref_pose);
    const Eigen::Vector2d xc = lift(e.xy(), K);
    cache_.push_back({rv.R_re, rv.t_re, rv.n_e, rv.plane_offset,
                      {xc.x(), xc.y(), 1.0}});
    if (rv.t_re.norm() > 1e-12) has_translation_ = true;
  }
}

WarpedPoint PlaneDepthWarper::warp(std::size_t k, double z) const {
  if (!(z > 0.0))
    throw InvalidParameterError("plane depth must be positive");
  const PerEvent &pe = cache_[k];
  const double d_e = z + pe.plane_offset;
  if (std::abs(d_e) < 1e-12) return {Eigen::Vector2d::Zero(), false};
  const Eigen::Vector3d y =
      pe.R_re * pe.xbar + pe.t_re * (pe.n_e.dot(pe.xbar) / d_e);
  return dehomogenize(y, K_);
}

} // namespace cmax

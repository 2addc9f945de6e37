#include "cmax/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "cmax/errors.hpp"
#include "cmax/warp.hpp"

namespace cmax {

Pose interpolate_pose(const PoseTrajectory &traj, double t) {
  if (traj.size() < 2)
    throw InvalidParameterError("trajectory needs at least 2 poses");
  if (t < traj.t_first() || t > traj.t_last())
    throw OutOfRangeError("pose query t=" + std::to_string(t) +
                          " outside trajectory [" +
                          std::to_string(traj.t_first()) + ", " +
                          std::to_string(traj.t_last()) + "]");
  const auto &poses = traj.poses;
  auto it = std::lower_bound(
      poses.begin(), poses.end(), t,
      [](const Pose &pose, double time) { return pose.t < time; });
  if (it != poses.end() && it->t == t) return *it;
  const Pose &b = *it;       // first pose with b.t > t
  const Pose &a = *(it - 1);
  const double alpha = (t - a.t) / (b.t - a.t);
  Pose out;
  out.t = t;
  out.p = (1.0 - alpha) * a.p + alpha * b.p;
  out.q = a.q.slerp(alpha, b.q).normalized();
  return out;
}

Eigen::Vector3d trajectory_angular_velocity(const PoseTrajectory &traj,
                                            double t, double h) {
  const double t0 = std::max(t - h, traj.t_first());
  const double t1 = std::min(t + h, traj.t_last());
  if (!(t1 > t0))
    throw OutOfRangeError("angular-velocity stencil collapsed at t=" +
                          std::to_string(t));
  const Pose p0 = interpolate_pose(traj, t0);
  const Pose p1 = interpolate_pose(traj, t1);
  // Bearings transform with R_cw = q^T, so the increment over [t0, t1] is
  // R_cw(t1) R_cw(t0)^-1 = q1^T q0.
  const Eigen::Matrix3d inc = (p1.q.conjugate() * p0.q).toRotationMatrix();
  return log_so3(inc) / (t1 - t0);
}

} // namespace cmax

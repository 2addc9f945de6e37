#pragma once

#include "cmax/types.hpp"

namespace cmax {

// Pose at time t: translation lerp + rotation slerp between the bracketing
// poses, exact at the knots. Queries outside [t_first, t_last] throw
// OutOfRangeError; there is no extrapolation.
Pose interpolate_pose(const PoseTrajectory &traj, double t);

// Angular velocity at t by symmetric finite differences of the interpolated
// rotation, in the convention of the rotation warp: calibrated bearings
// evolve as x̄(t + h) ∝ exp(ŵ h) x̄(t). The stencil shrinks near the
// trajectory ends; t itself must be inside the covered range.
Eigen::Vector3d trajectory_angular_velocity(const PoseTrajectory &traj,
                                            double t, double h = 1e-4);

} // namespace cmax

#pragma once

#include <iosfwd>
#include <string>

#include "cmax/types.hpp"

namespace cmax {

struct LoadStats {
  std::size_t lines_read = 0;
  std::size_t skipped_out_of_bounds = 0;
};

// Text format: one `t x y p` per line, t seconds, p in {0,1}.
// Events outside [0,width)x[0,height) are counted and skipped; malformed
// lines raise ParseError with the 1-based line number.
EventSlice load_events(std::istream &in, int width, int height,
                       LoadStats *stats = nullptr);
EventSlice load_events_file(const std::string &path, int width, int height,
                            LoadStats *stats = nullptr);

// Writes `t x y p` with 9 significant digits and p mapped back to {0,1}.
void save_events(std::ostream &out, const EventSlice &slice);
void save_events_file(const std::string &path, const EventSlice &slice);

// Single line `fx fy cx cy [k1 k2 p1 p2 k3]`; a missing distortion tail
// defaults to zeros. The file carries no resolution, so it is an argument.
CameraIntrinsics load_calibration(std::istream &in, int width, int height);
CameraIntrinsics load_calibration_file(const std::string &path, int width,
                                       int height);
void save_calibration(std::ostream &out, const CameraIntrinsics &K);
void save_calibration_file(const std::string &path, const CameraIntrinsics &K);

// One `t px py pz qx qy qz qw` per line (camera-to-world), strictly
// increasing timestamps. Quaternions are renormalized on load.
PoseTrajectory load_trajectory(std::istream &in);
PoseTrajectory load_trajectory_file(const std::string &path);
void save_trajectory(std::ostream &out, const PoseTrajectory &traj);
void save_trajectory_file(const std::string &path, const PoseTrajectory &traj);

} // namespace cmax

#pragma once

#include <functional>
#include <optional>

#include "cmax/iwe.hpp"
#include "cmax/optimize.hpp"
#include "cmax/slicing.hpp"
#include "cmax/trajectory.hpp"
#include "cmax/warp.hpp"

namespace cmax {

// ---------------------------------------------------------------------------
// Patch optical flow

struct FlowOptions {
  double v_min = -80.0, v_max = 80.0; // px/s, both axes
  int grid_steps = 41;
  bool refine = true;
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  SplatKind refine_splat = SplatKind::gaussian;
  int margin_px = 5; // grid = event bounding box +/- margin
  int threads = 1;
  AscentOptions ascent; // h/scale filled with flow defaults when empty
};

struct FlowEstimate {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  double f = 0.0;
  double f_zero = 0.0; // objective at v = 0
  Heatmap heatmap;
  IWE iwe_zero;
  IWE iwe_grid;    // at the lattice argmax
  IWE iwe_optimum; // after refinement (== iwe_grid when refine = false)
  Eigen::Vector2d v_grid = Eigen::Vector2d::Zero();
  std::size_t evaluations = 0;
};

GridSpec flow_patch_grid(const EventSlice &slice, int margin_px);

FlowEstimate estimate_flow_patch(const EventSlice &slice,
                                 const FlowOptions &opt = {});

// Count vs polarity accumulation on the identical slice and search lattice.
struct PolarityComparison {
  FlowEstimate count;
  FlowEstimate polarity;
  // Cell count of the f >= f_max/2 superlevel set of each heatmap.
  std::size_t basin_cells_count = 0;
  std::size_t basin_cells_polarity = 0;
};

PolarityComparison compare_polarity_modes(const EventSlice &slice,
                                          FlowOptions opt = {});

// ---------------------------------------------------------------------------
// Rotational motion tracking

struct RotationObjectiveConfig {
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  double gauss_eps = 1.0;
  int threads = 1;
};

double rotation_objective(const EventSlice &slice, const Eigen::Vector3d &omega,
                          const CameraIntrinsics &K,
                          const RotationObjectiveConfig &cfg = {});

struct RotationTrackOptions {
  std::size_t window = 30000;
  std::size_t stride = 15000; // default window/2
  bool warm_start = true;
  Eigen::Vector3d omega0 = Eigen::Vector3d::Zero();
  RotationObjectiveConfig objective;
  AscentOptions ascent; // defaults applied when h is empty
  // Windows whose optimum discards more than this fraction of events, or
  // improves on f(0) by less than this gain, are flagged low confidence.
  double max_discard_fraction = 0.25;
  double min_gain = 1.05;
  // Low-confidence rescue: re-seed from a small lattice around the warm
  // start before giving up (0 disables).
  int rescue_steps = 5;
  double rescue_halfwidth = 4.0; // rad/s
};

struct AngularVelocitySample {
  double t_mid = 0.0;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  double f = 0.0;
  double f_zero = 0.0;
  std::size_t n_events = 0;
  bool low_confidence = false;
};

struct AngularVelocitySeries {
  std::vector<AngularVelocitySample> samples;
};

AngularVelocitySeries track_rotation(const EventSlice &stream,
                                     const CameraIntrinsics &K,
                                     const RotationTrackOptions &opt = {});

// Ground truth for the error metric: either analytic or finite differences
// of a pose trajectory.
using AngularVelocityFn = std::function<Eigen::Vector3d(double)>;

struct SubintervalStats {
  double t_begin = 0.0, t_end = 0.0;
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double min = 0.0, max = 0.0;
  double rms = 0.0;
  std::size_t n = 0;
};

struct AngularErrorReport {
  double rms_deg_per_s = 0.0;
  std::vector<double> per_sample_deg_per_s;
  std::vector<SubintervalStats> subintervals;
};

AngularErrorReport rms_angular_error(const AngularVelocitySeries &est,
                                     const AngularVelocityFn &gt_omega,
                                     int subintervals = 4);
AngularErrorReport rms_angular_error(const AngularVelocitySeries &est,
                                     const PoseTrajectory &gt,
                                     int subintervals = 4);

// ---------------------------------------------------------------------------
// Depth from a known trajectory

struct DepthSweepOptions {
  double z_min = 0.45, z_max = 2.4; // meters
  int z_steps = 50;                 // log-uniform samples
  int patch = 31;                   // patch side for contrast curves
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  double refine_tol = 1e-3; // meters
  int threads = 1;
};

struct DepthResult {
  std::vector<std::pair<double, double>> curve; // (z, f)
  double z_star = 0.0;    // lattice argmax
  double f_star = 0.0;
  double z_refined = 0.0; // golden-section refinement
  double f_refined = 0.0;
};

DepthResult depth_for_patch(const EventSlice &slice,
                            const PoseTrajectory &traj, const Pose &ref_pose,
                            const Eigen::Vector2d &patch_center_px,
                            const CameraIntrinsics &K,
                            const DepthSweepOptions &opt = {});

struct SemiDenseOptions {
  DepthSweepOptions sweep;
  int adaptive_k = 15;     // local-mean neighborhood side
  double adaptive_c = 0.0; // selected iff contrast > local mean + c
  int median_window = 3;
  int threads = 1;
};

struct SemiDenseDepthMap {
  Eigen::ArrayXXd depth;        // meters; NaN where unselected
  Eigen::ArrayXXd contrast;     // max patch contrast over the sweep
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  std::size_t selected() const { return static_cast<std::size_t>(mask.count()); }
};

SemiDenseDepthMap semidense_depth(const EventSlice &slice,
                                  const PoseTrajectory &traj,
                                  const Pose &ref_pose,
                                  const CameraIntrinsics &K,
                                  const SemiDenseOptions &opt = {});

struct DepthVsCountEntry {
  std::size_t requested = 0;
  std::size_t used = 0; // clamped to the slice length
  SemiDenseDepthMap map;
  double rms_relative = 0.0; // vs gt depth, selected pixels only (if given)
};

std::vector<DepthVsCountEntry>
depth_vs_event_count(const EventSlice &slice, const PoseTrajectory &traj,
                     const CameraIntrinsics &K,
                     const std::vector<std::size_t> &counts,
                     const SemiDenseOptions &opt = {},
                     std::optional<double> gt_depth = std::nullopt);

// ---------------------------------------------------------------------------
// Planar (8-DOF homography) motion

struct HomographyOptions {
  AccumMode mode = AccumMode::count;
  SplatKind splat = SplatKind::bilinear;
  AscentOptions ascent;
  int threads = 1;
  // Fronto-parallel prior for the plane normal when the initial v/d is zero
  // (phi = pi puts n at (0,0,-1); with v/d = 0 the warp is unaffected).
  bool frontoparallel_prior = true;
  // Extra ascent rounds with a halved finite-difference step each round.
  int polish_rounds = 4;
};

struct HomographyEstimate {
  HomographyParams theta;
  double f = 0.0;
  double f_zero = 0.0;
  IWE iwe_zero;
  IWE iwe_corrected;
  std::size_t evaluations = 0;
  bool converged = false;
};

double homography_objective(const EventSlice &slice,
                            const HomographyParams &theta,
                            const CameraIntrinsics &K, AccumMode mode,
                            SplatKind splat, int threads = 1);

HomographyEstimate estimate_homography(const EventSlice &slice,
                                       const HomographyParams &theta0,
                                       const CameraIntrinsics &K,
                                       const HomographyOptions &opt = {});

// (v/d, n) and (-v/d, -n) generate the same homography; canonicalize to
// n_z <= 0 for reporting and comparisons.
HomographyParams canonicalize(const HomographyParams &theta);

// Packing used by the optimizer: (omega, v/d, phi, psi).
Eigen::VectorXd pack_homography(const HomographyParams &theta);
HomographyParams unpack_homography(const Eigen::VectorXd &v);

} // namespace cmax

#include "cmax/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cmax/errors.hpp"

namespace cmax {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

AccumOptions accum_options(const GridSpec &grid, AccumMode mode,
                           SplatKind splat, int threads) {
  AccumOptions ao;
  ao.grid = grid;
  ao.mode = mode;
  ao.splat = splat;
  ao.threads = threads;
  return ao;
}

GridSpec sensor_grid(const CameraIntrinsics &K) {
  return {K.width, K.height, 0.0, 0.0};
}

double characteristic_scale(double duration, double focal = 1.0) {
  // Parameter change moving a warped event by about one pixel.
  return 1.0 / (std::max(duration, 1e-6) * focal);
}

double quantile(const std::vector<double> &sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

// ---------------------------------------------------------------------------
// Patch optical flow

GridSpec flow_patch_grid(const EventSlice &slice, int margin_px) {
  if (slice.empty())
    throw InvalidParameterError("empty slice has no bounding box");
  double xmin = slice.events[0].x, xmax = xmin;
  double ymin = slice.events[0].y, ymax = ymin;
  for (const Event &e : slice.events) {
    xmin = std::min(xmin, e.x);
    xmax = std::max(xmax, e.x);
    ymin = std::min(ymin, e.y);
    ymax = std::max(ymax, e.y);
  }
  GridSpec g;
  g.origin_x = std::floor(xmin) - margin_px;
  g.origin_y = std::floor(ymin) - margin_px;
  g.width = static_cast<int>(std::ceil(xmax) - std::floor(xmin)) + 1 +
            2 * margin_px;
  g.height = static_cast<int>(std::ceil(ymax) - std::floor(ymin)) + 1 +
             2 * margin_px;
  return g;
}

FlowEstimate estimate_flow_patch(const EventSlice &slice,
                                 const FlowOptions &opt) {
  if (slice.empty())
    throw InvalidParameterError("cannot estimate flow from an empty slice");
  const GridSpec grid = flow_patch_grid(slice, opt.margin_px);

  auto accumulate_at = [&](const Eigen::Vector2d &v, SplatKind splat,
                           int threads) {
    const FlowParams fp{v};
    return accumulate(
        slice,
        [&](const Event &e, std::size_t) {
          return WarpedPoint{warp_flow(e.xy(), e.t, slice.t_ref, fp), true};
        },
        accum_options(grid, opt.mode, splat, threads));
  };
  auto objective_at = [&](const Eigen::Vector2d &v, SplatKind splat,
                          int threads) {
    return contrast(accumulate_at(v, splat, threads)).f;
  };

  FlowEstimate est;
  SearchGrid sg;
  sg.lower = Eigen::Vector2d(opt.v_min, opt.v_min);
  sg.upper = Eigen::Vector2d(opt.v_max, opt.v_max);
  sg.steps = {opt.grid_steps, opt.grid_steps};
  const ObjectiveFn f_lattice = [&](const Eigen::VectorXd &th) {
    return objective_at({th[0], th[1]}, opt.splat, 1);
  };
  const OptimResult coarse =
      grid_search(f_lattice, sg, &est.heatmap, 10'000'000, opt.threads);
  est.v_grid = coarse.theta;
  est.evaluations = coarse.evaluations;
  est.iwe_grid = accumulate_at(est.v_grid, opt.splat, opt.threads);

  const SplatKind final_splat = opt.refine ? opt.refine_splat : opt.splat;
  est.v = est.v_grid;
  if (opt.refine) {
    AscentOptions ao = opt.ascent;
    if (ao.h.size() != 2) ao.h = Eigen::Vector2d(0.5, 0.5);
    if (ao.scale.size() != 2)
      ao.scale =
          Eigen::Vector2d::Constant(characteristic_scale(slice.duration()));
    const ObjectiveFn f_smooth = [&](const Eigen::VectorXd &th) {
      return objective_at({th[0], th[1]}, opt.refine_splat, opt.threads);
    };
    const OptimResult fine = conjugate_gradient_ascent(f_smooth, est.v_grid, ao);
    est.evaluations += fine.evaluations;
    est.v = fine.theta;
  }
  est.iwe_optimum = accumulate_at(est.v, final_splat, opt.threads);
  est.iwe_zero = accumulate_at(Eigen::Vector2d::Zero(), final_splat,
                               opt.threads);
  est.f = contrast(est.iwe_optimum).f;
  est.f_zero = contrast(est.iwe_zero).f;
  return est;
}

PolarityComparison compare_polarity_modes(const EventSlice &slice,
                                          FlowOptions opt) {
  PolarityComparison cmp;
  opt.mode = AccumMode::count;
  cmp.count = estimate_flow_patch(slice, opt);
  opt.mode = AccumMode::polarity;
  cmp.polarity = estimate_flow_patch(slice, opt);
  auto basin = [](const Heatmap &hm) {
    const double fmax = *std::max_element(hm.f.begin(), hm.f.end());
    std::size_t cells = 0;
    for (double v : hm.f)
      if (v >= 0.5 * fmax) ++cells;
    return cells;
  };
  cmp.basin_cells_count = basin(cmp.count.heatmap);
  cmp.basin_cells_polarity = basin(cmp.polarity.heatmap);
  return cmp;
}

// ---------------------------------------------------------------------------
// Rotational motion tracking

double rotation_objective(const EventSlice &slice, const Eigen::Vector3d &omega,
                          const CameraIntrinsics &K,
                          const RotationObjectiveConfig &cfg) {
  AccumOptions ao =
      accum_options(sensor_grid(K), cfg.mode, cfg.splat, cfg.threads);
  ao.gauss_eps = cfg.gauss_eps;
  const RotationParams rp{omega};
  return objective(
      slice,
      [&](const Event &e, std::size_t) {
        return warp_rotation(e.xy(), e.t, slice.t_ref, rp, K);
      },
      ao);
}

AngularVelocitySeries track_rotation(const EventSlice &stream,
                                     const CameraIntrinsics &K,
                                     const RotationTrackOptions &opt) {
  AngularVelocitySeries series;
  const std::size_t stride = opt.stride ? opt.stride : opt.window / 2;
  const auto windows =
      slice_by_count(stream, opt.window, stride, TrefPolicy::first_event);

  Eigen::Vector3d prev = opt.omega0;
  bool have_prev = false;
  for (const EventSlice &win : windows) {
    const ObjectiveFn f = [&](const Eigen::VectorXd &th) {
      return rotation_objective(win, Eigen::Vector3d(th), K, opt.objective);
    };
    AscentOptions ao = opt.ascent;
    if (ao.h.size() != 3) ao.h = Eigen::Vector3d::Constant(1e-3);
    if (ao.scale.size() != 3)
      ao.scale = Eigen::Vector3d::Constant(
          characteristic_scale(win.duration(), K.fx));

    const Eigen::Vector3d theta0 =
        opt.warm_start && have_prev ? prev : opt.omega0;
    const double f_zero = f(Eigen::Vector3d::Zero());
    OptimResult best = conjugate_gradient_ascent(f, theta0, ao);

    auto discard_at = [&](const Eigen::Vector3d &w) {
      const RotationParams rp{w};
      const IWE iwe = accumulate(
          win,
          [&](const Event &e, std::size_t) {
            return warp_rotation(e.xy(), e.t, win.t_ref, rp, K);
          },
          accum_options(sensor_grid(K), opt.objective.mode,
                        opt.objective.splat, opt.objective.threads));
      return iwe.discard_fraction();
    };
    auto is_low = [&](const OptimResult &r) {
      return discard_at(r.theta) > opt.max_discard_fraction ||
             r.f < opt.min_gain * f_zero;
    };

    bool low = is_low(best);
    if (low && opt.rescue_steps > 1) {
      SearchGrid sg;
      sg.lower = theta0.array() - opt.rescue_halfwidth;
      sg.upper = theta0.array() + opt.rescue_halfwidth;
      sg.steps = {opt.rescue_steps, opt.rescue_steps, opt.rescue_steps};
      const OptimResult seed = grid_search(f, sg);
      OptimResult retry = conjugate_gradient_ascent(f, seed.theta, ao);
      if (retry.f > best.f) {
        best = retry;
        low = is_low(best);
      }
    }

    series.samples.push_back({win.t_mid(), best.theta, best.f, f_zero,
                              win.size(), low});
    prev = best.theta;
    have_prev = true;
  }
  return series;
}

AngularErrorReport rms_angular_error(const AngularVelocitySeries &est,
                                     const AngularVelocityFn &gt_omega,
                                     int subintervals) {
  if (est.samples.empty())
    throw InvalidParameterError("cannot score an empty series");
  AngularErrorReport rep;
  double sq_sum = 0.0;
  for (const auto &s : est.samples) {
    const double err =
        (s.omega - gt_omega(s.t_mid)).norm() * kRadToDeg;
    rep.per_sample_deg_per_s.push_back(err);
    sq_sum += err * err;
  }
  rep.rms_deg_per_s =
      std::sqrt(sq_sum / static_cast<double>(est.samples.size()));

  const int k = std::max(1, subintervals);
  const double t0 = est.samples.front().t_mid;
  const double t1 = est.samples.back().t_mid;
  const double span = std::max(t1 - t0, 1e-12);
  std::vector<std::vector<double>> bins(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < est.samples.size(); ++i) {
    const int b = std::min(
        k - 1, static_cast<int>((est.samples[i].t_mid - t0) / span * k));
    bins[static_cast<std::size_t>(b)].push_back(rep.per_sample_deg_per_s[i]);
  }
  for (int b = 0; b < k; ++b) {
    auto &vals = bins[static_cast<std::size_t>(b)];
    std::sort(vals.begin(), vals.end());
    SubintervalStats st;
    st.t_begin = t0 + span * b / k;
    st.t_end = t0 + span * (b + 1) / k;
    st.n = vals.size();
    if (!vals.empty()) {
      st.min = vals.front();
      st.max = vals.back();
      st.q1 = quantile(vals, 0.25);
      st.median = quantile(vals, 0.5);
      st.q3 = quantile(vals, 0.75);
      double s2 = 0.0;
      for (double v : vals) s2 += v * v;
      st.rms = std::sqrt(s2 / static_cast<double>(vals.size()));
    }
    rep.subintervals.push_back(st);
  }
  return rep;
}

AngularErrorReport rms_angular_error(const AngularVelocitySeries &est,
                                     const PoseTrajectory &gt,
                                     int subintervals) {
  return rms_angular_error(
      est,
      [&](double t) {
        if (t < gt.t_first() || t > gt.t_last())
          throw OutOfRangeError("sample time outside ground-truth range");
        return trajectory_angular_velocity(gt, t);
      },
      subintervals);
}

// ---------------------------------------------------------------------------
// Depth from a known trajectory

namespace {

std::vector<double> log_depth_samples(const DepthSweepOptions &opt) {
  if (!(opt.z_min > 0.0) || !(opt.z_max > opt.z_min))
    throw InvalidParameterError("depth range must satisfy 0 < z_min < z_max");
  if (opt.z_steps < 2)
    throw InvalidParameterError("depth sweep needs >= 2 samples");
  std::vector<double> zs(static_cast<std::size_t>(opt.z_steps));
  const double log_ratio = std::log(opt.z_max / opt.z_min);
  for (int i = 0; i < opt.z_steps; ++i)
    zs[static_cast<std::size_t>(i)] =
        opt.z_min * std::exp(log_ratio * i / (opt.z_steps - 1));
  return zs;
}

} // namespace

DepthResult depth_for_patch(const EventSlice &slice,
                            const PoseTrajectory &traj, const Pose &ref_pose,
                            const Eigen::Vector2d &patch_center_px,
                            const CameraIntrinsics &K,
                            const DepthSweepOptions &opt) {
  const std::vector<double> zs = log_depth_samples(opt);
  const PlaneDepthWarper warper(slice, traj, ref_pose, K);
  GridSpec grid;
  grid.width = grid.height = opt.patch;
  grid.origin_x = patch_center_px.x() - (opt.patch - 1) / 2.0;
  grid.origin_y = patch_center_px.y() - (opt.patch - 1) / 2.0;
  const AccumOptions ao =
      accum_options(grid, opt.mode, opt.splat, opt.threads);
  auto fz = [&](double z) {
    return objective(
        slice,
        [&](const Event &, std::size_t k) { return warper.warp(k, z); }, ao);
  };

  DepthResult res;
  std::size_t best = 0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double f = fz(zs[i]);
    res.curve.emplace_back(zs[i], f);
    if (f > res.curve[best].second) best = i;
  }
  res.z_star = res.curve[best].first;
  res.f_star = res.curve[best].second;

  const double lo = best > 0 ? zs[best - 1] : zs[best];
  const double hi = best + 1 < zs.size() ? zs[best + 1] : zs[best];
  res.z_refined = res.z_star;
  res.f_refined = res.f_star;
  if (lo < hi) {
    const auto [zr, fr] = golden_section_max(fz, lo, hi, opt.refine_tol);
    if (fr >= res.f_star) {
      res.z_refined = zr;
      res.f_refined = fr;
    }
  }
  return res;
}

SemiDenseDepthMap semidense_depth(const EventSlice &slice,
                                  const PoseTrajectory &traj,
                                  const Pose &ref_pose,
                                  const CameraIntrinsics &K,
                                  const SemiDenseOptions &opt) {
  const int W = K.width, H = K.height;
  SemiDenseDepthMap map;
  map.depth = Eigen::ArrayXXd::Constant(H, W, kNaN);
  map.contrast = Eigen::ArrayXXd::Zero(H, W);
  map.mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
      H, W, false);
  if (slice.empty()) return map;

  const std::vector<double> zs = log_depth_samples(opt.sweep);
  const PlaneDepthWarper warper(slice, traj, ref_pose, K);
  const AccumOptions ao = accum_options(sensor_grid(K), opt.sweep.mode,
                                        opt.sweep.splat, opt.threads);

  Eigen::ArrayXXd best_z = Eigen::ArrayXXd::Constant(H, W, kNaN);
  for (double z : zs) {
    const IWE iwe = accumulate(
        slice,
        [&](const Event &, std::size_t k) { return warper.warp(k, z); }, ao);
    for (int cy = 1; cy < H - 1; ++cy)
      for (int cx = 1; cx < W - 1; ++cx) {
        const double c = weighted_patch_contrast(iwe.values, cx, cy);
        if (c > map.contrast(cy, cx)) {
          map.contrast(cy, cx) = c;
          best_z(cy, cx) = z;
        }
      }
  }

  // Adaptive threshold: keep pixels whose peak contrast beats the local
  // mean over a k x k neighborhood by more than the offset.
  Eigen::ArrayXXd sat = Eigen::ArrayXXd::Zero(H + 1, W + 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      sat(y + 1, x + 1) = map.contrast(y, x) + sat(y, x + 1) +
                          sat(y + 1, x) - sat(y, x);
  const int r = std::max(1, opt.adaptive_k) / 2;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!std::isfinite(best_z(y, x))) continue;
      const int x0 = std::max(0, x - r), x1 = std::min(W - 1, x + r);
      const int y0 = std::max(0, y - r), y1 = std::min(H - 1, y + r);
      const double area = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
      const double local_sum = sat(y1 + 1, x1 + 1) - sat(y0, x1 + 1) -
                               sat(y1 + 1, x0) + sat(y0, x0);
      if (map.contrast(y, x) > local_sum / area + opt.adaptive_c)
        map.mask(y, x) = true;
    }

  // Median of the selected depths in each 3x3 neighborhood.
  const int mr = std::max(1, opt.median_window) / 2;
  std::vector<double> neigh;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!map.mask(y, x)) continue;
      neigh.clear();
      for (int j = std::max(0, y - mr); j <= std::min(H - 1, y + mr); ++j)
        for (int i = std::max(0, x - mr); i <= std::min(W - 1, x + mr); ++i)
          if (map.mask(j, i)) neigh.push_back(best_z(j, i));
      std::sort(neigh.begin(), neigh.end());
      const std::size_t n = neigh.size();
      map.depth(y, x) = n % 2 == 1
                            ? neigh[n / 2]
                            : 0.5 * (neigh[n / 2 - 1] + neigh[n / 2]);
    }
  return map;
}

std::vector<DepthVsCountEntry>
depth_vs_event_count(const EventSlice &slice, const PoseTrajectory &traj,
                     const CameraIntrinsics &K,
                     const std::vector<std::size_t> &counts,
                     const SemiDenseOptions &opt,
                     std::optional<double> gt_depth) {
  std::vector<DepthVsCountEntry> out;
  for (std::size_t requested : counts) {
    DepthVsCountEntry entry;
    entry.requested = requested;
    entry.used = std::min(requested, slice.size());
    EventSlice prefix;
    prefix.events.assign(slice.events.begin(),
                         slice.events.begin() +
                             static_cast<std::ptrdiff_t>(entry.used));
    if (!prefix.empty()) {
      prefix.t_ref = prefix.t_first();
      const Pose ref = interpolate_pose(traj, prefix.t_mid());
      entry.map = semidense_depth(prefix, traj, ref, K, opt);
    } else {
      entry.map = semidense_depth(prefix, traj, Pose{}, K, opt);
    }
    entry.rms_relative = kNaN;
    if (gt_depth) {
      double sq = 0.0;
      std::size_t n = 0;
      for (int y = 0; y < entry.map.depth.rows(); ++y)
        for (int x = 0; x < entry.map.depth.cols(); ++x)
          if (entry.map.mask(y, x)) {
            const double rel =
                (entry.map.depth(y, x) - *gt_depth) / *gt_depth;
            sq += rel * rel;
            ++n;
          }
      if (n > 0) entry.rms_relative = std::sqrt(sq / n);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planar (8-DOF homography) motion

Eigen::VectorXd pack_homography(const HomographyParams &theta) {
  Eigen::VectorXd v(8);
  v << theta.omega, theta.v_over_d, theta.phi, theta.psi;
  return v;
}

HomographyParams unpack_homography(const Eigen::VectorXd &v) {
  if (v.size() != 8)
    throw InvalidParameterError("planar motion parameter vector must be 8-D");
  HomographyParams theta;
  theta.omega = v.segment<3>(0);
  theta.v_over_d = v.segment<3>(3);
  theta.phi = v[6];
  theta.psi = v[7];
  return theta;
}

HomographyParams canonicalize(const HomographyParams &theta) {
  HomographyParams out = theta;
  Eigen::Vector3d n = theta.normal();
  if (n.z() > 0.0) {
    out.v_over_d = -theta.v_over_d;
    n = -n;
  }
  std::tie(out.phi, out.psi) = angles_from_normal(n);
  return out;
}

double homography_objective(const EventSlice &slice,
                            const HomographyParams &theta,
                            const CameraIntrinsics &K, AccumMode mode,
                            SplatKind splat, int threads) {
  const AccumOptions ao =
      accum_options(sensor_grid(K), mode, splat, threads);
  return objective(
      slice,
      [&](const Event &e, std::size_t) -> WarpedPoint {
        try {
          return warp_homography(e.xy(), e.t, slice.t_ref, theta, K);
        } catch (const InvalidParameterError &) {
          return {Eigen::Vector2d::Zero(), false}; // singular H: drop event
        }
      },
      ao);
}

HomographyEstimate estimate_homography(const EventSlice &slice,
                                       const HomographyParams &theta0,
                                       const CameraIntrinsics &K,
                                       const HomographyOptions &opt) {
  if (slice.empty())
    throw InvalidParameterError("cannot estimate motion from an empty slice");
  HomographyParams th0 = theta0;
  if (opt.frontoparallel_prior && pack_homography(theta0).norm() == 0.0)
    th0.phi = std::numbers::pi; // n = (0,0,-1); v/d = 0 keeps H = Id

  const ObjectiveFn f = [&](const Eigen::VectorXd &v) {
    return homography_objective(slice, unpack_homography(v), K, opt.mode,
                                opt.splat, opt.threads);
  };
  AscentOptions ao = opt.ascent;
  if (ao.h.size() != 8) ao.h = Eigen::VectorXd::Constant(8, 1e-3);
  if (ao.scale.size() != 8) {
    const double s = characteristic_scale(slice.duration(), K.fx);
    ao.scale = Eigen::VectorXd::Ones(8);
    ao.scale.segment<6>(0).setConstant(s);
  }

  std::size_t stage_evals = 0;
  Eigen::VectorXd start = pack_homography(th0);
  if (pack_homography(theta0).norm() == 0.0) {
    // Starting from rest the normal angles carry no gradient (v/d = 0) and a
    // joint ascent tends to stray into an alias maximum before the
    // translation terms wake up.  Build up the start in stages: rotation
    // only, then rotation + translation with the normal pinned to the
    // fronto-parallel prior, then hand everything to the full ascent.
    auto masked_ascent = [&](const std::vector<int> &dims) {
      const ObjectiveFn fm = [&](const Eigen::VectorXd &sub) {
        Eigen::VectorXd full = start;
        for (std::size_t i = 0; i < dims.size(); ++i) full[dims[i]] = sub[i];
        return f(full);
      };
      const auto m = static_cast<Eigen::Index>(dims.size());
      AscentOptions am = ao;
      am.h.resize(m);
      am.scale.resize(m);
      Eigen::VectorXd sub0(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        am.h[i] = ao.h[dims[i]];
        am.scale[i] = ao.scale[dims[i]];
        sub0[i] = start[dims[i]];
      }
      const OptimResult r = conjugate_gradient_ascent(fm, sub0, am);
      stage_evals += r.evaluations;
      for (Eigen::Index i = 0; i < m; ++i) start[dims[i]] = r.theta[i];
    };
    masked_ascent({0, 1, 2});
    masked_ascent({0, 1, 2, 3, 4, 5});
  }
  OptimResult best = conjugate_gradient_ascent(f, start, ao);

  HomographyEstimate est;
  est.f_zero = homography_objective(slice, HomographyParams{}, K, opt.mode,
                                    opt.splat, opt.threads);
  est.evaluations = best.evaluations + stage_evals;
  if (best.f < est.f_zero) {
    // The warm start hurt; retry from rest.
    const OptimResult retry =
        conjugate_gradient_ascent(f, Eigen::VectorXd::Zero(8), ao);
    est.evaluations += retry.evaluations;
    if (retry.f > best.f) best = retry;
  }
  // Polish with a shrinking probe step.  The rotation/translation split is
  // only weakly observable, so the ascent crawls along a narrow valley;
  // halving h sharpens the finite-difference gradient and restarts the
  // search each round.
  AscentOptions ap = ao;
  for (int round = 0; round < opt.polish_rounds; ++round) {
    ap.h *= 0.5;
    const OptimResult r = conjugate_gradient_ascent(f, best.theta, ap);
    est.evaluations += r.evaluations;
    if (r.f > best.f) best = r;
  }
  est.theta = canonicalize(unpack_homography(best.theta));
  est.f = best.f;
  est.converged = best.converged;

  auto render = [&](const HomographyParams &th) {
    return accumulate(
        slice,
        [&](const Event &e, std::size_t) -> WarpedPoint {
          try {
            return warp_homography(e.xy(), e.t, slice.t_ref, th, K);
          } catch (const InvalidParameterError &) {
            return {Eigen::Vector2d::Zero(), false};
          }
        },
        accum_options(sensor_grid(K), opt.mode, opt.splat, opt.threads));
  };
  est.iwe_zero = render(HomographyParams{});
  est.iwe_corrected = render(est.theta);
  return est;
}

} // namespace cmax

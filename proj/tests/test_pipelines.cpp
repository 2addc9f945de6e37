#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "cmax/pipelines.hpp"
#include "cmax/synth.hpp"

using namespace cmax;

namespace {

// A grid (both line orientations) pins both flow components; parallel bars
// alone leave the along-bar component nearly unconstrained.
EventSlice flow_slice(const Eigen::Vector2d &v, double duration = 0.2,
                      double rate = 30.0, std::uint64_t seed = 1) {
  FlowSynthOptions opt;
  opt.v = v;
  opt.duration = duration;
  opt.rate = rate;
  opt.seed = seed;
  return gen_flow_scene(make_grid_scene(30.0, 1.0, 5), opt);
}

} // namespace

TEST_CASE("patch flow recovers the generating velocity") {
  const Eigen::Vector2d v_true(-40.0, 0.0);
  const EventSlice slice = flow_slice(v_true);
  REQUIRE(slice.size() > 3000);
  FlowOptions opt;
  opt.threads = 2;
  const FlowEstimate est = estimate_flow_patch(slice, opt);
  CHECK((est.v - v_true).norm() < 1.0);
  CHECK(est.f > est.f_zero);
  CHECK(est.evaluations >= est.heatmap.f.size());
  CHECK(est.heatmap.f.size() == 41u * 41u);
  // The lattice argmax alone lands on the nearest lattice point (step 4).
  CHECK((est.v_grid - v_true).norm() < 4.0);
  // The warped image at the optimum is sharper than the unwarped one.
  CHECK(contrast(est.iwe_optimum).f > contrast(est.iwe_zero).f);

  SUBCASE("skipping refinement returns the lattice argmax") {
    FlowOptions coarse;
    coarse.refine = false;
    const FlowEstimate e2 = estimate_flow_patch(slice, coarse);
    CHECK(e2.v == e2.v_grid);
  }
  SUBCASE("empty slices are rejected") {
    CHECK_THROWS_AS(estimate_flow_patch(EventSlice{}), InvalidParameterError);
  }
}

TEST_CASE("time reversal negates the estimated flow") {
  const Eigen::Vector2d v_true(24.0, -12.0);
  const EventSlice fwd = flow_slice(v_true, 0.2, 30.0, 3);
  EventSlice rev;
  const double t_end = fwd.events.back().t;
  for (auto it = fwd.events.rbegin(); it != fwd.events.rend(); ++it)
    rev.events.push_back({t_end - it->t, it->x, it->y, it->p});
  rev.t_ref = rev.events.front().t;

  const FlowEstimate a = estimate_flow_patch(fwd);
  const FlowEstimate b = estimate_flow_patch(rev);
  CHECK((a.v + b.v).norm() < 1.0);
}

TEST_CASE("count and polarity modes agree on clean scenes") {
  const EventSlice slice = flow_slice({-32.0, 16.0});
  FlowOptions opt;
  opt.grid_steps = 21;
  const PolarityComparison cmp = compare_polarity_modes(slice, opt);
  CHECK((cmp.count.v - cmp.polarity.v).norm() < 2.0);
  CHECK(cmp.basin_cells_count > 0);
  CHECK(cmp.basin_cells_polarity > 0);
  CHECK(cmp.count.iwe_optimum.mode == AccumMode::count);
  CHECK(cmp.polarity.iwe_optimum.mode == AccumMode::polarity);
}

TEST_CASE("balanced opposite-polarity populations cancel in polarity mode") {
  // Two identical event sets with flipped polarity share every pixel, so
  // the polarity image is ~zero at any candidate flow while counts add up.
  const EventSlice base = flow_slice({-30.0, 0.0}, 0.15, 20.0, 5);
  EventSlice doubled = base;
  for (const Event &e : base.events)
    doubled.events.push_back({e.t, e.x, e.y, -e.p});
  std::stable_sort(doubled.events.begin(), doubled.events.end(),
                   [](const Event &a, const Event &b) { return a.t < b.t; });

  const GridSpec grid = flow_patch_grid(doubled, 5);
  AccumOptions acc;
  acc.grid = grid;
  FlowParams fp;
  fp.v = {-30.0, 0.0};
  auto warp = [&](const Event &e, std::size_t) -> WarpedPoint {
    return {warp_flow(e.xy(), e.t, doubled.t_ref, fp), true};
  };
  acc.mode = AccumMode::polarity;
  const double f_pol = contrast(accumulate(doubled, warp, acc)).f;
  acc.mode = AccumMode::count;
  const double f_cnt = contrast(accumulate(doubled, warp, acc)).f;
  CHECK(f_pol < 0.01 * f_cnt);
}

TEST_CASE("rotation tracking follows a constant angular velocity") {
  const CameraIntrinsics K = default_camera();
  RotationSynthOptions synth_opt;
  synth_opt.omegas = {Eigen::Vector3d(0.5, -0.3, 2.0)};
  synth_opt.duration = 0.6;
  // ~1 event per pixel of apparent travel: windows of 8 k events then span
  // ~10 px of motion each, enough for a usable contrast gradient.
  synth_opt.rate = 1.0;
  const RotationSynth synth =
      gen_rotation_scene(make_grid_scene(0.4, 0.01), K, synth_opt);
  REQUIRE(synth.slice.size() > 20000);

  RotationTrackOptions opt;
  opt.window = 8000;
  opt.stride = 8000;
  opt.objective.threads = 2;
  const AngularVelocitySeries series = track_rotation(synth.slice, K, opt);
  REQUIRE(series.samples.size() >= 2);
  for (const auto &s : series.samples) {
    CHECK((s.omega - synth_opt.omegas[0]).norm() <
          0.03 * synth_opt.omegas[0].norm());
    CHECK(s.f > s.f_zero);
    CHECK_FALSE(s.low_confidence);
    CHECK(s.n_events == 8000);
  }
  // Window midpoints are ordered and inside the stream span.
  for (std::size_t i = 1; i < series.samples.size(); ++i)
    CHECK(series.samples[i].t_mid > series.samples[i - 1].t_mid);

  SUBCASE("the error metric against the exported trajectory is small") {
    const AngularErrorReport rep =
        rms_angular_error(series, synth.trajectory);
    CHECK(rep.rms_deg_per_s <
          0.03 * synth_opt.omegas[0].norm() * 180.0 / M_PI);
    CHECK(rep.per_sample_deg_per_s.size() == series.samples.size());
  }
  SUBCASE("an impossible gain threshold flags every window") {
    RotationTrackOptions strict = opt;
    strict.min_gain = 1e9;
    strict.rescue_steps = 0; // keep the flagging path fast
    const AngularVelocitySeries flagged =
        track_rotation(synth.slice, K, strict);
    for (const auto &s : flagged.samples) CHECK(s.low_confidence);
  }
}

TEST_CASE("angular error metric") {
  AngularVelocitySeries est;
  const Eigen::Vector3d w0(1.0, 2.0, -0.5);
  for (int i = 0; i < 40; ++i) {
    AngularVelocitySample s;
    s.t_mid = 0.1 * i;
    s.omega = w0 + 0.01 * i * Eigen::Vector3d(0, 0, 1);
    est.samples.push_back(s);
  }
  auto gt = [&](double t) -> Eigen::Vector3d {
    return w0 + 0.1 * t * Eigen::Vector3d(0, 0, 1);
  };
  SUBCASE("perfect estimates give zero error") {
    const AngularErrorReport rep = rms_angular_error(est, gt);
    CHECK(rep.rms_deg_per_s == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto &s : rep.subintervals) {
      CHECK(s.rms == doctest::Approx(0.0));
      CHECK(s.n > 0);
    }
  }
  SUBCASE("a constant offset maps straight to deg/s") {
    auto shifted = [&](double t) -> Eigen::Vector3d {
      return gt(t) + Eigen::Vector3d(0, 10.0 * M_PI / 180.0, 0);
    };
    const AngularErrorReport rep = rms_angular_error(est, shifted);
    CHECK(rep.rms_deg_per_s == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("subinterval statistics are ordered and cover all samples") {
    auto noisy = [&](double t) -> Eigen::Vector3d {
      return gt(t) + Eigen::Vector3d(0.02 * std::sin(40.0 * t), 0, 0);
    };
    const AngularErrorReport rep = rms_angular_error(est, noisy, 4);
    REQUIRE(rep.subintervals.size() == 4);
    std::size_t total = 0;
    for (const auto &s : rep.subintervals) {
      CHECK(s.q1 <= s.median);
      CHECK(s.median <= s.q3);
      CHECK(s.min <= s.q1);
      CHECK(s.q3 <= s.max);
      CHECK(s.t_begin < s.t_end);
      total += s.n;
    }
    CHECK(total == est.samples.size());
  }
  SUBCASE("empty series are rejected") {
    CHECK_THROWS_AS(rms_angular_error(AngularVelocitySeries{}, gt),
                    InvalidParameterError);
  }
}

TEST_CASE("plane-sweep depth recovers a fronto-parallel plane") {
  const CameraIntrinsics K = default_camera();
  const PlanarSynth synth = gen_translation_scene(
      make_grid_scene(0.35, 0.008), K, 1.0, {0.4, 0.0, 0.0}, 0.25, 5.0);
  REQUIRE(synth.slice.size() > 10000);
  const Pose ref = synth.ref_pose;

  DepthSweepOptions opt;
  opt.threads = 2;
  const DepthResult res = depth_for_patch(synth.slice, synth.trajectory, ref,
                                          {K.cx, K.cy}, K, opt);
  REQUIRE(res.curve.size() == 50);
  CHECK(std::abs(res.z_refined - 1.0) < 0.05);
  CHECK(res.f_refined >= res.f_star);
  // The lattice is log-uniform over the configured interval.
  CHECK(res.curve.front().first == doctest::Approx(0.45));
  CHECK(res.curve.back().first == doctest::Approx(2.4));
  const double r0 = res.curve[1].first / res.curve[0].first;
  const double r1 = res.curve[31].first / res.curve[30].first;
  CHECK(r0 == doctest::Approx(r1).epsilon(1e-9));
  // Unique peak: strictly away from the sweep bounds here.
  CHECK(res.z_star > 0.5);
  CHECK(res.z_star < 2.0);
}

TEST_CASE("depth is unobservable under pure rotation") {
  const CameraIntrinsics K = default_camera();
  RotationSynthOptions synth_opt;
  synth_opt.omegas = {Eigen::Vector3d(0.0, 0.6, 0.8)};
  synth_opt.duration = 0.3;
  synth_opt.rate = 30.0;
  const RotationSynth synth =
      gen_rotation_scene(make_grid_scene(0.3, 0.02), K, synth_opt);
  REQUIRE(synth.slice.size() > 1000);

  PlaneDepthWarper warper(synth.slice, synth.trajectory,
                          interpolate_pose(synth.trajectory, 0.15), K);
  CHECK_FALSE(warper.has_translation());

  DepthSweepOptions opt;
  opt.z_steps = 12;
  const DepthResult res = depth_for_patch(
      synth.slice, synth.trajectory,
      interpolate_pose(synth.trajectory, 0.15), {K.cx, K.cy}, K, opt);
  double fmin = res.curve[0].second, fmax = res.curve[0].second;
  for (const auto &[z, f] : res.curve) {
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  CHECK(fmax - fmin <= 1e-9 * std::max(1.0, std::abs(fmax)));
}

TEST_CASE("semi-dense depth concentrates near the true plane") {
  const CameraIntrinsics K = default_camera();
  // Texture covering the whole field of view: pixels outside the pattern
  // otherwise collect only misfocused smear and pass the contrast gate with
  // a boundary depth.
  const PlanarSynth synth = gen_translation_scene(
      make_grid_scene(0.75, 0.008, 17), K, 1.0, {0.8, 0.0, 0.0}, 0.25, 0.6);

  SemiDenseOptions opt;
  opt.sweep.z_steps = 50;
  opt.sweep.mode = AccumMode::polarity;
  opt.median_window = 5;
  opt.threads = 2;
  const SemiDenseDepthMap map = semidense_depth(
      synth.slice, synth.trajectory, synth.ref_pose, K, opt);
  REQUIRE(map.selected() > 200);
  std::size_t good = 0;
  for (int y = 0; y < map.depth.rows(); ++y)
    for (int x = 0; x < map.depth.cols(); ++x)
      if (map.mask(y, x) && std::abs(map.depth(y, x) - 1.0) <= 0.1) ++good;
  CHECK(static_cast<double>(good) / map.selected() > 0.85);

  SUBCASE("an empty slice selects nothing") {
    const SemiDenseDepthMap empty =
        semidense_depth(EventSlice{}, synth.trajectory, synth.ref_pose, K, opt);
    CHECK(empty.selected() == 0);
  }
}

TEST_CASE("depth-vs-count sweep clamps and reports errors") {
  const CameraIntrinsics K = default_camera();
  const PlanarSynth synth = gen_translation_scene(
      make_grid_scene(0.3, 0.015), K, 1.0, {0.4, 0.0, 0.0}, 0.25, 4.0);
  SemiDenseOptions opt;
  opt.sweep.z_steps = 15;
  opt.threads = 2;
  const auto entries =
      depth_vs_event_count(synth.slice, synth.trajectory, K,
                           {2000, synth.slice.size() + 999}, opt, 1.0);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].used == 2000);
  CHECK(entries[1].used == synth.slice.size());
  for (const auto &e : entries) {
    CHECK(e.map.selected() > 0);
    CHECK(std::isfinite(e.rms_relative));
  }
  // More events never hurt much; here the full slice is clearly better.
  CHECK(entries[1].rms_relative < entries[0].rms_relative);
}

TEST_CASE("homography estimation sharpens a planar scene") {
  const CameraIntrinsics K = default_camera();
  PlanarSynthOptions synth_opt;
  synth_opt.omega = {0.0, 0.0, 0.6};
  synth_opt.v = {0.5, -0.1, 0.2};
  synth_opt.d = 1.2;
  synth_opt.duration = 0.25;
  synth_opt.rate = 1.0;
  const PlanarSynth synth =
      gen_planar_scene(make_grid_scene(0.35, 0.01), K, synth_opt);
  REQUIRE(synth.slice.size() > 10000);

  HomographyOptions opt;
  opt.threads = 2;
  const HomographyEstimate est =
      estimate_homography(synth.slice, HomographyParams{}, K, opt);
  CHECK(est.f > est.f_zero);
  const Eigen::Vector3d vd_true = synth_opt.v / synth_opt.d;
  CHECK((est.theta.omega - synth_opt.omega).norm() < 0.15);
  CHECK((est.theta.v_over_d - vd_true).norm() < 0.15 * vd_true.norm() + 0.05);
  // Canonical reporting keeps the normal on the visible side.
  CHECK(est.theta.normal().z() <= 0.0);
  CHECK(contrast(est.iwe_corrected).f > contrast(est.iwe_zero).f);
}

TEST_CASE("homography parameter packing") {
  HomographyParams h;
  h.omega = {0.1, -0.2, 0.3};
  h.v_over_d = {0.4, 0.5, -0.6};
  h.phi = 2.0;
  h.psi = -1.0;
  const Eigen::VectorXd v = pack_homography(h);
  REQUIRE(v.size() == 8);
  const HomographyParams r = unpack_homography(v);
  CHECK((r.omega - h.omega).norm() == 0.0);
  CHECK((r.v_over_d - h.v_over_d).norm() == 0.0);
  CHECK(r.phi == h.phi);
  CHECK(r.psi == h.psi);
  CHECK_THROWS_AS(unpack_homography(Eigen::VectorXd::Zero(7)),
                  InvalidParameterError);

  SUBCASE("canonicalization flips the sign pair, not the motion") {
    HomographyParams up;
    up.omega = {0.1, 0.2, 0.3};
    up.v_over_d = {0.4, 0.0, 0.1};
    up.phi = 0.4; // normal leaning toward +z
    up.psi = 0.7;
    const HomographyParams c = canonicalize(up);
    CHECK(c.normal().z() <= 0.0);
    CHECK((c.normal() + up.normal()).norm() < 1e-12);
    CHECK((c.v_over_d + up.v_over_d).norm() < 1e-12);
    CHECK((c.matrix(0.17) - up.matrix(0.17)).norm() < 1e-12);
  }
}

TEST_CASE("rotation objective matches the generic accumulation") {
  const CameraIntrinsics K = default_camera();
  RotationSynthOptions synth_opt;
  synth_opt.omegas = {Eigen::Vector3d(0.0, 0.0, 1.5)};
  synth_opt.duration = 0.2;
  synth_opt.rate = 20.0;
  const RotationSynth synth =
      gen_rotation_scene(make_grid_scene(0.3, 0.02), K, synth_opt);
  const Eigen::Vector3d w(0.1, 0.2, 1.0);

  const double f1 = rotation_objective(synth.slice, w, K);
  RotationParams rp;
  rp.omega = w;
  AccumOptions acc;
  acc.grid = {K.width, K.height, 0.0, 0.0};
  const double f2 = objective(
      synth.slice,
      [&](const Event &e, std::size_t) {
        return warp_rotation(e.xy(), e.t, synth.slice.t_ref, rp, K);
      },
      acc);
  CHECK(f1 == f2);
}

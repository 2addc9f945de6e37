#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cmax/trajectory.hpp"
#include "cmax/warp.hpp"

using namespace cmax;

namespace {

CameraIntrinsics unit_camera() {
  CameraIntrinsics K;
  K.fx = K.fy = 1.0;
  K.cx = K.cy = 0.0;
  K.width = 100;
  K.height = 100;
  return K;
}

CameraIntrinsics vga_camera() {
  CameraIntrinsics K;
  K.fx = 320.0;
  K.fy = 300.0;
  K.cx = 160.0;
  K.cy = 120.0;
  K.width = 320;
  K.height = 240;
  return K;
}

Pose make_pose(double t, const Eigen::Matrix3d &R_cam_to_world,
               const Eigen::Vector3d &p) {
  Pose out;
  out.t = t;
  out.q = Eigen::Quaterniond(R_cam_to_world);
  out.p = p;
  return out;
}

PoseTrajectory static_pair(const Pose &pose) {
  Pose a = pose, b = pose;
  a.t = 0.0;
  b.t = 10.0;
  PoseTrajectory traj;
  traj.poses = {a, b};
  return traj;
}

// Transfer an event pixel to the reference view by intersecting its viewing
// ray with the plane at depth z in the reference frame, in world coordinates.
Eigen::Vector2d transfer_by_ray_casting(const Eigen::Vector2d &x_px,
                                        const Pose &event_pose,
                                        const Pose &ref_pose, double z,
                                        const CameraIntrinsics &K) {
  const Eigen::Vector3d xbar((x_px.x() - K.cx) / K.fx,
                             (x_px.y() - K.cy) / K.fy, 1.0);
  const Eigen::Matrix3d Re = event_pose.q.toRotationMatrix();
  const Eigen::Matrix3d Rr = ref_pose.q.toRotationMatrix();
  // Solve for the ray parameter s with (R_r^T (p_e + s R_e xbar - p_r))_z = z.
  const Eigen::Vector3d dir = Rr.transpose() * (Re * xbar);
  const Eigen::Vector3d base = Rr.transpose() * (event_pose.p - ref_pose.p);
  const double s = (z - base.z()) / dir.z();
  const Eigen::Vector3d X_ref = base + s * dir;
  return {K.fx * X_ref.x() / X_ref.z() + K.cx,
          K.fy * X_ref.y() / X_ref.z() + K.cy};
}

} // namespace

TEST_CASE("flow warp shifts against the motion") {
  FlowParams p;
  p.v = {-20.0, 0.0};
  const Eigen::Vector2d out = warp_flow({10.0, 5.0}, 0.2, 0.0, p);
  CHECK(out.x() == doctest::Approx(14.0));
  CHECK(out.y() == doctest::Approx(5.0));

  SUBCASE("zero velocity and zero dt are identities") {
    CHECK((warp_flow({3.0, 4.0}, 0.7, 0.7, p) - Eigen::Vector2d(3, 4)).norm() ==
          doctest::Approx(0.0));
    FlowParams zero;
    CHECK((warp_flow({3.0, 4.0}, 0.7, 0.0, zero) - Eigen::Vector2d(3, 4))
              .norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("rotation-group exponential") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SUBCASE("matches the closed-form quaternion rotation") {
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector3d w(uni(rng), uni(rng), uni(rng));
      const Eigen::Matrix3d R = exp_so3(w);
      const Eigen::Matrix3d R_ref =
          Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
      CHECK((R - R_ref).norm() < 1e-12);
      CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
      CHECK(R.determinant() == doctest::Approx(1.0));
    }
  }
  SUBCASE("log inverts exp below pi") {
    for (int i = 0; i < 20; ++i) {
      Eigen::Vector3d w(uni(rng), uni(rng), uni(rng));
      w *= 2.5; // still below pi in norm with |each| <= 2.5
      if (w.norm() >= 3.1) w *= 3.0 / w.norm();
      CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-9);
    }
  }
  SUBCASE("tiny angles use the series expansion smoothly") {
    const Eigen::Vector3d w(1e-10, -2e-10, 5e-11);
    CHECK((exp_so3(w) - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-12);
  }
}

TEST_CASE("rotational warp") {
  const CameraIntrinsics K = unit_camera();
  RotationParams p;
  p.omega = {0.0, 0.0, M_PI};

  SUBCASE("quarter turn about the optical axis") {
    const WarpedPoint out = warp_rotation({1.0, 0.0}, 0.5, 0.0, p, K);
    REQUIRE(out.in_view);
    // exp(-ŵ/2) rotates (1,0,1) by -90 deg about z.
    CHECK(out.xy.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.xy.y() == doctest::Approx(-1.0));
  }
  SUBCASE("identity at dt = 0") {
    const WarpedPoint out = warp_rotation({0.3, -0.4}, 1.5, 1.5, p, K);
    CHECK((out.xy - Eigen::Vector2d(0.3, -0.4)).norm() < 1e-12);
  }
  SUBCASE("composition over split intervals") {
    RotationParams q;
    q.omega = {0.4, -0.2, 0.9};
    const Eigen::Vector2d x0{0.2, -0.1};
    const WarpedPoint full = warp_rotation(x0, 0.8, 0.0, q, K);
    const WarpedPoint half = warp_rotation(x0, 0.8, 0.4, q, K);
    const WarpedPoint twice = warp_rotation(half.xy, 0.4, 0.0, q, K);
    REQUIRE(full.in_view);
    REQUIRE(twice.in_view);
    CHECK((full.xy - twice.xy).norm() < 1e-10);
  }
  SUBCASE("points dragged to the horizon are flagged") {
    RotationParams q;
    q.omega = {0.0, M_PI, 0.0}; // pitch the axis by ~86 deg over dt
    const WarpedPoint out = warp_rotation({0.0, 0.0}, 0.48, 0.0, q, K);
    // cos(0.48 pi) is small but positive; pushing past 0.5 flips behind.
    const WarpedPoint gone = warp_rotation({0.0, 0.0}, 0.5, 0.0, q, K);
    CHECK(out.in_view);
    CHECK_FALSE(gone.in_view);
  }
  SUBCASE("intrinsics are applied on both ends") {
    const CameraIntrinsics Kv = vga_camera();
    RotationParams q;
    q.omega = {0.0, 0.0, 0.1};
    const Eigen::Vector2d px{200.0, 140.0};
    const WarpedPoint out = warp_rotation(px, 1.0, 0.0, q, Kv);
    const Eigen::Vector3d xbar((px.x() - Kv.cx) / Kv.fx,
                               (px.y() - Kv.cy) / Kv.fy, 1.0);
    const Eigen::Vector3d y = exp_so3(-q.omega) * xbar;
    CHECK(out.xy.x() ==
          doctest::Approx(Kv.fx * y.x() / y.z() + Kv.cx).epsilon(1e-12));
    CHECK(out.xy.y() ==
          doctest::Approx(Kv.fy * y.y() / y.z() + Kv.cy).epsilon(1e-12));
  }
}

TEST_CASE("plane-depth warp matches ray casting") {
  const CameraIntrinsics K = vga_camera();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Vector3d w(0.2 * uni(rng), 0.2 * uni(rng), 0.2 * uni(rng));
    const Eigen::Vector3d pe(0.15 * uni(rng), 0.15 * uni(rng), 0.1 * uni(rng));
    const Pose event_pose = make_pose(0.4, exp_so3(w), pe);
    const Pose ref_pose = make_pose(
        0.0, exp_so3(Eigen::Vector3d(0.05, -0.02, 0.1)), {0.02, 0.0, -0.01});
    PoseTrajectory traj;
    traj.poses = {make_pose(0.0, event_pose.q.toRotationMatrix(), pe),
                  make_pose(1.0, event_pose.q.toRotationMatrix(), pe)};
    const double z = 1.0 + 0.8 * std::abs(uni(rng));
    DepthParams d;
    d.z = z;
    const Eigen::Vector2d px(160.0 + 60.0 * uni(rng), 120.0 + 45.0 * uni(rng));
    const WarpedPoint got = warp_plane_depth(px, 0.4, d, traj, ref_pose, K);
    const Eigen::Vector2d want =
        transfer_by_ray_casting(px, event_pose, ref_pose, z, K);
    REQUIRE(got.in_view);
    CHECK((got.xy - want).norm() < 1e-7);
  }
}

TEST_CASE("plane-depth warp disparity on a stereo baseline") {
  const CameraIntrinsics K = unit_camera();
  const Pose ref; // identity at origin
  const Pose cam = make_pose(0.5, Eigen::Matrix3d::Identity(), {0.1, 0.0, 0.0});
  const PoseTrajectory traj = static_pair(cam);

  DepthParams d;
  d.z = 1.0;
  const WarpedPoint at1 = warp_plane_depth({0.2, 0.1}, 0.5, d, traj, ref, K);
  REQUIRE(at1.in_view);
  CHECK(at1.xy.x() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(at1.xy.y() == doctest::Approx(0.1).epsilon(1e-12));

  SUBCASE("doubling the depth halves the disparity") {
    d.z = 2.0;
    const WarpedPoint at2 = warp_plane_depth({0.2, 0.1}, 0.5, d, traj, ref, K);
    CHECK(at2.xy.x() == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("non-positive depth is rejected") {
    d.z = 0.0;
    CHECK_THROWS_AS(warp_plane_depth({0.2, 0.1}, 0.5, d, traj, ref, K),
                    InvalidParameterError);
  }
  SUBCASE("identity relative pose is an identity warp") {
    const PoseTrajectory still = static_pair(ref);
    d.z = 1.3;
    const WarpedPoint out = warp_plane_depth({0.2, 0.1}, 0.5, d, still, ref, K);
    CHECK((out.xy - Eigen::Vector2d(0.2, 0.1)).norm() < 1e-12);
  }
}

TEST_CASE("precomputed plane warper agrees with the direct warp") {
  const CameraIntrinsics K = vga_camera();
  EventSlice slice;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 50; ++i)
    slice.events.push_back(
        {0.5 * uni(rng), 40.0 + 240.0 * uni(rng), 30.0 + 180.0 * uni(rng), 1});
  std::sort(slice.events.begin(), slice.events.end(),
            [](const Event &a, const Event &b) { return a.t < b.t; });
  slice.t_ref = slice.events.front().t;

  PoseTrajectory traj;
  traj.poses = {make_pose(0.0, Eigen::Matrix3d::Identity(), {0, 0, 0}),
                make_pose(1.0, exp_so3(Eigen::Vector3d(0.0, 0.3, 0.1)),
                          {0.2, -0.1, 0.05})};
  const Pose ref = interpolate_pose(traj, 0.25);

  PlaneDepthWarper warper(slice, traj, ref, K);
  REQUIRE(warper.size() == slice.size());
  CHECK(warper.has_translation());
  for (double z : {0.6, 1.0, 1.7}) {
    DepthParams d;
    d.z = z;
    for (std::size_t k = 0; k < slice.size(); ++k) {
      const WarpedPoint a = warper.warp(k, z);
      const WarpedPoint b =
          warp_plane_depth(slice.events[k].xy(), slice.events[k].t, d, traj,
                           ref, K);
      REQUIRE(a.in_view == b.in_view);
      if (a.in_view) CHECK((a.xy - b.xy).norm() < 1e-9);
    }
  }

  SUBCASE("pure rotation reports no translation") {
    PoseTrajectory rot;
    rot.poses = {make_pose(0.0, Eigen::Matrix3d::Identity(), {0, 0, 0}),
                 make_pose(1.0, exp_so3(Eigen::Vector3d(0, 0, 0.4)), {0, 0, 0})};
    PlaneDepthWarper w2(slice, rot, interpolate_pose(rot, 0.25), K);
    CHECK_FALSE(w2.has_translation());
  }
}

TEST_CASE("homography warp") {
  const CameraIntrinsics K = unit_camera();

  SUBCASE("pure translation toward +x over a fronto-parallel plane") {
    HomographyParams h;
    h.v_over_d = {0.5, 0.0, 0.0};
    h.phi = M_PI; // n = (0, 0, -1)
    h.psi = 0.0;
    const WarpedPoint out = warp_homography({0.0, 0.0}, 0.2, 0.0, h, K);
    REQUIRE(out.in_view);
    CHECK(out.xy.x() == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(out.xy.y() == doctest::Approx(0.0));
    // The point observed at +0.1 at t = 0.2 is the one at the center at t_ref.
    const WarpedPoint back = warp_homography({0.1, 0.0}, 0.2, 0.0, h, K);
    CHECK(back.xy.norm() < 1e-12);
  }
  SUBCASE("zero parameters and zero dt are identities") {
    HomographyParams h;
    const WarpedPoint a = warp_homography({0.3, -0.2}, 0.7, 0.0, h, K);
    CHECK((a.xy - Eigen::Vector2d(0.3, -0.2)).norm() < 1e-12);
    h.omega = {0.1, 0.2, -0.3};
    h.v_over_d = {0.5, -0.1, 0.2};
    h.phi = 2.5;
    const WarpedPoint b = warp_homography({0.3, -0.2}, 0.7, 0.7, h, K);
    CHECK((b.xy - Eigen::Vector2d(0.3, -0.2)).norm() < 1e-12);
  }
  SUBCASE("vanishing translation reduces to the rotational warp") {
    HomographyParams h;
    h.omega = {0.2, -0.1, 0.4};
    RotationParams r;
    r.omega = h.omega;
    const CameraIntrinsics Kv = vga_camera();
    const Eigen::Vector2d px{190.0, 100.0};
    const WarpedPoint a = warp_homography(px, 0.6, 0.1, h, Kv);
    const WarpedPoint b = warp_rotation(px, 0.6, 0.1, r, Kv);
    REQUIRE(a.in_view);
    CHECK((a.xy - b.xy).norm() < 1e-9);
  }
  SUBCASE("matches the explicit matrix inverse") {
    HomographyParams h;
    h.omega = {0.086, 0.679, 0.439};
    h.v_over_d = {0.613, -0.1, 0.333};
    std::tie(h.phi, h.psi) =
        angles_from_normal(Eigen::Vector3d(0.07, 0.075, -0.995));
    const double dt = 0.15;
    const Eigen::Matrix3d H =
        exp_so3(h.omega * dt) - dt * h.v_over_d * h.normal().transpose();
    const Eigen::Vector2d px{0.12, -0.2};
    const Eigen::Vector3d y = H.inverse() * Eigen::Vector3d(px.x(), px.y(), 1);
    const WarpedPoint out = warp_homography(px, dt, 0.0, h, K);
    REQUIRE(out.in_view);
    CHECK(out.xy.x() == doctest::Approx(y.x() / y.z()).epsilon(1e-12));
    CHECK(out.xy.y() == doctest::Approx(y.y() / y.z()).epsilon(1e-12));
    CHECK((h.matrix(dt) - H).norm() < 1e-14);
    CHECK((h.matrix(0.0) - Eigen::Matrix3d::Identity()).norm() == 0.0);
  }
  SUBCASE("singular homographies are rejected") {
    HomographyParams h;
    h.v_over_d = {0.0, 0.0, 1.0};
    h.phi = M_PI; // H(1) = I - 1 * v/d n^T has third column (0,0,1)-(0,0,1)...
    // At dt = 1/ (v/d · n) the matrix drops rank.
    const double dt = 1.0; // n=(0,0,-1), (v/d)n^T = -e3 e3^T, H = diag(1,1,2)
    CHECK_NOTHROW(warp_homography({0.1, 0.1}, dt, 0.0, h, K));
    HomographyParams s;
    s.v_over_d = {0.0, 0.0, -1.0};
    s.phi = M_PI; // H(1) = diag(1,1,0): singular
    CHECK_THROWS_AS(warp_homography({0.1, 0.1}, 1.0, 0.0, s, K),
                    InvalidParameterError);
  }
}

TEST_CASE("plane normal parametrization") {
  SUBCASE("pole convention") {
    const Eigen::Vector3d up = normal_from_angles(0.0, 0.0);
    CHECK((up - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
    const auto [phi, psi] = angles_from_normal(Eigen::Vector3d(0, 0, -1));
    CHECK(phi == doctest::Approx(M_PI));
    CHECK(psi == 0.0);
  }
  SUBCASE("round trip through angles") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      Eigen::Vector3d n(uni(rng), uni(rng), uni(rng));
      if (n.norm() < 1e-3) continue;
      n.normalize();
      const auto [phi, psi] = angles_from_normal(n);
      CHECK((normal_from_angles(phi, psi) - n).norm() < 1e-12);
    }
  }
  SUBCASE("a nearly fronto-parallel plane") {
    const Eigen::Vector3d n =
        Eigen::Vector3d(0.07, 0.075, -0.995).normalized();
    const auto [phi, psi] = angles_from_normal(n);
    CHECK(phi > M_PI / 2); // southern hemisphere
    CHECK((normal_from_angles(phi, psi) - n).norm() < 1e-12);
  }
}

#include "cmax/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cmax/errors.hpp"
#include "cmax/warp.hpp"

namespace cmax {
namespace {

constexpr double kMinEmitSpeed = 1e-6; // px/s; below this a point is static
constexpr double kSpeedFloor = 1e-3;   // px/s; caps the adaptive time step
constexpr std::size_t kEventBudget = 50'000'000;

Eigen::Vector2d project_px(const Eigen::Vector3d &X,
                           const CameraIntrinsics &K) {
  return {K.fx * X.x() / X.z() + K.cx, K.fy * X.y() / X.z() + K.cy};
}

Eigen::Vector2d image_velocity(const Eigen::Vector3d &X,
                               const Eigen::Vector3d &Xdot,
                               const CameraIntrinsics &K) {
  const double z = X.z(), z2 = z * z;
  return {K.fx * (Xdot.x() * z - X.x() * Xdot.z()) / z2,
          K.fy * (Xdot.y() * z - X.y() * Xdot.z()) / z2};
}

bool in_frame(const Eigen::Vector2d &px, const CameraIntrinsics &K) {
  return px.x() >= 0.0 && px.x() < K.width && px.y() >= 0.0 &&
         px.y() < K.height;
}

struct Emitter {
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss{0.0, 1.0};
  double noise_px = 0.0;
  double jitter_s = 0.0;
  std::vector<Event> events;

  explicit Emitter(std::uint64_t seed) : rng(seed) {}

  void emit(double t, Eigen::Vector2d px, int pol, const CameraIntrinsics &K) {
    if (noise_px > 0.0) {
      px.x() += noise_px * gauss(rng);
      px.y() += noise_px * gauss(rng);
    }
    if (jitter_s > 0.0) t = std::max(0.0, t + jitter_s * gauss(rng));
    if (!in_frame(px, K)) return;
    if (events.size() >= kEventBudget)
      throw InvalidParameterError("synthetic event budget exhausted");
    events.push_back({t, px.x(), px.y(), pol});
  }

  void add_clutter(double fraction, double duration,
                   const CameraIntrinsics &K) {
    if (fraction <= 0.0) return;
    const auto n = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(events.size())));
    std::uniform_real_distribution<double> ux(0.0, K.width), uy(0.0, K.height),
        ut(0.0, duration);
    std::bernoulli_distribution up(0.5);
    for (std::size_t i = 0; i < n; ++i)
      events.push_back({ut(rng), ux(rng), uy(rng), up(rng) ? +1 : -1});
  }

  EventSlice finish() {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event &a, const Event &b) { return a.t < b.t; });
    EventSlice slice;
    slice.events = std::move(events);
    if (!slice.empty()) slice.t_ref = slice.t_first();
    return slice;
  }
};

int polarity_for(const EdgePoint &pt, const Eigen::Vector2d &vel) {
  const Eigen::Vector2d nrm(-pt.dir.y(), pt.dir.x());
  return pt.sign * (vel.dot(nrm) < 0.0 ? -1 : +1);
}

std::vector<double> sample_times(const std::vector<double> &knots,
                                 double duration, int n) {
  std::vector<double> ts = knots;
  for (int i = 0; i <= n; ++i)
    ts.push_back(duration * static_cast<double>(i) / n);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double a, double b) { return b - a < 1e-12; }),
           ts.end());
  while (!ts.empty() && ts.back() > duration) ts.pop_back();
  return ts;
}

} // namespace

EdgeScene make_bar_scene(double span, double spacing, int n_bars) {
  if (n_bars < 1 || !(spacing > 0.0) || !(span > 0.0))
    throw InvalidParameterError("bad bar-scene geometry");
  EdgeScene scene;
  for (int b = 0; b < n_bars; ++b) {
    const double x =
        n_bars == 1 ? 0.0 : -span + 2.0 * span * b / (n_bars - 1);
    const int sign = b % 2 == 0 ? +1 : -1;
    for (double y = -span; y <= span + 1e-12; y += spacing)
      scene.points.push_back({{x, y}, {0.0, 1.0}, sign});
  }
  return scene;
}

EdgeScene make_grid_scene(double span, double spacing, int n_lines) {
  if (n_lines < 1 || !(spacing > 0.0) || !(span > 0.0))
    throw InvalidParameterError("bad grid-scene geometry");
  EdgeScene scene;
  for (int b = 0; b < n_lines; ++b) {
    const double c =
        n_lines == 1 ? 0.0 : -span + 2.0 * span * b / (n_lines - 1);
    const int sign = b % 2 == 0 ? +1 : -1;
    for (double s = -span; s <= span + 1e-12; s += spacing) {
      scene.points.push_back({{c, s}, {0.0, 1.0}, sign});    // vertical line
      scene.points.push_back({{s, c}, {1.0, 0.0}, -sign});   // horizontal line
    }
  }
  return scene;
}

EventSlice gen_flow_scene(const EdgeScene &scene, const FlowSynthOptions &opt) {
  if (!(opt.rate > 0.0) || !(opt.duration > 0.0))
    throw InvalidParameterError("rate and duration must be positive");
  CameraIntrinsics frame;
  frame.fx = frame.fy = 1.0;
  frame.cx = frame.cy = 0.0;
  frame.width = opt.width;
  frame.height = opt.height;

  Emitter em(opt.seed);
  em.noise_px = opt.noise_px;
  em.jitter_s = opt.jitter_s;
  const double speed = opt.v.norm();
  if (speed > kMinEmitSpeed) {
    const double dt = 1.0 / (opt.rate * speed);
    const Eigen::Vector2d center(opt.width / 2.0, opt.height / 2.0);
    for (const EdgePoint &pt : scene.points) {
      const int pol = polarity_for(pt, opt.v);
      const Eigen::Vector2d base = center + pt.xy;
      for (double t = 0.5 * dt; t < opt.duration; t += dt)
        em.emit(t, base + t * opt.v, pol, frame);
    }
  }
  em.add_clutter(opt.noise_fraction, opt.duration, frame);
  return em.finish();
}

Eigen::Vector3d RotationSynth::omega_at(double t) const {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  const auto idx = it == knots.begin()
                       ? std::size_t{0}
                       : static_cast<std::size_t>(it - knots.begin() - 1);
  return omegas[idx];
}

RotationSynth gen_rotation_scene(const EdgeScene &scene,
                                 const CameraIntrinsics &K,
                                 const RotationSynthOptions &opt) {
  if (opt.knots.empty() || opt.knots.size() != opt.omegas.size())
    throw InvalidParameterError("knot/omega schedule arity mismatch");
  if (opt.knots.front() != 0.0)
    throw InvalidParameterError("schedule must start at t = 0");
  if (!std::is_sorted(opt.knots.begin(), opt.knots.end()))
    throw InvalidParameterError("schedule knots must be sorted");
  if (!(opt.rate > 0.0) || !(opt.duration > 0.0))
    throw InvalidParameterError("rate and duration must be positive");

  const std::size_t n_seg = opt.knots.size();
  // Left-composed segment-start rotations: within segment i the bearing
  // evolves as xbar(t) = exp(omega_i^ (t - t_a)) xbar(t_a), which is exactly
  // what the rotation warp inverts.
  std::vector<Eigen::Matrix3d> R_knot(n_seg);
  R_knot[0] = Eigen::Matrix3d::Identity();
  for (std::size_t i = 1; i < n_seg; ++i)
    R_knot[i] =
        exp_so3((opt.knots[i] - opt.knots[i - 1]) * opt.omegas[i - 1]) *
        R_knot[i - 1];
  auto rotation_at = [&](double t) {
    auto it = std::upper_bound(opt.knots.begin(), opt.knots.end(), t);
    const auto i = it == opt.knots.begin()
                       ? std::size_t{0}
                       : static_cast<std::size_t>(it - opt.knots.begin() - 1);
    return std::pair<Eigen::Matrix3d, Eigen::Vector3d>(
        exp_so3((t - opt.knots[i]) * opt.omegas[i]) * R_knot[i],
        opt.omegas[i]);
  };

  Emitter em(opt.seed);
  em.noise_px = opt.noise_px;
  em.jitter_s = opt.jitter_s;
  for (const EdgePoint &pt : scene.points) {
    const Eigen::Vector3d P =
        Eigen::Vector3d(pt.xy.x(), pt.xy.y(), 1.0).normalized();
    double t = 0.0;
    while (t < opt.duration) {
      const auto [R, w] = rotation_at(t);
      const Eigen::Vector3d Y = R * P;
      if (Y.z() <= 1e-6) break; // left the front hemisphere
      const Eigen::Vector2d vel = image_velocity(Y, w.cross(Y), K);
      const double s = vel.norm();
      if (s > kMinEmitSpeed) em.emit(t, project_px(Y, K), polarity_for(pt, vel), K);
      t += 1.0 / (opt.rate * std::max(s, kSpeedFloor));
    }
  }
  em.add_clutter(opt.noise_fraction, opt.duration, K);

  RotationSynth out;
  out.knots = opt.knots;
  out.omegas = opt.omegas;
  out.slice = em.finish();
  for (double t : sample_times(opt.knots, opt.duration, 400)) {
    Pose pose;
    pose.t = t;
    pose.q = Eigen::Quaterniond(rotation_at(t).first.transpose());
    out.trajectory.poses.push_back(pose);
  }
  return out;
}

PlanarSynth gen_planar_scene(const EdgeScene &scene, const CameraIntrinsics &K,
                             const PlanarSynthOptions &opt) {
  if (!(opt.d > 0.0))
    throw InvalidParameterError("plane offset d must be positive");
  if (!(opt.rate > 0.0) || !(opt.duration > 0.0))
    throw InvalidParameterError("rate and duration must be positive");
  const Eigen::Vector3d n = opt.n.normalized();

  auto camera_at = [&](double t) {
    return std::pair<Eigen::Matrix3d, Eigen::Vector3d>(exp_so3(t * opt.omega),
                                                       t * opt.v);
  };

  Emitter em(opt.seed);
  em.noise_px = opt.noise_px;
  em.jitter_s = opt.jitter_s;
  const bool moving =
      opt.omega.norm() > kMinEmitSpeed || opt.v.norm() > kMinEmitSpeed;
  for (const EdgePoint &pt : scene.points) {
    const Eigen::Vector3d xbar(pt.xy.x(), pt.xy.y(), 1.0);
    const double denom = n.dot(xbar);
    if (denom >= -1e-9)
      throw InvalidParameterError(
          "scene ray does not meet the front side of the plane");
    const Eigen::Vector3d X = (-opt.d / denom) * xbar;
    // Visibility over the whole motion, not just at emission times.
    for (int k = 0; k <= 20; ++k) {
      const auto [R, trans] = camera_at(opt.duration * k / 20.0);
      if ((R * X + trans).z() <= 1e-6)
        throw InvalidParameterError("plane point moved behind the camera");
    }
    if (!moving) continue;
    double t = 0.0;
    while (t < opt.duration) {
      const auto [R, trans] = camera_at(t);
      const Eigen::Vector3d Xc = R * X + trans;
      const Eigen::Vector3d Xcdot = opt.omega.cross(R * X) + opt.v;
      const Eigen::Vector2d vel = image_velocity(Xc, Xcdot, K);
      const double s = vel.norm();
      if (s > kMinEmitSpeed)
        em.emit(t, project_px(Xc, K), polarity_for(pt, vel), K);
      t += 1.0 / (opt.rate * std::max(s, kSpeedFloor));
    }
  }
  em.add_clutter(opt.noise_fraction, opt.duration, K);

  PlanarSynth out;
  out.slice = em.finish();
  for (double t : sample_times({0.0}, opt.duration, 400)) {
    const auto [R, trans] = camera_at(t);
    Pose pose;
    pose.t = t;
    pose.q = Eigen::Quaterniond(R.transpose());
    pose.p = -(R.transpose() * trans);
    out.trajectory.poses.push_back(pose);
  }
  out.ref_pose = Pose{};
  return out;
}

PlanarSynth gen_translation_scene(const EdgeScene &scene,
                                  const CameraIntrinsics &K, double z,
                                  const Eigen::Vector3d &v_w, double duration,
                                  double rate, std::uint64_t seed) {
  PlanarSynthOptions opt;
  opt.n = Eigen::Vector3d(0, 0, -1);
  opt.d = z;
  opt.omega.setZero();
  opt.v = -v_w; // world-to-camera translation rate
  opt.duration = duration;
  opt.rate = rate;
  opt.seed = seed;
  return gen_planar_scene(scene, K, opt);
}

CameraIntrinsics default_camera(int width, int height) {
  CameraIntrinsics K;
  K.fx = K.fy = 200.0;
  K.cx = width / 2.0;
  K.cy = height / 2.0;
  K.width = width;
  K.height = height;
  return K;
}

} // namespace cmax

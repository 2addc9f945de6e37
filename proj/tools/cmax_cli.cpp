#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmax/camera.hpp"
#include "cmax/io.hpp"
#include "cmax/pipelines.hpp"
#include "cmax/render.hpp"
#include "cmax/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmax;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::string default_out_dir() {
  const char *env = std::getenv("CMAX_OUT_DIR");
  return env && *env ? env : ".";
}

void write_json(const fs::path &path, const json &j) {
  std::ofstream out(path);
  if (!out) throw InvalidParameterError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json vec_json(const Eigen::Vector2d &v) { return {v.x(), v.y()}; }
json vec_json(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }

AccumMode parse_mode(const std::string &s) {
  return s == "polarity" ? AccumMode::polarity : AccumMode::count;
}

SplatKind parse_splat(const std::string &s) {
  if (s == "nearest") return SplatKind::nearest;
  if (s == "gaussian") return SplatKind::gaussian;
  return SplatKind::bilinear;
}

struct IoOptions {
  std::string events, calib, poses;
  int width = 240, height = 180;
  std::string out = default_out_dir();
  // Thread count never changes the numbers (chunk merge is ordered), so
  // defaulting to every core is safe.
  int threads = std::max(1u, std::thread::hardware_concurrency());
  std::string mode = "count";
  std::string splat = "bilinear";
};

void add_io_options(CLI::App *cmd, IoOptions &io, bool need_poses) {
  cmd->add_option("--events", io.events, "event file (t x y p per line)")
      ->required();
  cmd->add_option("--calib", io.calib, "calibration file (fx fy cx cy [dist])");
  if (need_poses)
    cmd->add_option("--poses", io.poses,
                    "pose file (t px py pz qx qy qz qw)")
        ->required();
  cmd->add_option("--width", io.width, "sensor width")->check(CLI::PositiveNumber);
  cmd->add_option("--height", io.height, "sensor height")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", io.out, "output directory");
  cmd->add_option("--threads", io.threads, "worker threads (1 = serial)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--mode", io.mode, "accumulation weights")
      ->check(CLI::IsMember({"count", "polarity"}));
  cmd->add_option("--splat", io.splat, "event deposit kernel")
      ->check(CLI::IsMember({"nearest", "bilinear", "gaussian"}));
}

json io_json(const IoOptions &io) {
  return {{"events", io.events}, {"calib", io.calib},   {"poses", io.poses},
          {"width", io.width},   {"height", io.height}, {"out", io.out},
          {"threads", io.threads}, {"mode", io.mode},   {"splat", io.splat}};
}

struct LoadedInputs {
  EventSlice slice;
  CameraIntrinsics K;
  PoseTrajectory traj;
};

LoadedInputs load_inputs(const IoOptions &io, bool need_poses) {
  LoadedInputs in;
  if (!io.calib.empty()) {
    in.K = load_calibration_file(io.calib, io.width, io.height);
  } else {
    in.K = default_camera(io.width, io.height);
  }
  in.slice = load_events_file(io.events, io.width, io.height);
  if (in.K.has_distortion()) {
    in.slice = undistort_events(in.slice, in.K);
    in.K = undistorted_model(in.K);
  }
  if (need_poses) in.traj = load_trajectory_file(io.poses);
  return in;
}

fs::path prepare_out(const std::string &dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void export_iwe(const fs::path &dir, const std::string &stem, const IWE &iwe) {
  save_grid((dir / (stem + ".iwe")).string(), iwe);
  save_png((dir / (stem + ".png")).string(), render_iwe(iwe));
}

// ---------------------------------------------------------------------------

int run_synth(const std::string &problem, const IoOptions &io,
              std::uint64_t seed, double duration, double rate, double noise,
              double clutter, const std::vector<double> &v2,
              const std::vector<double> &w3, const std::vector<double> &vel3,
              const std::vector<double> &n3, double plane_d, double z) {
  const fs::path dir = prepare_out(io.out);
  const CameraIntrinsics K = default_camera(io.width, io.height);
  json gt = {{"problem", problem}, {"seed", seed}, {"duration", duration},
             {"rate", rate},       {"noise_px", noise},
             {"noise_fraction", clutter}};

  EventSlice slice;
  std::optional<PoseTrajectory> traj;
  if (problem == "flow") {
    FlowSynthOptions opt;
    opt.v = {v2[0], v2[1]};
    opt.duration = duration;
    opt.rate = rate;
    opt.noise_px = noise;
    opt.noise_fraction = clutter;
    opt.width = io.width;
    opt.height = io.height;
    opt.seed = seed;
    slice = gen_flow_scene(make_grid_scene(0.3 * io.width, 1.0, 7), opt);
    gt["v"] = vec_json(opt.v);
  } else if (problem == "rotation") {
    RotationSynthOptions opt;
    opt.knots = {0.0};
    opt.omegas = {Eigen::Vector3d(w3[0], w3[1], w3[2])};
    opt.duration = duration;
    opt.rate = rate;
    opt.noise_px = noise;
    opt.noise_fraction = clutter;
    opt.seed = seed;
    RotationSynth synth =
        gen_rotation_scene(make_grid_scene(0.45, 0.01, 7), K, opt);
    slice = std::move(synth.slice);
    traj = std::move(synth.trajectory);
    gt["omega"] = vec_json(opt.omegas[0]);
  } else if (problem == "planar" || problem == "translation") {
    PlanarSynthOptions opt;
    opt.duration = duration;
    opt.rate = rate;
    opt.noise_px = noise;
    opt.noise_fraction = clutter;
    opt.seed = seed;
    if (problem == "translation") {
      opt.n = Eigen::Vector3d(0, 0, -1);
      opt.d = z;
      opt.v = -Eigen::Vector3d(vel3[0], vel3[1], vel3[2]);
      gt["depth"] = z;
      gt["v_world"] = json{vel3[0], vel3[1], vel3[2]};
    } else {
      opt.omega = {w3[0], w3[1], w3[2]};
      opt.v = {vel3[0], vel3[1], vel3[2]};
      opt.n = Eigen::Vector3d(n3[0], n3[1], n3[2]).normalized();
      opt.d = plane_d;
      gt["omega"] = vec_json(opt.omega);
      gt["v_over_d"] = vec_json(Eigen::Vector3d(opt.v / opt.d));
      gt["normal"] = vec_json(opt.n.normalized());
    }
    PlanarSynth synth =
        gen_planar_scene(make_grid_scene(0.35, 0.01, 5), K, opt);
    slice = std::move(synth.slice);
    traj = std::move(synth.trajectory);
  }

  save_events_file((dir / "events.txt").string(), slice);
  save_calibration_file((dir / "calib.txt").string(), K);
  if (traj) save_trajectory_file((dir / "poses.txt").string(), *traj);
  gt["n_events"] = slice.size();
  write_json(dir / "gt.json", gt);
  write_json(dir / "run.json",
             {{"subcommand", "synth"},
              {"problem", problem},
              {"seed", seed},
              {"config", io_json(io)},
              {"duration", duration},
              {"rate", rate}});
  std::cout << "wrote " << slice.size() << " events to " << dir << '\n';
  return 0;
}

int run_flow(const IoOptions &io, double vmin, double vmax, int steps,
             bool refine) {
  Timer timer;
  const fs::path dir = prepare_out(io.out);
  const LoadedInputs in = load_inputs(io, false);
  FlowOptions opt;
  opt.v_min = vmin;
  opt.v_max = vmax;
  opt.grid_steps = steps;
  opt.refine = refine;
  opt.mode = parse_mode(io.mode);
  opt.splat = parse_splat(io.splat);
  opt.threads = io.threads;
  const FlowEstimate est = estimate_flow_patch(in.slice, opt);

  save_heatmap_csv((dir / "heatmap.csv").string(), est.heatmap, "vx", "vy");
  Eigen::ArrayXXd hm(steps, steps);
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < steps; ++j)
      hm(i, j) = est.heatmap.f[static_cast<std::size_t>(i) * steps + j];
  save_png((dir / "heatmap.png").string(), render_grid(hm));
  export_iwe(dir, "iwe_zero", est.iwe_zero);
  export_iwe(dir, "iwe_grid", est.iwe_grid);
  export_iwe(dir, "iwe_opt", est.iwe_optimum);

  write_json(dir / "summary.json",
             {{"v", vec_json(est.v)},
              {"v_grid", vec_json(est.v_grid)},
              {"f", est.f},
              {"f_zero", est.f_zero},
              {"evaluations", est.evaluations},
              {"n_events", in.slice.size()},
              {"wall_s", timer.seconds()}});
  write_json(dir / "run.json", {{"subcommand", "flow"},
                                {"config", io_json(io)},
                                {"vmin", vmin},
                                {"vmax", vmax},
                                {"steps", steps},
                                {"refine", refine}});
  std::cout << "v = (" << est.v.x() << ", " << est.v.y() << ") px/s, f = "
            << est.f << '\n';
  return 0;
}

int run_rotate(const IoOptions &io, std::size_t window, std::size_t stride) {
  Timer timer;
  const fs::path dir = prepare_out(io.out);
  const LoadedInputs in = load_inputs(io, false);
  RotationTrackOptions opt;
  opt.window = window;
  opt.stride = stride;
  opt.objective.mode = parse_mode(io.mode);
  opt.objective.splat = parse_splat(io.splat);
  opt.objective.threads = io.threads;
  const AngularVelocitySeries series = track_rotation(in.slice, in.K, opt);
  save_series_csv((dir / "series.csv").string(), series);

  json summary = {{"windows", series.samples.size()},
                  {"window", window},
                  {"stride", stride},
                  {"n_events", in.slice.size()},
                  {"wall_s", timer.seconds()}};
  std::size_t low = 0;
  for (const auto &s : series.samples) low += s.low_confidence ? 1 : 0;
  summary["low_confidence_windows"] = low;
  if (!io.poses.empty() && !series.samples.empty()) {
    const PoseTrajectory gt = load_trajectory_file(io.poses);
    const AngularErrorReport rep = rms_angular_error(series, gt);
    save_boxplot_csv((dir / "boxplot.csv").string(), rep.subintervals);
    summary["rms_deg_per_s"] = rep.rms_deg_per_s;
  }
  write_json(dir / "summary.json", summary);
  write_json(dir / "run.json", {{"subcommand", "rotate"},
                                {"config", io_json(io)},
                                {"window", window},
                                {"stride", stride}});
  std::cout << series.samples.size() << " windows";
  if (summary.contains("rms_deg_per_s"))
    std::cout << ", rms " << summary["rms_deg_per_s"].get<double>() << " deg/s";
  std::cout << '\n';
  return 0;
}

int run_depth(const IoOptions &io, double zmin, double zmax, int zsteps,
              const std::vector<double> &patch, bool semidense,
              double gt_depth) {
  Timer timer;
  const fs::path dir = prepare_out(io.out);
  const LoadedInputs in = load_inputs(io, true);
  const Pose ref = interpolate_pose(in.traj, in.slice.t_mid());

  DepthSweepOptions sweep;
  sweep.z_min = zmin;
  sweep.z_max = zmax;
  sweep.z_steps = zsteps;
  sweep.mode = parse_mode(io.mode);
  sweep.splat = parse_splat(io.splat);
  sweep.threads = io.threads;

  json summary = {{"n_events", in.slice.size()}, {"z_min", zmin},
                  {"z_max", zmax},               {"z_steps", zsteps}};
  if (!patch.empty()) {
    const DepthResult res = depth_for_patch(
        in.slice, in.traj, ref, {patch[0], patch[1]}, in.K, sweep);
    save_curve_csv((dir / "curve.csv").string(), res.curve);
    summary["z_star"] = res.z_star;
    summary["z_refined"] = res.z_refined;
    summary["f_star"] = res.f_star;
    summary["f_refined"] = res.f_refined;
    std::cout << "patch depth " << res.z_refined << " m\n";
  }
  if (semidense) {
    SemiDenseOptions opt;
    opt.sweep = sweep;
    opt.threads = io.threads;
    const SemiDenseDepthMap map =
        semidense_depth(in.slice, in.traj, ref, in.K, opt);
    save_png((dir / "depth.png").string(),
             render_depth(map.depth, zmin, zmax));
    save_png((dir / "contrast.png").string(), render_grid(map.contrast));
    IWE depth_grid;
    depth_grid.values = map.depth.isFinite().select(map.depth, 0.0);
    depth_grid.grid = {in.K.width, in.K.height, 0.0, 0.0};
    save_grid((dir / "depth.iwe").string(), depth_grid);
    summary["selected_pixels"] = map.selected();
    if (gt_depth > 0.0) {
      double sq = 0.0;
      std::size_t n = 0;
      for (int y = 0; y < map.depth.rows(); ++y)
        for (int x = 0; x < map.depth.cols(); ++x)
          if (map.mask(y, x)) {
            const double rel = (map.depth(y, x) - gt_depth) / gt_depth;
            sq += rel * rel;
            ++n;
          }
      if (n) summary["rms_relative"] = std::sqrt(sq / n);
    }
    std::cout << map.selected() << " pixels selected\n";
  }
  summary["wall_s"] = timer.seconds();
  write_json(dir / "summary.json", summary);
  write_json(dir / "run.json", {{"subcommand", "depth"},
                                {"config", io_json(io)},
                                {"zmin", zmin},
                                {"zmax", zmax},
                                {"zsteps", zsteps},
                                {"patch", patch},
                                {"semidense", semidense}});
  return 0;
}

int run_homog(const IoOptions &io) {
  Timer timer;
  const fs::path dir = prepare_out(io.out);
  const LoadedInputs in = load_inputs(io, false);
  HomographyOptions opt;
  opt.mode = parse_mode(io.mode);
  opt.splat = parse_splat(io.splat);
  opt.threads = io.threads;
  const HomographyEstimate est =
      estimate_homography(in.slice, HomographyParams{}, in.K, opt);
  export_iwe(dir, "iwe_zero", est.iwe_zero);
  export_iwe(dir, "iwe_corrected", est.iwe_corrected);
  write_json(dir / "summary.json",
             {{"omega", vec_json(est.theta.omega)},
              {"v_over_d", vec_json(est.theta.v_over_d)},
              {"normal", vec_json(est.theta.normal())},
              {"phi", est.theta.phi},
              {"psi", est.theta.psi},
              {"f", est.f},
              {"f_zero", est.f_zero},
              {"converged", est.converged},
              {"evaluations", est.evaluations},
              {"n_events", in.slice.size()},
              {"wall_s", timer.seconds()}});
  write_json(dir / "run.json",
             {{"subcommand", "homog"}, {"config", io_json(io)}});
  std::cout << "f " << est.f_zero << " -> " << est.f << '\n';
  return 0;
}

int run_render(const std::string &input, const std::string &output, bool pgm,
               bool negative, bool zero_floor) {
  const IWE iwe = load_grid(input);
  RenderOptions opt;
  opt.invert = negative;
  opt.zero_floor = zero_floor;
  const Image8 img = render_iwe(iwe, opt);
  if (pgm)
    save_pgm(output, img);
  else
    save_png(output, img);
  std::cout << "rendered " << iwe.width() << "x" << iwe.height() << " to "
            << output << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"contrast maximization for event cameras"};
  app.require_subcommand(1);

  // synth
  auto *synth = app.add_subcommand("synth", "generate a synthetic scene");
  std::string problem;
  IoOptions synth_io;
  std::uint64_t seed = 1;
  double duration = 0.2, rate = 5.0, noise = 0.0, clutter = 0.0;
  std::vector<double> v2{-40.0, 0.0};
  std::vector<double> w3{0.0, 0.0, 2.0};
  std::vector<double> vel3{0.1, 0.0, 0.0};
  std::vector<double> n3{0.0, 0.0, -1.0};
  double plane_d = 1.0, z = 1.0;
  synth->add_option("--problem", problem, "scene family")
      ->required()
      ->check(CLI::IsMember({"flow", "rotation", "planar", "translation"}));
  synth->add_option("--out", synth_io.out, "output directory");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--duration", duration, "seconds")->check(CLI::PositiveNumber);
  synth->add_option("--rate", rate, "events per px of travel")
      ->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise, "position noise sigma, px");
  synth->add_option("--clutter", clutter, "uniform clutter fraction");
  synth->add_option("--width", synth_io.width)->check(CLI::PositiveNumber);
  synth->add_option("--height", synth_io.height)->check(CLI::PositiveNumber);
  synth->add_option("--v", v2, "flow, px/s")->expected(2);
  synth->add_option("--omega", w3, "angular velocity, rad/s")->expected(3);
  synth->add_option("--vel", vel3, "translation velocity")->expected(3);
  synth->add_option("--normal", n3, "plane normal")->expected(3);
  synth->add_option("--plane-d", plane_d, "plane offset, m")
      ->check(CLI::PositiveNumber);
  synth->add_option("--z", z, "plane depth for translation scenes, m")
      ->check(CLI::PositiveNumber);

  // flow
  auto *flow = app.add_subcommand("flow", "patch optical flow");
  IoOptions flow_io;
  double vmin = -80.0, vmax = 80.0;
  int steps = 41;
  bool no_refine = false;
  add_io_options(flow, flow_io, false);
  flow->add_option("--vmin", vmin, "search lower bound, px/s");
  flow->add_option("--vmax", vmax, "search upper bound, px/s");
  flow->add_option("--steps", steps, "lattice steps per axis")
      ->check(CLI::Range(2, 1000));
  flow->add_flag("--no-refine", no_refine, "skip continuous refinement");

  // rotate
  auto *rotate = app.add_subcommand("rotate", "angular-velocity tracking");
  IoOptions rot_io;
  std::size_t window = 30000, stride = 0;
  add_io_options(rotate, rot_io, false);
  rotate->add_option("--poses", rot_io.poses,
                     "ground-truth poses for error metrics");
  rotate->add_option("--window", window, "events per window")
      ->check(CLI::PositiveNumber);
  rotate->add_option("--stride", stride, "window stride (0 = window/2)");

  // depth
  auto *depth = app.add_subcommand("depth", "plane-sweep depth");
  IoOptions depth_io;
  double zmin = 0.45, zmax = 2.4, gt_depth = 0.0;
  int zsteps = 50;
  std::vector<double> patch;
  bool semidense = false;
  add_io_options(depth, depth_io, true);
  depth->add_option("--zmin", zmin)->check(CLI::PositiveNumber);
  depth->add_option("--zmax", zmax)->check(CLI::PositiveNumber);
  depth->add_option("--zsteps", zsteps)->check(CLI::Range(2, 10000));
  depth->add_option("--patch", patch, "patch center, px")->expected(2);
  depth->add_flag("--semidense", semidense, "estimate the full map");
  depth->add_option("--gt-depth", gt_depth,
                    "known plane depth for error reporting");

  // homog
  auto *homog = app.add_subcommand("homog", "planar 8-DOF motion");
  IoOptions homog_io;
  add_io_options(homog, homog_io, false);

  // render
  auto *render = app.add_subcommand("render", "raw grid to image");
  std::string rin, rout = "out.png";
  bool pgm = false, negative = false, zero_floor = false;
  render->add_option("--input", rin, "raw grid file")->required();
  render->add_option("--output", rout, "image path");
  render->add_flag("--pgm", pgm, "write PGM instead of PNG");
  render->add_flag("--negative", negative, "dark events on light background");
  render->add_flag("--zero-floor", zero_floor, "normalize from 0, not min");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return run_synth(problem, synth_io, seed, duration, rate, noise, clutter,
                       v2, w3, vel3, n3, plane_d, z);
    if (flow->parsed()) return run_flow(flow_io, vmin, vmax, steps, !no_refine);
    if (rotate->parsed()) return run_rotate(rot_io, window, stride);
    if (depth->parsed())
      return run_depth(depth_io, zmin, zmax, zsteps, patch, semidense,
                       gt_depth);
    if (homog->parsed()) return run_homog(homog_io);
    if (render->parsed())
      return run_render(rin, rout, pgm, negative, zero_floor);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

#include "cmax/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cmax/errors.hpp"

namespace cmax {
namespace {

// Splits a line into whitespace-separated numeric tokens. Returns false on
// the first token that is not a finite number.
bool parse_doubles(const std::string &line, std::vector<double> &out) {
  out.clear();
  const char *p = line.data();
  const char *end = p + line.size();
  while (p != end) {
    while (p != end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    double value = 0.0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || next == p) return false;
    if (!std::isfinite(value)) return false;
    out.push_back(value);
    p = next;
  }
  return true;
}

bool is_blank_or_comment(const std::string &line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return in;
}

std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw InvalidParameterError("cannot write " + path);
  return out;
}

void format_g9(std::ostream &out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out << buf;
}

} // namespace

EventSlice load_events(std::istream &in, int width, int height,
                       LoadStats *stats) {
  EventSlice slice;
  std::string line;
  std::vector<double> tok;
  std::size_t lineno = 0, skipped = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    if (!parse_doubles(line, tok) || tok.size() != 4)
      throw ParseError("expected `t x y p`", lineno);
    const double t = tok[0], x = tok[1], y = tok[2], p = tok[3];
    if (t < 0.0) throw ParseError("negative timestamp", lineno);
    if (p != 0.0 && p != 1.0)
      throw ParseError("polarity must be 0 or 1", lineno);
    if (x < 0.0 || x >= width || y < 0.0 || y >= height) {
      ++skipped;
      continue;
    }
    slice.events.push_back({t, x, y, p == 0.0 ? -1 : +1});
  }
  if (stats) {
    stats->lines_read = lineno;
    stats->skipped_out_of_bounds = skipped;
  }
  if (!slice.empty()) slice.t_ref = slice.events.front().t;
  return slice;
}

EventSlice load_events_file(const std::string &path, int width, int height,
                            LoadStats *stats) {
  auto in = open_input(path);
  return load_events(in, width, height, stats);
}

void save_events(std::ostream &out, const EventSlice &slice) {
  for (const Event &e : slice.events) {
    format_g9(out, e.t);
    out << ' ';
    format_g9(out, e.x);
    out << ' ';
    format_g9(out, e.y);
    out << ' ' << (e.p > 0 ? 1 : 0) << '\n';
  }
}

void save_events_file(const std::string &path, const EventSlice &slice) {
  auto out = open_output(path);
  save_events(out, slice);
}

CameraIntrinsics load_calibration(std::istream &in, int width, int height) {
  std::string line;
  std::vector<double> tok;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    if (!parse_doubles(line, tok))
      throw ParseError("malformed calibration", lineno);
    if (tok.size() < 4 || tok.size() > 9)
      throw ParseError("expected `fx fy cx cy [k1 k2 p1 p2 k3]`", lineno);
    CameraIntrinsics K;
    K.fx = tok[0];
    K.fy = tok[1];
    K.cx = tok[2];
    K.cy = tok[3];
    for (std::size_t i = 4; i < tok.size(); ++i) K.dist[i - 4] = tok[i];
    K.width = width;
    K.height = height;
    K.validate();
    return K;
  }
  throw ParseError("empty calibration", lineno + 1);
}

CameraIntrinsics load_calibration_file(const std::string &path, int width,
                                       int height) {
  auto in = open_input(path);
  return load_calibration(in, width, height);
}

void save_calibration(std::ostream &out, const CameraIntrinsics &K) {
  format_g9(out, K.fx);
  out << ' ';
  format_g9(out, K.fy);
  out << ' ';
  format_g9(out, K.cx);
  out << ' ';
  format_g9(out, K.cy);
  for (double d : K.dist) {
    out << ' ';
    format_g9(out, d);
  }
  out << '\n';
}

void save_calibration_file(const std::string &path,
                           const CameraIntrinsics &K) {
  auto out = open_output(path);
  save_calibration(out, K);
}

PoseTrajectory load_trajectory(std::istream &in) {
  PoseTrajectory traj;
  std::string line;
  std::vector<double> tok;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    if (!parse_doubles(line, tok) || tok.size() != 8)
      throw ParseError("expected `t px py pz qx qy qz qw`", lineno);
    Pose pose;
    pose.t = tok[0];
    pose.p = {tok[1], tok[2], tok[3]};
    pose.q = Eigen::Quaterniond(tok[7], tok[4], tok[5], tok[6]);
    if (pose.q.norm() < 1e-12)
      throw ParseError("zero quaternion", lineno);
    pose.q.normalize();
    if (!traj.empty() && pose.t <= traj.poses.back().t)
      throw ParseError("timestamps must be strictly increasing", lineno);
    traj.poses.push_back(pose);
  }
  if (traj.size() < 2)
    throw InvalidParameterError(
        "trajectory needs at least 2 poses for interpolation");
  return traj;
}

PoseTrajectory load_trajectory_file(const std::string &path) {
  auto in = open_input(path);
  return load_trajectory(in);
}

void save_trajectory(std::ostream &out, const PoseTrajectory &traj) {
  for (const Pose &pose : traj.poses) {
    const double fields[8] = {pose.t,     pose.p.x(), pose.p.y(), pose.p.z(),
                              pose.q.x(), pose.q.y(), pose.q.z(), pose.q.w()};
    for (int i = 0; i < 8; ++i) {
      if (i) out << ' ';
      format_g9(out, fields[i]);
    }
    out << '\n';
  }
}

void save_trajectory_file(const std::string &path,
                          const PoseTrajectory &traj) {
  auto out = open_output(path);
  save_trajectory(out, traj);
}

} // namespace cmax

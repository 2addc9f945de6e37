#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace cmax {

using ObjectiveFn = std::function<double(const Eigen::VectorXd &)>;

// Rectangular sampling lattice, endpoints included.
struct SearchGrid {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> steps; // >= 2 per dimension

  int dims() const { return static_cast<int>(steps.size()); }
  std::size_t total() const;
  // Lattice point for a row-major linear index (last dimension fastest).
  Eigen::VectorXd point(std::size_t linear_index) const;
  void validate() const;
};

struct Heatmap {
  SearchGrid grid;
  std::vector<double> f; // row-major over the lattice
};

struct OptimResult {
  Eigen::VectorXd theta;
  double f = 0.0;
  int iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<std::pair<Eigen::VectorXd, double>> trace; // accepted iterates
};

// Exhaustive argmax over the lattice; ties go to the lowest linear index.
// Throws InvalidParameterError if the lattice exceeds the budget (checked
// before any evaluation).
OptimResult grid_search(const ObjectiveFn &f, const SearchGrid &grid,
                        Heatmap *heatmap = nullptr,
                        std::size_t budget = 10'000'000, int threads = 1);

// Central differences with per-dimension steps.
Eigen::VectorXd numeric_gradient(const ObjectiveFn &f,
                                 const Eigen::VectorXd &theta,
                                 const Eigen::VectorXd &h,
                                 std::size_t *evaluations = nullptr);

// Optional replacement for the backtracking search; returns the step along
// `dir` from `theta` (<= 0 means failure). Gets the current gradient.
using LineSearchFn = std::function<double(
    const Eigen::VectorXd &theta, const Eigen::VectorXd &dir,
    const Eigen::VectorXd &grad)>;

struct AscentOptions {
  int max_iter = 100;
  double grad_tol = 1e-6;   // on the scaled gradient norm
  double min_step = 1e-10;
  double step0 = 1.0;       // initial backtracking step, scaled units
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  Eigen::VectorXd h;        // per-dim gradient steps (unscaled units)
  Eigen::VectorXd scale;    // per-dim characteristic scales (default 1)
  int restart_every = 0;    // 0 -> problem dimension
  LineSearchFn line_search; // optional exact line search (scaled space)
  bool record_trace = true;
};

// Steepest ascent with Armijo backtracking.
OptimResult gradient_ascent(const ObjectiveFn &f,
                            const Eigen::VectorXd &theta0,
                            const AscentOptions &opt);

enum class CGVariant { polak_ribiere_plus, steepest };

// Polak-Ribiere+ nonlinear conjugate gradient (beta clamped at zero),
// restarted to steepest ascent every `restart_every` iterations or whenever
// the direction stops being an ascent direction. With CGVariant::steepest
// it reproduces gradient_ascent exactly.
OptimResult conjugate_gradient_ascent(
    const ObjectiveFn &f, const Eigen::VectorXd &theta0,
    const AscentOptions &opt, CGVariant variant = CGVariant::polak_ribiere_plus);

// Golden-section maximization; |b - a| < tol at return. Endpoints are
// evaluated, so a monotone function returns the better endpoint.
std::pair<double, double>
golden_section_max(const std::function<double(double)> &f, double a, double b,
                   double tol);

} // namespace cmax

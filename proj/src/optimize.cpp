#include "cmax/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cmax/errors.hpp"

namespace cmax {

std::size_t SearchGrid::total() const {
  std::size_t t = 1;
  for (int s : steps) t *= static_cast<std::size_t>(s);
  return t;
}

Eigen::VectorXd SearchGrid::point(std::size_t linear_index) const {
  const int n = dims();
  Eigen::VectorXd x(n);
  for (int d = n - 1; d >= 0; --d) {
    const std::size_t s = static_cast<std::size_t>(steps[d]);
    const std::size_t idx = linear_index % s;
    linear_index /= s;
    x[d] = lower[d] + static_cast<double>(idx) * (upper[d] - lower[d]) /
                          static_cast<double>(steps[d] - 1);
  }
  return x;
}

void SearchGrid::validate() const {
  const int n = dims();
  if (n == 0) throw InvalidParameterError("search grid has no dimensions");
  if (lower.size() != n || upper.size() != n)
    throw InvalidParameterError("search grid bound/step arity mismatch");
  for (int d = 0; d < n; ++d) {
    if (steps[d] < 2)
      throw InvalidParameterError("search grid needs >= 2 steps per dim");
    if (!(lower[d] < upper[d]))
      throw InvalidParameterError("search grid bounds must satisfy lo < hi");
  }
}

OptimResult grid_search(const ObjectiveFn &f, const SearchGrid &grid,
                        Heatmap *heatmap, std::size_t budget, int threads) {
  grid.validate();
  const std::size_t total = grid.total();
  if (total > budget)
    throw InvalidParameterError("grid of " + std::to_string(total) +
                                " points exceeds evaluation budget " +
                                std::to_string(budget));
  std::vector<double> vals(total);
  auto eval_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) vals[i] = f(grid.point(i));
  };
  const int nt = std::max(1, threads);
  if (nt == 1 || total < 2) {
    eval_range(0, total);
  } else {
    const std::size_t block =
        (total + static_cast<std::size_t>(nt) - 1) / nt;
    std::vector<std::thread> pool;
    for (int s = 0; s < nt; ++s) {
      const std::size_t lo = static_cast<std::size_t>(s) * block;
      if (lo >= total) break;
      pool.emplace_back(eval_range, lo, std::min(total, lo + block));
    }
    for (auto &th : pool) th.join();
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < total; ++i)
    if (vals[i] > vals[best]) best = i; // ties keep the lowest index
  OptimResult res;
  res.theta = grid.point(best);
  res.f = vals[best];
  res.evaluations = total;
  res.converged = true;
  if (heatmap) {
    heatmap->grid = grid;
    heatmap->f = std::move(vals);
  }
  return res;
}

Eigen::VectorXd numeric_gradient(const ObjectiveFn &f,
                                 const Eigen::VectorXd &theta,
                                 const Eigen::VectorXd &h,
                                 std::size_t *evaluations) {
  const int n = static_cast<int>(theta.size());
  Eigen::VectorXd g(n);
  Eigen::VectorXd probe = theta;
  for (int i = 0; i < n; ++i) {
    probe[i] = theta[i] + h[i];
    const double fp = f(probe);
    probe[i] = theta[i] - h[i];
    const double fm = f(probe);
    probe[i] = theta[i];
    g[i] = (fp - fm) / (2.0 * h[i]);
  }
  if (evaluations) *evaluations += 2 * static_cast<std::size_t>(n);
  return g;
}

OptimResult conjugate_gradient_ascent(const ObjectiveFn &f,
                                      const Eigen::VectorXd &theta0,
                                      const AscentOptions &opt,
                                      CGVariant variant) {
  const int n = static_cast<int>(theta0.size());
  const Eigen::VectorXd scale =
      opt.scale.size() == n ? opt.scale : Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd h = opt.h.size() == n
                                ? opt.h
                                : Eigen::VectorXd(1e-3 * scale);
  const Eigen::VectorXd hs = h.cwiseQuotient(scale);

  std::size_t evals = 0;
  auto fs = [&](const Eigen::VectorXd &xs) {
    ++evals;
    return f(xs.cwiseProduct(scale));
  };
  auto grad_s = [&](const Eigen::VectorXd &xs) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd probe = xs;
    for (int i = 0; i < n; ++i) {
      probe[i] = xs[i] + hs[i];
      const double fp = fs(probe);
      probe[i] = xs[i] - hs[i];
      const double fm = fs(probe);
      probe[i] = xs[i];
      g[i] = (fp - fm) / (2.0 * hs[i]);
    }
    return g;
  };

  OptimResult res;
  Eigen::VectorXd x = theta0.cwiseQuotient(scale);
  double fx = fs(x);
  if (opt.record_trace) res.trace.emplace_back(theta0, fx);

  Eigen::VectorXd g = grad_s(x);
  Eigen::VectorXd g_prev = g, d = g;
  const int restart = opt.restart_every > 0 ? opt.restart_every : n;
  int since_restart = 0;
  int iter = 0;
  bool converged = g.norm() <= opt.grad_tol;

  while (!converged && iter < opt.max_iter) {
    if (iter > 0) {
      double beta = 0.0;
      if (variant == CGVariant::polak_ribiere_plus) {
        const double denom = g_prev.squaredNorm();
        if (denom > 0.0) beta = std::max(0.0, g.dot(g - g_prev) / denom);
      }
      d = g + beta * d;
      ++since_restart;
      if (since_restart >= restart || d.dot(g) <= 0.0) {
        d = g;
        since_restart = 0;
      }
    }

    auto search = [&](const Eigen::VectorXd &dir,
                      double &f_new) -> double {
      if (opt.line_search) {
        const double a = opt.line_search(x, dir, g);
        if (a > 0.0) {
          const double ftry = fs(x + a * dir);
          if (ftry >= fx) {
            f_new = ftry;
            return a;
          }
        }
        return -1.0;
      }
      const double slope = g.dot(dir);
      for (double a = opt.step0; a > opt.min_step; a *= opt.backtrack) {
        const double ftry = fs(x + a * dir);
        if (ftry >= fx + opt.armijo_c * a * slope) {
          f_new = ftry;
          double best_a = a;
          if (a == opt.step0) {
            // The unshrunk step was already acceptable; keep doubling while
            // the objective improves so distant optima stay reachable.
            for (double grow = a / opt.backtrack;
                 grow > best_a && grow < 1e6 * opt.step0;
                 grow /= opt.backtrack) {
              const double fgrow = fs(x + grow * dir);
              if (fgrow <= f_new) break;
              best_a = grow;
              f_new = fgrow;
            }
          }
          return best_a;
        }
      }
      return -1.0;
    };

    double f_new = fx;
    double alpha = search(d, f_new);
    if (alpha <= 0.0 && since_restart > 0) {
      // Conjugate direction failed; retry along the bare gradient.
      d = g;
      since_restart = 0;
      alpha = search(d, f_new);
    }
    if (alpha <= 0.0) break; // line search collapsed

    x += alpha * d;
    fx = f_new;
    ++iter;
    if (opt.record_trace) res.trace.emplace_back(x.cwiseProduct(scale), fx);
    g_prev = g;
    g = grad_s(x);
    converged = g.norm() <= opt.grad_tol;
  }

  res.theta = x.cwiseProduct(scale);
  res.f = fx;
  res.iterations = iter;
  res.evaluations = evals;
  res.converged = converged;
  return res;
}

OptimResult gradient_ascent(const ObjectiveFn &f,
                            const Eigen::VectorXd &theta0,
                            const AscentOptions &opt) {
  return conjugate_gradient_ascent(f, theta0, opt, CGVariant::steepest);
}

std::pair<double, double>
golden_section_max(const std::function<double(double)> &f, double a, double b,
                   double tol) {
  if (!(a < b)) throw InvalidParameterError("interval must satisfy a < b");
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double best_x = a, best_f = f(a);
  auto consider = [&](double x, double fx) {
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
  };
  consider(b, f(b));
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  consider(x1, f1);
  consider(x2, f2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
      consider(x2, f2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
      consider(x1, f1);
    }
  }
  return {best_x, best_f};
}

} // namespace cmax

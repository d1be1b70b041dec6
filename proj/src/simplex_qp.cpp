#include "prisel/simplex_qp.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Dense>

#include "prisel/error.hpp"

namespace prisel {

std::vector<double> project_to_simplex(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw InputError("project_to_simplex: empty vector");
  // Sort-based algorithm (Held, Wolfe & Crowder; Duchi et al.).
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = std::max(v[j] - theta, 0.0);
  // Renormalize away the rounding drift of the threshold.
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

namespace {

void gradient(std::span<const double> gram, std::span<const double> cross,
              std::span<const double> w, std::vector<double>& g) {
  const std::size_t k = w.size();
  g.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    const double* row = gram.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * w[j];
    g[i] = 2.0 * (s - cross[i]);
  }
}

double pg_norm(std::span<const double> w, std::span<const double> g) {
  std::vector<double> step(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) step[j] = w[j] - g[j];
  const auto p = project_to_simplex(step);
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += (w[j] - p[j]) * (w[j] - p[j]);
  return std::sqrt(s);
}

// Primal active-set finish: repeatedly minimize the quadratic on the current
// face {w_F free, sum w_F = 1, w_j = 0 off F}, stepping back to the boundary
// when a free weight would go negative and releasing the bound with the most
// negative reduced gradient once the face is optimal. Every step moves along
// a segment toward a face minimizer of a convex function, so f never rises.
std::size_t active_set_finish(std::span<const double> gram, std::span<const double> cross,
                              double bb, std::vector<double>& w, double& f,
                              std::vector<double>* history, std::size_t max_steps) {
  const std::size_t k = w.size();
  std::vector<std::uint8_t> free(k, 0);
  for (std::size_t j = 0; j < k; ++j) free[j] = w[j] > 0.0;
  std::vector<double> g;
  std::size_t steps = 0;

  for (; steps < max_steps; ++steps) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < k; ++j) {
      if (free[j]) idx.push_back(j);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) kkt(a, b) = 2.0 * gram[idx[a] * k + idx[b]];
      kkt(a, n) = 1.0;
      kkt(n, a) = 1.0;
      rhs(a) = 2.0 * cross[idx[a]];
    }
    rhs(n) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) break;

    // Ratio test toward the face minimizer.
    double t = 1.0;
    std::size_t blocking = k;
    for (Eigen::Index a = 0; a < n; ++a) {
      const double target = sol(a);
      const double cur = w[idx[a]];
      if (target < 0.0 && cur - target > 0.0) {
        const double ta = cur / (cur - target);
        if (ta < t) {
          t = ta;
          blocking = idx[a];
        }
      }
    }
    std::vector<double> trial(k, 0.0);
    for (Eigen::Index a = 0; a < n; ++a) {
      const double cur = w[idx[a]];
      trial[idx[a]] = std::max(cur + t * (sol(a) - cur), 0.0);
    }
    if (blocking < k) trial[blocking] = 0.0;
    const double total = std::accumulate(trial.begin(), trial.end(), 0.0);
    if (!(total > 0.0)) break;
    for (auto& x : trial) x /= total;
    const double f_trial = simplex_lsq_objective(gram, cross, bb, trial);
    if (f_trial > f) break;  // rounding noise only; stay at the better point
    w = std::move(trial);
    f = f_trial;
    if (history) history->push_back(f);

    if (blocking < k) {
      free[blocking] = 0;
      continue;
    }
    // Face optimal: release the most violated bound, if any.
    gradient(gram, cross, w, g);
    double nu = 0.0;
    for (auto j : idx) nu += g[j];
    nu /= static_cast<double>(idx.size());
    double scale = 0.0;
    for (double x : g) scale = std::max(scale, std::abs(x));
    std::size_t enter = k;
    double worst = -1e-13 * std::max(scale, 1.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (free[j]) continue;
      if (g[j] - nu < worst) {
        worst = g[j] - nu;
        enter = j;
      }
    }
    if (enter == k) {
      ++steps;
      break;
    }
    free[enter] = 1;
  }
  return steps;
}

}  // namespace

double simplex_lsq_objective(std::span<const double> gram, std::span<const double> cross, double bb,
                             std::span<const double> w) {
  const std::size_t k = w.size();
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double* row = gram.data() + i * k;
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * w[j];
    quad += w[i] * s;
    lin += cross[i] * w[i];
  }
  return std::max(quad - 2.0 * lin + bb, 0.0);
}

double projected_gradient_norm(std::span<const double> gram, std::span<const double> cross,
                               std::span<const double> w) {
  std::vector<double> g;
  gradient(gram, cross, w, g);
  return pg_norm(w, g);
}

SimplexLsqResult solve_simplex_lsq(std::span<const double> gram, std::span<const double> cross,
                                   double bb, const SimplexLsqOptions& options) {
  const std::size_t k = cross.size();
  if (k < 2) throw InputError("solve_simplex_lsq: need at least two weights");
  if (gram.size() != k * k) throw InputError("solve_simplex_lsq: gram must be k x k");

  // Trace bounds the largest eigenvalue of the PSD gram; 2/trace is a safe
  // first step for the gradient 2(Qw - c).
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i) trace += gram[i * k + i];
  double step = trace > 0.0 ? 1.0 / (2.0 * trace) : 1.0;

  SimplexLsqResult res;
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  double f = simplex_lsq_objective(gram, cross, bb, w);
  std::vector<double> g;
  std::vector<double> trial(k);
  if (options.keep_history) res.history.push_back(f);

  // With the finish enabled, gradient steps only need to find the right face.
  const std::size_t budget = options.active_set_finish
                                 ? std::min<std::size_t>(options.max_iterations, 2000)
                                 : options.max_iterations;
  std::size_t it = 0;
  for (; it < budget; ++it) {
    gradient(gram, cross, w, g);
    if (pg_norm(w, g) < options.gradient_tolerance) {
      res.converged = true;
      break;
    }

    std::vector<double> w_new;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < k; ++j) trial[j] = w[j] - step * g[j];
      w_new = project_to_simplex(trial);
      f_new = simplex_lsq_objective(gram, cross, bb, w_new);
      double lin = 0.0;
      double sq = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double d = w_new[j] - w[j];
        lin += g[j] * d;
        sq += d * d;
      }
      if (f_new <= f + lin + sq / (2.0 * step) && f_new <= f) break;
      step *= 0.5;
    }
    if (f_new > f) {
      // Line search stalled at machine precision; nothing left to gain.
      res.converged = true;
      break;
    }
    const double change = f - f_new;
    w = std::move(w_new);
    f = f_new;
    if (options.keep_history) res.history.push_back(f);
    step *= 1.25;
    if (change <= options.relative_tolerance * std::max(f, 1e-300)) {
      res.converged = true;
      ++it;
      break;
    }
  }

  gradient(gram, cross, w, g);
  if (options.active_set_finish && pg_norm(w, g) >= options.gradient_tolerance) {
    const std::size_t room = options.max_iterations > it ? options.max_iterations - it : 0;
    it += active_set_finish(gram, cross, bb, w, f, options.keep_history ? &res.history : nullptr,
                            std::min<std::size_t>(4 * k + 50, std::max<std::size_t>(room, 1)));
    gradient(gram, cross, w, g);
  }
  res.residual = pg_norm(w, g);
  if (res.residual < options.gradient_tolerance) res.converged = true;
  res.weights = std::move(w);
  res.objective = f;
  res.iterations = it;
  return res;
}

}  // namespace prisel

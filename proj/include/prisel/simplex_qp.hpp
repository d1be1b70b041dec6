#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace prisel {

// Euclidean projection of v onto {w : w >= 0, sum w = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

struct SimplexLsqOptions {
  std::size_t max_iterations = 20000;
  double relative_tolerance = 1e-10;   // on successive objective values
  double gradient_tolerance = 1e-6;    // on the projected-gradient norm
  bool keep_history = false;
  bool active_set_finish = true;
};

struct SimplexLsqResult {
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||w - P(w - grad f(w))||_2
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, when requested
};

// Minimizes ||A w - b||^2 over the probability simplex, given the normal
// equations gram = A'A (k x k, row-major), cross = A'b and bb = b'b.
//
// Projected gradient descent from the barycenter with a backtracking line
// search, so the objective sequence never increases.
SimplexLsqResult solve_simplex_lsq(std::span<const double> gram, std::span<const double> cross,
                                   double bb, const SimplexLsqOptions& options = {});

// Objective value from the normal-equation form; clamped at zero.
double simplex_lsq_objective(std::span<const double> gram, std::span<const double> cross, double bb,
                             std::span<const double> w);

// ||w - P(w - grad)||_2, zero exactly at a KKT point.
double projected_gradient_norm(std::span<const double> gram, std::span<const double> cross,
                               std::span<const double> w);

}  // namespace prisel

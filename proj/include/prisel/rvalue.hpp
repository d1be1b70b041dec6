#pragma once

// r-values: the extremal threshold at which a unit enters a selection set.
//
// VaryAlpha: r_i = min{alpha in grid : i selected at alpha}; smaller is better.
// VaryMu0:   r_i = max{mu0 in grid : i selected at mu0}; larger is better.
//
// The prioritized procedure is not nested in either parameter, so every grid
// point is replayed and the extremum taken over all of them.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prisel/model.hpp"

namespace prisel {

enum class RValueDefinition { VaryAlpha, VaryMu0 };

std::string_view to_string(RValueDefinition d);

struct RValueEntry {
  std::string id;
  double x = 0.0;
  double sigma = 0.0;
  double r = 0.0;                 // +inf (VaryAlpha) / -inf (VaryMu0) when never selected
  std::optional<double> r_prime;  // standardized rank in (0, 1]; empty when never selected
  double grid_resolution = 0.0;   // width of the grid cell that brackets the true extremum
  bool tied = false;              // shares r with another unit
};

struct RValueTable {
  RValueDefinition definition = RValueDefinition::VaryAlpha;
  std::vector<double> grid;
  std::vector<RValueEntry> entries;

  bool selected_somewhere(std::size_t i) const;
};

using AlphaProcedure = std::function<DecisionVector(double alpha)>;
using Mu0Procedure = std::function<DecisionVector(double mu0)>;

// alpha_grid must be ascending inside (0, 1).
RValueTable rvalue_vary_alpha(std::span<const Observation> units, const AlphaProcedure& procedure,
                              std::span<const double> alpha_grid, unsigned threads = 1);

// mu0_grid must be strictly descending.
RValueTable rvalue_vary_mu0(std::span<const Observation> units, const Mu0Procedure& procedure,
                            std::span<const double> mu0_grid, unsigned threads = 1);

// 200 log-spaced points on [1e-4, 0.5] by default.
std::vector<double> default_alpha_grid(std::size_t points = 200, double lo = 1e-4, double hi = 0.5);

// Linear, from just above max(x) down to just below min(x).
std::vector<double> default_mu0_grid(std::span<const Observation> units, std::size_t points = 200);

}  // namespace prisel

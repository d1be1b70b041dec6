#include "prisel/rvalue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prisel/error.hpp"
#include "prisel/parallel.hpp"

namespace prisel {

std::string_view to_string(RValueDefinition d) {
  return d == RValueDefinition::VaryAlpha ? "alpha" : "mu0";
}

bool RValueTable::selected_somewhere(std::size_t i) const { return std::isfinite(entries[i].r); }

namespace {

std::vector<DecisionVector> replay_grid(std::size_t m, std::span<const double> grid,
                                        const std::function<DecisionVector(double)>& procedure,
                                        unsigned threads) {
  std::vector<DecisionVector> out(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t g) {
    auto d = procedure(grid[g]);
    if (d.size() != m) throw InputError("r-value procedure returned a decision vector of wrong length");
    out[g] = std::move(d);
  });
  return out;
}

// Ranks units with a finite r; `better(a, b)` orders r values. Ties in r go
// to the larger x, then to the lower input index.
template <class Better>
void assign_ranks(RValueTable& table, Better better) {
  auto& e = table.entries;
  const std::size_t m = e.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::isfinite(e[i].r)) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (e[a].r != e[b].r) return better(e[a].r, e[b].r);
    if (e[a].x != e[b].x) return e[a].x > e[b].x;
    return a < b;
  });
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    e[order[pos]].r_prime = static_cast<double>(pos + 1) / static_cast<double>(m);
    const bool tie_prev = pos > 0 && e[order[pos - 1]].r == e[order[pos]].r;
    const bool tie_next = pos + 1 < order.size() && e[order[pos + 1]].r == e[order[pos]].r;
    e[order[pos]].tied = tie_prev || tie_next;
  }
}

RValueTable base_table(std::span<const Observation> units, RValueDefinition def,
                       std::span<const double> grid, double sentinel) {
  RValueTable t;
  t.definition = def;
  t.grid.assign(grid.begin(), grid.end());
  t.entries.reserve(units.size());
  for (const auto& u : units) {
    t.entries.push_back({u.id, u.x, u.sigma, sentinel, std::nullopt,
                         std::numeric_limits<double>::quiet_NaN(), false});
  }
  return t;
}

}  // namespace

RValueTable rvalue_vary_alpha(std::span<const Observation> units, const AlphaProcedure& procedure,
                              std::span<const double> alpha_grid, unsigned threads) {
  if (alpha_grid.empty()) throw InputError("rvalue_vary_alpha: empty alpha grid");
  for (std::size_t g = 0; g < alpha_grid.size(); ++g) {
    if (!(alpha_grid[g] > 0.0 && alpha_grid[g] < 1.0)) {
      throw InputError("rvalue_vary_alpha: grid points must lie in (0, 1)");
    }
    if (g > 0 && !(alpha_grid[g] > alpha_grid[g - 1])) {
      throw InputError("rvalue_vary_alpha: grid must be strictly ascending");
    }
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto table = base_table(units, RValueDefinition::VaryAlpha, alpha_grid, inf);
  const auto decisions = replay_grid(units.size(), alpha_grid, procedure, threads);
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t g = 0; g < alpha_grid.size(); ++g) {
      if (!decisions[g][i]) continue;
      table.entries[i].r = alpha_grid[g];
      table.entries[i].grid_resolution = alpha_grid[g] - (g == 0 ? 0.0 : alpha_grid[g - 1]);
      break;
    }
  }
  assign_ranks(table, [](double a, double b) { return a < b; });
  return table;
}

RValueTable rvalue_vary_mu0(std::span<const Observation> units, const Mu0Procedure& procedure,
                            std::span<const double> mu0_grid, unsigned threads) {
  if (mu0_grid.empty()) throw InputError("rvalue_vary_mu0: empty mu0 grid");
  for (std::size_t g = 1; g < mu0_grid.size(); ++g) {
    if (!(mu0_grid[g] < mu0_grid[g - 1])) {
      throw InputError("rvalue_vary_mu0: grid must be strictly descending");
    }
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto table = base_table(units, RValueDefinition::VaryMu0, mu0_grid, -inf);
  const auto decisions = replay_grid(units.size(), mu0_grid, procedure, threads);
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t g = 0; g < mu0_grid.size(); ++g) {
      if (!decisions[g][i]) continue;
      table.entries[i].r = mu0_grid[g];
      if (g > 0) {
        table.entries[i].grid_resolution = mu0_grid[g - 1] - mu0_grid[g];
      } else {
        table.entries[i].grid_resolution = mu0_grid.size() > 1 ? mu0_grid[0] - mu0_grid[1] : 0.0;
      }
      break;
    }
  }
  assign_ranks(table, [](double a, double b) { return a > b; });
  return table;
}

std::vector<double> default_alpha_grid(std::size_t points, double lo, double hi) {
  if (points == 0) throw InputError("alpha grid needs at least one point");
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) throw InputError("alpha grid bounds must satisfy 0 < lo <= hi < 1");
  if (points == 1) return {hi};
  std::vector<double> g(points);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> default_mu0_grid(std::span<const Observation> units, std::size_t points) {
  if (units.empty()) throw InputError("mu0 grid needs at least one unit");
  if (points < 2) throw InputError("mu0 grid needs at least two points");
  const auto [lo_it, hi_it] = std::minmax_element(
      units.begin(), units.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  const double range = hi_it->x - lo_it->x;
  const double eps = 1e-6 * std::max(range, 1.0);
  const double top = hi_it->x + eps;
  const double bottom = lo_it->x - eps;
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = top - (top - bottom) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

}  // namespace prisel

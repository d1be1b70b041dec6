#include "prisel/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prisel/error.hpp"
#include "prisel/normal.hpp"

namespace prisel {

namespace {

constexpr double density_floor = 1e-300;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

double sample_sd(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

PriorGrid PriorGrid::uniform(double left, double right, std::size_t k) {
  if (k < 2) throw InputError("prior grid needs at least 2 nodes");
  if (!(left < right) || !std::isfinite(left) || !std::isfinite(right)) {
    throw InputError("prior grid needs a nondegenerate finite support");
  }
  PriorGrid g;
  g.start = left;
  g.spacing = (right - left) / static_cast<double>(k - 1);
  g.nodes.resize(k);
  for (std::size_t j = 0; j < k; ++j) g.nodes[j] = left + static_cast<double>(j) * g.spacing;
  g.nodes.back() = right;
  return g;
}

// ---- TruePrior ---------------------------------------------------------------

TruePrior::TruePrior(std::vector<PriorComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw InputError("prior needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      throw InputError("prior component weights must be nonnegative");
    }
    total += c.weight;
    std::visit(overloaded{
                   [](const PointMass& p) {
                     if (!std::isfinite(p.at)) throw InputError("point mass must be finite");
                   },
                   [](const UniformInterval& u) {
                     if (!(u.lo < u.hi) || !std::isfinite(u.lo) || !std::isfinite(u.hi)) {
                       throw InputError("uniform component needs lo < hi");
                     }
                   },
                   [](const NormalComponent& n) {
                     if (!(n.sd > 0.0) || !std::isfinite(n.mean)) {
                       throw InputError("normal component needs sd > 0");
                     }
                   },
               },
               c.shape);
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("prior component weights must sum to 1");
}

TruePrior::Split TruePrior::marginal(double x, double sigma, double mu0) const {
  Split out{0.0, 0.0};
  for (const auto& c : components_) {
    if (c.weight == 0.0) continue;
    std::visit(overloaded{
                   [&](const PointMass& p) {
                     const double d = c.weight * normal::pdf(x - p.at, sigma);
                     out.total += d;
                     if (p.at <= mu0) out.null_part += d;
                   },
                   [&](const UniformInterval& u) {
                     // int_lo^hi phi_sigma(x - mu) dmu / (hi - lo)
                     const double width = u.hi - u.lo;
                     out.total += c.weight *
                                  normal::prob_between((x - u.hi) / sigma, (x - u.lo) / sigma) /
                                  width;
                     if (u.lo < mu0) {
                       const double top = std::min(u.hi, mu0);
                       out.null_part += c.weight *
                                        normal::prob_between((x - top) / sigma, (x - u.lo) / sigma) /
                                        width;
                     }
                   },
                   [&](const NormalComponent& n) {
                     // Gaussian convolution; the null share is the posterior
                     // mass of mu below mu0 under this component.
                     const double v = sigma * sigma + n.sd * n.sd;
                     const double s = std::sqrt(v);
                     const double d = c.weight * normal::pdf(x - n.mean, s);
                     const double post_mean = (n.mean * sigma * sigma + x * n.sd * n.sd) / v;
                     const double post_sd = sigma * n.sd / s;
                     out.total += d;
                     out.null_part += d * normal::cdf((mu0 - post_mean) / post_sd);
                   },
               },
               c.shape);
  }
  return out;
}

// ---- grid and bandwidths -------------------------------------------------------

double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile probability must be in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

PriorGrid build_grid(std::span<const double> xs, std::size_t k) {
  if (k < 2) throw InputError("build_grid: k must be at least 2");
  const auto s = sorted_copy(xs);
  if (s.size() < 2 || s.front() == s.back()) {
    throw InputError("build_grid: need at least two distinct values");
  }
  const double left = empirical_quantile(s, 0.01);
  const double right = empirical_quantile(s, 0.99);
  if (!(left < right)) throw InputError("build_grid: 1% and 99% quantiles coincide");
  return PriorGrid::uniform(left, right, k);
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m < 2) throw InputError("bandwidth: need at least two values");
  const auto s = sorted_copy(values);
  const double iqr = empirical_quantile(s, 0.75) - empirical_quantile(s, 0.25);
  const double spread = std::min(sample_sd(values), iqr);
  if (!(spread > 0.0)) throw InputError("bandwidth: input has zero spread");
  return 0.9 * spread / (1.34 * std::pow(static_cast<double>(m), 0.2));
}

BandwidthPair silverman_bandwidths(std::span<const double> xs, std::span<const double> sigmas) {
  if (xs.size() != sigmas.size()) throw InputError("bandwidths: length mismatch");
  return {silverman_bandwidth(xs), silverman_bandwidth(sigmas)};
}

// ---- kernel marginal -------------------------------------------------------------

namespace {

void check_bandwidths(const BandwidthPair& h) {
  if (!(h.h_x > 0.0) || !(h.h_sigma > 0.0) || !std::isfinite(h.h_x) ||
      !std::isfinite(h.h_sigma)) {
    throw InputError("bandwidths must be positive and finite");
  }
}

double marginal_at(std::size_t i, std::span<const Observation> obs, const BandwidthPair& h) {
  const double xi = obs[i].x;
  const double si = obs[i].sigma;
  const double inv_hs2 = 0.5 / (h.h_sigma * h.h_sigma);
  double wsum = 0.0;
  double acc = 0.0;
  for (const auto& o : obs) {
    const double ds = si - o.sigma;
    const double w = std::exp(-ds * ds * inv_hs2);
    wsum += w;
    acc += w * normal::pdf(xi - o.x, h.h_x * o.sigma);
  }
  return acc / wsum;
}

}  // namespace

double kernel_marginal(std::size_t i, std::span<const Observation> observations,
                       const BandwidthPair& h) {
  if (i >= observations.size()) throw InputError("kernel_marginal: index out of range");
  check_bandwidths(h);
  return marginal_at(i, observations, h);
}

std::vector<double> kernel_marginals(std::span<const Observation> observations,
                                     const BandwidthPair& h) {
  check_bandwidths(h);
  const std::size_t m = observations.size();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = marginal_at(i, observations, h);
  return out;
}

// ---- weight fit -------------------------------------------------------------------

FittedPrior fit_weights(const PriorGrid& grid, std::span<const Observation> observations,
                        std::span<const double> marginals, const SimplexLsqOptions& solver) {
  const std::size_t k = grid.size();
  if (k < 2) throw InputError("fit_weights: grid needs at least 2 nodes");
  if (marginals.size() != observations.size()) {
    throw InputError("fit_weights: one marginal per observation required");
  }
  if (observations.empty()) throw InputError("fit_weights: no observations");
  for (double b : marginals) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InputError("fit_weights: marginals must be positive");
  }

  std::vector<double> gram(k * k, 0.0);
  std::vector<double> cross(k, 0.0);
  std::vector<double> row(k);
  double bb = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    for (std::size_t j = 0; j < k; ++j) row[j] = normal::pdf(o.x - grid.nodes[j], o.sigma);
    for (std::size_t a = 0; a < k; ++a) {
      cross[a] += row[a] * marginals[i];
      double* g = gram.data() + a * k;
      for (std::size_t b = a; b < k; ++b) g[b] += row[a] * row[b];
    }
    bb += marginals[i] * marginals[i];
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < a; ++b) gram[a * k + b] = gram[b * k + a];
  }

  auto res = solve_simplex_lsq(gram, cross, bb, solver);
  FittedPrior fit;
  fit.grid = grid;
  fit.weights = std::move(res.weights);
  fit.objective = res.objective;
  fit.iterations = res.iterations;
  fit.residual = res.residual;
  fit.history = std::move(res.history);
  if (!res.converged) {
    throw FitError("deconvolution weights did not converge within " +
                       std::to_string(solver.max_iterations) +
                       " iterations (residual " + std::to_string(fit.residual) + ")",
                   std::move(fit));
  }
  return fit;
}

FittedPrior fit_prior(std::span<const Observation> observations, const FitOptions& options) {
  validate(observations);
  std::vector<double> xs;
  std::vector<double> sigmas;
  xs.reserve(observations.size());
  sigmas.reserve(observations.size());
  for (const auto& o : observations) {
    xs.push_back(o.x);
    sigmas.push_back(o.sigma);
  }
  const auto grid = build_grid(xs, options.grid_size);
  BandwidthPair h;
  h.h_x = silverman_bandwidth(xs);
  const bool constant_sigma =
      std::all_of(sigmas.begin(), sigmas.end(), [&](double s) { return s == sigmas.front(); });
  h.h_sigma = constant_sigma ? 1.0 : silverman_bandwidth(sigmas);
  const auto marginals = kernel_marginals(observations, h);
  auto fit = fit_weights(grid, observations, marginals, options.solver);
  fit.bandwidths = h;
  return fit;
}

// ---- Clfdr ----------------------------------------------------------------------------

double clfdr_from_fit(const FittedPrior& fit, const Observation& obs, double mu0) {
  // Log-sum-exp over the grid: both sums share the Gaussian constant and the
  // largest exponent, so extreme x cannot underflow to 0/0.
  const std::size_t k = fit.grid.size();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    if (fit.weights[j] <= 0.0) continue;
    const double z = (obs.x - fit.grid.nodes[j]) / obs.sigma;
    top = std::max(top, std::log(fit.weights[j]) - 0.5 * z * z);
  }
  if (!std::isfinite(top)) return 0.0;
  double null_part = 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (fit.weights[j] <= 0.0) continue;
    const double z = (obs.x - fit.grid.nodes[j]) / obs.sigma;
    const double d = std::exp(std::log(fit.weights[j]) - 0.5 * z * z - top);
    total += d;
    if (fit.grid.nodes[j] <= mu0) null_part += d;
  }
  return std::clamp(null_part / std::max(total, density_floor), 0.0, 1.0);
}

double oracle_clfdr(const TruePrior& prior, const Observation& obs, double mu0) {
  const auto split = prior.marginal(obs.x, obs.sigma, mu0);
  return std::clamp(split.null_part / std::max(split.total, density_floor), 0.0, 1.0);
}

// ---- grouping -----------------------------------------------------------------------------

std::size_t SigmaPartition::group_of(double sigma) const {
  std::size_t g = 0;
  while (g < breaks.size() && sigma > breaks[g]) ++g;
  return g;
}

GroupedFit fit_grouped(std::span<const Observation> observations, const SigmaPartition& partition,
                       const FitOptions& options) {
  if (!std::is_sorted(partition.breaks.begin(), partition.breaks.end())) {
    throw InputError("sigma partition breaks must be ascending");
  }
  const std::size_t ng = partition.groups();
  std::vector<std::vector<Observation>> members(ng);
  for (const auto& o : observations) members[partition.group_of(o.sigma)].push_back(o);

  GroupedFit out;
  out.partition = partition;
  out.fits.resize(ng);
  out.present.assign(ng, 0);
  for (std::size_t g = 0; g < ng; ++g) {
    if (members[g].empty()) continue;
    try {
      out.fits[g] = fit_prior(members[g], options);
    } catch (const InputError& e) {
      throw InputError("sigma group " + std::to_string(g) + ": " + e.what());
    }
    out.present[g] = 1;
  }
  return out;
}

std::vector<double> clfdr_grouped(const GroupedFit& fit, std::span<const Observation> observations,
                                  double mu0) {
  std::vector<double> out;
  out.reserve(observations.size());
  for (const auto& o : observations) {
    const auto g = fit.partition.group_of(o.sigma);
    if (g >= fit.present.size() || !fit.present[g]) {
      throw InputError("no fitted prior for the sigma group of unit '" + o.id + "'");
    }
    out.push_back(clfdr_from_fit(fit.fits[g], o, mu0));
  }
  return out;
}

}  // namespace prisel

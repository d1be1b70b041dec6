#pragma once

// Nonparametric deconvolution of the effect-size prior and conditional local
// FDR (Clfdr) scoring.
//
// The prior is approximated by point masses on an evenly spaced grid; the
// weights are chosen so that the implied marginal density at each x_i matches
// a sigma-weighted kernel density estimate in least squares.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "prisel/model.hpp"
#include "prisel/simplex_qp.hpp"

namespace prisel {

struct PriorGrid {
  double start = 0.0;    // left endpoint
  double spacing = 0.0;  // eta
  std::vector<double> nodes;

  std::size_t size() const { return nodes.size(); }

  // k evenly spaced nodes on [left, right]; requires k >= 2 and left < right.
  static PriorGrid uniform(double left, double right, std::size_t k);
};

struct BandwidthPair {
  double h_x = 0.0;
  double h_sigma = 0.0;
};

struct FittedPrior {
  PriorGrid grid;
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  BandwidthPair bandwidths;
  std::vector<double> history;
};

// Thrown when the weight solver hits its iteration cap without meeting either
// stopping rule. Carries the best iterate.
class FitError : public std::runtime_error {
public:
  FitError(const std::string& what, FittedPrior best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const FittedPrior& best() const noexcept { return best_; }

private:
  FittedPrior best_;
};

// ---- true priors (simulation / oracle path) -------------------------------

struct PointMass {
  double at = 0.0;
};
struct UniformInterval {
  double lo = 0.0;
  double hi = 1.0;
};
struct NormalComponent {
  double mean = 0.0;
  double sd = 1.0;
};

using ComponentShape = std::variant<PointMass, UniformInterval, NormalComponent>;

struct PriorComponent {
  double weight = 1.0;
  ComponentShape shape;
};

class TruePrior {
public:
  TruePrior() = default;
  // Weights must be nonnegative and sum to one (1e-9); shapes well formed.
  explicit TruePrior(std::vector<PriorComponent> components);

  const std::vector<PriorComponent>& components() const { return components_; }

  // Marginal density of x given sigma, split into the part with mu <= mu0.
  struct Split {
    double null_part;
    double total;
  };
  Split marginal(double x, double sigma, double mu0) const;

private:
  std::vector<PriorComponent> components_;
};

// ---- operations -----------------------------------------------------------

// Empirical quantile of sorted data: linear interpolation with p mapped to
// the (1-based) order-statistic index p(m-1)+1.
double empirical_quantile(std::span<const double> sorted, double p);

// Grid over [Q(0.01), Q(0.99)] of xs.
PriorGrid build_grid(std::span<const double> xs, std::size_t k);

// 0.9 min{sd, IQR} / (1.34 m^{1/5}); sd uses the m-1 denominator.
double silverman_bandwidth(std::span<const double> values);
BandwidthPair silverman_bandwidths(std::span<const double> xs, std::span<const double> sigmas);

// sigma-weighted kernel estimate of the marginal density at x_i, with the
// x-bandwidth scaled by each contributor's sigma_j. The sum includes j = i.
double kernel_marginal(std::size_t i, std::span<const Observation> observations,
                       const BandwidthPair& h);
std::vector<double> kernel_marginals(std::span<const Observation> observations,
                                     const BandwidthPair& h);

FittedPrior fit_weights(const PriorGrid& grid, std::span<const Observation> observations,
                        std::span<const double> marginals, const SimplexLsqOptions& solver = {});

struct FitOptions {
  std::size_t grid_size = 50;
  SimplexLsqOptions solver;
};

// Grid, bandwidths, kernel marginals and weights in one call. When every
// sigma is identical the sigma kernel weights are uniform for any bandwidth,
// so h_sigma is set to 1 instead of failing the rule of thumb.
FittedPrior fit_prior(std::span<const Observation> observations, const FitOptions& options = {});

double clfdr_from_fit(const FittedPrior& fit, const Observation& obs, double mu0);
double oracle_clfdr(const TruePrior& prior, const Observation& obs, double mu0);

// ---- sigma grouping ---------------------------------------------------------

// Partition of units by sigma: group g holds sigma in (breaks[g-1], breaks[g]].
struct SigmaPartition {
  std::vector<double> breaks;

  std::size_t groups() const { return breaks.size() + 1; }
  std::size_t group_of(double sigma) const;
};

struct GroupedFit {
  SigmaPartition partition;
  std::vector<FittedPrior> fits;  // one per nonempty group, indexed by group
  std::vector<std::uint8_t> present;
};

GroupedFit fit_grouped(std::span<const Observation> observations, const SigmaPartition& partition,
                       const FitOptions& options = {});
std::vector<double> clfdr_grouped(const GroupedFit& fit, std::span<const Observation> observations,
                                  double mu0);

}  // namespace prisel

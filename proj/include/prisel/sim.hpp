#pragma once

// Seeded simulation designs and the replication runner.
//
// Each replication r uses seed master_seed ^ r; unit i of that replication
// draws from its own counter stream (seed, i), so any single replication, or
// any single unit, can be regenerated in isolation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "prisel/deconv.hpp"
#include "prisel/model.hpp"
#include "prisel/sampling.hpp"
#include "prisel/selection.hpp"

namespace prisel {

// sigma = 1 for the first half (mu ~ N(5, 0.5^2)), sigma = sigma2 for the
// second half (mu ~ N(7, 0.5^2)); mu0 = 6.
struct TwoComponentDesign {
  double sigma2 = 2.0;
  std::size_t m = 10000;
};

// theta ~ Ber(pi1), mu ~ (1-theta) U(-3,-1) + theta U(1,2), sigma ~ U(0.5, sigma_max); mu0 = 0.
struct UniformIndepDesign {
  double sigma_max = 3.0;
  std::size_t m = 5000;
  double pi1 = 0.2;
};

// sigma in {0.25 s, 1.25 s} with equal odds; mu | sigma a two-component normal
// mixture whose signal component sits higher for the noisier group; mu0 = 1.
struct CorrelatedTwoGroupDesign {
  double sigma = 2.0;
  std::size_t m = 10000;
};

using DesignFamily = std::variant<TwoComponentDesign, UniformIndepDesign, CorrelatedTwoGroupDesign>;

struct SimDesign {
  DesignFamily family;
  std::uint64_t master_seed = 1;
  double mu0 = 0.0;
  double alpha = 0.1;
  std::size_t reps = 1;
  std::size_t grid_size = 50;
  std::size_t oracle_mc = 1000000;

  // Factories fill in the design's own mu0.
  static SimDesign two_component(double sigma2, std::size_t m = 10000);
  static SimDesign uniform_indep(double sigma_max, std::size_t m = 5000, double pi1 = 0.2);
  static SimDesign correlated(double sigma, std::size_t m = 10000);

  std::string name() const;
  std::size_t m() const;
  void validate() const;
};

// Generative model with one block per sigma group.
GenerativeModel generative_model(const SimDesign& design);
// Partition that separates the design's sigma groups (no breaks if single).
SigmaPartition design_partition(const SimDesign& design);

struct SimData {
  std::vector<Observation> observations;
  TruthLabels truths;
  std::vector<TruePrior> priors;     // per sigma group
  std::vector<std::size_t> group;    // sigma group of each unit
  std::uint64_t seed = 0;
};

std::uint64_t replication_seed(const SimDesign& design, std::size_t rep);
SimData generate(const SimDesign& design, std::size_t rep);

// Exact Clfdr of every unit under its group's true prior.
std::vector<double> oracle_clfdrs(const SimData& data, double mu0);
// Data-driven Clfdr from per-group deconvolution fits.
std::vector<double> estimated_clfdrs(const SimData& data, const SimDesign& design);

enum class Method : std::uint8_t { DD = 0, OR = 1, Clfdr = 2, BH = 3 };
inline constexpr std::array<Method, 4> all_methods{Method::DD, Method::OR, Method::Clfdr,
                                                    Method::BH};
std::string_view to_string(Method m);

struct RepRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::array<MetricsRecord, 4> metrics{};
};

struct MethodSummary {
  double fdr = 0.0;  // mean FDP
  double fdr_se = 0.0;
  double mfdr = 0.0;  // total false / total selected
  double etp = 0.0;
  double etp_se = 0.0;
  double etp_star = 0.0;
  double etp_star_se = 0.0;
  double n_selected = 0.0;
};

struct ReplicationReport {
  SimDesign design;
  OracleCalibration oracle;
  std::vector<RepRecord> reps;
  std::array<MethodSummary, 4> summary{};

  const MethodSummary& operator[](Method m) const { return summary[static_cast<std::size_t>(m)]; }
};

OracleCalibration calibrate_design_oracle(const SimDesign& design);
RepRecord run_replication(const SimDesign& design, std::size_t rep, const ThresholdPair& oracle);
std::array<MethodSummary, 4> summarize(const std::vector<RepRecord>& reps);
ReplicationReport run_replications(const SimDesign& design, unsigned threads = 1);

}  // namespace prisel

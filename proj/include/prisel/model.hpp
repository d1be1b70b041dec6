#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prisel {

// One unit: observed effect x with known noise level sigma.
struct Observation {
  std::string id;
  double x = 0.0;
  double sigma = 1.0;
};

// Validates sigma > 0 and finite x; throws InputError otherwise.
Observation make_observation(std::string id, double x, double sigma);
void validate(std::span<const Observation> observations);

// H0: mu <= mu0 tested at target FDR level alpha.
struct TestingProblem {
  double mu0 = 0.0;
  double alpha = 0.1;

  TestingProblem() = default;
  TestingProblem(double mu0, double alpha);
};

using DecisionVector = std::vector<std::uint8_t>;

struct TruthLabels {
  std::vector<std::uint8_t> theta;
  std::optional<std::vector<double>> mu_true;

  // theta_i = 1 exactly when mu_i > mu0.
  static TruthLabels from_effects(std::vector<double> mu, double mu0);
};

struct MetricsRecord {
  double fdp = 0.0;
  std::size_t etp = 0;
  double etp_star = 0.0;
  std::size_t n_selected = 0;
  std::size_t n_false = 0;
};

double fdp(std::span<const std::uint8_t> decisions, const TruthLabels& truths);
std::size_t etp(std::span<const std::uint8_t> decisions, const TruthLabels& truths);
double etp_star(std::span<const std::uint8_t> decisions, std::span<const Observation> observations,
                double mu0);
MetricsRecord evaluate(std::span<const std::uint8_t> decisions, const TruthLabels& truths,
                       std::span<const Observation> observations, double mu0);

struct ZP {
  double z;
  double p;
};

// z = (x - mu0) / sigma, p = 1 - Phi(z), kept inside the open unit interval.
ZP zvalue_pvalue(const Observation& obs, double mu0);

std::vector<double> pvalues(std::span<const Observation> observations, double mu0);

std::size_t count_selected(std::span<const std::uint8_t> decisions);

}  // namespace prisel

#pragma once

// Prioritized selection under an mFDR budget.
//
// Every unit is placed in one of four groups by the signs of (x - mu0) and
// (Clfdr - alpha). Group 0 is always selected and group 3 never. Group 1
// units spend FDR capacity to gain power and are taken in descending order of
// the value-to-cost ratio T = (x - mu0) / (Clfdr - alpha); group 2 units buy
// capacity at a power cost and are taken in ascending order of T.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prisel/model.hpp"
#include "prisel/sampling.hpp"

namespace prisel {

enum class Group : std::uint8_t { G0 = 0, G1 = 1, G2 = 2, G3 = 3 };

std::string_view to_string(Group g);

// Bounded, continuous, strictly increasing maps from T to S.
enum class ScoreTransform : std::uint8_t {
  Tanh,      // default
  Arctan,    // (2/pi) atan(t)
  Logistic,  // 2 / (1 + e^{-t}) - 1
};

double apply_transform(ScoreTransform xi, double t);
double invert_transform(ScoreTransform xi, double s);

Group classify_group(double x, double clfdr, double mu0, double alpha);

struct Score {
  double t;
  double s;
};

// T = (x - mu0) / (Clfdr - alpha); when Clfdr == alpha the ratio is taken as
// +inf for x != mu0 and 0 for x == mu0.
Score score(double x, double clfdr, double mu0, double alpha,
            ScoreTransform xi = ScoreTransform::Tanh);

struct ScoredUnit {
  std::size_t index = 0;
  double x = 0.0;
  double clfdr = 0.0;
  double t = 0.0;
  double s = 0.0;
  Group group = Group::G3;
};

std::vector<ScoredUnit> score_units(std::span<const double> xs, std::span<const double> clfdrs,
                                    double mu0, double alpha,
                                    ScoreTransform xi = ScoreTransform::Tanh);

enum class StepKind : std::uint8_t {
  SeedG0,      // Step 2
  AddG1,       // Step 3
  AddG2,       // Step 4
  Checkpoint,  // ETP* stored after a Step 3 pass
  Rollback,    // Step 7: selection cleared before the rebuild
  Exhausted,   // Step 6
};

std::string_view to_string(StepKind k);

struct TraceStep {
  StepKind kind;
  std::optional<std::size_t> unit;
  double etp_star;
  double capacity;
};

struct SelectionResult {
  DecisionVector decisions;
  double etp_star_realized = std::numeric_limits<double>::quiet_NaN();
  double capacity_final = std::numeric_limits<double>::quiet_NaN();
  std::vector<TraceStep> trace;

  std::size_t n_selected() const { return count_selected(decisions); }
};

// Reconstructs the decision vector encoded by a trace.
DecisionVector replay(std::span<const TraceStep> trace, std::size_t m);

// Step-wise data-driven procedure. Units must carry distinct indices in
// [0, units.size()).
SelectionResult select_dd(std::span<const ScoredUnit> units, double alpha, double mu0);

// k = max{j : mean of the j smallest Clfdr <= alpha}; every unit whose Clfdr
// equals the k-th smallest is included.
SelectionResult select_clfdr_stepup(std::span<const double> clfdrs, double alpha);

// Benjamini-Hochberg step-up.
SelectionResult select_bh(std::span<const double> pvalues, double alpha);

// Cutoffs of the rule family: group 1 selected when S > c1, group 2 when
// S < c2. t1/t2 hold the same cutoffs on the T scale when known, and only
// break exact ties in S (which appear once tanh saturates at 1).
struct ThresholdPair {
  double c1 = 1.0;
  double c2 = -1.0;
  double t1 = std::numeric_limits<double>::quiet_NaN();
  double t2 = std::numeric_limits<double>::quiet_NaN();
};

SelectionResult select_oracle(std::span<const ScoredUnit> units, const ThresholdPair& thresholds,
                              double alpha, double mu0);

struct OracleCalibration {
  ThresholdPair thresholds;
  double clfdr_cutoff = 0.0;      // largest Clfdr selected by the step-up rule
  std::size_t n_mc = 0;
  std::size_t g1_selected = 0;
  std::size_t g2_selected = 0;
  double mfdr = 0.0;              // mean Clfdr over the prioritized selection
};

// Cutoffs realized by the step-wise procedure on a given sample: c1 (c2) is
// the score of the first group-1 (group-2) unit left out, or the +1 / -1
// sentinels when none or all of the group is taken.
ThresholdPair thresholds_from_sample(std::span<const ScoredUnit> units, double alpha, double mu0,
                                     ScoreTransform xi = ScoreTransform::Tanh);

// Monte Carlo calibration of the oracle cutoffs: draws n_mc units from the
// model with exact Clfdr and walks the curve of maximal group-1 prefixes as
// group-2 units are added, stopping once ETP* declines. Requires n_mc >= 1e5.
OracleCalibration calibrate_oracle(const GenerativeModel& model, double alpha, double mu0,
                                   std::size_t n_mc, std::uint64_t seed,
                                   ScoreTransform xi = ScoreTransform::Tanh);

ThresholdPair oracle_thresholds(const TruePrior& prior, const SigmaLaw& sigma_law, double alpha,
                                double mu0, std::size_t n_mc, std::uint64_t seed);

}  // namespace prisel

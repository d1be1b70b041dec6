#pragma once

#include <vector>

#include "prisel/deconv.hpp"
#include "prisel/rng.hpp"

namespace prisel {

// Law of sigma: a point mass when lo == hi, otherwise U(lo, hi).
struct SigmaLaw {
  double lo = 1.0;
  double hi = 1.0;

  static SigmaLaw point(double s) { return {s, s}; }
  static SigmaLaw uniform(double lo, double hi) { return {lo, hi}; }
  bool is_point() const { return lo == hi; }
};

// One block of a generative model: with probability `weight`, sigma is drawn
// from `sigma` and mu from `prior`. Several blocks let mu depend on sigma.
struct ModelBlock {
  double weight = 1.0;
  SigmaLaw sigma;
  TruePrior prior;
};

struct GenerativeModel {
  std::vector<ModelBlock> blocks;
};

double draw_effect(const TruePrior& prior, CounterRng& rng);
double draw_sigma(const SigmaLaw& law, CounterRng& rng);
std::size_t draw_block(const GenerativeModel& model, CounterRng& rng);

}  // namespace prisel

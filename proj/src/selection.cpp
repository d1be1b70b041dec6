#include "prisel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "prisel/error.hpp"

namespace prisel {

std::string_view to_string(Group g) {
  switch (g) {
    case Group::G0: return "G0";
    case Group::G1: return "G1";
    case Group::G2: return "G2";
    case Group::G3: return "G3";
  }
  return "?";
}

std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::SeedG0: return "seed_g0";
    case StepKind::AddG1: return "add_g1";
    case StepKind::AddG2: return "add_g2";
    case StepKind::Checkpoint: return "checkpoint";
    case StepKind::Rollback: return "rollback";
    case StepKind::Exhausted: return "exhausted";
  }
  return "?";
}

double apply_transform(ScoreTransform xi, double t) {
  if (std::isinf(t)) return t > 0 ? 1.0 : -1.0;
  switch (xi) {
    case ScoreTransform::Tanh: return std::tanh(t);
    case ScoreTransform::Arctan: return 2.0 / std::numbers::pi * std::atan(t);
    case ScoreTransform::Logistic: return 2.0 / (1.0 + std::exp(-t)) - 1.0;
  }
  return std::tanh(t);
}

double invert_transform(ScoreTransform xi, double s) {
  if (s >= 1.0) return std::numeric_limits<double>::infinity();
  if (s <= -1.0) return -std::numeric_limits<double>::infinity();
  switch (xi) {
    case ScoreTransform::Tanh: return std::atanh(s);
    case ScoreTransform::Arctan: return std::tan(s * std::numbers::pi / 2.0);
    case ScoreTransform::Logistic: return -std::log(2.0 / (s + 1.0) - 1.0);
  }
  return std::atanh(s);
}

Group classify_group(double x, double clfdr, double mu0, double alpha) {
  const bool up = x - mu0 >= 0.0;
  const bool cheap = clfdr - alpha <= 0.0;
  if (up) return cheap ? Group::G0 : Group::G1;
  return cheap ? Group::G2 : Group::G3;
}

Score score(double x, double clfdr, double mu0, double alpha, ScoreTransform xi) {
  const double num = x - mu0;
  const double den = clfdr - alpha;
  double t;
  if (num == 0.0) {
    t = 0.0;
  } else if (den == 0.0) {
    t = std::numeric_limits<double>::infinity();
  } else {
    t = num / den;
  }
  return {t, apply_transform(xi, t)};
}

std::vector<ScoredUnit> score_units(std::span<const double> xs, std::span<const double> clfdrs,
                                    double mu0, double alpha, ScoreTransform xi) {
  if (xs.size() != clfdrs.size()) throw InputError("score_units: length mismatch");
  std::vector<ScoredUnit> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = clfdrs[i];
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("score_units: Clfdr outside [0, 1]");
    const auto sc = score(xs[i], c, mu0, alpha, xi);
    out[i] = {i, xs[i], c, sc.t, sc.s, classify_group(xs[i], c, mu0, alpha)};
  }
  return out;
}

DecisionVector replay(std::span<const TraceStep> trace, std::size_t m) {
  DecisionVector d(m, 0);
  for (const auto& st : trace) {
    switch (st.kind) {
      case StepKind::SeedG0:
      case StepKind::AddG1:
      case StepKind::AddG2:
        if (!st.unit || *st.unit >= m) throw InputError("replay: trace unit out of range");
        d[*st.unit] = 1;
        break;
      case StepKind::Rollback: std::fill(d.begin(), d.end(), 0); break;
      default: break;
    }
  }
  return d;
}

namespace {

void check_indices(std::span<const ScoredUnit> units) {
  std::vector<std::uint8_t> seen(units.size(), 0);
  for (const auto& u : units) {
    if (u.index >= units.size() || seen[u.index]) {
      throw InputError("scored units need distinct indices in [0, m)");
    }
    seen[u.index] = 1;
  }
}

// Group-1 priority: larger T first; ties by larger x, then input index.
bool g1_before(const ScoredUnit& a, const ScoredUnit& b) {
  if (a.t != b.t) return a.t > b.t;
  if (a.x != b.x) return a.x > b.x;
  return a.index < b.index;
}

// Group-2 priority: smaller T first; ties by larger x, then input index.
bool g2_before(const ScoredUnit& a, const ScoredUnit& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.x != b.x) return a.x > b.x;
  return a.index < b.index;
}

struct Partitioned {
  std::vector<const ScoredUnit*> g0, g1, g2;
};

Partitioned partition_units(std::span<const ScoredUnit> units) {
  Partitioned p;
  for (const auto& u : units) {
    switch (u.group) {
      case Group::G0: p.g0.push_back(&u); break;
      case Group::G1: p.g1.push_back(&u); break;
      case Group::G2: p.g2.push_back(&u); break;
      case Group::G3: break;
    }
  }
  std::sort(p.g1.begin(), p.g1.end(), [](auto* a, auto* b) { return g1_before(*a, *b); });
  std::sort(p.g2.begin(), p.g2.end(), [](auto* a, auto* b) { return g2_before(*a, *b); });
  return p;
}

class Knapsack {
public:
  Knapsack(std::size_t m, double alpha, double mu0, std::vector<TraceStep>& trace)
      : decisions(m, 0), alpha_(alpha), mu0_(mu0), trace_(trace) {}

  void add(const ScoredUnit& u, StepKind kind) {
    decisions[u.index] = 1;
    capacity -= u.clfdr - alpha_;
    etp_star += u.x - mu0_;
    trace_.push_back({kind, u.index, etp_star, capacity});
  }

  // Step 3: extend the group-1 prefix while the next unit fits.
  void fill(const std::vector<const ScoredUnit*>& g1, std::size_t& next) {
    while (next < g1.size() && g1[next]->clfdr - alpha_ <= capacity) {
      add(*g1[next], StepKind::AddG1);
      ++next;
    }
  }

  void mark(StepKind kind) { trace_.push_back({kind, std::nullopt, etp_star, capacity}); }

  void clear() {
    std::fill(decisions.begin(), decisions.end(), 0);
    capacity = 0.0;
    etp_star = 0.0;
  }

  DecisionVector decisions;
  double capacity = 0.0;
  double etp_star = 0.0;

private:
  double alpha_;
  double mu0_;
  std::vector<TraceStep>& trace_;
};

struct DdOutcome {
  SelectionResult result;
  std::size_t g1_taken = 0;
  std::size_t g2_taken = 0;
  Partitioned groups;
};

DdOutcome run_dd(std::span<const ScoredUnit> units, double alpha, double mu0) {
  check_indices(units);
  DdOutcome out;
  out.groups = partition_units(units);
  const auto& [g0, g1, g2] = out.groups;
  auto& trace = out.result.trace;
  Knapsack sack(units.size(), alpha, mu0, trace);

  // Step 2
  for (const auto* u : g0) sack.add(*u, StepKind::SeedG0);
  std::size_t p1 = 0;
  std::size_t p2 = 0;
  // Step 3
  sack.fill(g1, p1);
  sack.mark(StepKind::Checkpoint);
  double stored = sack.etp_star;

  for (;;) {
    // Step 6
    if (p1 == g1.size() || p2 == g2.size()) {
      sack.mark(StepKind::Exhausted);
      break;
    }
    // Step 4, then Step 3 again
    sack.add(*g2[p2], StepKind::AddG2);
    ++p2;
    sack.fill(g1, p1);
    sack.mark(StepKind::Checkpoint);
    if (sack.etp_star < stored) {
      // Step 7: rebuild from group 0 and the first p2 - 1 group-2 units, then
      // refill group 1 from the top.
      sack.mark(StepKind::Rollback);
      sack.clear();
      for (const auto* u : g0) sack.add(*u, StepKind::SeedG0);
      --p2;
      for (std::size_t j = 0; j < p2; ++j) sack.add(*g2[j], StepKind::AddG2);
      p1 = 0;
      sack.fill(g1, p1);
      sack.mark(StepKind::Checkpoint);
      break;
    }
    stored = sack.etp_star;
  }

  out.g1_taken = p1;
  out.g2_taken = p2;
  out.result.decisions = std::move(sack.decisions);
  out.result.etp_star_realized = sack.etp_star;
  out.result.capacity_final = sack.capacity;
  return out;
}

}  // namespace

SelectionResult select_dd(std::span<const ScoredUnit> units, double alpha, double mu0) {
  return run_dd(units, alpha, mu0).result;
}

SelectionResult select_clfdr_stepup(std::span<const double> clfdrs, double alpha) {
  const std::size_t m = clfdrs.size();
  std::vector<double> sorted(clfdrs.begin(), clfdrs.end());
  for (double c : sorted) {
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("select_clfdr_stepup: Clfdr outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());
  std::size_t k = 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    sum += sorted[j];
    if (sum / static_cast<double>(j + 1) <= alpha) k = j + 1;
  }
  SelectionResult r;
  r.decisions.assign(m, 0);
  r.capacity_final = 0.0;
  if (k == 0) return r;
  const double cutoff = sorted[k - 1];
  double spent = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (clfdrs[i] <= cutoff) {
      r.decisions[i] = 1;
      spent += clfdrs[i] - alpha;
    }
  }
  r.capacity_final = -spent;
  return r;
}

SelectionResult select_bh(std::span<const double> pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  std::vector<double> sorted(pvalues.begin(), pvalues.end());
  for (double p : sorted) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("select_bh: p-value outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());
  std::size_t k = 0;
  for (std::size_t i = m; i >= 1; --i) {
    if (sorted[i - 1] <= static_cast<double>(i) * alpha / static_cast<double>(m)) {
      k = i;
      break;
    }
  }
  SelectionResult r;
  r.decisions.assign(m, 0);
  if (k == 0) return r;
  const double cutoff = sorted[k - 1];
  for (std::size_t i = 0; i < m; ++i) r.decisions[i] = pvalues[i] <= cutoff;
  return r;
}

SelectionResult select_oracle(std::span<const ScoredUnit> units, const ThresholdPair& th,
                              double alpha, double mu0) {
  check_indices(units);
  SelectionResult r;
  r.decisions.assign(units.size(), 0);
  double capacity = 0.0;
  double etp = 0.0;
  for (const auto& u : units) {
    bool take = false;
    switch (u.group) {
      case Group::G0: take = true; break;
      case Group::G1: take = u.s != th.c1 ? u.s > th.c1 : (!std::isnan(th.t1) && u.t > th.t1); break;
      case Group::G2: take = u.s != th.c2 ? u.s < th.c2 : (!std::isnan(th.t2) && u.t < th.t2); break;
      case Group::G3: break;
    }
    if (!take) continue;
    r.decisions[u.index] = 1;
    capacity -= u.clfdr - alpha;
    etp += u.x - mu0;
    r.trace.push_back({u.group == Group::G0   ? StepKind::SeedG0
                       : u.group == Group::G1 ? StepKind::AddG1
                                              : StepKind::AddG2,
                       u.index, etp, capacity});
  }
  r.etp_star_realized = etp;
  r.capacity_final = capacity;
  return r;
}

namespace {

ThresholdPair thresholds_from_outcome(const DdOutcome& out, ScoreTransform xi) {
  const auto& g1 = out.groups.g1;
  const auto& g2 = out.groups.g2;
  constexpr double inf = std::numeric_limits<double>::infinity();
  ThresholdPair th;
  if (out.g1_taken == 0) {
    th.c1 = 1.0;
    th.t1 = inf;
  } else if (out.g1_taken == g1.size()) {
    th.c1 = -1.0;
    th.t1 = -inf;
  } else {
    th.t1 = g1[out.g1_taken]->t;
    th.c1 = apply_transform(xi, th.t1);
  }
  if (out.g2_taken == 0) {
    th.c2 = -1.0;
    th.t2 = -inf;
  } else if (out.g2_taken == g2.size()) {
    th.c2 = 1.0;
    th.t2 = inf;
  } else {
    th.t2 = g2[out.g2_taken]->t;
    th.c2 = apply_transform(xi, th.t2);
  }
  return th;
}

}  // namespace

ThresholdPair thresholds_from_sample(std::span<const ScoredUnit> units, double alpha, double mu0,
                                     ScoreTransform xi) {
  return thresholds_from_outcome(run_dd(units, alpha, mu0), xi);
}

OracleCalibration calibrate_oracle(const GenerativeModel& model, double alpha, double mu0,
                                   std::size_t n_mc, std::uint64_t seed, ScoreTransform xi) {
  if (n_mc < 100000) throw InputError("calibrate_oracle: n_mc must be at least 1e5");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("calibrate_oracle: alpha must be in (0, 1)");
  std::vector<double> xs(n_mc);
  std::vector<double> cl(n_mc);
  CounterRng rng(seed, 0x0a5c1eULL);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const auto& block = model.blocks[draw_block(model, rng)];
    const double sigma = draw_sigma(block.sigma, rng);
    const double mu = draw_effect(block.prior, rng);
    const double x = mu + sigma * rng.normal();
    xs[i] = x;
    cl[i] = oracle_clfdr(block.prior, Observation{{}, x, sigma}, mu0);
  }
  const auto units = score_units(xs, cl, mu0, alpha, xi);

  OracleCalibration cal;
  cal.n_mc = n_mc;
  const auto out = run_dd(units, alpha, mu0);
  cal.g1_selected = out.g1_taken;
  cal.g2_selected = out.g2_taken;
  const auto n_sel = out.result.n_selected();
  if (n_sel > 0) {
    double s = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
      if (out.result.decisions[i]) s += cl[i];
    }
    cal.mfdr = s / static_cast<double>(n_sel);
  }
  cal.thresholds = thresholds_from_outcome(out, xi);

  const auto stepup = select_clfdr_stepup(cl, alpha);
  double cutoff = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    if (stepup.decisions[i]) cutoff = std::max(cutoff, cl[i]);
  }
  cal.clfdr_cutoff = cutoff;
  return cal;
}

ThresholdPair oracle_thresholds(const TruePrior& prior, const SigmaLaw& sigma_law, double alpha,
                                double mu0, std::size_t n_mc, std::uint64_t seed) {
  GenerativeModel model{{ModelBlock{1.0, sigma_law, prior}}};
  return calibrate_oracle(model, alpha, mu0, n_mc, seed).thresholds;
}

}  // namespace prisel

#include "prisel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prisel/error.hpp"
#include "prisel/normal.hpp"

namespace prisel {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

Observation make_observation(std::string id, double x, double sigma) {
  if (!std::isfinite(x)) throw InputError("observation '" + id + "': x must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError("observation '" + id + "': sigma must be positive and finite");
  }
  return Observation{std::move(id), x, sigma};
}

void validate(std::span<const Observation> observations) {
  for (const auto& o : observations) {
    if (!std::isfinite(o.x)) throw InputError("observation '" + o.id + "': x must be finite");
    if (!(o.sigma > 0.0) || !std::isfinite(o.sigma)) {
      throw InputError("observation '" + o.id + "': sigma must be positive and finite");
    }
  }
}

TestingProblem::TestingProblem(double mu0_, double alpha_) : mu0(mu0_), alpha(alpha_) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (!std::isfinite(mu0)) throw InputError("mu0 must be finite");
}

TruthLabels TruthLabels::from_effects(std::vector<double> mu, double mu0) {
  TruthLabels t;
  t.theta.reserve(mu.size());
  for (double m : mu) t.theta.push_back(m > mu0 ? 1 : 0);
  t.mu_true = std::move(mu);
  return t;
}

std::size_t count_selected(std::span<const std::uint8_t> decisions) {
  std::size_t n = 0;
  for (auto d : decisions) n += d != 0;
  return n;
}

double fdp(std::span<const std::uint8_t> decisions, const TruthLabels& truths) {
  check_aligned(decisions.size(), truths.theta.size(), "fdp");
  std::size_t false_sel = 0;
  std::size_t sel = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!decisions[i]) continue;
    ++sel;
    false_sel += truths.theta[i] == 0;
  }
  return static_cast<double>(false_sel) / static_cast<double>(std::max<std::size_t>(sel, 1));
}

std::size_t etp(std::span<const std::uint8_t> decisions, const TruthLabels& truths) {
  check_aligned(decisions.size(), truths.theta.size(), "etp");
  std::size_t n = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) n += (decisions[i] && truths.theta[i]);
  return n;
}

double etp_star(std::span<const std::uint8_t> decisions, std::span<const Observation> observations,
                double mu0) {
  check_aligned(decisions.size(), observations.size(), "etp_star");
  double s = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i]) s += observations[i].x - mu0;
  }
  return s;
}

MetricsRecord evaluate(std::span<const std::uint8_t> decisions, const TruthLabels& truths,
                       std::span<const Observation> observations, double mu0) {
  MetricsRecord r;
  r.fdp = fdp(decisions, truths);
  r.etp = etp(decisions, truths);
  r.etp_star = etp_star(decisions, observations, mu0);
  r.n_selected = count_selected(decisions);
  r.n_false = r.n_selected - r.etp;
  return r;
}

ZP zvalue_pvalue(const Observation& obs, double mu0) {
  if (!(obs.sigma > 0.0)) throw InputError("zvalue_pvalue: sigma must be positive");
  const double z = (obs.x - mu0) / obs.sigma;
  double p = normal::sf(z);
  // Keep p strictly inside (0, 1) even where the tail underflows or rounds.
  p = std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
  return {z, p};
}

std::vector<double> pvalues(std::span<const Observation> observations, double mu0) {
  std::vector<double> p;
  p.reserve(observations.size());
  for (const auto& o : observations) p.push_back(zvalue_pvalue(o, mu0).p);
  return p;
}

}  // namespace prisel

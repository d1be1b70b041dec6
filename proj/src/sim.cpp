#include "prisel/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "prisel/error.hpp"
#include "prisel/parallel.hpp"

namespace prisel {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::uint64_t oracle_stream_tag = 0x6f7261636c65ULL;

TruePrior normal_prior(double mean, double sd) {
  return TruePrior({PriorComponent{1.0, NormalComponent{mean, sd}}});
}

TruePrior correlated_prior(double signal_mean) {
  return TruePrior({PriorComponent{0.9, NormalComponent{-0.5, 0.25}},
                    PriorComponent{0.1, NormalComponent{signal_mean, 0.25}}});
}

TruePrior uniform_prior(double pi1) {
  return TruePrior({PriorComponent{1.0 - pi1, UniformInterval{-3.0, -1.0}},
                    PriorComponent{pi1, UniformInterval{1.0, 2.0}}});
}

}  // namespace

SimDesign SimDesign::two_component(double sigma2, std::size_t m) {
  SimDesign d;
  d.family = TwoComponentDesign{sigma2, m};
  d.mu0 = 6.0;
  return d;
}

SimDesign SimDesign::uniform_indep(double sigma_max, std::size_t m, double pi1) {
  SimDesign d;
  d.family = UniformIndepDesign{sigma_max, m, pi1};
  d.mu0 = 0.0;
  return d;
}

SimDesign SimDesign::correlated(double sigma, std::size_t m) {
  SimDesign d;
  d.family = CorrelatedTwoGroupDesign{sigma, m};
  d.mu0 = 1.0;
  return d;
}

std::string SimDesign::name() const {
  return std::visit(overloaded{
                        [](const TwoComponentDesign&) { return std::string("two-component"); },
                        [](const UniformIndepDesign&) { return std::string("uniform"); },
                        [](const CorrelatedTwoGroupDesign&) { return std::string("correlated"); },
                    },
                    family);
}

std::size_t SimDesign::m() const {
  return std::visit([](const auto& f) { return f.m; }, family);
}

void SimDesign::validate() const {
  if (reps < 1) throw InputError("design: reps must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("design: alpha must be in (0, 1)");
  if (grid_size < 2) throw InputError("design: grid size must be at least 2");
  std::visit(overloaded{
                 [](const TwoComponentDesign& d) {
                   if (!(d.sigma2 > 0.0) || d.sigma2 == 1.0) {
                     throw InputError("two-component design: sigma2 must be positive and != 1");
                   }
                   if (d.m < 4 || d.m % 2 != 0) {
                     throw InputError("two-component design: m must be even and >= 4");
                   }
                 },
                 [](const UniformIndepDesign& d) {
                   if (!(d.sigma_max > 0.5)) {
                     throw InputError("uniform design: sigma_max must exceed 0.5");
                   }
                   if (!(d.pi1 > 0.0 && d.pi1 < 1.0)) throw InputError("uniform design: pi1 in (0,1)");
                   if (d.m < 4) throw InputError("uniform design: m must be >= 4");
                 },
                 [](const CorrelatedTwoGroupDesign& d) {
                   if (!(d.sigma > 0.0)) throw InputError("correlated design: sigma must be positive");
                   if (d.m < 4) throw InputError("correlated design: m must be >= 4");
                 },
             },
             family);
}

GenerativeModel generative_model(const SimDesign& design) {
  return std::visit(
      overloaded{
          [](const TwoComponentDesign& d) {
            return GenerativeModel{{ModelBlock{0.5, SigmaLaw::point(1.0), normal_prior(5.0, 0.5)},
                                    ModelBlock{0.5, SigmaLaw::point(d.sigma2),
                                               normal_prior(7.0, 0.5)}}};
          },
          [](const UniformIndepDesign& d) {
            return GenerativeModel{
                {ModelBlock{1.0, SigmaLaw::uniform(0.5, d.sigma_max), uniform_prior(d.pi1)}}};
          },
          [](const CorrelatedTwoGroupDesign& d) {
            return GenerativeModel{
                {ModelBlock{0.5, SigmaLaw::point(0.25 * d.sigma), correlated_prior(1.5)},
                 ModelBlock{0.5, SigmaLaw::point(1.25 * d.sigma), correlated_prior(3.0)}}};
          },
      },
      design.family);
}

SigmaPartition design_partition(const SimDesign& design) {
  return std::visit(overloaded{
                        [](const TwoComponentDesign& d) {
                          return SigmaPartition{{0.5 * (1.0 + d.sigma2)}};
                        },
                        [](const UniformIndepDesign&) { return SigmaPartition{}; },
                        [](const CorrelatedTwoGroupDesign& d) {
                          return SigmaPartition{{0.75 * d.sigma}};
                        },
                    },
                    design.family);
}

std::uint64_t replication_seed(const SimDesign& design, std::size_t rep) {
  return design.master_seed ^ static_cast<std::uint64_t>(rep);
}

SimData generate(const SimDesign& design, std::size_t rep) {
  design.validate();
  if (rep >= design.reps) throw InputError("generate: replication index out of range");
  const auto model = generative_model(design);
  const std::size_t m = design.m();

  SimData data;
  data.seed = replication_seed(design, rep);
  data.observations.reserve(m);
  data.group.reserve(m);
  for (const auto& b : model.blocks) data.priors.push_back(b.prior);
  std::vector<double> mu(m);

  const bool fixed_halves = std::holds_alternative<TwoComponentDesign>(design.family);
  for (std::size_t i = 0; i < m; ++i) {
    CounterRng rng(data.seed, i);
    std::size_t b;
    if (fixed_halves) {
      b = i < m / 2 ? 0 : 1;
    } else {
      b = draw_block(model, rng);
    }
    const auto& block = model.blocks[b];
    const double sigma = draw_sigma(block.sigma, rng);
    mu[i] = draw_effect(block.prior, rng);
    const double x = mu[i] + sigma * rng.normal();
    data.observations.push_back(Observation{std::to_string(i), x, sigma});
    data.group.push_back(b);
  }
  data.truths = TruthLabels::from_effects(std::move(mu), design.mu0);
  return data;
}

std::vector<double> oracle_clfdrs(const SimData& data, double mu0) {
  std::vector<double> out;
  out.reserve(data.observations.size());
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    out.push_back(oracle_clfdr(data.priors[data.group[i]], data.observations[i], mu0));
  }
  return out;
}

std::vector<double> estimated_clfdrs(const SimData& data, const SimDesign& design) {
  FitOptions opts;
  opts.grid_size = design.grid_size;
  const auto fit = fit_grouped(data.observations, design_partition(design), opts);
  return clfdr_grouped(fit, data.observations, design.mu0);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DD: return "DD";
    case Method::OR: return "OR";
    case Method::Clfdr: return "Clfdr";
    case Method::BH: return "BH";
  }
  return "?";
}

OracleCalibration calibrate_design_oracle(const SimDesign& design) {
  design.validate();
  return calibrate_oracle(generative_model(design), design.alpha, design.mu0, design.oracle_mc,
                          mix64(design.master_seed) ^ oracle_stream_tag);
}

RepRecord run_replication(const SimDesign& design, std::size_t rep, const ThresholdPair& oracle) {
  const auto data = generate(design, rep);
  const auto& obs = data.observations;
  std::vector<double> xs;
  xs.reserve(obs.size());
  for (const auto& o : obs) xs.push_back(o.x);

  std::vector<double> cl_hat;
  try {
    cl_hat = estimated_clfdrs(data, design);
  } catch (const FitError& e) {
    throw FitError("replication " + std::to_string(rep) + ": " + e.what(), e.best());
  }
  const auto cl_true = oracle_clfdrs(data, design.mu0);

  RepRecord rec;
  rec.rep = rep;
  rec.seed = data.seed;
  auto metrics = [&](const DecisionVector& d) {
    return evaluate(d, data.truths, obs, design.mu0);
  };

  const auto dd_units = score_units(xs, cl_hat, design.mu0, design.alpha);
  rec.metrics[0] = metrics(select_dd(dd_units, design.alpha, design.mu0).decisions);
  const auto or_units = score_units(xs, cl_true, design.mu0, design.alpha);
  rec.metrics[1] = metrics(select_oracle(or_units, oracle, design.alpha, design.mu0).decisions);
  rec.metrics[2] = metrics(select_clfdr_stepup(cl_true, design.alpha).decisions);
  rec.metrics[3] = metrics(select_bh(pvalues(obs, design.mu0), design.alpha).decisions);
  return rec;
}

std::array<MethodSummary, 4> summarize(const std::vector<RepRecord>& reps) {
  std::array<MethodSummary, 4> out{};
  const double n = static_cast<double>(reps.size());
  if (reps.empty()) return out;
  auto mean_se = [&](auto&& get, double& mean, double& se) {
    double s = 0.0;
    for (const auto& r : reps) s += get(r);
    mean = s / n;
    if (reps.size() < 2) {
      se = 0.0;
      return;
    }
    double ss = 0.0;
    for (const auto& r : reps) ss += (get(r) - mean) * (get(r) - mean);
    se = std::sqrt(ss / (n - 1.0) / n);
  };
  for (std::size_t k = 0; k < 4; ++k) {
    auto& o = out[k];
    mean_se([&](const RepRecord& r) { return r.metrics[k].fdp; }, o.fdr, o.fdr_se);
    mean_se([&](const RepRecord& r) { return static_cast<double>(r.metrics[k].etp); }, o.etp,
            o.etp_se);
    mean_se([&](const RepRecord& r) { return r.metrics[k].etp_star; }, o.etp_star, o.etp_star_se);
    double total_sel = 0.0;
    double total_false = 0.0;
    for (const auto& r : reps) {
      total_sel += static_cast<double>(r.metrics[k].n_selected);
      total_false += static_cast<double>(r.metrics[k].n_false);
    }
    o.n_selected = total_sel / n;
    o.mfdr = total_sel > 0.0 ? total_false / total_sel : 0.0;
  }
  return out;
}

ReplicationReport run_replications(const SimDesign& design, unsigned threads) {
  design.validate();
  ReplicationReport report;
  report.design = design;
  report.oracle = calibrate_design_oracle(design);
  report.reps.resize(design.reps);
  parallel_for(design.reps, threads, [&](std::size_t r) {
    report.reps[r] = run_replication(design, r, report.oracle.thresholds);
  });
  report.summary = summarize(report.reps);
  return report;
}

}  // namespace prisel

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "prisel/deconv.hpp"
#include "prisel/error.hpp"

using namespace prisel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<Observation> make_obs(const std::vector<double>& xs, const std::vector<double>& sigmas) {
  std::vector<Observation> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({std::to_string(i), xs[i], sigmas[i]});
  return out;
}

double gauss(double z, double h) {
  return std::exp(-0.5 * (z / h) * (z / h)) / (std::sqrt(2.0 * std::numbers::pi) * h);
}

// Reference quantile written independently: numpy's default "linear" method.
double ref_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * (v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 == v.size()) return v.back();
  return v[i] * (1.0 - (pos - i)) + v[i + 1] * (pos - i);
}

FittedPrior two_node_fit(double a, double b, double wa) {
  FittedPrior f;
  f.grid.nodes = {a, b};
  f.grid.start = a;
  f.grid.spacing = b - a;
  f.weights = {wa, 1.0 - wa};
  return f;
}

}  // namespace

TEST_CASE("grid spans the 1% and 99% empirical quantiles") {
  std::vector<double> xs(101);
  std::iota(xs.begin(), xs.end(), 0.0);
  const auto g = build_grid(xs, 2);
  REQUIRE(g.size() == 2);
  CHECK_THAT(g.nodes[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(g.nodes[1], WithinAbs(99.0, 1e-12));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<double> ys(777);
  for (auto& y : ys) y = z(rng);
  const auto g50 = build_grid(ys, 50);
  REQUIRE(g50.size() == 50);
  const double lo = ref_quantile(ys, 0.01);
  const double hi = ref_quantile(ys, 0.99);
  CHECK_THAT(g50.nodes.front(), WithinAbs(lo, 1e-12));
  CHECK_THAT(g50.nodes.back(), WithinAbs(hi, 1e-12));
  CHECK_THAT(g50.spacing, WithinAbs((hi - lo) / 49.0, 1e-12));
  for (std::size_t j = 1; j < 50; ++j) CHECK(g50.nodes[j] > g50.nodes[j - 1]);

  CHECK_THROWS_AS(build_grid(std::vector<double>(10, 3.0), 5), InputError);
  CHECK_THROWS_AS(build_grid(xs, 1), InputError);
  CHECK_THROWS_AS(PriorGrid::uniform(0.0, 1.0, 1), InputError);
}

TEST_CASE("Silverman bandwidth") {
  // 16 points at -a and 16 at +a: sd = 1.34 < IQR = 2a, and 32^(1/5) = 2.
  const double a = 1.34 / std::sqrt(32.0 / 31.0);
  std::vector<double> xs(32);
  for (std::size_t i = 0; i < 32; ++i) xs[i] = i < 16 ? -a : a;
  CHECK_THAT(silverman_bandwidth(xs), WithinAbs(0.45, 1e-12));

  CHECK_THROWS_AS(silverman_bandwidths(xs, std::vector<double>(32, 1.0)), InputError);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  std::vector<double> ys(1000);
  for (auto& y : ys) y = z(rng);
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / 1000.0;
  double ss = 0.0;
  for (double y : ys) ss += (y - mean) * (y - mean);
  const double sd = std::sqrt(ss / 999.0);
  const double iqr = ref_quantile(ys, 0.75) - ref_quantile(ys, 0.25);
  const double ref = 0.9 * std::min(sd, iqr) / (1.34 * std::pow(1000.0, 0.2));
  CHECK_THAT(silverman_bandwidth(ys), WithinAbs(ref, 1e-12));
}

TEST_CASE("kernel marginal") {
  const BandwidthPair h{0.3, 0.5};
  const auto one = make_obs({2.0}, {1.7});
  CHECK_THAT(kernel_marginal(0, one, h),
             WithinRel(1.0 / (std::sqrt(2.0 * std::numbers::pi) * 0.3 * 1.7), 1e-14));

  // Equal sigmas: plain univariate KDE with bandwidth h_x * sigma.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<double> xs(40);
  for (auto& x : xs) x = z(rng);
  const auto eq = make_obs(xs, std::vector<double>(40, 1.3));
  const auto all = kernel_marginals(eq, h);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double kde = 0.0;
    for (double xj : xs) kde += gauss(xs[i] - xj, 0.3 * 1.3);
    CHECK_THAT(all[i], WithinRel(kde / 40.0, 1e-12));
  }

  const auto sym = make_obs({0.0, -1.0, 1.0}, {1.0, 1.0, 1.0});
  const BandwidthPair h2{0.7, 1.0};
  const double total = kernel_marginal(0, sym, h2);
  CHECK_THAT(total, WithinRel((gauss(0.0, 0.7) + 2.0 * gauss(1.0, 0.7)) / 3.0, 1e-14));

  // Unequal sigmas: hand-coded weighted sum.
  const auto mixed = make_obs({0.2, 1.1, -0.4}, {0.5, 1.5, 1.0});
  const BandwidthPair h3{0.4, 0.6};
  for (std::size_t i = 0; i < 3; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double w = gauss(mixed[i].sigma - mixed[j].sigma, 0.6);
      den += w;
      num += w * gauss(mixed[i].x - mixed[j].x, 0.4 * mixed[j].sigma);
    }
    CHECK_THAT(kernel_marginal(i, mixed, h3), WithinRel(num / den, 1e-13));
  }
  CHECK_THROWS_AS(kernel_marginal(0, mixed, BandwidthPair{0.0, 1.0}), InputError);
}

TEST_CASE("weights concentrate on a node that carries every observation") {
  const auto grid = PriorGrid::uniform(-1.0, 1.0, 5);
  const auto obs = make_obs(std::vector<double>(200, 0.5), std::vector<double>(200, 0.3));
  const auto marg = kernel_marginals(obs, BandwidthPair{0.2, 1.0});
  const auto fit = fit_weights(grid, obs, marg);
  const double near = fit.weights[2] + fit.weights[3] + fit.weights[4];
  CHECK(near >= 0.9);

  // Coarse lattice over the 5-simplex, step 1/20.
  auto objective = [&](const std::vector<double>& w) {
    double f = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < 5; ++j) d += w[j] * gauss(obs[i].x - grid.nodes[j], obs[i].sigma);
      f += (d - marg[i]) * (d - marg[i]);
    }
    return f;
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (int a = 0; a <= 20; ++a)
    for (int b = 0; a + b <= 20; ++b)
      for (int c = 0; a + b + c <= 20; ++c)
        for (int d = 0; a + b + c + d <= 20; ++d) {
          std::vector<double> w{a / 20.0, b / 20.0, c / 20.0, d / 20.0, (20 - a - b - c - d) / 20.0};
          const double f = objective(w);
          if (f < best) {
            best = f;
            arg = w;
          }
        }
  CHECK(arg[3] == 1.0);
  CHECK(fit.objective <= best * (1.0 + 1e-9));
  CHECK_THAT(fit.objective, WithinRel(objective(fit.weights), 1e-8));
}

TEST_CASE("fitted weights are feasible and beat the uniform start") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> s(0.5, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Observation> obs;
    for (int i = 0; i < 400; ++i) {
      const double sigma = s(rng);
      const double mu = (i % 4 == 0) ? 2.0 : -1.0;
      obs.push_back({std::to_string(i), mu + sigma * z(rng), sigma});
    }
    FitOptions opt;
    opt.solver.keep_history = true;
    const auto fit = fit_prior(obs, opt);
    CHECK_THAT(std::accumulate(fit.weights.begin(), fit.weights.end(), 0.0), WithinAbs(1.0, 1e-9));
    for (double w : fit.weights) CHECK(w >= 0.0);
    CHECK(fit.residual <= 1e-6);
    CHECK(fit.objective >= 0.0);
    for (std::size_t i = 1; i < fit.history.size(); ++i) CHECK(fit.history[i] <= fit.history[i - 1]);
    CHECK(fit.history.back() <= fit.history.front());
    CHECK(fit.bandwidths.h_x > 0.0);
    CHECK(fit.bandwidths.h_sigma > 0.0);
  }
}

TEST_CASE("iteration cap without the finish raises a FitError with the best iterate") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  std::vector<Observation> obs;
  for (int i = 0; i < 300; ++i) obs.push_back({std::to_string(i), z(rng) * 2.0, 1.0});
  FitOptions opt;
  opt.solver.max_iterations = 2;
  opt.solver.active_set_finish = false;
  try {
    fit_prior(obs, opt);
    FAIL("expected FitError");
  } catch (const FitError& e) {
    CHECK(e.best().weights.size() == 50);
    CHECK(e.best().residual > 1e-6);
  }
}

TEST_CASE("Clfdr from a fitted grid") {
  CHECK(clfdr_from_fit(two_node_fit(-2.0, -1.0, 0.3), {"a", 1.0, 1.0}, 0.0) == 1.0);
  CHECK(clfdr_from_fit(two_node_fit(1.0, 2.0, 0.3), {"a", -1.0, 1.0}, 0.0) == 0.0);
  CHECK_THAT(clfdr_from_fit(two_node_fit(-1.0, 1.0, 0.5), {"a", 0.0, 1.0}, 0.0), WithinAbs(0.5, 1e-15));
  // Node exactly at mu0 counts as null.
  CHECK_THAT(clfdr_from_fit(two_node_fit(0.0, 1.0, 0.5), {"a", 0.5, 1.0}, 0.0), WithinAbs(0.5, 1e-15));
  // Far tails stay finite and in range.
  const double far = clfdr_from_fit(two_node_fit(-1.0, 1.0, 0.5), {"a", 60.0, 0.5}, 0.0);
  CHECK(far >= 0.0);
  CHECK(far < 1e-100);
  const double low = clfdr_from_fit(two_node_fit(-1.0, 1.0, 0.5), {"a", -60.0, 0.5}, 0.0);
  CHECK_THAT(low, WithinAbs(1.0, 1e-15));
}

TEST_CASE("oracle Clfdr closed forms") {
  const TruePrior pm({{0.5, PointMass{-1.0}}, {0.5, PointMass{1.0}}});
  CHECK_THAT(oracle_clfdr(pm, {"a", 0.0, 1.0}, 0.0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(oracle_clfdr(pm, {"a", 1.0, 1.0}, 0.0),
             WithinAbs(0.11920292202211755594, 1e-12));

  // Values below: mpmath quadrature at 40 digits.
  const TruePrior three({{0.3, PointMass{-1.0}}, {0.5, PointMass{0.5}}, {0.2, PointMass{2.0}}});
  CHECK_THAT(oracle_clfdr(three, {"a", 1.0, 0.8}, 0.5), WithinAbs(0.82255777181450129675, 1e-12));

  const TruePrior unif({{0.8, UniformInterval{-3.0, -1.0}}, {0.2, UniformInterval{1.0, 2.0}}});
  CHECK(oracle_clfdr(unif, {"a", 6.0, 1.0}, 0.0) < 1e-4);
  CHECK_THAT(oracle_clfdr(unif, {"a", 6.0, 1.0}, 0.0), WithinRel(8.155673316087311196e-8, 1e-9));
  CHECK_THAT(oracle_clfdr(unif, {"a", 0.5, 1.0}, 0.0), WithinAbs(0.35517853291746568382, 1e-12));
  CHECK_THAT(oracle_clfdr(unif, {"a", 1.7, 2.3}, 0.0), WithinAbs(0.53770392785522971984, 1e-12));
  CHECK_THAT(oracle_clfdr(unif, {"a", -1.0, 0.7}, 0.0), WithinAbs(0.99786716258709434322, 1e-12));
  CHECK_THAT(oracle_clfdr(unif, {"a", 3.0, 3.0}, 0.0), WithinAbs(0.53933764517496588308, 1e-12));

  const TruePrior norm({{0.5, NormalComponent{5.0, 0.5}}, {0.5, NormalComponent{7.0, 0.5}}});
  CHECK_THAT(oracle_clfdr(norm, {"a", 6.0, 1.0}, 6.0), WithinAbs(0.5, 1e-12));
  CHECK_THAT(oracle_clfdr(norm, {"a", 7.5, 2.0}, 6.0), WithinAbs(0.32882848490272077084, 1e-12));
  CHECK_THAT(oracle_clfdr(norm, {"a", 4.0, 1.0}, 6.0), WithinAbs(0.96459893425074054531, 1e-12));
  CHECK_THAT(oracle_clfdr(norm, {"a", 9.0, 2.0}, 6.0), WithinAbs(0.19322671971405992644, 1e-12));
}

TEST_CASE("point-mass oracle agrees with a fit on the same nodes") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  const TruePrior pm({{0.2, PointMass{-1.0}}, {0.3, PointMass{0.0}}, {0.5, PointMass{1.0}}});
  FittedPrior fit;
  fit.grid = PriorGrid::uniform(-1.0, 1.0, 3);
  fit.weights = {0.2, 0.3, 0.5};
  for (int i = 0; i < 200; ++i) {
    const Observation o{"a", u(rng), 0.3 + std::abs(u(rng))};
    const double mu0 = u(rng) / 2.0;
    CHECK_THAT(clfdr_from_fit(fit, o, mu0), WithinAbs(oracle_clfdr(pm, o, mu0), 1e-12));
  }
}

TEST_CASE("Clfdr stays inside the unit interval") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> s(0.01, 10.0);
  const TruePrior mix({{0.4, UniformInterval{-3.0, -1.0}},
                       {0.3, NormalComponent{2.0, 0.3}},
                       {0.3, PointMass{0.5}}});
  auto fit = two_node_fit(-2.0, 3.0, 0.7);
  for (int i = 0; i < 2000; ++i) {
    const Observation o{"a", u(rng), s(rng)};
    const double mu0 = u(rng) / 10.0;
    const double a = oracle_clfdr(mix, o, mu0);
    const double b = clfdr_from_fit(fit, o, mu0);
    CHECK((a >= 0.0 && a <= 1.0));
    CHECK((b >= 0.0 && b <= 1.0));
  }
}

TEST_CASE("true priors are validated") {
  CHECK_THROWS_AS(TruePrior({{0.5, PointMass{0.0}}}), InputError);
  CHECK_THROWS_AS(TruePrior({{1.2, PointMass{0.0}}, {-0.2, PointMass{1.0}}}), InputError);
  CHECK_THROWS_AS(TruePrior({{1.0, UniformInterval{1.0, 1.0}}}), InputError);
  CHECK_THROWS_AS(TruePrior({{1.0, NormalComponent{0.0, 0.0}}}), InputError);
}

TEST_CASE("sigma grouping") {
  const SigmaPartition p{{1.0, 2.0}};
  CHECK(p.groups() == 3);
  CHECK(p.group_of(0.5) == 0);
  CHECK(p.group_of(1.0) == 0);
  CHECK(p.group_of(1.5) == 1);
  CHECK(p.group_of(9.0) == 2);

  std::mt19937_64 rng(14);
  std::normal_distribution<double> z;
  std::vector<Observation> obs;
  for (int i = 0; i < 300; ++i) {
    const double sigma = i % 2 ? 0.5 : 1.5;
    obs.push_back({std::to_string(i), z(rng) * sigma + (i % 5 == 0 ? 2.0 : 0.0), sigma});
  }
  const auto fit = fit_grouped(obs, SigmaPartition{{1.0, 5.0}});
  CHECK(fit.present == std::vector<std::uint8_t>{1, 1, 0});
  const auto c = clfdr_grouped(fit, obs, 0.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& f = fit.fits[fit.partition.group_of(obs[i].sigma)];
    CHECK(c[i] == clfdr_from_fit(f, obs[i], 0.0));
  }
  const std::vector<Observation> stray{{"z", 0.0, 9.0}};
  CHECK_THROWS_AS(clfdr_grouped(fit, stray, 0.0), InputError);
}

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "prisel/error.hpp"
#include "prisel/sim.hpp"

using namespace prisel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SimDesign small(SimDesign d, std::size_t reps) {
  d.reps = reps;
  d.oracle_mc = 100000;
  d.grid_size = 30;
  return d;
}

void check_truth(const SimData& data, double mu0) {
  REQUIRE(data.truths.mu_true.has_value());
  const auto& mu = *data.truths.mu_true;
  for (std::size_t i = 0; i < mu.size(); ++i) CHECK(data.truths.theta[i] == (mu[i] > mu0 ? 1 : 0));
}

bool same(const MetricsRecord& a, const MetricsRecord& b) {
  return a.fdp == b.fdp && a.etp == b.etp && a.etp_star == b.etp_star &&
         a.n_selected == b.n_selected && a.n_false == b.n_false;
}

}  // namespace

TEST_CASE("two-component design uses fixed halves") {
  auto d = SimDesign::two_component(2.5, 400);
  CHECK(d.mu0 == 6.0);
  const auto data = generate(d, 0);
  REQUIRE(data.observations.size() == 400);
  for (std::size_t i = 0; i < 400; ++i) {
    CHECK(data.observations[i].sigma == (i < 200 ? 1.0 : 2.5));
    CHECK(data.group[i] == (i < 200 ? 0u : 1u));
  }
  check_truth(data, d.mu0);
  const auto& mu = *data.truths.mu_true;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < 200; ++i) lo += mu[i] / 200.0;
  for (std::size_t i = 200; i < 400; ++i) hi += mu[i] / 200.0;
  CHECK_THAT(lo, WithinAbs(5.0, 0.15));
  CHECK_THAT(hi, WithinAbs(7.0, 0.15));
}

TEST_CASE("uniform design draws effects by class") {
  auto d = SimDesign::uniform_indep(3.0, 4000);
  CHECK(d.mu0 == 0.0);
  const auto data = generate(d, 0);
  check_truth(data, 0.0);
  const auto& mu = *data.truths.mu_true;
  std::size_t signals = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s = data.observations[i].sigma;
    CHECK(s >= 0.5);
    CHECK(s <= 3.0);
    if (data.truths.theta[i]) {
      ++signals;
      CHECK(mu[i] >= 1.0);
      CHECK(mu[i] <= 2.0);
    } else {
      CHECK(mu[i] >= -3.0);
      CHECK(mu[i] <= -1.0);
    }
  }
  CHECK_THAT(signals / 4000.0, WithinAbs(0.2, 0.03));
}

TEST_CASE("correlated design ties the prior to sigma") {
  auto d = SimDesign::correlated(2.0, 6000);
  CHECK(d.mu0 == 1.0);
  const auto data = generate(d, 0);
  check_truth(data, 1.0);
  const auto& mu = *data.truths.mu_true;
  std::size_t n_low = 0;
  double signal_mean[2] = {0.0, 0.0};
  std::size_t signal_n[2] = {0, 0};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto g = data.group[i];
    CHECK(data.observations[i].sigma == (g == 0 ? 0.5 : 2.5));
    n_low += g == 0;
    if (mu[i] > 1.0 + 0.75) {
      signal_mean[g] += mu[i];
      ++signal_n[g];
    }
  }
  CHECK_THAT(n_low / 6000.0, WithinAbs(0.5, 0.03));
  REQUIRE(signal_n[0] > 0);
  REQUIRE(signal_n[1] > 0);
  CHECK(signal_mean[1] / signal_n[1] > signal_mean[0] / signal_n[0] + 1.0);
  CHECK(design_partition(d).breaks.size() == 1);
  CHECK(design_partition(SimDesign::uniform_indep(3.0)).breaks.empty());
}

TEST_CASE("replication seeds are distinct and reproducible") {
  auto d = small(SimDesign::uniform_indep(3.0, 200), 40);
  d.master_seed = 77;
  std::set<std::uint64_t> seeds;
  for (std::size_t r = 0; r < d.reps; ++r) seeds.insert(replication_seed(d, r));
  CHECK(seeds.size() == d.reps);

  const auto a = generate(d, 13);
  const auto b = generate(d, 13);
  const auto c = generate(d, 14);
  bool differs = false;
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    CHECK(a.observations[i].x == b.observations[i].x);
    CHECK(a.observations[i].sigma == b.observations[i].sigma);
    differs |= a.observations[i].x != c.observations[i].x;
  }
  CHECK(differs);
  CHECK_THROWS_AS(generate(d, 40), InputError);
}

TEST_CASE("replication runner is deterministic and thread-count invariant") {
  auto d = small(SimDesign::uniform_indep(2.0, 600), 4);
  d.master_seed = 5;
  const auto serial = run_replications(d, 1);
  const auto threaded = run_replications(d, 4);
  REQUIRE(serial.reps.size() == 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(same(serial.reps[r].metrics[k], threaded.reps[r].metrics[k]));

  // A single replication replays in isolation.
  const auto rec = run_replication(d, 2, serial.oracle.thresholds);
  for (std::size_t k = 0; k < 4; ++k) CHECK(same(rec.metrics[k], serial.reps[2].metrics[k]));

  for (std::size_t k = 0; k < 4; ++k) {
    const auto& s = serial.summary[k];
    double fdr = 0.0, etp = 0.0, star = 0.0;
    for (const auto& r : serial.reps) {
      fdr += r.metrics[k].fdp / 4.0;
      etp += r.metrics[k].etp / 4.0;
      star += r.metrics[k].etp_star / 4.0;
    }
    CHECK_THAT(s.fdr, WithinAbs(fdr, 1e-12));
    CHECK_THAT(s.etp, WithinAbs(etp, 1e-9));
    CHECK_THAT(s.etp_star, WithinRel(star, 1e-12));
    CHECK(s.fdr_se >= 0.0);
  }
}

TEST_CASE("one replication summarizes to itself") {
  auto d = small(SimDesign::two_component(2.0, 400), 1);
  const auto rep = run_replications(d, 1);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& m = rep.reps[0].metrics[k];
    CHECK(rep.summary[k].fdr == m.fdp);
    CHECK(rep.summary[k].etp == static_cast<double>(m.etp));
    CHECK(rep.summary[k].fdr_se == 0.0);
    CHECK(rep.summary[k].n_selected == static_cast<double>(m.n_selected));
  }
}

TEST_CASE("marginal FDR pools counts") {
  std::vector<RepRecord> reps(2);
  reps[0].metrics[0] = MetricsRecord{0.5, 1, 1.0, 2, 1};
  reps[1].metrics[0] = MetricsRecord{0.0, 6, 6.0, 6, 0};
  const auto s = summarize(reps);
  CHECK_THAT(s[0].mfdr, WithinAbs(1.0 / 8.0, 1e-15));
  CHECK_THAT(s[0].fdr, WithinAbs(0.25, 1e-15));
  CHECK_THAT(s[0].fdr_se, WithinAbs(0.25, 1e-15));
  CHECK(s[1].mfdr == 0.0);
}

TEST_CASE("design validation") {
  CHECK_THROWS_AS(SimDesign::two_component(1.0, 100).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::two_component(2.0, 101).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::two_component(-1.0, 100).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::uniform_indep(0.5, 100).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::uniform_indep(3.0, 100, 1.0).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::uniform_indep(3.0, 2).validate(), InputError);
  CHECK_THROWS_AS(SimDesign::correlated(0.0, 100).validate(), InputError);
  CHECK_NOTHROW(SimDesign::correlated(1.5, 100).validate());
  CHECK_NOTHROW(SimDesign::uniform_indep(4.0, 100).validate());
}

TEST_CASE("BH stays near the target level") {
  auto d = small(SimDesign::uniform_indep(3.0, 2000), 6);
  const auto rep = run_replications(d, 0);
  CHECK(rep[Method::BH].fdr <= d.alpha + 3.0 * rep[Method::BH].fdr_se + 0.02);
  CHECK(rep[Method::DD].n_selected > 0.0);
  CHECK(rep[Method::OR].n_selected > 0.0);
}

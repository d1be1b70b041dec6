#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "prisel/error.hpp"
#include "prisel/io.hpp"

using namespace prisel;
using nlohmann::json;

namespace {

std::uint64_t bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

std::vector<Observation> sample_obs() {
  return {{"a", 2.0, 1.0}, {"b,c", -1.0, 0.5}, {"d\"e", 0.7, 2.0}, {"f", 1.5, 1.0}};
}

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

}  // namespace

TEST_CASE("doubles round-trip bit for bit") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> any;
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t b = any(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(bits(parse_double(format_double(v))) == b);
  }
  for (double v : {0.0, -0.0, 0.1, 1e-320, std::numeric_limits<double>::max()})
    CHECK(bits(parse_double(format_double(v))) == bits(v));
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(std::isinf(parse_double("inf")));
  CHECK(parse_double("-inf") < 0.0);
  CHECK(std::isnan(parse_double("nan")));
  CHECK(parse_double(" +2.5 ") == 2.5);
}

TEST_CASE("malformed numbers carry their line") {
  for (const char* bad : {"", "abc", "1.5x", "1,5", "--1"}) {
    try {
      parse_double(bad, 7);
      FAIL("accepted " << bad);
    } catch (const ParseError& e) {
      REQUIRE(e.line());
      CHECK(*e.line() == 7);
    }
  }
}

TEST_CASE("csv quoting") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");

  const auto t = parse("\xEF\xBB\xBF# comment\nid,x\r\n\n\"a,b\",1\r\n\"q\"\"r\",2\n");
  REQUIRE(t.header.size() == 2);
  CHECK(t.header[0] == "id");
  CHECK(t.header_line == 2);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "a,b");
  CHECK(t.rows[1][0] == "q\"r");
  CHECK(t.lines[0] == 4);
  CHECK(t.lines[1] == 5);
  CHECK(t.column("x") == 1);
  CHECK(t.column("y") == std::string::npos);
}

TEST_CASE("csv structural errors") {
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only comments\n"), ParseError);
  try {
    parse("id,x\na,1\nb\n");
    FAIL("short row accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("id,x\n\"a,1\n"), ParseError);
}

TEST_CASE("fit documents round-trip") {
  GroupedFit fit;
  fit.partition.breaks = {1.5};
  fit.present = {1, 1};
  for (int g = 0; g < 2; ++g) {
    FittedPrior f;
    f.grid = PriorGrid::uniform(-1.0 - g, 2.0 + 0.1, 4);
    f.weights = {0.1, 0.2, 0.3, 0.4};
    f.objective = 1.0 / 3.0;
    f.iterations = 17 + g;
    f.residual = 1e-9;
    f.bandwidths = {0.31, 0.07};
    fit.fits.push_back(f);
  }
  ArtifactMeta meta{"deconv-fit", {{"grid_size", 4}}, 9, 4};
  const auto j = to_json(fit, meta);
  CHECK(j.at("meta").at("command") == "deconv-fit");
  CHECK(j.at("meta").at("tool_version") == std::string(tool_version()));
  const auto back = grouped_fit_from_json(json::parse(j.dump()));
  CHECK(back.partition.breaks == fit.partition.breaks);
  REQUIRE(back.fits.size() == 2);
  for (int g = 0; g < 2; ++g) {
    CHECK(back.fits[g].grid.nodes == fit.fits[g].grid.nodes);
    CHECK(back.fits[g].weights == fit.fits[g].weights);
    CHECK(back.fits[g].grid.spacing == fit.fits[g].grid.spacing);
    CHECK(back.fits[g].bandwidths.h_x == 0.31);
    CHECK(back.fits[g].iterations == fit.fits[g].iterations);
  }

  auto wrong_kind = j;
  wrong_kind["kind"] = "selection";
  CHECK_THROWS_AS(grouped_fit_from_json(wrong_kind), ParseError);
  auto wrong_version = j;
  wrong_version["schema_version"] = 99;
  CHECK_THROWS_AS(grouped_fit_from_json(wrong_version), ParseError);
  auto short_weights = j;
  short_weights["groups"][0]["fit"]["weights"] = {0.5};
  CHECK_THROWS_AS(grouped_fit_from_json(short_weights), ParseError);
  auto negative = j;
  negative["groups"][1]["fit"]["weights"][0] = -0.1;
  CHECK_THROWS_AS(grouped_fit_from_json(negative), ParseError);
  auto missing = j;
  missing.erase("sigma_breaks");
  CHECK_THROWS_AS(grouped_fit_from_json(missing), ParseError);
  CHECK_THROWS_AS(grouped_fit_from_json(json::array()), ParseError);
}

TEST_CASE("selection artifacts") {
  const auto obs = sample_obs();
  std::vector<double> xs, cl{0.01, 0.5, 0.3, 0.02};
  for (const auto& o : obs) xs.push_back(o.x);
  const auto units = score_units(xs, cl, 0.0, 0.1);
  const auto res = select_dd(units, 0.1, 0.0);
  ArtifactMeta meta{"select", {{"alpha", 0.1}}, 1, 50};

  const auto j = to_json(res, obs, meta);
  CHECK(j.at("kind") == "selection");
  CHECK(j.at("n_selected") == res.n_selected());
  CHECK(j.at("selected_ids").size() == res.n_selected());
  CHECK(j.at("trace").size() == res.trace.size());
  CHECK(j.at("meta").at("config").at("alpha") == 0.1);

  std::ostringstream csv;
  write_selection_csv(csv, obs, units, res, meta);
  std::istringstream in(csv.str());
  const auto t = read_csv(in);
  CHECK(t.header == std::vector<std::string>{"id", "x", "sigma", "clfdr", "s", "group", "selected"});
  REQUIRE(t.rows.size() == obs.size());
  std::size_t selected = 0;
  for (const auto& row : t.rows) {
    const auto& u = *std::find_if(units.begin(), units.end(),
                                  [&](const ScoredUnit& v) { return obs[v.index].id == row[0]; });
    CHECK(parse_double(row[1]) == u.x);
    CHECK(parse_double(row[3]) == u.clfdr);
    CHECK(row[5] == std::to_string(static_cast<int>(u.group)));
    selected += row[6] == "1";
  }
  CHECK(selected == res.n_selected());
  CHECK(csv.str().rfind("# tool=prisel\n", 0) == 0);
  CHECK(csv.str().find("# seed=1\n") != std::string::npos);

  const std::vector<ScoredUnit> too_few(units.begin(), units.begin() + 2);
  CHECK_THROWS_AS(write_selection_csv(csv, obs, too_few, res, meta), InputError);
}

TEST_CASE("r-value artifacts") {
  RValueTable t;
  t.definition = RValueDefinition::VaryAlpha;
  t.grid = {0.01, 0.1};
  t.entries.push_back({"u1", 1.0, 1.0, 0.01, 0.5, 0.01, false});
  t.entries.push_back({"u2", -1.0, 1.0, std::numeric_limits<double>::infinity(), std::nullopt,
                       std::numeric_limits<double>::infinity(), false});
  ArtifactMeta meta{"rvalue", json::object(), 1, 2};
  const auto j = to_json(t, meta);
  CHECK(j.at("entries")[0].at("r") == 0.01);
  CHECK(j.at("entries")[1].at("r").is_null());
  CHECK(j.at("entries")[1].at("r_prime").is_null());

  std::ostringstream out;
  write_rvalue_csv(out, t, meta);
  std::istringstream in(out.str());
  const auto csv = read_csv(in);
  REQUIRE(csv.rows.size() == 2);
  CHECK(csv.rows[0][4] == "0.5");
  CHECK(csv.rows[1][3] == "inf");
  CHECK(csv.rows[1][4].empty());
}

TEST_CASE("report artifacts") {
  ReplicationReport report;
  report.design = SimDesign::uniform_indep(3.0, 100);
  report.design.reps = 2;
  report.reps.resize(2);
  report.reps[0].metrics[0] = MetricsRecord{0.1, 9, 8.5, 10, 1};
  report.reps[1].rep = 1;
  report.summary = summarize(report.reps);
  ArtifactMeta meta{"simulate", json::object(), 4, 50};
  const auto j = to_json(report, meta);
  CHECK(j.at("kind") == "replication_report");
  CHECK(j.at("design").at("sigma_max") == 3.0);
  CHECK(j.at("reps").size() == 2);
  CHECK(j.at("summary").at("DD").at("etp") == 4.5);

  std::ostringstream out;
  write_report_csv(out, report, meta);
  std::istringstream in(out.str());
  const auto csv = read_csv(in);
  CHECK(csv.header == std::vector<std::string>{"design", "method", "metric", "rep", "value"});
  CHECK(csv.rows.size() == 2 * 4 * 5);
  CHECK(csv.rows[0][2] == "fdp");
  CHECK(csv.rows[0][4] == "0.1");
}

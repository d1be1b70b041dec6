#include "prisel/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "prisel/deconv.hpp"
#include "prisel/error.hpp"
#include "prisel/io.hpp"
#include "prisel/parallel.hpp"
#include "prisel/selection.hpp"
#include "prisel/sim.hpp"

namespace prisel {

using nlohmann::json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::DeconvFit: return "deconv-fit";
    case Command::Select: return "select";
    case Command::RValue: return "rvalue";
    case Command::Simulate: return "simulate";
  }
  return "?";
}

void validate(const RunConfig& c) {
  auto need = [&](bool ok, const char* flag) {
    if (!ok) throw UsageError(std::string(to_string(c.command)) + " requires " + flag);
  };
  const bool reads_input = c.command != Command::Simulate;
  if (reads_input) need(!c.input.empty(), "--input");
  need(!c.output.empty(), "--output");
  if (c.command == Command::Select) {
    need(c.alpha.has_value(), "--alpha");
    need(c.mu0.has_value(), "--mu0");
  }
  if (c.command == Command::RValue) {
    if (c.definition == RValueDefinition::VaryAlpha) need(c.mu0.has_value(), "--mu0");
    else need(c.alpha.has_value(), "--alpha");
    if (c.grid_points < 2) throw UsageError("--grid-points must be at least 2");
  }
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 1.0)) {
    throw UsageError("--alpha must lie in (0, 1)");
  }
  if (c.mu0 && !std::isfinite(*c.mu0)) throw UsageError("--mu0 must be finite");
  if (c.grid_size < 2) throw UsageError("--grid-size must be at least 2");
  for (std::size_t i = 0; i < c.sigma_breaks.size(); ++i) {
    if (!(c.sigma_breaks[i] > 0.0) || (i > 0 && !(c.sigma_breaks[i] > c.sigma_breaks[i - 1]))) {
      throw UsageError("--sigma-breaks must be positive and strictly ascending");
    }
  }
  const double lo = c.trim_lower.value_or(0.0);
  const double hi = c.trim_upper.value_or(1.0);
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
    throw UsageError("trim percentiles need 0 <= lower < upper <= 1");
  }
  if (c.command == Command::Simulate) {
    if (c.design != "two-component" && c.design != "uniform" && c.design != "correlated") {
      throw UsageError("--design must be two-component, uniform or correlated");
    }
    if (c.reps < 1) throw UsageError("--reps must be at least 1");
    if (c.design_sigma && !(*c.design_sigma > 0.0)) throw UsageError("--sigma must be positive");
  }
}

double ayp_standard_error(double y, double yprime, double n, double nprime) {
  if (!(y >= 0.0 && y <= 1.0 && yprime >= 0.0 && yprime <= 1.0)) {
    throw InputError("ayp_standard_error: rates must lie in [0, 1]");
  }
  if (!(n >= 1.0 && nprime >= 1.0)) throw InputError("ayp_standard_error: counts must be >= 1");
  const double v = y * (1.0 - y) / n + yprime * (1.0 - yprime) / nprime;
  if (!(v > 0.0)) throw InputError("ayp_standard_error: both rates are degenerate (zero variance)");
  return std::sqrt(v);
}

std::vector<IngestRecord> trim_by_se_percentile(std::vector<IngestRecord> records, double lower,
                                                double upper) {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
    throw InputError("trim_by_se_percentile: need 0 <= lower < upper <= 1");
  }
  if (records.empty()) throw InputError("trim_by_se_percentile: no records");
  std::vector<double> s;
  s.reserve(records.size());
  for (const auto& r : records) s.push_back(r.sigma);
  std::sort(s.begin(), s.end());
  const double lo = empirical_quantile(s, lower);
  const double hi = empirical_quantile(s, upper);
  std::erase_if(records, [&](const IngestRecord& r) { return r.sigma < lo || r.sigma > hi; });
  if (records.empty()) throw InputError("trim_by_se_percentile: every record was trimmed");
  return records;
}

std::vector<IngestRecord> read_records(std::istream& in) {
  const auto t = read_csv(in);
  const auto id = t.column("id");
  const auto x = t.column("x");
  const auto sigma = t.column("sigma");
  const auto y = t.column("Y");
  const auto yp = t.column("Yprime");
  const auto n = t.column("n");
  const auto np = t.column("nprime");
  constexpr auto npos = std::string::npos;
  const bool direct = id != npos && x != npos && sigma != npos;
  const bool ayp = id != npos && y != npos && yp != npos && n != npos && np != npos;
  if (!direct && !ayp) {
    throw ParseError("header must contain id,x,sigma or id,Y,Yprime,n,nprime", t.header_line);
  }

  std::vector<IngestRecord> out;
  out.reserve(t.rows.size());
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.lines[r];
    IngestRecord rec;
    rec.id = row[id];
    rec.line = line;
    if (rec.id.empty()) throw ParseError("empty id", line);
    if (!seen.insert(rec.id).second) throw ParseError("duplicate id '" + rec.id + "'", line);
    if (direct) {
      rec.x = parse_double(row[x], line);
      rec.sigma = parse_double(row[sigma], line);
    } else {
      const double yv = parse_double(row[y], line);
      const double ypv = parse_double(row[yp], line);
      try {
        rec.sigma = ayp_standard_error(yv, ypv, parse_double(row[n], line),
                                       parse_double(row[np], line));
      } catch (const InputError& e) {
        throw ParseError(e.what(), line);
      }
      rec.x = yv - ypv;
    }
    if (!std::isfinite(rec.x)) throw ParseError("x must be finite", line);
    if (!(rec.sigma > 0.0) || !std::isfinite(rec.sigma)) {
      throw ParseError("sigma must be positive and finite", line);
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw ParseError("no data rows");
  return out;
}

std::vector<IngestRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input '" + path + "'");
  try {
    return read_records(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.base_message(), e.line());
  }
}

std::vector<Observation> to_observations(std::span<const IngestRecord> records) {
  std::vector<Observation> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_observation(r.id, r.x, r.sigma));
  return out;
}

namespace {

json config_json(const RunConfig& c) {
  json j = {{"command", std::string(to_string(c.command))},
            {"grid_size", c.grid_size},
            {"seed", c.seed},
            {"sigma_breaks", c.sigma_breaks}};
  if (!c.input.empty()) j["input"] = c.input;
  if (!c.fit.empty()) j["fit"] = c.fit;
  if (c.alpha) j["alpha"] = *c.alpha;
  if (c.mu0) j["mu0"] = *c.mu0;
  if (c.trim_lower) j["trim_lower"] = *c.trim_lower;
  if (c.trim_upper) j["trim_upper"] = *c.trim_upper;
  if (c.command == Command::RValue) {
    j["definition"] = std::string(to_string(c.definition));
    j["grid_points"] = c.grid_points;
  }
  if (c.command == Command::Simulate) {
    j["design"] = c.design;
    if (c.design_sigma) j["design_sigma"] = *c.design_sigma;
    if (c.m) j["m"] = *c.m;
    j["reps"] = c.reps;
    j["oracle_mc"] = c.oracle_mc;
  }
  return j;
}

class Artifacts {
public:
  Artifacts(const std::string& dir, std::ostream& out) : dir_(dir), out_(out) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }

  template <class Writer>
  void write(const std::string& name, Writer&& writer) {
    const auto path = dir_ / name;
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(f);
    f.flush();
    if (!f) throw IoError("write to '" + path.string() + "' failed");
    out_ << path.string() << '\n';
  }

  void write_json(const std::string& name, const json& j) {
    write(name, [&](std::ostream& f) { f << j.dump(2) << '\n'; });
  }

private:
  std::filesystem::path dir_;
  std::ostream& out_;
};

std::vector<Observation> load_observations(const RunConfig& c) {
  auto records = read_records(c.input);
  if (c.trim_lower || c.trim_upper) {
    records = trim_by_se_percentile(std::move(records), c.trim_lower.value_or(0.0),
                                    c.trim_upper.value_or(1.0));
  }
  return to_observations(records);
}

GroupedFit obtain_fit(const RunConfig& c, std::span<const Observation> obs) {
  if (!c.fit.empty()) {
    std::ifstream in(c.fit);
    if (!in) throw IoError("cannot open fit '" + c.fit + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(c.fit + ": " + e.what());
    }
    auto fit = grouped_fit_from_json(j);
    for (const auto& o : obs) {
      if (!fit.present[fit.partition.group_of(o.sigma)]) {
        throw InputError("fit has no prior for the sigma group of unit '" + o.id + "'");
      }
    }
    return fit;
  }
  FitOptions opts;
  opts.grid_size = c.grid_size;
  return fit_grouped(obs, SigmaPartition{c.sigma_breaks}, opts);
}

std::vector<double> xs_of(std::span<const Observation> obs) {
  std::vector<double> xs;
  xs.reserve(obs.size());
  for (const auto& o : obs) xs.push_back(o.x);
  return xs;
}

void cmd_deconv_fit(const RunConfig& c, const ArtifactMeta& meta, Artifacts& art) {
  const auto obs = load_observations(c);
  FitOptions opts;
  opts.grid_size = c.grid_size;
  const auto fit = fit_grouped(obs, SigmaPartition{c.sigma_breaks}, opts);
  art.write_json("fit.json", to_json(fit, meta));
}

void cmd_select(const RunConfig& c, const ArtifactMeta& meta, Artifacts& art) {
  const auto obs = load_observations(c);
  const double alpha = *c.alpha;
  const double mu0 = *c.mu0;
  const auto fit = obtain_fit(c, obs);
  const auto clfdr = clfdr_grouped(fit, obs, mu0);
  const auto xs = xs_of(obs);
  const auto units = score_units(xs, clfdr, mu0, alpha);
  const auto dd = select_dd(units, alpha, mu0);
  const auto stepup = select_clfdr_stepup(clfdr, alpha);
  const auto bh = select_bh(pvalues(obs, mu0), alpha);

  art.write("selection.csv", [&](std::ostream& f) { write_selection_csv(f, obs, units, dd, meta); });
  art.write_json("selection.json", to_json(dd, obs, meta));

  json methods = json::object();
  auto add = [&](const char* name, const SelectionResult& r) {
    methods[name] = {{"rejected", r.n_selected()},
                     {"modified_power", etp_star(r.decisions, obs, mu0)}};
  };
  add("DD", dd);
  add("Clfdr", stepup);
  add("BH", bh);
  art.write_json("summary.json", {{"schema_version", kSchemaVersion},
                                  {"kind", "selection_summary"},
                                  {"meta", to_json(meta)},
                                  {"m", obs.size()},
                                  {"alpha", alpha},
                                  {"mu0", mu0},
                                  {"methods", std::move(methods)}});
}

void cmd_rvalue(const RunConfig& c, const ArtifactMeta& meta, Artifacts& art, unsigned threads) {
  const auto obs = load_observations(c);
  const auto fit = obtain_fit(c, obs);
  const auto xs = xs_of(obs);
  RValueTable table;
  if (c.definition == RValueDefinition::VaryAlpha) {
    const double mu0 = *c.mu0;
    const auto clfdr = clfdr_grouped(fit, obs, mu0);
    const auto grid = default_alpha_grid(c.grid_points);
    table = rvalue_vary_alpha(
        obs,
        [&](double a) { return select_dd(score_units(xs, clfdr, mu0, a), a, mu0).decisions; },
        grid, threads);
  } else {
    const double alpha = *c.alpha;
    const auto grid = default_mu0_grid(obs, c.grid_points);
    table = rvalue_vary_mu0(
        obs,
        [&](double u) {
          const auto clfdr = clfdr_grouped(fit, obs, u);
          return select_dd(score_units(xs, clfdr, u, alpha), alpha, u).decisions;
        },
        grid, threads);
  }
  art.write("rvalues.csv", [&](std::ostream& f) { write_rvalue_csv(f, table, meta); });
  art.write_json("rvalues.json", to_json(table, meta));
}

SimDesign design_from(const RunConfig& c) {
  SimDesign d;
  if (c.design == "two-component") {
    d = SimDesign::two_component(c.design_sigma.value_or(2.0), c.m.value_or(10000));
  } else if (c.design == "uniform") {
    d = SimDesign::uniform_indep(c.design_sigma.value_or(3.0), c.m.value_or(5000));
  } else {
    d = SimDesign::correlated(c.design_sigma.value_or(2.0), c.m.value_or(10000));
  }
  d.master_seed = c.seed;
  d.alpha = c.alpha.value_or(0.1);
  if (c.mu0) d.mu0 = *c.mu0;
  d.reps = c.reps;
  d.grid_size = c.grid_size;
  d.oracle_mc = c.oracle_mc;
  d.validate();
  return d;
}

void cmd_simulate(const RunConfig& c, const ArtifactMeta& meta, Artifacts& art, unsigned threads) {
  const auto report = run_replications(design_from(c), threads);
  art.write_json("report.json", to_json(report, meta));
  art.write("report.csv", [&](std::ostream& f) { write_report_csv(f, report, meta); });
}

int report_error(std::ostream& err, int code, std::string_view kind, const std::string& message,
                 std::optional<std::size_t> line = std::nullopt) {
  json j = {{"error", {{"kind", kind}, {"message", message}}}};
  if (line) j["error"]["line"] = *line;
  err << j.dump() << '\n';
  return code;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate(config);
    const unsigned threads = config.threads ? config.threads : default_threads();
    ArtifactMeta meta;
    meta.command = std::string(to_string(config.command));
    meta.config = config_json(config);
    meta.seed = config.seed;
    meta.grid_resolution = config.grid_size;
    Artifacts art(config.output, out);
    switch (config.command) {
      case Command::DeconvFit: cmd_deconv_fit(config, meta, art); break;
      case Command::Select: cmd_select(config, meta, art); break;
      case Command::RValue: cmd_rvalue(config, meta, art, threads); break;
      case Command::Simulate: cmd_simulate(config, meta, art, threads); break;
    }
    return 0;
  } catch (const UsageError& e) {
    return report_error(err, 2, "usage", e.what());
  } catch (const ParseError& e) {
    return report_error(err, 3, "parse", e.what(), e.line());
  } catch (const InputError& e) {
    return report_error(err, 3, "input", e.what());
  } catch (const FitError& e) {
    return report_error(err, 4, "fit", e.what());
  } catch (const IoError& e) {
    return report_error(err, 5, "io", e.what());
  } catch (const std::exception& e) {
    return report_error(err, 1, "internal", e.what());
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prioritized selection with FDR control for heteroscedastic units", "prisel"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  RunConfig cfg;
  double alpha = 0.0;
  double mu0 = 0.0;
  double trim_lower = 0.0;
  double trim_upper = 1.0;
  double design_sigma = 0.0;
  std::size_t m = 0;
  std::string definition = "alpha";

  auto shared = [&](CLI::App* sub, bool input) {
    if (input) sub->add_option("--input", cfg.input, "CSV with id,x,sigma or id,Y,Yprime,n,nprime");
    sub->add_option("--output", cfg.output, "Directory for the artifacts");
    sub->add_option("--alpha", alpha, "Target FDR level");
    sub->add_option("--mu0", mu0, "Null cutoff: H0 is mu <= mu0");
    sub->add_option("--grid-size", cfg.grid_size, "Number of prior grid points")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
    if (input) {
      sub->add_option("--sigma-breaks", cfg.sigma_breaks,
                      "Ascending sigma cut points; one prior is fitted per group")
          ->delimiter(',');
      sub->add_option("--trim-lower", trim_lower, "Drop units whose sigma is below this percentile");
      sub->add_option("--trim-upper", trim_upper, "Drop units whose sigma is above this percentile");
    }
  };

  auto* fit = app.add_subcommand("deconv-fit", "Fit the effect-size prior by deconvolution");
  shared(fit, true);
  auto* sel = app.add_subcommand("select", "Prioritized selection plus Clfdr and BH baselines");
  shared(sel, true);
  sel->add_option("--fit", cfg.fit, "Reuse a fit.json from deconv-fit");
  auto* rv = app.add_subcommand("rvalue", "r-values and standardized ranks");
  shared(rv, true);
  rv->add_option("--fit", cfg.fit, "Reuse a fit.json from deconv-fit");
  rv->add_option("--definition", definition, "Vary alpha or mu0")
      ->check(CLI::IsMember({"alpha", "mu0"}))
      ->capture_default_str();
  rv->add_option("--grid-points", cfg.grid_points, "Grid points replayed")->capture_default_str();
  auto* sim = app.add_subcommand("simulate", "Replicate a simulation design");
  shared(sim, false);
  sim->add_option("--design", cfg.design, "Simulation design")
      ->check(CLI::IsMember({"two-component", "uniform", "correlated"}))
      ->capture_default_str();
  sim->add_option("--sigma-max,--sigma", design_sigma, "Noise scale of the design");
  sim->add_option("--m", m, "Units per replication");
  sim->add_option("--reps", cfg.reps, "Replications")->capture_default_str();
  sim->add_option("--oracle-mc", cfg.oracle_mc, "Monte Carlo draws for the oracle cutoffs")
      ->capture_default_str();

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return report_error(err, 2, "usage", e.what());
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen == fit) cfg.command = Command::DeconvFit;
  else if (chosen == sel) cfg.command = Command::Select;
  else if (chosen == rv) cfg.command = Command::RValue;
  else cfg.command = Command::Simulate;

  if (chosen->count("--alpha")) cfg.alpha = alpha;
  if (chosen->count("--mu0")) cfg.mu0 = mu0;
  if (cfg.command != Command::Simulate) {
    if (chosen->count("--trim-lower")) cfg.trim_lower = trim_lower;
    if (chosen->count("--trim-upper")) cfg.trim_upper = trim_upper;
  }
  if (cfg.command == Command::RValue) {
    cfg.definition = definition == "mu0" ? RValueDefinition::VaryMu0 : RValueDefinition::VaryAlpha;
  }
  if (cfg.command == Command::Simulate) {
    if (chosen->count("--sigma-max")) cfg.design_sigma = design_sigma;
    if (chosen->count("--m")) cfg.m = m;
  }
  return run(cfg, out, err);
}

}  // namespace prisel

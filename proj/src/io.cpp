#include "prisel/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <type_traits>

#include "prisel/error.hpp"

#ifndef PRISEL_VERSION
#define PRISEL_VERSION "0.0.0"
#endif

namespace prisel {

using nlohmann::json;

std::string_view tool_version() { return PRISEL_VERSION; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(std::string_view field, std::size_t line) {
  auto fail = [&](const char* why) -> double {
    throw ParseError(std::string(why) + ": '" + std::string(field) + "'",
                     line ? std::optional<std::size_t>(line) : std::nullopt);
  };
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
  if (field.empty()) return fail("empty numeric field");
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec == std::errc::result_out_of_range) return fail("number out of range");
  if (res.ec != std::errc() || res.ptr != last) return fail("not a number");
  return v;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  return std::string::npos;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view s, std::size_t line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (c == '"') {
      if (!cur.empty() || was_quoted) throw ParseError("stray quote inside field", line);
      quoted = true;
      was_quoted = true;
    } else {
      if (was_quoted) throw ParseError("text after closing quote", line);
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string raw;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (line == 1 && s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    if (s.empty() || s.front() == '#') continue;
    auto fields = split_csv_line(s, line);
    if (!have_header) {
      t.header = std::move(fields);
      t.header_line = line;
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line);
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line);
  }
  if (in.bad()) throw ParseError("read failure");
  if (!have_header) throw ParseError("missing header row");
  return t;
}

json to_json(const ArtifactMeta& meta) {
  return {{"tool", "prisel"},
          {"tool_version", std::string(tool_version())},
          {"command", meta.command},
          {"seed", meta.seed},
          {"grid_resolution", meta.grid_resolution},
          {"config", meta.config}};
}

void write_csv_preamble(std::ostream& out, const ArtifactMeta& meta) {
  out << "# tool=prisel\n";
  out << "# tool_version=" << tool_version() << '\n';
  out << "# schema_version=" << kSchemaVersion << '\n';
  out << "# command=" << meta.command << '\n';
  out << "# seed=" << meta.seed << '\n';
  out << "# grid_resolution=" << meta.grid_resolution << '\n';
  out << "# config=" << meta.config.dump() << '\n';
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void check_document(const json& j, std::string_view kind) {
  if (!j.is_object()) throw ParseError("artifact is not a JSON object");
  if (j.value("kind", std::string()) != kind) {
    throw ParseError("expected a '" + std::string(kind) + "' document");
  }
  const int v = j.value("schema_version", -1);
  if (v != kSchemaVersion) {
    throw ParseError("unsupported schema_version " + std::to_string(v));
  }
}

}  // namespace

json to_json(const FittedPrior& fit) {
  return {{"nodes", fit.grid.nodes},
          {"start", fit.grid.start},
          {"spacing", fit.grid.spacing},
          {"weights", fit.weights},
          {"objective", fit.objective},
          {"iterations", fit.iterations},
          {"residual", fit.residual},
          {"bandwidths", {{"h_x", fit.bandwidths.h_x}, {"h_sigma", fit.bandwidths.h_sigma}}}};
}

FittedPrior fitted_prior_from_json(const json& j) {
  try {
    FittedPrior f;
    f.grid.nodes = j.at("nodes").get<std::vector<double>>();
    f.grid.start = j.at("start").get<double>();
    f.grid.spacing = j.at("spacing").get<double>();
    f.weights = j.at("weights").get<std::vector<double>>();
    f.objective = j.at("objective").get<double>();
    f.iterations = j.at("iterations").get<std::size_t>();
    f.residual = j.value("residual", 0.0);
    f.bandwidths.h_x = j.at("bandwidths").at("h_x").get<double>();
    f.bandwidths.h_sigma = j.at("bandwidths").at("h_sigma").get<double>();
    if (f.grid.nodes.size() < 2 || f.weights.size() != f.grid.nodes.size()) {
      throw ParseError("fitted prior needs matching nodes and weights (at least two)");
    }
    for (double w : f.weights) {
      if (!(w >= 0.0)) throw ParseError("fitted prior has a negative weight");
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed fitted prior: ") + e.what());
  }
}

json to_json(const GroupedFit& fit, const ArtifactMeta& meta) {
  json groups = json::array();
  for (std::size_t g = 0; g < fit.partition.groups(); ++g) {
    json entry = {{"group", g}, {"present", static_cast<bool>(fit.present[g])}};
    if (fit.present[g]) entry["fit"] = to_json(fit.fits[g]);
    groups.push_back(std::move(entry));
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "deconvolution_fit"},
          {"meta", to_json(meta)},
          {"sigma_breaks", fit.partition.breaks},
          {"groups", std::move(groups)}};
}

GroupedFit grouped_fit_from_json(const json& j) {
  check_document(j, "deconvolution_fit");
  try {
    GroupedFit out;
    out.partition.breaks = j.at("sigma_breaks").get<std::vector<double>>();
    const auto n = out.partition.groups();
    out.fits.resize(n);
    out.present.assign(n, 0);
    const auto& groups = j.at("groups");
    if (groups.size() != n) throw ParseError("group count does not match sigma_breaks");
    for (const auto& entry : groups) {
      const auto g = entry.at("group").get<std::size_t>();
      if (g >= n) throw ParseError("group index out of range");
      if (entry.at("present").get<bool>()) {
        out.fits[g] = fitted_prior_from_json(entry.at("fit"));
        out.present[g] = 1;
      }
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed deconvolution fit: ") + e.what());
  }
}

json to_json(const SelectionResult& result, std::span<const Observation> observations,
             const ArtifactMeta& meta) {
  json ids = json::array();
  for (std::size_t i = 0; i < result.decisions.size(); ++i) {
    if (result.decisions[i]) ids.push_back(observations[i].id);
  }
  json trace = json::array();
  for (const auto& s : result.trace) {
    trace.push_back({{"step", std::string(to_string(s.kind))},
                     {"unit", s.unit ? json(observations[*s.unit].id) : json(nullptr)},
                     {"etp_star", finite_or_null(s.etp_star)},
                     {"capacity", finite_or_null(s.capacity)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "selection"},
          {"meta", to_json(meta)},
          {"n_selected", result.n_selected()},
          {"selected_ids", std::move(ids)},
          {"etp_star", finite_or_null(result.etp_star_realized)},
          {"capacity", finite_or_null(result.capacity_final)},
          {"trace", std::move(trace)}};
}

void write_selection_csv(std::ostream& out, std::span<const Observation> observations,
                         std::span<const ScoredUnit> units, const SelectionResult& result,
                         const ArtifactMeta& meta) {
  if (units.size() != observations.size() || result.decisions.size() != observations.size()) {
    throw InputError("write_selection_csv: observations, units and decisions differ in length");
  }
  write_csv_preamble(out, meta);
  out << "id,x,sigma,clfdr,s,group,selected\n";
  for (const auto& u : units) {
    const auto& o = observations[u.index];
    out << csv_escape(o.id) << ',' << format_double(o.x) << ',' << format_double(o.sigma) << ','
        << format_double(u.clfdr) << ',' << format_double(u.s) << ','
        << static_cast<int>(u.group) << ',' << static_cast<int>(result.decisions[u.index] != 0)
        << '\n';
  }
}

json to_json(const RValueTable& table, const ArtifactMeta& meta) {
  json entries = json::array();
  for (const auto& e : table.entries) {
    entries.push_back({{"id", e.id},
                       {"x", e.x},
                       {"sigma", e.sigma},
                       {"r", finite_or_null(e.r)},
                       {"r_prime", e.r_prime ? json(*e.r_prime) : json(nullptr)},
                       {"grid_resolution", finite_or_null(e.grid_resolution)},
                       {"tied", e.tied}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "rvalues"},
          {"meta", to_json(meta)},
          {"definition", std::string(to_string(table.definition))},
          {"grid", table.grid},
          {"entries", std::move(entries)}};
}

void write_rvalue_csv(std::ostream& out, const RValueTable& table, const ArtifactMeta& meta) {
  write_csv_preamble(out, meta);
  out << "id,x,sigma,r,r_prime,definition,grid_resolution\n";
  const auto def = to_string(table.definition);
  for (const auto& e : table.entries) {
    out << csv_escape(e.id) << ',' << format_double(e.x) << ',' << format_double(e.sigma) << ','
        << format_double(e.r) << ',' << (e.r_prime ? format_double(*e.r_prime) : std::string())
        << ',' << def << ',' << format_double(e.grid_resolution) << '\n';
  }
}

json to_json(const SimDesign& design) {
  json j = {{"name", design.name()},
            {"m", design.m()},
            {"mu0", design.mu0},
            {"alpha", design.alpha},
            {"reps", design.reps},
            {"master_seed", design.master_seed},
            {"grid_size", design.grid_size},
            {"oracle_mc", design.oracle_mc}};
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, TwoComponentDesign>) {
          j["sigma2"] = f.sigma2;
        } else if constexpr (std::is_same_v<F, UniformIndepDesign>) {
          j["sigma_max"] = f.sigma_max;
          j["pi1"] = f.pi1;
        } else {
          j["sigma"] = f.sigma;
        }
      },
      design.family);
  return j;
}

json to_json(const ReplicationReport& report, const ArtifactMeta& meta) {
  const auto& th = report.oracle.thresholds;
  json oracle = {{"c1", th.c1},
                 {"c2", th.c2},
                 {"t1", finite_or_null(th.t1)},
                 {"t2", finite_or_null(th.t2)},
                 {"clfdr_cutoff", report.oracle.clfdr_cutoff},
                 {"n_mc", report.oracle.n_mc},
                 {"mfdr", report.oracle.mfdr}};
  json summary = json::object();
  for (auto m : all_methods) {
    const auto& s = report[m];
    summary[std::string(to_string(m))] = {{"fdr", s.fdr},
                                          {"fdr_se", s.fdr_se},
                                          {"mfdr", finite_or_null(s.mfdr)},
                                          {"etp", s.etp},
                                          {"etp_se", s.etp_se},
                                          {"etp_star", s.etp_star},
                                          {"etp_star_se", s.etp_star_se},
                                          {"n_selected", s.n_selected}};
  }
  json reps = json::array();
  for (const auto& r : report.reps) {
    json methods = json::object();
    for (auto m : all_methods) {
      const auto& x = r.metrics[static_cast<std::size_t>(m)];
      methods[std::string(to_string(m))] = {{"fdp", x.fdp},
                                            {"etp", x.etp},
                                            {"etp_star", x.etp_star},
                                            {"n_selected", x.n_selected},
                                            {"n_false", x.n_false}};
    }
    reps.push_back({{"rep", r.rep}, {"seed", r.seed}, {"methods", std::move(methods)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "replication_report"},
          {"meta", to_json(meta)},
          {"design", to_json(report.design)},
          {"oracle", std::move(oracle)},
          {"summary", std::move(summary)},
          {"reps", std::move(reps)}};
}

void write_report_csv(std::ostream& out, const ReplicationReport& report,
                      const ArtifactMeta& meta) {
  write_csv_preamble(out, meta);
  out << "design,method,metric,rep,value\n";
  const auto design = csv_escape(report.design.name());
  for (const auto& r : report.reps) {
    for (auto m : all_methods) {
      const auto& x = r.metrics[static_cast<std::size_t>(m)];
      const auto method = to_string(m);
      auto row = [&](std::string_view metric, double v) {
        out << design << ',' << method << ',' << metric << ',' << r.rep << ','
            << format_double(v) << '\n';
      };
      row("fdp", x.fdp);
      row("etp", static_cast<double>(x.etp));
      row("etp_star", x.etp_star);
      row("n_selected", static_cast<double>(x.n_selected));
      row("n_false", static_cast<double>(x.n_false));
    }
  }
}

}  // namespace prisel

#pragma once

// Artifact persistence: versioned JSON documents and flat CSV tables.
//
// Doubles are written in shortest round-trip form, so a value read back with
// parse_double is bit-identical to the one written.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "prisel/deconv.hpp"
#include "prisel/rvalue.hpp"
#include "prisel/selection.hpp"
#include "prisel/sim.hpp"

namespace prisel {

inline constexpr int kSchemaVersion = 1;

std::string_view tool_version();

std::string format_double(double v);
// Whole-field parse; accepts inf, -inf and nan. Throws ParseError.
double parse_double(std::string_view field, std::size_t line = 0);

// ---- CSV ------------------------------------------------------------------

std::string csv_escape(std::string_view field);

struct CsvTable {
  std::vector<std::string> header;
  std::size_t header_line = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  // Column position by exact name, or npos.
  std::size_t column(std::string_view name) const;
};

// Comma separated, header required, double-quoted fields allowed. Blank lines
// and lines starting with '#' are skipped; a UTF-8 BOM is dropped.
CsvTable read_csv(std::istream& in);

// ---- metadata ---------------------------------------------------------------

struct ArtifactMeta {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::size_t grid_resolution = 0;
};

nlohmann::json to_json(const ArtifactMeta& meta);
// "# key=value" lines carried ahead of the CSV header.
void write_csv_preamble(std::ostream& out, const ArtifactMeta& meta);

// ---- deconvolution ------------------------------------------------------------

nlohmann::json to_json(const FittedPrior& fit);
FittedPrior fitted_prior_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GroupedFit& fit, const ArtifactMeta& meta);
GroupedFit grouped_fit_from_json(const nlohmann::json& j);

// ---- selection ----------------------------------------------------------------

nlohmann::json to_json(const SelectionResult& result, std::span<const Observation> observations,
                       const ArtifactMeta& meta);
void write_selection_csv(std::ostream& out, std::span<const Observation> observations,
                         std::span<const ScoredUnit> units, const SelectionResult& result,
                         const ArtifactMeta& meta);

// ---- r-values -----------------------------------------------------------------

nlohmann::json to_json(const RValueTable& table, const ArtifactMeta& meta);
void write_rvalue_csv(std::ostream& out, const RValueTable& table, const ArtifactMeta& meta);

// ---- simulation ---------------------------------------------------------------

nlohmann::json to_json(const SimDesign& design);
nlohmann::json to_json(const ReplicationReport& report, const ArtifactMeta& meta);
// Tidy rows: design, method, metric, rep, value.
void write_report_csv(std::ostream& out, const ReplicationReport& report, const ArtifactMeta& meta);

}  // namespace prisel

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prisel/model.hpp"
#include "prisel/rvalue.hpp"

namespace prisel {

enum class Command { DeconvFit, Select, RValue, Simulate };

std::string_view to_string(Command c);

// Bad or missing flags for the chosen command.
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Command command = Command::Select;
  std::string input;
  std::string output;  // directory receiving the artifacts
  std::string fit;     // optional deconvolution fit to reuse instead of refitting
  std::optional<double> alpha;
  std::optional<double> mu0;
  std::size_t grid_size = 50;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: all available cores
  std::vector<double> sigma_breaks;
  std::optional<double> trim_lower;
  std::optional<double> trim_upper;

  // rvalue
  RValueDefinition definition = RValueDefinition::VaryAlpha;
  std::size_t grid_points = 200;

  // simulate
  std::string design = "uniform";
  std::optional<double> design_sigma;
  std::optional<std::size_t> m;
  std::size_t reps = 50;
  std::size_t oracle_mc = 1000000;
};

// Throws UsageError when a flag required by the command is missing or out of range.
void validate(const RunConfig& config);

struct IngestRecord {
  std::string id;
  double x = 0.0;
  double sigma = 1.0;
  std::size_t line = 0;
};

// sqrt(Y(1-Y)/n + Y'(1-Y')/n'); the matching effect is Y - Y'.
double ayp_standard_error(double y, double yprime, double n, double nprime);

// Drops records whose sigma lies strictly outside the [lower, upper]
// empirical percentiles of sigma.
std::vector<IngestRecord> trim_by_se_percentile(std::vector<IngestRecord> records, double lower,
                                                double upper);

// Reads either an (id, x, sigma) table or an (id, Y, Yprime, n, nprime) table,
// chosen by the header. Extra columns are ignored.
std::vector<IngestRecord> read_records(std::istream& in);
std::vector<IngestRecord> read_records(const std::string& path);

std::vector<Observation> to_observations(std::span<const IngestRecord> records);

// Executes one command. Errors are reported on `err` as a single JSON object
// and mapped to a nonzero exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// Parses argv-style arguments (without the program name) and runs them.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prisel

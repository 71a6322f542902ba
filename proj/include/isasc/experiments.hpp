#pragma once

// Monte-Carlo experiment orchestration: configuration ingestion, paired
// realizations across sweep points and schemes, CSV rows and JSON
// summaries. dB and dBm appear only at this layer.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isasc/metrics.hpp"
#include "isasc/optimizer.hpp"
#include "isasc/sdp.hpp"
#include "isasc/system_model.hpp"

namespace isasc::exp {

inline constexpr const char* kCsvSchemaVersion = "1";

enum class Kind { pareto, converge, power_sweep, elements_sweep, bc_compare, validate };
const char* to_string(Kind k);
std::optional<Kind> kind_from_string(const std::string& name);

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  Kind kind = Kind::pareto;
  model::SystemConfig system;
  model::SceneLayout layout = model::SceneLayout::default_layout(2);
  model::PathLossModel pathloss;
  double a1 = 0.37, a2 = 0.98, c1 = 0.25, c2 = -0.79;
  conic::SolverSettings solver;
  metrics::BcModel bc = metrics::BcModel::default_lte();

  std::uint64_t seed = 1;
  int realizations = 20;
  int threads = 1;
  std::string out_dir = "results";
  std::vector<opt::Scheme> baselines;

  int eps_points = 12;
  std::vector<double> eps_grid;  // explicit grid (suts/s); empty = default
  double epsilon = 1e4;          // fixed SSR floor for the sweeps (suts/s)
  std::optional<double> r_th;    // convergence runs; default mid-interval
  std::vector<double> p_max_dbm{30, 35, 40, 45, 50, 55, 60};
  std::vector<int> n_list{4, 8, 16, 32};
  double elements_p_dbm = 50.0;
  std::vector<std::pair<int, int>> cases{{6, 8}, {8, 8}, {6, 10}, {8, 10}};
  std::vector<int> kappa_list{2, 5, 8};
  std::vector<double> bc_p_dbm{30, 40, 50, 60};
  int bc_eps_points = 5;
  std::optional<double> crb_cap_db = -150.0;

  /// Throws ConfigError.
  void validate() const;
  [[nodiscard]] metrics::SemanticModel semantic(const model::SystemConfig& c) const;
  /// Resolved spec as YAML (out_dir and threads excluded).
  [[nodiscard]] std::string canonical() const;
  /// Git blob SHA-1 of canonical().
  [[nodiscard]] std::string hash() const;
};

/// Comma-separated baseline names ("bl1,bl3"); "none" or "" gives an empty list.
std::vector<opt::Scheme> parse_baselines(const std::string& list);

/// Reads a YAML document; `base_dir` resolves a relative CQI table path.
ExperimentSpec spec_from_yaml(const std::string& text, Kind kind, const std::string& base_dir = ".");
ExperimentSpec load_spec(const std::string& path, Kind kind);

/// Git-style object hash: SHA-1 of "blob <size>\0" + content, hex.
std::string git_blob_sha1(const std::string& content);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Header plus rows, comma separated, quoted where needed, '\n' endings.
std::string to_csv(const Table& t);
/// Shortest round-trip decimal form.
std::string fmt_num(double x);

struct RunOutput {
  Table rows;
  Table timing;  // wall-clock seconds per row, kept apart from the rows
  nlohmann::ordered_json summary;
  int attempted = 0;
  int solver_failures = 0;

  [[nodiscard]] double failure_rate() const { return attempted ? double(solver_failures) / attempted : 0.0; }
};

using Progress = std::function<void(int done, int total)>;

RunOutput run_pareto(const ExperimentSpec& spec, const Progress& progress = {});
RunOutput run_convergence(const ExperimentSpec& spec, const Progress& progress = {});
RunOutput run_power_sweep(const ExperimentSpec& spec, const Progress& progress = {});
RunOutput run_elements_sweep(const ExperimentSpec& spec, const Progress& progress = {});
RunOutput run_bc_compare(const ExperimentSpec& spec, const Progress& progress = {});
/// Oracle suite; `summary["pass"]` is false when any oracle fails.
RunOutput run_validation_suite(const ExperimentSpec& spec, const Progress& progress = {});

RunOutput run(const ExperimentSpec& spec, const Progress& progress = {});

/// Writes <kind>.csv, <kind>_timing.csv and <kind>_summary.json.
void write_outputs(const ExperimentSpec& spec, const RunOutput& out);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> xs, double q);
/// Least-squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace isasc::exp

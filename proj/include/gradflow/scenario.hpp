#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradflow/blowup.hpp"
#include "gradflow/models.hpp"

namespace gradflow::scenario {

/// Raised for malformed or inconsistent configuration input; `field` names
/// the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field_name, const std::string& what_arg)
      : std::runtime_error("config field '" + field_name + "': " + what_arg),
        field(std::move(field_name)) {}
  std::string field;
};

struct IntegrationConfig {
  double t_max = 100.0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int sample_count = 100;
  double blowup_threshold = 1e8;
};

/// Rectangular grid sweep over named state components.
struct SweepAxis {
  std::string component;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

struct SweepConfig {
  std::vector<SweepAxis> axes;
};

/// Initial-data presets for the 2D viscous runs; the potential is evaluated
/// from the preset name and parameters.
struct PotentialConfig {
  std::string preset;  ///< "zero" | "gaussian" | "cosine"
  std::map<std::string, double> params;
};

struct InitialConfig {
  std::optional<std::vector<Complex>> lambdas;
  std::optional<double> rho0;
  std::optional<Eigen::MatrixXd> matrix;      ///< full-tensor initial data
  std::optional<std::vector<double>> traces;  ///< (m_2, ..., m_n)
  std::optional<PotentialConfig> potential;
};

struct OutputConfig {
  std::string format = "csv";  ///< "csv" | "json"
  std::string path = "run";    ///< base name for emitted files
};

struct ViscousConfig {
  int grid_n = 128;
  double box = 4.0;
  double t_end = 0.5;
  int output_count = 21;
  std::vector<double> nu_list;  ///< when present, a viscosity-sweep study
  double study_t_end = 0.0;     ///< horizon for the sweep (defaults to t_end)
};

struct ScenarioConfig {
  std::string name = "run";
  models::ModelSpec model;
  InitialConfig initial;
  IntegrationConfig integration;
  std::optional<SweepConfig> sweep;
  OutputConfig output;
  ViscousConfig viscous;
};

/// Parse + validate a config document. Fills defaults, checks that exactly
/// one initial-data block is present and that it matches the model kind.
ScenarioConfig parse_config(const nlohmann::json& doc);

/// Reads the file and delegates to parse_config.
ScenarioConfig load_config(const std::string& path);

/// Canonical serialization; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ScenarioConfig& config);

/// FNV-1a hash (hex) of the canonical serialization; identifies a scenario
/// in reports independently of the file it came from.
std::string config_digest(const ScenarioConfig& config);

/// Evaluate a potential preset at (x, y) for a given box size.
double eval_potential(const PotentialConfig& potential, double box, double x, double y);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

/// One row of the invariant-drift table of a report.
struct DriftRow {
  std::string label;
  Complex initial{0.0, 0.0};
  double max_rel_drift = 0.0;
};

struct RunReport {
  std::string digest;
  std::string command;
  std::vector<blowup::ClassificationVerdict> verdicts;
  std::vector<DriftRow> drift;
  std::vector<std::string> trajectory_files;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::map<std::string, double> diagnostics;
};

nlohmann::json report_to_json(const RunReport& report);

}  // namespace gradflow::scenario

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradflow/scenario.hpp"

namespace gradflow::runner {

/// Raised when a run fails numerically (step-size underflow, non-finite
/// state, ...). Config problems raise scenario::ConfigError instead; the
/// two map to different process exit codes.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int jobs = 0;  ///< worker-pool size for sweeps; 0 = available parallelism
  std::optional<std::string> format;  ///< overrides the config's output format
};

/// Integrate a single scenario, write the trajectory and a report, and
/// return the report (verdict, invariant-drift table, diagnostics).
scenario::RunReport cmd_simulate(const scenario::ScenarioConfig& config,
                                 const CommandOptions& options);

/// Sweep a grid of starts, integrate a short trajectory from each, and
/// write plot-ready phase-portrait data with separatrix overlays.
scenario::RunReport cmd_portrait(const scenario::ScenarioConfig& config,
                                 const CommandOptions& options);

/// Classify every grid point of the sweep as globally smooth / finite-time
/// breakdown and write the verdict map (for threshold-boundary plots).
scenario::RunReport cmd_classify(const scenario::ScenarioConfig& config,
                                 const CommandOptions& options);

/// Run the 2D viscous solver, write diagnostics time series, a field
/// snapshot, and (when a viscosity list is configured) the convergence
/// study table.
scenario::RunReport cmd_viscous(const scenario::ScenarioConfig& config,
                                const CommandOptions& options);

/// Print the constructed index-pair sequences for dimension n.
void print_sequences(int n, std::ostream& os);

/// Check a user-supplied pair sequence for the uniform pair-sum identity;
/// prints the verdict and returns whether it holds.
bool check_sequence(int n, const std::vector<std::pair<int, int>>& pairs, std::ostream& os);

}  // namespace gradflow::runner

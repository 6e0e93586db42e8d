#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace gradflow {

/// Right-hand side callback: writes dy/dt for the given (t, y).
using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

enum class IntegrationStatus {
  Completed,      ///< reached the end of the requested span
  Blowup,         ///< sup-norm crossed the blowup threshold
  EventStop,      ///< user stop condition fired
  StepUnderflow,  ///< step size shrank below machine resolution (stiffness)
  RhsFailure,     ///< right-hand side produced a non-finite value
};

/// Attached to a trajectory when the sup-norm threshold was crossed.
struct BlowupInfo {
  double t_star_estimate = 0.0;  ///< from a linear fit of 1/||y||_inf against t
  std::vector<int> orthant;      ///< sign pattern (-1/0/+1) at the final sample
  double terminal_norm = 0.0;    ///< sup-norm of the final recorded state
};

struct IntegrationOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  /// Number of uniformly spaced samples over the span, endpoints included.
  int sample_count = 100;
  /// Sup-norm at which integration stops with IntegrationStatus::Blowup.
  /// Non-positive disables detection.
  double blowup_threshold = 1e8;
  double max_step = 0.0;    ///< upper bound on the step size; 0 means none
  double fixed_step = 0.0;  ///< >0 disables adaptivity and forces this step
  /// Once ||y||_inf >= tail_fraction * blowup_threshold every accepted step
  /// is recorded, so the approach to a singularity is densely sampled.
  double tail_fraction = 1e-2;
  /// Checked after every accepted step; integration stops with EventStop
  /// when it returns true.
  std::function<bool(double t, const Eigen::VectorXd& y)> stop_condition;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  IntegrationStatus status = IntegrationStatus::Completed;
  std::optional<BlowupInfo> blowup;

  size_t size() const { return times.size(); }
};

/// Integrates y' = rhs(t, y) over [t0, t1] with an embedded Dormand-Prince
/// 5(4) pair. Steps are clamped so every uniform sample time is hit exactly.
TrajectoryRecord integrate(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1,
                           const IntegrationOptions& opts = {});

/// Forcing term for the matrix Riccati equation; may be empty for zero.
using MatrixForcing = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& m, double t)>;

/// Integrates dM/dt = -M^2 + G(M, t). States are row-major flattened.
TrajectoryRecord integrate_matrix_riccati(const Eigen::MatrixXd& m0, const MatrixForcing& forcing,
                                          double t0, double t1,
                                          const IntegrationOptions& opts = {});

Eigen::VectorXd flatten(const Eigen::MatrixXd& m);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& y, int n);

/// Blowup-time estimate: least-squares line through (t, 1/||y||_inf) over the
/// last fit_count recorded samples, extrapolated to zero.
double fit_blowup_time(const TrajectoryRecord& traj, int fit_count = 10);

}  // namespace gradflow

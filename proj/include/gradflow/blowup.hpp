#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gradflow/integrate.hpp"
#include "gradflow/models.hpp"
#include "gradflow/spectral.hpp"

namespace gradflow::blowup {

enum class Outcome { GlobalSmooth, FiniteTimeBreakdown, Inconclusive };
const char* to_string(Outcome o);

/// Result of a threshold or trajectory classification. `reason` is a short
/// machine tag naming the decision basis (for example "analytic-root",
/// "indicator-floor", "horizon-reached").
struct ClassificationVerdict {
  Outcome outcome = Outcome::Inconclusive;
  std::optional<double> t_star;
  std::vector<int> orthant;  ///< -1/0/+1 per component; set on detected breakdown
  std::optional<double> rate_exponent;
  std::string reason;
};

enum class BalanceModel { RE, REP, Trace4D };

/// Leading power-law balance w_i ~ omega_i * tau^{p_i}, tau = t* - t, for a
/// truncated blowup system, together with the substitution residual at
/// tau = 1.
struct BalancePair {
  BalanceModel model = BalanceModel::RE;
  std::vector<double> omega;
  std::vector<double> p;
  double residual = 0.0;
};

/// Max norm of the truncated-system substitution residual at tau = 1.
double verify_balance(const BalancePair& bp);

/// Isotropic spectral balance with the k-th component distinguished:
/// omega_i = 1/(n-2) for i != k, omega_k = (1-n)/(n-2), all exponents -1.
/// n = 2 makes the construction singular and throws std::domain_error.
BalancePair balance_pair_re(int n, int k);

/// Density-led balance for the self-gravitating spectral system; component
/// order (rho, lambda_1..lambda_n): omega = (omega0, -1, ..., -1),
/// p = (-n, -1, ..., -1). Requires omega0 > 0.
BalancePair balance_pair_rep(int n, double omega0);

/// Balance of the 4-D trace flow (m2, m3, m4) with exponents (-2, -3, -4).
/// Amplitudes are solved from the truncated equations
///   m2' = -2 m3,  m3' = (3/4) m2^2,  m4' = -(7/3) m2 m3,
/// not transcribed: the solve yields (-4, 4, 28/3).
BalancePair balance_pair_trace4d();

/// The sign variant (4, -4, 28/3) sometimes quoted for this balance. It
/// fails the middle truncated equation and is provided for comparison only.
std::array<double, 3> trace4d_alternative_amplitudes();

/// Exact ray solution lambda(t) = omega^{(k)} a / (1 - a t) of the isotropic
/// spectral system; bounded for all t >= 0 iff a <= 0. Throws
/// models::BlowupAtTime when the denominator vanishes (at t = 1/a for a > 0).
Spectrum separatrix_re(int n, int k, double a, double t);

/// Critical-threshold classification for scalar damping C = -beta I,
/// beta > 0. Complex data or real lambda0 >= -beta stay smooth; otherwise
/// the analytic root of 1 + lambda0 (1 - e^{-beta t}) / beta gives t*.
ClassificationVerdict classify_damping(Complex lambda0, double beta);

struct Rep2dOptions {
  double t_max = 100.0;
  double gamma_floor = 1e-10;  ///< breakdown trigger on the indicator
  /// Horizon-end level below which a still-decreasing indicator is ruled
  /// Inconclusive rather than GlobalSmooth.
  double inconclusive_floor = 0.05;
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int sample_count = 1001;
};

struct Rep2dReport {
  ClassificationVerdict verdict;
  double min_gamma = 0.0;
  double max_energy_residual = 0.0;
  TrajectoryRecord gamma_trajectory;
};

/// Dichotomy for the 2-D self-gravitating model via the dispersion
/// indicator Gamma: complex conjugate data is globally smooth (breakdown
/// would force a negative square); real data is decided by integrating
/// Gamma'' = k rho0 ln Gamma + 2 Lambda0 + k rho0 from Gamma(0) = 1,
/// Gamma'(0) = lambda10 + lambda20.
Rep2dReport classify_rep2d(Complex lambda10, Complex lambda20, double rho0, double k,
                           const Rep2dOptions& opts = {});

struct DetectOptions {
  int fit_samples = 10;
  /// Orthant is read at the last sample with norm above this fraction of
  /// the threshold.
  double orthant_fraction = 0.1;
  double threshold = 1e8;  ///< blowup threshold the trajectory was run with
  /// A component counts as diverging when the slope of log|y_i| against
  /// log(t* - t) is at or below this; non-diverging components are neutral.
  double divergence_slope = -0.5;
  /// Component block for the rate fit (packed indices); count -1 = all.
  int rate_begin = 0;
  int rate_count = -1;
  /// Analytic blowup time, preferred over the fitted estimate when known.
  std::optional<double> analytic_t_star;
  /// Set by callers that watched a conserved quantity drift out of
  /// tolerance; downgrades a smooth horizon verdict to Inconclusive.
  bool invariant_drift_exceeded = false;
};

/// Turns a finished trajectory into a verdict: orthant sign pattern of the
/// diverging components, blowup time and sup-norm rate exponent on
/// breakdown; GlobalSmooth when the horizon was reached.
ClassificationVerdict detect_and_classify(const TrajectoryRecord& traj,
                                          const DetectOptions& opts = {});

/// One eigenvalue branch of the a-posteriori damping check.
struct DampingBranchReport {
  Complex lambda0;
  std::vector<Complex> c_values;        ///< c(t) = l C r along the branch
  std::vector<double> condition_value;  ///< running Re(lambda0 int_0^t b)
  double min_condition = 0.0;
  bool crossed = false;  ///< the running quantity fell below -1
  std::optional<double> t_cross;
};

struct DampingConditionReport {
  std::vector<double> times;
  std::vector<DampingBranchReport> branches;
  bool unreliable = false;  ///< some sample had a near-defective eigensystem
};

/// Recomputes the regularity condition Re(lambda(0) int_0^t b) > -1 along a
/// recorded matrix-damping trajectory, with b(t) = exp(int_0^t c) and
/// c(t) = l C r taken from instantaneous eigenvectors (l r = 1) continued
/// across samples by nearest-neighbour matching.
DampingConditionReport check_damping_condition(const TrajectoryRecord& matrix_traj,
                                               const Eigen::MatrixXd& c);

}  // namespace gradflow::blowup

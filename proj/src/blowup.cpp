#include "gradflow/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gradflow::blowup {

namespace {

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Least-squares slope of y against x; nullopt when under-determined or when
/// the abscissae are too clustered to resolve a slope. Sums are centered so
/// tightly grouped samples (e.g. log-times deep inside a blowup tail) do not
/// cancel catastrophically.
std::optional<double> ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t m = x.size();
  if (m < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 1e-12 * static_cast<double>(m) * std::max(1.0, mx * mx))) return std::nullopt;
  return sxy / sxx;
}

}  // namespace

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::GlobalSmooth: return "global_smooth";
    case Outcome::FiniteTimeBreakdown: return "finite_time_breakdown";
    case Outcome::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

double verify_balance(const BalancePair& bp) {
  double worst = 0.0;
  switch (bp.model) {
    case BalanceModel::RE: {
      const size_t n = bp.omega.size();
      double sum_sq = 0.0;
      for (double w : bp.omega) sum_sq += w * w;
      for (size_t i = 0; i < n; ++i) {
        const double w = bp.omega[i];
        worst = std::max(worst, std::abs(w + w * w - sum_sq / static_cast<double>(n)));
      }
      break;
    }
    case BalanceModel::REP: {
      const size_t n = bp.omega.size() - 1;
      double lam_sum = 0.0;
      for (size_t i = 1; i <= n; ++i) lam_sum += bp.omega[i];
      worst = std::abs(-bp.p[0] * bp.omega[0] + bp.omega[0] * lam_sum);
      for (size_t i = 1; i <= n; ++i) {
        worst = std::max(worst, std::abs(-bp.p[i] * bp.omega[i] + bp.omega[i] * bp.omega[i]));
      }
      break;
    }
    case BalanceModel::Trace4D: {
      const double a2 = bp.omega[0], a3 = bp.omega[1], a4 = bp.omega[2];
      const double r1 = -bp.p[0] * a2 + 2.0 * a3;
      const double r2 = -bp.p[1] * a3 - 0.75 * a2 * a2;
      const double r3 = -bp.p[2] * a4 + (7.0 / 3.0) * a2 * a3;
      worst = std::max({std::abs(r1), std::abs(r2), std::abs(r3)});
      break;
    }
  }
  return worst;
}

BalancePair balance_pair_re(int n, int k) {
  if (n == 2) {
    throw std::domain_error("balance_pair_re: construction singular for n = 2");
  }
  if (n < 3 || n > kMaxDimension) {
    throw std::invalid_argument("balance_pair_re: n out of range");
  }
  if (k < 1 || k > n) throw std::invalid_argument("balance_pair_re: index out of range");
  BalancePair bp;
  bp.model = BalanceModel::RE;
  bp.omega.assign(static_cast<size_t>(n), 1.0 / (n - 2));
  bp.omega[static_cast<size_t>(k - 1)] = static_cast<double>(1 - n) / (n - 2);
  bp.p.assign(static_cast<size_t>(n), -1.0);
  bp.residual = verify_balance(bp);
  return bp;
}

BalancePair balance_pair_rep(int n, double omega0) {
  if (n < 2 || n > kMaxDimension) throw std::invalid_argument("balance_pair_rep: n out of range");
  if (!(omega0 > 0.0)) {
    throw std::domain_error("balance_pair_rep: leading density amplitude must be positive");
  }
  BalancePair bp;
  bp.model = BalanceModel::REP;
  bp.omega.assign(static_cast<size_t>(n + 1), -1.0);
  bp.omega[0] = omega0;
  bp.p.assign(static_cast<size_t>(n + 1), -1.0);
  bp.p[0] = -static_cast<double>(n);
  bp.residual = verify_balance(bp);
  return bp;
}

BalancePair balance_pair_trace4d() {
  // Substitute m_k = a_k tau^{-k} into the truncated flow. The first
  // equation forces a3 = -a2, the second then reads -a2 = a2^2/4 whose
  // non-trivial root fixes a2, and the third yields a4 directly.
  const double a_coef = 0.25, b_coef = 1.0;  // a2^2/4 + a2 = 0
  const double a2 = -b_coef / a_coef;
  const double a3 = -a2;
  const double a4 = -(7.0 / 12.0) * a2 * a3;
  BalancePair bp;
  bp.model = BalanceModel::Trace4D;
  bp.omega = {a2, a3, a4};
  bp.p = {-2.0, -3.0, -4.0};
  bp.residual = verify_balance(bp);
  return bp;
}

std::array<double, 3> trace4d_alternative_amplitudes() { return {4.0, -4.0, 28.0 / 3.0}; }

Spectrum separatrix_re(int n, int k, double a, double t) {
  const BalancePair bp = balance_pair_re(n, k);
  // The balance relation omega_i + omega_i^2 = sum(omega^2)/n makes
  // lambda(t) = omega / (1/a - t) an exact solution, so the ray amplitude
  // obeys c' = c^2 regardless of dimension and the singular time is 1/a.
  const double denom = 1.0 - a * t;
  if (std::abs(denom) < 1e-12 * std::max(1.0, std::abs(a * t))) {
    throw models::BlowupAtTime(1.0 / a);
  }
  const double scale = a / denom;
  std::vector<Complex> vals(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) vals[static_cast<size_t>(i)] = Complex{bp.omega[static_cast<size_t>(i)] * scale, 0.0};
  return Spectrum{std::move(vals)};
}

ClassificationVerdict classify_damping(Complex lambda0, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("classify_damping: beta must be positive");
  ClassificationVerdict v;
  if (lambda0.imag() != 0.0) {
    v.outcome = Outcome::GlobalSmooth;
    v.reason = "complex-spectrum";
    return v;
  }
  const double x = lambda0.real();
  if (x >= -beta) {
    v.outcome = Outcome::GlobalSmooth;
    v.reason = "above-threshold";
    return v;
  }
  v.outcome = Outcome::FiniteTimeBreakdown;
  v.t_star = -std::log1p(beta / x) / beta;
  v.reason = "analytic-root";
  return v;
}

Rep2dReport classify_rep2d(Complex lambda10, Complex lambda20, double rho0, double k,
                           const Rep2dOptions& opts) {
  if (!(rho0 >= 0.0)) throw std::invalid_argument("classify_rep2d: density must be >= 0");
  const bool complex_pair = lambda10.imag() != 0.0 || lambda20.imag() != 0.0;
  if (complex_pair) {
    const double mismatch = std::abs(lambda20 - std::conj(lambda10));
    if (mismatch > 1e-12 * std::max(1.0, std::abs(lambda10))) {
      throw std::invalid_argument("classify_rep2d: complex data must form a conjugate pair");
    }
  }
  const double d0 = (lambda10 + lambda20).real();
  const double product0 = (lambda10 * lambda20).real();

  models::PackedSystem sys = models::pack_rep2d_gamma(d0, product0, k, rho0);
  IntegrationOptions io;
  io.rel_tol = opts.rel_tol;
  io.abs_tol = opts.abs_tol;
  io.sample_count = opts.sample_count;
  io.blowup_threshold = 0.0;  // a growing indicator is not a breakdown
  io.stop_condition = [floor = opts.gamma_floor](double, const Eigen::VectorXd& y) {
    return y(0) <= floor;
  };

  Rep2dReport report;
  report.gamma_trajectory = integrate(sys.rhs, sys.y0, 0.0, opts.t_max, io);

  double min_gamma = std::numeric_limits<double>::infinity();
  double max_resid = 0.0;
  for (const Eigen::VectorXd& y : report.gamma_trajectory.states) {
    const double g = y(0), dg = y(1);
    if (!(g > 0.0)) continue;
    min_gamma = std::min(min_gamma, g);
    const double energy =
        dg * dg - d0 * d0 - 4.0 * product0 * (g - 1.0) - 2.0 * k * rho0 * g * std::log(g);
    max_resid = std::max(max_resid, std::abs(energy));
  }
  report.min_gamma = min_gamma;
  report.max_energy_residual = max_resid;

  ClassificationVerdict& v = report.verdict;
  if (complex_pair) {
    // Breakdown would require [Gamma']^2 = (lambda10 - lambda20)^2 < 0 at
    // the vanishing point, which is impossible for a conjugate pair.
    v.outcome = Outcome::GlobalSmooth;
    v.reason = "complex-pair";
    return report;
  }
  switch (report.gamma_trajectory.status) {
    case IntegrationStatus::EventStop:
      v.outcome = Outcome::FiniteTimeBreakdown;
      v.t_star = report.gamma_trajectory.times.back();
      v.reason = "indicator-floor";
      break;
    case IntegrationStatus::Completed: {
      const Eigen::VectorXd& last = report.gamma_trajectory.states.back();
      if (last(0) < opts.inconclusive_floor && last(1) < 0.0) {
        v.outcome = Outcome::Inconclusive;
        v.reason = "horizon-decreasing";
      } else {
        v.outcome = Outcome::GlobalSmooth;
        v.reason = "horizon-bounded";
      }
      break;
    }
    case IntegrationStatus::StepUnderflow:
      v.outcome = Outcome::Inconclusive;
      v.reason = "stiffness";
      break;
    default:
      v.outcome = Outcome::Inconclusive;
      v.reason = "integration-failure";
      break;
  }
  return report;
}

ClassificationVerdict detect_and_classify(const TrajectoryRecord& traj, const DetectOptions& opts) {
  if (traj.size() == 0) throw std::invalid_argument("detect_and_classify: empty trajectory");
  ClassificationVerdict v;
  if (!traj.blowup) {
    switch (traj.status) {
      case IntegrationStatus::Completed:
        if (opts.invariant_drift_exceeded) {
          v.outcome = Outcome::Inconclusive;
          v.reason = "invariant-drift";
        } else {
          v.outcome = Outcome::GlobalSmooth;
          v.reason = "horizon-reached";
        }
        break;
      case IntegrationStatus::StepUnderflow:
        v.outcome = Outcome::Inconclusive;
        v.reason = "stiffness";
        break;
      case IntegrationStatus::EventStop:
        v.outcome = Outcome::Inconclusive;
        v.reason = "event-stop";
        break;
      default:
        v.outcome = Outcome::Inconclusive;
        v.reason = "integration-failure";
        break;
    }
    return v;
  }

  const double t_star = opts.analytic_t_star.value_or(traj.blowup->t_star_estimate);
  v.outcome = Outcome::FiniteTimeBreakdown;
  v.t_star = t_star;
  v.reason = "blowup-detected";

  const int total = static_cast<int>(traj.size());
  int read_idx = total - 1;
  for (int i = total - 1; i >= 0; --i) {
    if (sup_norm(traj.states[static_cast<size_t>(i)]) > opts.orthant_fraction * opts.threshold) {
      read_idx = i;
      break;
    }
  }
  const Eigen::VectorXd& read_state = traj.states[static_cast<size_t>(read_idx)];
  const double read_norm = sup_norm(read_state);

  // Samples usable for log-log fits: strictly before the blowup time.
  std::vector<int> fit_idx;
  for (int i = total - 1; i >= 0 && static_cast<int>(fit_idx.size()) < opts.fit_samples; --i) {
    if (t_star - traj.times[static_cast<size_t>(i)] > 0.0) fit_idx.push_back(i);
  }
  std::reverse(fit_idx.begin(), fit_idx.end());

  const Eigen::Index dim = read_state.size();
  v.orthant.assign(static_cast<size_t>(dim), 0);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double value = read_state(c);
    bool diverging = false;
    std::vector<double> lx, ly;
    for (int i : fit_idx) {
      const double tau = t_star - traj.times[static_cast<size_t>(i)];
      const double mag = std::abs(traj.states[static_cast<size_t>(i)](c));
      if (mag > 1e-300) {
        lx.push_back(std::log(tau));
        ly.push_back(std::log(mag));
      }
    }
    if (lx.size() >= 3) {
      const auto slope = ls_slope(lx, ly);
      diverging = slope && *slope <= opts.divergence_slope;
    } else {
      diverging = std::abs(value) >= 1e-3 * read_norm;
    }
    if (diverging && std::abs(value) > 0.0) {
      v.orthant[static_cast<size_t>(c)] = value > 0.0 ? 1 : -1;
    }
  }

  const int rb = opts.rate_begin;
  const int rc = opts.rate_count < 0 ? static_cast<int>(dim) - rb : opts.rate_count;
  if (rb >= 0 && rc > 0 && rb + rc <= static_cast<int>(dim)) {
    std::vector<double> lx, ly;
    for (int i : fit_idx) {
      const double tau = t_star - traj.times[static_cast<size_t>(i)];
      const double mag = traj.states[static_cast<size_t>(i)].segment(rb, rc).cwiseAbs().maxCoeff();
      if (mag > 1e-300) {
        lx.push_back(std::log(tau));
        ly.push_back(std::log(mag));
      }
    }
    if (const auto slope = ls_slope(lx, ly); slope && lx.size() >= 3) v.rate_exponent = *slope;
  }
  return v;
}

DampingConditionReport check_damping_condition(const TrajectoryRecord& matrix_traj,
                                               const Eigen::MatrixXd& c) {
  if (matrix_traj.size() == 0) {
    throw std::invalid_argument("check_damping_condition: empty trajectory");
  }
  const int n = static_cast<int>(c.rows());
  if (c.rows() != c.cols() ||
      matrix_traj.states.front().size() != static_cast<Eigen::Index>(n) * n) {
    throw std::invalid_argument("check_damping_condition: damping matrix does not match states");
  }
  const Eigen::MatrixXcd cc = c.cast<Complex>();
  const size_t count = matrix_traj.size();

  DampingConditionReport report;
  report.times = matrix_traj.times;
  report.branches.resize(static_cast<size_t>(n));

  std::vector<Complex> prev_branch;
  std::vector<Complex> b_int(static_cast<size_t>(n), Complex{0.0, 0.0});  // running int of b
  std::vector<Complex> c_int(static_cast<size_t>(n), Complex{0.0, 0.0});  // running int of c
  std::vector<Complex> prev_c(static_cast<size_t>(n));
  std::vector<Complex> prev_b(static_cast<size_t>(n), Complex{1.0, 0.0});

  for (size_t s = 0; s < count; ++s) {
    const GradientTensor g{unflatten(matrix_traj.states[s], n)};
    const EigenSystem sys = eigensystem(g);
    report.unreliable = report.unreliable || sys.near_defective;

    std::vector<int> order(static_cast<size_t>(n));
    if (s == 0) {
      std::iota(order.begin(), order.end(), 0);
    } else {
      order = match_to_previous(prev_branch, sys.spectrum.values);
    }

    std::vector<Complex> branch_vals(static_cast<size_t>(n));
    const double dt = s == 0 ? 0.0 : matrix_traj.times[s] - matrix_traj.times[s - 1];
    for (int i = 0; i < n; ++i) {
      const int j = order[static_cast<size_t>(i)];
      branch_vals[static_cast<size_t>(i)] = sys.spectrum.values[static_cast<size_t>(j)];
      const Complex ci = (sys.left.row(j) * cc * sys.right.col(j))(0, 0);
      DampingBranchReport& br = report.branches[static_cast<size_t>(i)];
      if (s == 0) {
        br.lambda0 = branch_vals[static_cast<size_t>(i)];
        prev_c[static_cast<size_t>(i)] = ci;
      } else {
        c_int[static_cast<size_t>(i)] += 0.5 * dt * (prev_c[static_cast<size_t>(i)] + ci);
        prev_c[static_cast<size_t>(i)] = ci;
      }
      const Complex bi = std::exp(c_int[static_cast<size_t>(i)]);
      if (s > 0) {
        b_int[static_cast<size_t>(i)] += 0.5 * dt * (prev_b[static_cast<size_t>(i)] + bi);
      }
      prev_b[static_cast<size_t>(i)] = bi;

      br.c_values.push_back(ci);
      br.condition_value.push_back((br.lambda0 * b_int[static_cast<size_t>(i)]).real());
    }
    prev_branch = branch_vals;
  }

  for (DampingBranchReport& br : report.branches) {
    br.min_condition = *std::min_element(br.condition_value.begin(), br.condition_value.end());
    for (size_t s = 0; s < br.condition_value.size(); ++s) {
      if (br.condition_value[s] < -1.0) {
        br.crossed = true;
        if (s > 0) {
          const double q0 = br.condition_value[s - 1], q1 = br.condition_value[s];
          const double t0 = report.times[s - 1], t1 = report.times[s];
          br.t_cross = t0 + (t1 - t0) * (-1.0 - q0) / (q1 - q0);
        } else {
          br.t_cross = report.times[s];
        }
        break;
      }
    }
  }
  return report;
}

}  // namespace gradflow::blowup

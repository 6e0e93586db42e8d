#include "gradflow/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gradflow/spectral.hpp"

namespace gradflow {

namespace {

// Dormand-Prince 5(4) coefficients. The 5th-order weights coincide with the
// last stage row (FSAL), so k7 of an accepted step is k1 of the next.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// Difference between the 5th- and 4th-order solutions.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double q = err(i) / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

// Hairer's starting-step heuristic for a 5th-order pair.
double initial_step(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0,
                    const Eigen::VectorXd& f0, double span, double atol, double rtol) {
  const auto scaled_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& ref) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sc = atol + rtol * std::abs(ref(i));
      acc += (v(i) / sc) * (v(i) / sc);
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  const double d0 = scaled_norm(y0, y0);
  const double d1 = scaled_norm(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Eigen::VectorXd y1 = y0 + h0 * f0;
  Eigen::VectorXd f1(y0.size());
  rhs(t0 + h0, y1, f1);
  double h1;
  if (!finite(f1)) {
    h1 = h0 * 1e-3;
  } else {
    const double d2 = scaled_norm(f1 - f0, y0) / h0;
    const double dm = std::max(d1, d2);
    h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  }
  return std::min({100.0 * h0, h1, span});
}

std::vector<int> sign_pattern(const Eigen::VectorXd& y, double neutral_level) {
  std::vector<int> s(static_cast<size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(y(i)) < neutral_level) {
      s[static_cast<size_t>(i)] = 0;
    } else {
      s[static_cast<size_t>(i)] = y(i) > 0 ? 1 : -1;
    }
  }
  return s;
}

}  // namespace

TrajectoryRecord integrate(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1,
                           const IntegrationOptions& opts) {
  if (!rhs) throw std::invalid_argument("integrate: rhs must be callable");
  if (y0.size() == 0) throw std::invalid_argument("integrate: empty initial state");
  if (!finite(y0)) throw std::invalid_argument("integrate: initial state must be finite");
  if (!(t1 > t0)) throw std::invalid_argument("integrate: need t1 > t0");
  if (opts.sample_count < 2) throw std::invalid_argument("integrate: sample_count must be >= 2");
  if (opts.fixed_step == 0.0 && (opts.rel_tol <= 0.0 || opts.abs_tol <= 0.0)) {
    throw std::invalid_argument("integrate: tolerances must be positive");
  }

  const double span = t1 - t0;
  const double t_eps = 1e-12 * std::max(1.0, std::abs(t0) + span);
  const double threshold = opts.blowup_threshold;
  const double tail_level = threshold > 0.0 ? opts.tail_fraction * threshold
                                            : std::numeric_limits<double>::infinity();

  TrajectoryRecord traj;
  const auto record = [&](double t, const Eigen::VectorXd& y) {
    if (!traj.times.empty() && t - traj.times.back() <= t_eps) return;
    traj.times.push_back(t);
    traj.states.push_back(y);
  };
  const auto finish_blowup = [&](double t, const Eigen::VectorXd& y) {
    record(t, y);
    traj.status = IntegrationStatus::Blowup;
    BlowupInfo info;
    info.t_star_estimate = fit_blowup_time(traj);
    info.terminal_norm = sup_norm(y);
    info.orthant = sign_pattern(y, 1e-3 * info.terminal_norm);
    traj.blowup = info;
  };

  double t = t0;
  Eigen::VectorXd y = y0;
  traj.times.push_back(t0);
  traj.states.push_back(y0);

  Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
      k6(y.size()), k7(y.size()), ytmp(y.size()), y1(y.size()), err(y.size());
  rhs(t, y, k1);
  if (!finite(k1)) {
    traj.status = IntegrationStatus::RhsFailure;
    return traj;
  }
  if (threshold > 0.0 && sup_norm(y) > threshold) {
    finish_blowup(t, y);
    return traj;
  }
  if (opts.stop_condition && opts.stop_condition(t, y)) {
    traj.status = IntegrationStatus::EventStop;
    return traj;
  }

  const bool fixed = opts.fixed_step > 0.0;
  double h = fixed ? opts.fixed_step
                   : initial_step(rhs, t0, y, k1, span, opts.abs_tol, opts.rel_tol);
  if (opts.max_step > 0.0) h = std::min(h, opts.max_step);

  int next_sample = 1;
  const auto sample_time = [&](int i) {
    return t0 + span * static_cast<double>(i) / static_cast<double>(opts.sample_count - 1);
  };

  while (t < t1 - t_eps) {
    double h_try = std::min(h, t1 - t);
    if (next_sample < opts.sample_count) {
      const double ts = sample_time(next_sample);
      if (t + h_try >= ts - t_eps) h_try = ts - t;
    }
    if (h_try < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      traj.status = IntegrationStatus::StepUnderflow;
      record(t, y);
      return traj;
    }

    ytmp = y + h_try * (a21 * k1);
    rhs(t + c2 * h_try, ytmp, k2);
    ytmp = y + h_try * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h_try, ytmp, k3);
    ytmp = y + h_try * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h_try, ytmp, k4);
    ytmp = y + h_try * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h_try, ytmp, k5);
    ytmp = y + h_try * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h_try, ytmp, k6);
    y1 = y + h_try * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h_try, y1, k7);

    const bool stages_ok = finite(k2) && finite(k3) && finite(k4) && finite(k5) && finite(k6) &&
                           finite(k7) && finite(y1);
    if (!stages_ok) {
      if (fixed) {
        traj.status = IntegrationStatus::RhsFailure;
        record(t, y);
        return traj;
      }
      h = h_try * 0.25;
      continue;
    }

    double err_ratio = 0.0;
    if (!fixed) {
      err = h_try * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err_ratio = error_norm(err, y, y1, opts.abs_tol, opts.rel_tol);
      if (!(err_ratio <= 1.0)) {
        h = h_try * std::max(0.2, 0.9 * std::pow(err_ratio, -0.2));
        continue;
      }
    }

    t += h_try;
    y.swap(y1);
    k1.swap(k7);

    const double norm_now = sup_norm(y);
    if (next_sample < opts.sample_count && t >= sample_time(next_sample) - t_eps) {
      record(t, y);
      ++next_sample;
    } else if (norm_now >= tail_level) {
      record(t, y);
    }

    if (threshold > 0.0 && norm_now > threshold) {
      finish_blowup(t, y);
      return traj;
    }
    if (opts.stop_condition && opts.stop_condition(t, y)) {
      record(t, y);
      traj.status = IntegrationStatus::EventStop;
      return traj;
    }

    if (!fixed) {
      const double factor =
          err_ratio <= 1e-30 ? 5.0 : std::clamp(0.9 * std::pow(err_ratio, -0.2), 0.2, 5.0);
      h = h_try * factor;
      if (opts.max_step > 0.0) h = std::min(h, opts.max_step);
    } else {
      h = opts.fixed_step;
    }
  }

  record(t1, y);
  traj.status = IntegrationStatus::Completed;
  return traj;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd y(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y(i * n + j) = m(i, j);
  return y;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& y, int n) {
  if (y.size() != static_cast<Eigen::Index>(n) * n) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = y(i * n + j);
  return m;
}

TrajectoryRecord integrate_matrix_riccati(const Eigen::MatrixXd& m0, const MatrixForcing& forcing,
                                          double t0, double t1, const IntegrationOptions& opts) {
  if (m0.rows() != m0.cols()) {
    throw std::invalid_argument("integrate_matrix_riccati: matrix must be square");
  }
  const int n = static_cast<int>(m0.rows());
  if (n < 2 || n > kMaxDimension) {
    throw std::invalid_argument("integrate_matrix_riccati: dimension out of range");
  }
  const OdeRhs rhs = [n, &forcing](double t, const Eigen::VectorXd& yv, Eigen::VectorXd& dy) {
    const Eigen::MatrixXd m = unflatten(yv, n);
    Eigen::MatrixXd d = -(m * m);
    if (forcing) d += forcing(m, t);
    dy = flatten(d);
  };
  return integrate(rhs, flatten(m0), t0, t1, opts);
}

double fit_blowup_time(const TrajectoryRecord& traj, int fit_count) {
  const int total = static_cast<int>(traj.size());
  if (total == 0) throw std::invalid_argument("fit_blowup_time: empty trajectory");
  const int use = std::min(fit_count, total);
  const int begin = total - use;
  if (use < 2) return traj.times.back();

  // Centered least squares: the fitted samples sit in a sliver of time just
  // before the crossing, so uncentered normal equations would cancel away
  // nearly all significant digits of the time spread.
  double mean_t = 0.0, mean_u = 0.0;
  for (int i = begin; i < total; ++i) {
    mean_t += traj.times[static_cast<size_t>(i)];
    mean_u += 1.0 / sup_norm(traj.states[static_cast<size_t>(i)]);
  }
  const double m = static_cast<double>(use);
  mean_t /= m;
  mean_u /= m;
  double stt = 0.0, stu = 0.0;
  for (int i = begin; i < total; ++i) {
    const double dt = traj.times[static_cast<size_t>(i)] - mean_t;
    const double du = 1.0 / sup_norm(traj.states[static_cast<size_t>(i)]) - mean_u;
    stt += dt * dt;
    stu += dt * du;
  }
  if (stt == 0.0) return traj.times.back();
  const double slope = stu / stt;
  if (!(slope < 0.0)) return traj.times.back();
  // Root of the centered line mean_u + slope * (t - mean_t).
  return mean_t - mean_u / slope;
}

}  // namespace gradflow

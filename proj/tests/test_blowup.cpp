#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradflow/blowup.hpp"
#include "gradflow/models.hpp"

using gradflow::Complex;
using gradflow::IntegrationOptions;
using gradflow::IntegrationStatus;
using gradflow::Spectrum;
using gradflow::TrajectoryRecord;
namespace blowup = gradflow::blowup;
namespace models = gradflow::models;
using blowup::Outcome;

TEST_CASE("isotropic power-law balance solves the truncated system exactly") {
  for (int n = 3; n <= 6; ++n) {
    for (int k = 1; k <= n; ++k) {
      const auto bp = blowup::balance_pair_re(n, k);
      REQUIRE(static_cast<int>(bp.omega.size()) == n);
      CHECK(bp.residual < 1e-12);
      CHECK(blowup::verify_balance(bp) == bp.residual);
      for (int i = 0; i < n; ++i) {
        const double expected =
            i == k - 1 ? static_cast<double>(1 - n) / (n - 2) : 1.0 / (n - 2);
        CHECK(bp.omega[static_cast<size_t>(i)] == doctest::Approx(expected));
        CHECK(bp.p[static_cast<size_t>(i)] == -1.0);
      }
    }
  }
  CHECK_THROWS_AS(blowup::balance_pair_re(2, 1), std::domain_error);
  CHECK_THROWS_AS(blowup::balance_pair_re(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(blowup::balance_pair_re(4, 5), std::invalid_argument);
}

TEST_CASE("density-led balance closes for any positive leading amplitude") {
  const auto bp = blowup::balance_pair_rep(3, 2.5);
  REQUIRE(bp.omega.size() == 4);
  CHECK(bp.omega[0] == 2.5);
  CHECK(bp.omega[1] == -1.0);
  CHECK(bp.p[0] == -3.0);
  CHECK(bp.p[3] == -1.0);
  CHECK(bp.residual < 1e-12);
  CHECK_THROWS_AS(blowup::balance_pair_rep(3, 0.0), std::domain_error);
  CHECK_THROWS_AS(blowup::balance_pair_rep(3, -1.0), std::domain_error);
}

TEST_CASE("trace-flow balance amplitudes and the sign variant") {
  const auto bp = blowup::balance_pair_trace4d();
  REQUIRE(bp.omega.size() == 3);
  CHECK(bp.omega[0] == doctest::Approx(-4.0));
  CHECK(bp.omega[1] == doctest::Approx(4.0));
  CHECK(bp.omega[2] == doctest::Approx(28.0 / 3.0));
  CHECK(bp.residual < 1e-12);

  // The flipped-sign amplitudes satisfy the first and third truncated
  // equations but miss the middle one by 24.
  const auto alt = blowup::trace4d_alternative_amplitudes();
  blowup::BalancePair variant;
  variant.model = blowup::BalanceModel::Trace4D;
  variant.omega = {alt[0], alt[1], alt[2]};
  variant.p = {-2.0, -3.0, -4.0};
  CHECK(blowup::verify_balance(variant) == doctest::Approx(24.0));
}

TEST_CASE("ray solution values, tracelessness, and singular time") {
  const Spectrum s0 = blowup::separatrix_re(3, 3, 1.0, 0.0);
  CHECK(s0.values[0].real() == doctest::Approx(1.0));
  CHECK(s0.values[2].real() == doctest::Approx(-2.0));

  const Spectrum s = blowup::separatrix_re(3, 3, 1.0, 0.5);
  CHECK(s.values[0].real() == doctest::Approx(2.0));
  CHECK(s.values[1].real() == doctest::Approx(2.0));
  CHECK(s.values[2].real() == doctest::Approx(-4.0));
  CHECK(std::abs(s.trace()) < 1e-12);

  try {
    blowup::separatrix_re(3, 3, 1.0, 1.0);
    FAIL("expected a singular-time throw");
  } catch (const models::BlowupAtTime& ex) {
    CHECK(ex.t_root == doctest::Approx(1.0));
  }

  // Negative ray parameter decays instead of blowing up.
  const Spectrum tail = blowup::separatrix_re(4, 1, -1.0, 100.0);
  CHECK(tail.sup_norm() < 0.1);
}

TEST_CASE("integrating from a ray start reproduces the closed-form ray") {
  // The returned spectrum must be an exact solution of the isotropic flow in
  // every dimension, not just a start value: integrate from t = 0 and compare
  // against the closed form most of the way to the singular time.
  for (const int n : {3, 4, 5}) {
    const double a = 1.25;
    const int k = 2;
    const auto sys = models::pack_restricted_euler(blowup::separatrix_re(n, k, a, 0.0), 1.0);
    IntegrationOptions opts;
    opts.rel_tol = 1e-12;
    opts.abs_tol = 1e-14;
    opts.sample_count = 41;
    opts.blowup_threshold = 0.0;
    const double t_end = 0.95 / a;
    const auto traj = integrate(sys.rhs, sys.y0, 0.0, t_end, opts);
    REQUIRE(traj.status == IntegrationStatus::Completed);
    for (size_t s = 0; s < traj.size(); ++s) {
      const Spectrum ref = blowup::separatrix_re(n, k, a, traj.times[s]);
      const double scale = ref.sup_norm();
      for (int i = 0; i < n; ++i) {
        CHECK(std::abs(traj.states[s](2 * i) - ref.values[static_cast<size_t>(i)].real()) <=
              1e-6 * scale);
        CHECK(std::abs(traj.states[s](2 * i + 1)) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("scalar damping classification covers both sides of the threshold") {
  const auto smooth = blowup::classify_damping(Complex{-0.5, 0.0}, 1.0);
  CHECK(smooth.outcome == Outcome::GlobalSmooth);
  CHECK(smooth.reason == "above-threshold");

  const auto boundary = blowup::classify_damping(Complex{-1.0, 0.0}, 1.0);
  CHECK(boundary.outcome == Outcome::GlobalSmooth);

  const auto rotating = blowup::classify_damping(Complex{-5.0, 0.2}, 1.0);
  CHECK(rotating.outcome == Outcome::GlobalSmooth);
  CHECK(rotating.reason == "complex-spectrum");

  const auto burst = blowup::classify_damping(Complex{-2.0, 0.0}, 1.0);
  REQUIRE(burst.outcome == Outcome::FiniteTimeBreakdown);
  CHECK(burst.reason == "analytic-root");
  REQUIRE(burst.t_star.has_value());
  CHECK(*burst.t_star == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(blowup::classify_damping(Complex{1.0, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("dispersion-indicator dichotomy for the 2-D density-coupled model") {
  SUBCASE("conjugate data is structurally smooth") {
    const auto report = blowup::classify_rep2d(Complex{0.2, 0.7}, Complex{0.2, -0.7}, 1.0, 1.0);
    CHECK(report.verdict.outcome == Outcome::GlobalSmooth);
    CHECK(report.verdict.reason == "complex-pair");
    CHECK(report.min_gamma > 0.0);
  }

  SUBCASE("mismatched complex data is rejected") {
    CHECK_THROWS_AS(blowup::classify_rep2d(Complex{0.0, 1.0}, Complex{0.0, -2.0}, 1.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(blowup::classify_rep2d(Complex{1.0, 0.0}, Complex{1.0, 0.0}, -1.0, 1.0),
                    std::invalid_argument);
  }

  SUBCASE("pressure-free contraction reaches the floor at the parabola root") {
    // With zero density the indicator is exactly (1 - t)^2.
    blowup::Rep2dOptions opts;
    opts.t_max = 5.0;
    const auto report = blowup::classify_rep2d(Complex{-1.0, 0.0}, Complex{-1.0, 0.0}, 0.0, 1.0, opts);
    REQUIRE(report.verdict.outcome == Outcome::FiniteTimeBreakdown);
    CHECK(report.verdict.reason == "indicator-floor");
    REQUIRE(report.verdict.t_star.has_value());
    CHECK(*report.verdict.t_star == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(report.min_gamma < 1e-9);
    CHECK(report.max_energy_residual < 1e-10);
  }

  SUBCASE("expanding real data stays bounded away from the floor") {
    blowup::Rep2dOptions opts;
    opts.t_max = 5.0;
    opts.sample_count = 501;
    const auto report = blowup::classify_rep2d(Complex{0.5, 0.0}, Complex{0.5, 0.0}, 1.0, 1.0, opts);
    CHECK(report.verdict.outcome == Outcome::GlobalSmooth);
    CHECK(report.verdict.reason == "horizon-bounded");
    CHECK(report.min_gamma == doctest::Approx(1.0));
    CHECK(report.max_energy_residual < 1e-6);
  }

  SUBCASE("a still-shrinking indicator at the horizon is inconclusive") {
    blowup::Rep2dOptions opts;
    opts.t_max = 0.8;  // stop before the zero of (1 - t)^2
    const auto report = blowup::classify_rep2d(Complex{-1.0, 0.0}, Complex{-1.0, 0.0}, 0.0, 1.0, opts);
    CHECK(report.verdict.outcome == Outcome::Inconclusive);
    CHECK(report.verdict.reason == "horizon-decreasing");
  }
}

namespace {

TrajectoryRecord run_isotropic(const std::vector<Complex>& lambdas, double t1, double threshold) {
  const models::PackedSystem sys = models::pack_restricted_euler(Spectrum{lambdas, true}, 1.0);
  IntegrationOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  opts.sample_count = 201;
  opts.blowup_threshold = threshold;
  return integrate(sys.rhs, sys.y0, 0.0, t1, opts);
}

}  // namespace

TEST_CASE("trajectory classification on a ray that breaks down at t = 1") {
  const TrajectoryRecord traj =
      run_isotropic({{1.0, 0.0}, {1.0, 0.0}, {-2.0, 0.0}}, 2.0, 1e6);
  REQUIRE(traj.status == IntegrationStatus::Blowup);
  REQUIRE(traj.blowup.has_value());
  CHECK(traj.blowup->t_star_estimate == doctest::Approx(1.0).epsilon(2e-3));

  blowup::DetectOptions d;
  d.threshold = 1e6;
  const auto v = blowup::detect_and_classify(traj, d);
  REQUIRE(v.outcome == Outcome::FiniteTimeBreakdown);
  CHECK(v.reason == "blowup-detected");
  REQUIRE(v.t_star.has_value());
  CHECK(*v.t_star == doctest::Approx(1.0).epsilon(2e-3));
  // Real data: the imaginary slots stay identically zero and are neutral.
  CHECK(v.orthant == std::vector<int>{1, 0, 1, 0, -1, 0});
  REQUIRE(v.rate_exponent.has_value());
  CHECK(*v.rate_exponent == doctest::Approx(-1.0).epsilon(0.05));

  blowup::DetectOptions with_root = d;
  with_root.analytic_t_star = 1.0;
  const auto exact = blowup::detect_and_classify(traj, with_root);
  CHECK(*exact.t_star == 1.0);
}

TEST_CASE("horizon completion maps to smooth unless an invariant drifted") {
  const TrajectoryRecord traj =
      run_isotropic({{0.1, 0.0}, {0.2, 0.0}, {-0.3, 0.0}}, 1.0, 1e8);
  REQUIRE(traj.status == IntegrationStatus::Completed);

  const auto ok = blowup::detect_and_classify(traj, {});
  CHECK(ok.outcome == Outcome::GlobalSmooth);
  CHECK(ok.reason == "horizon-reached");
  CHECK_FALSE(ok.t_star.has_value());

  blowup::DetectOptions drifted;
  drifted.invariant_drift_exceeded = true;
  const auto bad = blowup::detect_and_classify(traj, drifted);
  CHECK(bad.outcome == Outcome::Inconclusive);
  CHECK(bad.reason == "invariant-drift");
}

TEST_CASE("abnormal integrator endings carry their own reasons") {
  TrajectoryRecord stalled;
  stalled.times = {0.0, 0.5};
  stalled.states = {Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  stalled.status = IntegrationStatus::StepUnderflow;
  const auto stiff = blowup::detect_and_classify(stalled, {});
  CHECK(stiff.outcome == Outcome::Inconclusive);
  CHECK(stiff.reason == "stiffness");

  stalled.status = IntegrationStatus::EventStop;
  const auto stopped = blowup::detect_and_classify(stalled, {});
  CHECK(stopped.outcome == Outcome::Inconclusive);
  CHECK(stopped.reason == "event-stop");

  CHECK_THROWS_AS(blowup::detect_and_classify(TrajectoryRecord{}, {}), std::invalid_argument);
}

namespace {

TrajectoryRecord constant_matrix_trajectory(const Eigen::MatrixXd& m0, int samples) {
  // Cancel the quadratic decay so the recorded matrix never moves.
  const auto freeze = [](const Eigen::MatrixXd& m, double) { return m * m; };
  IntegrationOptions opts;
  opts.sample_count = samples;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  return gradflow::integrate_matrix_riccati(m0, freeze, 0.0, 1.0, opts);
}

}  // namespace

TEST_CASE("regularity condition along a frozen matrix with uniform damping") {
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Zero(2, 2);
  m0(0, 0) = -3.0;
  m0(1, 1) = 1.0;
  const TrajectoryRecord traj = constant_matrix_trajectory(m0, 201);
  REQUIRE(traj.status == IntegrationStatus::Completed);

  const auto report = blowup::check_damping_condition(traj, -Eigen::MatrixXd::Identity(2, 2));
  REQUIRE(report.branches.size() == 2);
  CHECK_FALSE(report.unreliable);

  // Branches are kept in canonical spectral order: -3 first.
  const auto& contracting = report.branches[0];
  CHECK(contracting.lambda0.real() == doctest::Approx(-3.0));
  // c = -1 on this branch, so the running quantity is -3 (1 - e^{-t}).
  CHECK(contracting.min_condition ==
        doctest::Approx(-3.0 * (1.0 - std::exp(-1.0))).epsilon(1e-4));
  REQUIRE(contracting.crossed);
  REQUIRE(contracting.t_cross.has_value());
  CHECK(*contracting.t_cross == doctest::Approx(std::log(1.5)).epsilon(1e-3));

  const auto& expanding = report.branches[1];
  CHECK(expanding.lambda0.real() == doctest::Approx(1.0));
  CHECK_FALSE(expanding.crossed);
  CHECK(expanding.min_condition == doctest::Approx(0.0));
}

TEST_CASE("zero damping reduces the condition to lambda0 times t") {
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Zero(2, 2);
  m0(0, 0) = -0.5;
  m0(1, 1) = 0.3;
  IntegrationOptions opts;
  opts.sample_count = 101;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  const TrajectoryRecord traj = gradflow::integrate_matrix_riccati(m0, {}, 0.0, 1.0, opts);
  REQUIRE(traj.status == IntegrationStatus::Completed);

  const auto report = blowup::check_damping_condition(traj, Eigen::MatrixXd::Zero(2, 2));
  const auto& low = report.branches[0];
  CHECK(low.lambda0.real() == doctest::Approx(-0.5));
  CHECK(low.min_condition == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK_FALSE(low.crossed);
  CHECK(report.branches[1].min_condition == doctest::Approx(0.0));
}

TEST_CASE("ill-conditioned eigenvectors mark the damping check unreliable") {
  Eigen::MatrixXd m0(2, 2);
  m0 << 1.0, 1000.0, 0.0, 1.0 + 1e-9;
  const TrajectoryRecord traj = constant_matrix_trajectory(m0, 51);
  const auto report = blowup::check_damping_condition(traj, Eigen::MatrixXd::Zero(2, 2));
  CHECK(report.unreliable);

  CHECK_THROWS_AS(blowup::check_damping_condition(traj, Eigen::MatrixXd::Zero(3, 3)),
                  std::invalid_argument);
}

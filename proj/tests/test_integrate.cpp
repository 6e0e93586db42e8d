#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradflow/integrate.hpp"

using gradflow::IntegrationOptions;
using gradflow::IntegrationStatus;
using gradflow::TrajectoryRecord;

namespace {

const gradflow::OdeRhs square_rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
  dy.resize(1);
  dy(0) = y(0) * y(0);
};

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd y(1);
  y(0) = v;
  return y;
}

}  // namespace

TEST_CASE("quadratic growth from 1 blows up at t = 1") {
  IntegrationOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  opts.blowup_threshold = 1e8;
  const TrajectoryRecord traj = gradflow::integrate(square_rhs, scalar(1.0), 0.0, 2.0, opts);
  REQUIRE(traj.status == IntegrationStatus::Blowup);
  REQUIRE(traj.blowup.has_value());
  CHECK(traj.blowup->t_star_estimate == doctest::Approx(1.0).epsilon(0.01));
  CHECK(traj.blowup->orthant == std::vector<int>{1});
  CHECK(traj.blowup->terminal_norm >= 1e8);
}

TEST_CASE("quadratic decay from -1 reaches -1/101 at t = 100") {
  IntegrationOptions opts;
  opts.rel_tol = 1e-12;
  opts.abs_tol = 1e-14;
  const TrajectoryRecord traj = gradflow::integrate(square_rhs, scalar(-1.0), 0.0, 100.0, opts);
  REQUIRE(traj.status == IntegrationStatus::Completed);
  CHECK(traj.times.back() == doctest::Approx(100.0));
  CHECK(traj.states.back()(0) == doctest::Approx(-1.0 / 101.0).epsilon(1e-8));
}

TEST_CASE("samples are uniformly spaced and hit the endpoints exactly") {
  IntegrationOptions opts;
  opts.sample_count = 11;
  const TrajectoryRecord traj = gradflow::integrate(square_rhs, scalar(-1.0), 0.0, 5.0, opts);
  REQUIRE(traj.size() == 11);
  for (int i = 0; i < 11; ++i) CHECK(traj.times[static_cast<size_t>(i)] == doctest::Approx(0.5 * i).epsilon(1e-14));
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == 5.0);
}

TEST_CASE("fixed-step convergence order of the embedded pair is at least 4") {
  // Harmonic oscillator with known solution (cos t, -sin t).
  const gradflow::OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2);
    dy(0) = y(1);
    dy(1) = -y(0);
  };
  Eigen::VectorXd y0(2);
  y0 << 1.0, 0.0;
  auto endpoint_error = [&](double h) {
    IntegrationOptions opts;
    opts.fixed_step = h;
    opts.sample_count = 2;
    const TrajectoryRecord traj = gradflow::integrate(rhs, y0, 0.0, 1.0, opts);
    const Eigen::VectorXd& yf = traj.states.back();
    return std::hypot(yf(0) - std::cos(1.0), yf(1) + std::sin(1.0));
  };
  const double e1 = endpoint_error(0.1);
  const double e2 = endpoint_error(0.05);
  REQUIRE(e2 > 0.0);
  const double order = std::log2(e1 / e2);
  CHECK(order > 4.0);
}

TEST_CASE("event stop condition halts the run") {
  IntegrationOptions opts;
  opts.stop_condition = [](double, const Eigen::VectorXd& y) { return y(0) <= -0.5; };
  const TrajectoryRecord traj = gradflow::integrate(square_rhs, scalar(-1.0), 0.0, 100.0, opts);
  REQUIRE(traj.status == IntegrationStatus::EventStop);
  // -1/(1+t) crosses -0.5 at t = 1.
  CHECK(traj.times.back() < 1.5);
  CHECK(traj.states.back()(0) <= -0.5);
}

TEST_CASE("non-finite right-hand side reports a failure status") {
  const gradflow::OdeRhs rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
    dy.resize(1);
    dy(0) = std::numeric_limits<double>::quiet_NaN();
  };
  const TrajectoryRecord traj = gradflow::integrate(rhs, scalar(1.0), 0.0, 1.0, {});
  CHECK(traj.status == IntegrationStatus::RhsFailure);
}

TEST_CASE("an unresolvable discontinuity drives the step size to underflow") {
  const gradflow::OdeRhs rhs = [](double t, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
    dy.resize(1);
    dy(0) = t < 1.0 ? 0.0 : 1e8;
  };
  IntegrationOptions opts;
  opts.rel_tol = 1e-13;
  opts.abs_tol = 1e-15;
  const TrajectoryRecord traj = gradflow::integrate(rhs, scalar(0.0), 0.0, 2.0, opts);
  CHECK(traj.status == IntegrationStatus::StepUnderflow);
  CHECK(traj.times.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("approach to a singularity is densely recorded in the tail") {
  IntegrationOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  opts.sample_count = 20;
  opts.blowup_threshold = 1e8;
  opts.tail_fraction = 1e-2;
  const TrajectoryRecord traj = gradflow::integrate(square_rhs, scalar(1.0), 0.0, 2.0, opts);
  REQUIRE(traj.status == IntegrationStatus::Blowup);
  // Everything from 1e6 upward is recorded step by step, which takes far
  // more samples than the uniform grid alone would produce.
  CHECK(traj.size() > 30);
  int tail = 0;
  for (const auto& y : traj.states)
    if (std::abs(y(0)) >= 1e6) ++tail;
  CHECK(tail >= 10);
}

TEST_CASE("matrix form: a nilpotent start is a fixed point of the unforced flow") {
  Eigen::MatrixXd m0(2, 2);
  m0 << 0.0, 1.0,
        0.0, 0.0;
  const TrajectoryRecord traj = gradflow::integrate_matrix_riccati(m0, {}, 0.0, 3.0, {});
  REQUIRE(traj.status == IntegrationStatus::Completed);
  const Eigen::MatrixXd mf = gradflow::unflatten(traj.states.back(), 2);
  CHECK((mf - m0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matrix states flatten row-major and round-trip") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0,
       3.0, 4.0;
  const Eigen::VectorXd y = gradflow::flatten(m);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 2.0);
  CHECK(y(2) == 3.0);
  CHECK(y(3) == 4.0);
  CHECK((gradflow::unflatten(y, 2) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("blowup-time fit recovers the pole of a synthetic 1/(1-t) record") {
  TrajectoryRecord traj;
  for (int i = 0; i < 12; ++i) {
    const double t = 0.90 + 0.005 * i;
    traj.times.push_back(t);
    traj.states.push_back(scalar(1.0 / (1.0 - t)));
  }
  traj.status = IntegrationStatus::Blowup;
  CHECK(gradflow::fit_blowup_time(traj, 10) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("matrix form honours a forcing term") {
  // dM/dt = -M^2 + M^2 = 0 keeps any start fixed.
  Eigen::MatrixXd m0(2, 2);
  m0 << 0.3, -0.2,
        0.1, 0.4;
  const auto forcing = [](const Eigen::MatrixXd& m, double) { return Eigen::MatrixXd(m * m); };
  const TrajectoryRecord traj = gradflow::integrate_matrix_riccati(m0, forcing, 0.0, 2.0, {});
  REQUIRE(traj.status == IntegrationStatus::Completed);
  CHECK((gradflow::unflatten(traj.states.back(), 2) - m0).cwiseAbs().maxCoeff() < 1e-9);
}

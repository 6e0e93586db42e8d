#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gradflow/integrate.hpp"
#include "gradflow/spectral.hpp"

namespace gradflow::models {

enum class ModelKind {
  LinearDamping,
  ViscousDusty2D,
  RestrictedEuler,
  RestrictedEulerPoisson,
  TraceDynamics,
  RE3DComplexPair,
  REP2DGamma,
};

const char* to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(const std::string& name);

/// Parameters of one model instance. Fields not used by the given kind are
/// ignored.
struct ModelSpec {
  ModelKind kind = ModelKind::RestrictedEuler;
  int n = 3;
  double theta = 1.0;  ///< time scaling of the isotropic forcing
  double k = 1.0;      ///< Poisson coupling strength
  double beta = 1.0;   ///< scalar damping, C = -beta I
  std::optional<Eigen::MatrixXd> damping;  ///< full damping matrix C
  double nu = 0.02;    ///< viscosity for the 2-D grid model

  void validate() const;  ///< throws std::invalid_argument
};

/// Thrown by closed-form evaluators when the requested time is at or past a
/// finite-time singularity; carries the singular time.
struct BlowupAtTime : std::runtime_error {
  double t_root;
  explicit BlowupAtTime(double t)
      : std::runtime_error("solution blows up at t = " + std::to_string(t)), t_root(t) {}
};

/// d lambda_i/dt = theta * (-lambda_i^2 + (1/n) sum_k lambda_k^2).
std::vector<Complex> rhs_restricted_euler(const std::vector<Complex>& lambdas, double theta = 1.0);

struct REPState {
  double rho = 1.0;
  std::vector<Complex> lambdas;
};

/// rho' = -rho sum_j lambda_j;  lambda_i' = -lambda_i^2 + k rho / n.
REPState rhs_rep(const REPState& s, double k);

/// Derivative of the trace state m = (m_2..m_n):
/// m_k' = -k m_{k+1} + (k/n) m_{k-1} m_2, with m_1 = 0 and m_{n+1} supplied
/// by the Cayley-Hamilton closure. Requires n >= 3.
std::vector<double> rhs_trace(const std::vector<double>& m, int n);

/// (beta', gamma') for the conjugate-pair coordinates lambda_{1,2} =
/// gamma +- i beta of the 3-D isotropic system: (-2 beta gamma,
/// gamma^2 + beta^2 / 3).
std::array<double, 2> rhs_re3d_complex_pair(double beta, double gamma);

/// Exact damped spectral solution lambda(t) = lambda0 b(t) / (1 + lambda0
/// B(t)) with B(t) the running integral of b. Throws BlowupAtTime when the
/// denominator magnitude falls below 1e-12, carrying the bisected root of
/// the (real) denominator.
Complex damping_closed_form(Complex lambda0, const std::function<Complex(double)>& b_integral,
                            const std::function<Complex(double)>& b, double t);

/// Specialisation to constant scalar damping C = -beta I, where
/// b(t) = exp(-beta t).
Complex damping_closed_form_scalar(Complex lambda0, double beta, double t);

/// dM/dt = -M^2 + C M.
Eigen::MatrixXd rhs_damping_matrix(const Eigen::MatrixXd& m, const Eigen::MatrixXd& c);

/// Second derivative of the 2-D dispersion indicator:
/// Gamma'' = k rho0 ln(Gamma) + 2 Lambda0 + k rho0. Throws std::domain_error
/// for Gamma <= 0.
double rep2d_gamma_rhs(double gamma, double k, double rho0, double lambda0_product);

/// A model realised as a packed real first-order system ready for the
/// integrator, with component labels for reporting.
struct PackedSystem {
  OdeRhs rhs;
  Eigen::VectorXd y0;
  std::vector<std::string> component_names;
  /// Packed range holding the spectral block as (Re, Im) pairs; count is the
  /// number of complex values. Empty (count 0) when the model state carries
  /// no spectrum.
  int lambda_begin = 0;
  int lambda_count = 0;
};

PackedSystem pack_restricted_euler(const Spectrum& s0, double theta = 1.0);
PackedSystem pack_rep(const Spectrum& s0, double rho0, double k);
PackedSystem pack_trace(const std::vector<double>& m0, int n);
PackedSystem pack_re3d_complex_pair(double beta0, double gamma0);
/// State (Gamma, Gamma') with Gamma(0) = 1, Gamma'(0) = d0.
PackedSystem pack_rep2d_gamma(double d0, double lambda0_product, double k, double rho0);
PackedSystem pack_damping_matrix(const Eigen::MatrixXd& m0, const Eigen::MatrixXd& c);
/// Scalar spectral damping lambda' = -lambda^2 - beta lambda, packed (Re, Im).
PackedSystem pack_damping_spectral(Complex lambda0, double beta);

/// (Re, Im) interleaved packing of a complex vector.
Eigen::VectorXd pack_complex(const std::vector<Complex>& v);
std::vector<Complex> unpack_complex(const Eigen::VectorXd& y, int begin, int count);

}  // namespace gradflow::models

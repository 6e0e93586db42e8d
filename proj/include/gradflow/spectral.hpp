#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace gradflow {

using Complex = std::complex<double>;

/// Dimension cap for all tensor/spectrum operations.
inline constexpr int kMaxDimension = 16;

/// Eigenvector-matrix condition number above which an eigensystem is treated
/// as numerically defective and downstream consumers must not trust the
/// individual eigenvector branches.
inline constexpr double kDefectiveConditionThreshold = 1e8;

/// Ordered collection of eigenvalues of a velocity-gradient tensor.
///
/// Values are kept in the order given at construction; the canonical order
/// (ascending by real part, then imaginary part) is produced by
/// sort_spectrum() and by eigendecompose(). The incompressible flag is an
/// assertion by the caller: when set, |sum of values| must not exceed
/// `trace_tol` at construction time.
struct Spectrum {
  std::vector<Complex> values;
  bool incompressible = false;

  Spectrum() = default;
  explicit Spectrum(std::vector<Complex> vals, bool incompressible_flag = false,
                    double trace_tol = 1e-10);

  int n() const { return static_cast<int>(values.size()); }
  Complex trace() const;
  double sup_norm() const;

  /// True when every value has |Im| <= tol.
  bool is_real(double tol = 0.0) const;

  /// True when the values can be partitioned into conjugate pairs (real
  /// values pairing with themselves) within tol.
  bool conjugate_closed(double tol = 1e-9) const;
};

/// Square real velocity-gradient tensor. Construction validates shape,
/// finiteness and the dimension cap.
struct GradientTensor {
  Eigen::MatrixXd m;

  explicit GradientTensor(Eigen::MatrixXd mat);

  int n() const { return static_cast<int>(m.rows()); }
  double trace() const { return m.trace(); }

  /// Max |m_ij - m_ji| at or below tol.
  bool is_symmetric(double tol = 1e-12) const;
};

/// Eigenvalues of g sorted ascending by (Re, Im). Verifies that the
/// characteristic polynomial rebuilt from the computed eigenvalues matches
/// the one computed directly from the matrix to within 1e-8 relative to the
/// coefficient scale, and throws std::runtime_error otherwise.
Spectrum eigendecompose(const GradientTensor& g);

/// Eigenvalues plus right/left eigenvector matrices. Left rows are the
/// inverse of the right matrix, so l_i . r_j = delta_ij by construction and
/// every pair carries the normalisation l_i . r_i = 1.
struct EigenSystem {
  Spectrum spectrum;
  Eigen::MatrixXcd right;  ///< columns are right eigenvectors r_i
  Eigen::MatrixXcd left;   ///< rows are left eigenvectors l_i
  double condition = 0.0;  ///< 2-norm condition number of `right`
  bool near_defective = false;
};

EigenSystem eigensystem(const GradientTensor& g);

/// Sorts ascending by (Re, Im).
void sort_spectrum(std::vector<Complex>& values);

/// Permutation p such that cur[p[i]] continues the branch that prev[i] lies
/// on, using nearest-neighbour matching in the complex plane. When any
/// assignment is ambiguous within tie_tol the identity permutation is
/// returned, which for canonically sorted inputs means sorted order.
std::vector<int> match_to_previous(const std::vector<Complex>& prev,
                                   const std::vector<Complex>& cur,
                                   double tie_tol = 1e-9);

/// Monic coefficients [1, c1, ..., cn] of prod_i (x - r_i).
std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots);

/// Coefficients [1, c1, ..., cn] of det(xI - M), from traces of matrix
/// powers via the Newton recurrence.
std::vector<double> char_poly(const Eigen::MatrixXd& m);

}  // namespace gradflow

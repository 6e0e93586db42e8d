#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gradflow::viscous2d {

/// Default bound on the discrete vorticity sup-norm for a field that is
/// supposed to be irrotational.
inline constexpr double kRotTol = 1e-6;

/// Velocity field (u, v) on an N x N periodic grid over [0, box)^2 with
/// node spacing h = box / N.
struct Grid2DField {
  int n = 0;
  double box = 0.0;
  double h = 0.0;
  double nu = 0.0;
  double t = 0.0;
  Eigen::ArrayXXd u, v;  ///< indexed (i, j) for node (i h, j h)

  double vorticity_sup() const;  ///< sup |Dx v - Dy u| (centered differences)
  double max_speed() const;      ///< sup over nodes of max(|u|, |v|)
};

using ScalarField = std::function<double(double x, double y)>;

/// u = Dx phi0, v = Dy phi0 with centered differences of the sampled
/// potential, so the discrete vorticity vanishes identically by
/// construction. phi0 should be periodic-compatible or supported well
/// inside the box.
Grid2DField init_from_potential(const ScalarField& phi0, double nu, int n, double box);

/// min(h^2 / (4 nu), h / (4 max speed)); the advective part is skipped for
/// a field at rest.
double stable_dt(const Grid2DField& f);

/// One explicit step of the conservative form du/dt + D(|u|^2/2) = nu Lap u
/// with centered flux differences and the 5-point Laplacian. With
/// enforcement on, a dt above the stability bound throws.
void step(Grid2DField& f, double dt, bool enforce_cfl = true);

/// Pointwise eigenvalues of the (symmetric) velocity gradient.
struct EigenField {
  Eigen::ArrayXXd lam1, lam2;  ///< lam1 <= lam2 pointwise
};

/// Per-node eigenvalues via s = ux + vy, g = sqrt((ux - vy)^2 + (uy + vx)^2),
/// lam_{1,2} = (s -+ g)/2. Refuses fields whose vorticity exceeds rot_tol,
/// since realness of the eigenvalues is only guaranteed for symmetric
/// gradients.
EigenField eigen_field(const Grid2DField& f, double rot_tol = kRotTol);

/// h^2 * sum over nodes of (lam2 - lam1).
double l1_gap(const EigenField& ef, double h);

/// Centered-difference gradient of a scalar node array (periodic).
std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> grid_gradient(const Eigen::ArrayXXd& f, double h);

/// min over y of |x - y|^2 / (2 t) + phi0(y), by exhaustive search over
/// search_n x search_n nodes of [0, box)^2 (minimum-image distance)
/// followed by coordinate-wise golden-section refinement. Requires t > 0.
double hopf_lax(const ScalarField& phi0, double x, double y, double t, double box, int search_n);

/// hopf_lax evaluated at every node of an n x n grid. The node scan is
/// windowed: a minimiser further than sqrt(2 t osc(phi0)) from the target
/// cannot beat y = x, so only nearby nodes are visited.
Eigen::ArrayXXd hopf_lax_field(const ScalarField& phi0, double t, int n, double box);

struct ViscosityRow {
  double nu = 0.0;
  double l1_error = 0.0;
  bool ok = false;
};

/// For each viscosity in the decreasing list (>= 3 entries), runs the
/// solver from init_from_potential(phi0) to time t_end and reports the
/// discrete L1 distance between the computed velocity and the gradient of
/// the Hopf-Lax solution. A run that fails is marked not-ok and the study
/// continues.
std::vector<ViscosityRow> vanishing_viscosity_study(const ScalarField& phi0,
                                                    const std::vector<double>& nu_list,
                                                    double t_end, int n, double box);

}  // namespace gradflow::viscous2d

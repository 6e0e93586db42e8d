#include "gradflow/viscous2d.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gradflow::viscous2d {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Periodic centered difference along the first index.
Eigen::ArrayXXd diff_x(const Eigen::ArrayXXd& a, double h) {
  const int n = static_cast<int>(a.rows());
  Eigen::ArrayXXd out(n, n);
  const double inv = 1.0 / (2.0 * h);
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1 == n) ? 0 : i + 1;
    const int im = (i == 0) ? n - 1 : i - 1;
    for (int j = 0; j < n; ++j) out(i, j) = (a(ip, j) - a(im, j)) * inv;
  }
  return out;
}

Eigen::ArrayXXd diff_y(const Eigen::ArrayXXd& a, double h) {
  const int n = static_cast<int>(a.rows());
  Eigen::ArrayXXd out(n, n);
  const double inv = 1.0 / (2.0 * h);
  for (int j = 0; j < n; ++j) {
    const int jp = (j + 1 == n) ? 0 : j + 1;
    const int jm = (j == 0) ? n - 1 : j - 1;
    for (int i = 0; i < n; ++i) out(i, j) = (a(i, jp) - a(i, jm)) * inv;
  }
  return out;
}

Eigen::ArrayXXd laplacian(const Eigen::ArrayXXd& a, double h) {
  const int n = static_cast<int>(a.rows());
  Eigen::ArrayXXd out(n, n);
  const double inv = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1 == n) ? 0 : i + 1;
    const int im = (i == 0) ? n - 1 : i - 1;
    for (int j = 0; j < n; ++j) {
      const int jp = (j + 1 == n) ? 0 : j + 1;
      const int jm = (j == 0) ? n - 1 : j - 1;
      out(i, j) = (a(ip, j) + a(im, j) + a(i, jp) + a(i, jm) - 4.0 * a(i, j)) * inv;
    }
  }
  return out;
}

void validate_grid(int n, double box, double nu) {
  if (n < 4) throw std::invalid_argument("grid size must be at least 4");
  if (!(box > 0.0) || !std::isfinite(box)) throw std::invalid_argument("box length must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("viscosity must be positive");
}

// Displacement d reduced to the nearest periodic image in [-box/2, box/2).
double min_image(double d, double box) {
  d = std::fmod(d, box);
  if (d < -0.5 * box) d += box;
  if (d >= 0.5 * box) d -= box;
  return d;
}

// Golden-section minimisation of g on [lo, hi].
double golden_min(const std::function<double(double)>& g, double lo, double hi, double* val_out) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - (b - a) * kInvPhi;
  double d = a + (b - a) * kInvPhi;
  double fc = g(c), fd = g(d);
  for (int it = 0; it < 60 && (b - a) > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * kInvPhi;
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * kInvPhi;
      fd = g(d);
    }
  }
  const double best = 0.5 * (a + b);
  if (val_out != nullptr) *val_out = g(best);
  return best;
}

// Cost |x - y|^2/(2t) + phi0(y) with minimum-image displacement, followed by
// alternating single-coordinate golden-section passes around the seed.
double refine_candidate(const ScalarField& phi0, double x, double y, double t, double box,
                        double y1, double y2, double radius) {
  double value = 0.0;
  for (int pass = 0; pass < 3; ++pass) {
    const double fixed2 = y2;
    y1 = golden_min(
        [&](double s) {
          const double dx = min_image(x - s, box);
          const double dy = min_image(y - fixed2, box);
          return (dx * dx + dy * dy) / (2.0 * t) + phi0(s, fixed2);
        },
        y1 - radius, y1 + radius, nullptr);
    const double fixed1 = y1;
    y2 = golden_min(
        [&](double s) {
          const double dx = min_image(x - fixed1, box);
          const double dy = min_image(y - s, box);
          return (dx * dx + dy * dy) / (2.0 * t) + phi0(fixed1, s);
        },
        y2 - radius, y2 + radius, &value);
  }
  return value;
}

}  // namespace

double Grid2DField::vorticity_sup() const {
  if (n == 0) return 0.0;
  return (diff_x(v, h) - diff_y(u, h)).abs().maxCoeff();
}

double Grid2DField::max_speed() const {
  if (n == 0) return 0.0;
  return std::max(u.abs().maxCoeff(), v.abs().maxCoeff());
}

Grid2DField init_from_potential(const ScalarField& phi0, double nu, int n, double box) {
  validate_grid(n, box, nu);
  Grid2DField f;
  f.n = n;
  f.box = box;
  f.h = box / n;
  f.nu = nu;
  f.t = 0.0;
  Eigen::ArrayXXd phi(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) phi(i, j) = phi0(i * f.h, j * f.h);
  if (!phi.isFinite().all()) throw std::invalid_argument("potential samples must be finite");
  f.u = diff_x(phi, f.h);
  f.v = diff_y(phi, f.h);
  return f;
}

double stable_dt(const Grid2DField& f) {
  double bound = f.h * f.h / (4.0 * f.nu);
  const double speed = f.max_speed();
  if (speed > 0.0) bound = std::min(bound, f.h / (4.0 * speed));
  return bound;
}

void step(Grid2DField& f, double dt, bool enforce_cfl) {
  if (f.n == 0) throw std::invalid_argument("cannot step an empty field");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step size must be positive");
  if (enforce_cfl) {
    const double bound = stable_dt(f);
    if (dt > bound * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "step size " << dt << " exceeds the stability bound " << bound
          << " = min(h^2/(4 nu), h/(4 max speed))";
      throw std::runtime_error(msg.str());
    }
  }
  const Eigen::ArrayXXd energy = 0.5 * (f.u * f.u + f.v * f.v);
  const Eigen::ArrayXXd du = -diff_x(energy, f.h) + f.nu * laplacian(f.u, f.h);
  const Eigen::ArrayXXd dv = -diff_y(energy, f.h) + f.nu * laplacian(f.v, f.h);
  f.u += dt * du;
  f.v += dt * dv;
  f.t += dt;
  if (!f.u.isFinite().all() || !f.v.isFinite().all())
    throw std::runtime_error("field became non-finite; the run is unstable");
}

EigenField eigen_field(const Grid2DField& f, double rot_tol) {
  const double rot = f.vorticity_sup();
  if (rot > rot_tol) {
    std::ostringstream msg;
    msg << "vorticity sup " << rot << " exceeds " << rot_tol
        << "; eigenvalues are only guaranteed real for gradient fields";
    throw std::domain_error(msg.str());
  }
  const Eigen::ArrayXXd ux = diff_x(f.u, f.h);
  const Eigen::ArrayXXd uy = diff_y(f.u, f.h);
  const Eigen::ArrayXXd vx = diff_x(f.v, f.h);
  const Eigen::ArrayXXd vy = diff_y(f.v, f.h);
  const Eigen::ArrayXXd s = ux + vy;
  const Eigen::ArrayXXd g = ((ux - vy).square() + (uy + vx).square()).sqrt();
  EigenField ef;
  ef.lam1 = 0.5 * (s - g);
  ef.lam2 = 0.5 * (s + g);
  return ef;
}

double l1_gap(const EigenField& ef, double h) {
  return h * h * (ef.lam2 - ef.lam1).sum();
}

std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> grid_gradient(const Eigen::ArrayXXd& f, double h) {
  return {diff_x(f, h), diff_y(f, h)};
}

double hopf_lax(const ScalarField& phi0, double x, double y, double t, double box, int search_n) {
  if (!(t > 0.0)) throw std::invalid_argument("hopf_lax requires t > 0");
  if (search_n < 4) throw std::invalid_argument("search grid too coarse");
  if (!(box > 0.0)) throw std::invalid_argument("box length must be positive");
  const double h = box / search_n;
  double best = std::numeric_limits<double>::infinity();
  double by1 = x, by2 = y;
  for (int i = 0; i < search_n; ++i) {
    for (int j = 0; j < search_n; ++j) {
      const double y1 = i * h, y2 = j * h;
      const double dx = min_image(x - y1, box);
      const double dy = min_image(y - y2, box);
      const double cost = (dx * dx + dy * dy) / (2.0 * t) + phi0(y1, y2);
      if (cost < best) {
        best = cost;
        by1 = y1;
        by2 = y2;
      }
    }
  }
  return std::min(best, refine_candidate(phi0, x, y, t, box, by1, by2, h));
}

Eigen::ArrayXXd hopf_lax_field(const ScalarField& phi0, double t, int n, double box) {
  if (!(t > 0.0)) throw std::invalid_argument("hopf_lax requires t > 0");
  if (n < 4) throw std::invalid_argument("grid too coarse");
  if (!(box > 0.0)) throw std::invalid_argument("box length must be positive");
  const double h = box / n;
  Eigen::ArrayXXd phi(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) phi(i, j) = phi0(i * h, j * h);
  // Any minimiser satisfies |x - y|^2/(2t) <= osc(phi0), so nodes outside
  // that radius (plus one cell of slack) can never beat the best node.
  const double osc = phi.maxCoeff() - phi.minCoeff();
  const double radius = std::sqrt(std::max(2.0 * t * osc, 0.0)) + 2.0 * h;
  const int w = std::min(n / 2, static_cast<int>(radius / h) + 1);
  Eigen::ArrayXXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      int bi = i, bj = j;
      for (int di = -w; di <= w; ++di) {
        const int ii = wrap(i + di, n);
        const double dx = di * h;
        for (int dj = -w; dj <= w; ++dj) {
          const int jj = wrap(j + dj, n);
          const double dy = dj * h;
          const double cost = (dx * dx + dy * dy) / (2.0 * t) + phi(ii, jj);
          if (cost < best) {
            best = cost;
            bi = ii;
            bj = jj;
          }
        }
      }
      out(i, j) = std::min(best, refine_candidate(phi0, i * h, j * h, t, box, bi * h, bj * h, h));
    }
  }
  return out;
}

std::vector<ViscosityRow> vanishing_viscosity_study(const ScalarField& phi0,
                                                    const std::vector<double>& nu_list,
                                                    double t_end, int n, double box) {
  if (nu_list.size() < 3) throw std::invalid_argument("need at least 3 viscosities");
  for (size_t i = 0; i + 1 < nu_list.size(); ++i)
    if (!(nu_list[i] > nu_list[i + 1])) throw std::invalid_argument("viscosities must decrease");
  if (!(t_end > 0.0)) throw std::invalid_argument("study horizon must be positive");

  const double h = box / n;
  const Eigen::ArrayXXd limit_phi = hopf_lax_field(phi0, t_end, n, box);
  const auto [limit_u, limit_v] = grid_gradient(limit_phi, h);

  // All rows share one step-size cap (set by the most diffusive run) so the
  // error column differs only through the viscosity, not through the
  // time-stepping error.
  const double dt_cap = 0.9 * h * h / (4.0 * nu_list.front());

  auto run_one = [&](double nu) {
    ViscosityRow row;
    row.nu = nu;
    try {
      Grid2DField f = init_from_potential(phi0, nu, n, box);
      while (f.t < t_end) {
        const double dt = std::min({dt_cap, 0.9 * stable_dt(f), t_end - f.t});
        step(f, dt);
      }
      row.l1_error = h * h * ((f.u - limit_u).abs() + (f.v - limit_v).abs()).sum();
      row.ok = true;
    } catch (const std::exception&) {
      row.ok = false;
    }
    return row;
  };

  std::vector<std::future<ViscosityRow>> pending;
  pending.reserve(nu_list.size());
  for (double nu : nu_list) pending.push_back(std::async(std::launch::async, run_one, nu));
  std::vector<ViscosityRow> rows;
  rows.reserve(nu_list.size());
  for (auto& fut : pending) rows.push_back(fut.get());
  return rows;
}

}  // namespace gradflow::viscous2d

#include "gradflow/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gradflow {

namespace {

bool all_finite(const std::vector<Complex>& v) {
  return std::all_of(v.begin(), v.end(), [](const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

void check_dimension(int n, const char* what) {
  if (n < 2) {
    throw std::invalid_argument(std::string(what) + ": dimension must be >= 2, got " +
                                std::to_string(n));
  }
  if (n > kMaxDimension) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(n) +
                                " exceeds cap " + std::to_string(kMaxDimension));
  }
}

}  // namespace

Spectrum::Spectrum(std::vector<Complex> vals, bool incompressible_flag, double trace_tol)
    : values(std::move(vals)), incompressible(incompressible_flag) {
  check_dimension(n(), "Spectrum");
  if (!all_finite(values)) {
    throw std::invalid_argument("Spectrum: values must be finite");
  }
  if (incompressible) {
    const double s = std::abs(trace());
    if (s > trace_tol) {
      throw std::invalid_argument("Spectrum: incompressible flag set but |sum| = " +
                                  std::to_string(s) + " exceeds tolerance " +
                                  std::to_string(trace_tol));
    }
  }
}

Complex Spectrum::trace() const {
  return std::accumulate(values.begin(), values.end(), Complex{0.0, 0.0});
}

double Spectrum::sup_norm() const {
  double m = 0.0;
  for (const Complex& z : values) m = std::max(m, std::abs(z));
  return m;
}

bool Spectrum::is_real(double tol) const {
  return std::all_of(values.begin(), values.end(),
                     [tol](const Complex& z) { return std::abs(z.imag()) <= tol; });
}

bool Spectrum::conjugate_closed(double tol) const {
  std::vector<Complex> pool = values;
  while (!pool.empty()) {
    const Complex z = pool.back();
    pool.pop_back();
    if (std::abs(z.imag()) <= tol) continue;
    auto it = std::min_element(pool.begin(), pool.end(), [&](const Complex& a, const Complex& b) {
      return std::abs(a - std::conj(z)) < std::abs(b - std::conj(z));
    });
    if (it == pool.end() || std::abs(*it - std::conj(z)) > tol) return false;
    pool.erase(it);
  }
  return true;
}

GradientTensor::GradientTensor(Eigen::MatrixXd mat) : m(std::move(mat)) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("GradientTensor: matrix must be square");
  }
  check_dimension(static_cast<int>(m.rows()), "GradientTensor");
  if (!m.allFinite()) {
    throw std::invalid_argument("GradientTensor: entries must be finite");
  }
}

bool GradientTensor::is_symmetric(double tol) const {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

void sort_spectrum(std::vector<Complex>& values) {
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> c{Complex{1.0, 0.0}};
  for (const Complex& r : roots) {
    c.push_back(Complex{0.0, 0.0});
    for (size_t k = c.size() - 1; k >= 1; --k) c[k] -= r * c[k - 1];
  }
  return c;
}

std::vector<double> char_poly(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<double> p(n + 1);  // power sums tr(M^k), p[0] unused
  Eigen::MatrixXd mk = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    mk = mk * m;
    p[k] = mk.trace();
  }
  std::vector<double> c(n + 1);
  c[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    double s = p[k];
    for (int i = 1; i < k; ++i) s += c[i] * p[k - i];
    c[k] = -s / k;
  }
  return c;
}

Spectrum eigendecompose(const GradientTensor& g) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(g.m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecompose: eigenvalue iteration failed to converge");
  }
  std::vector<Complex> vals(g.n());
  for (int i = 0; i < g.n(); ++i) vals[i] = solver.eigenvalues()(i);
  sort_spectrum(vals);

  const std::vector<Complex> rebuilt = poly_from_roots(vals);
  const std::vector<double> direct = char_poly(g.m);
  double scale = 1.0;
  for (double c : direct) scale = std::max(scale, std::abs(c));
  for (size_t k = 0; k < direct.size(); ++k) {
    const double resid = std::abs(rebuilt[k] - Complex{direct[k], 0.0});
    if (resid > 1e-8 * scale) {
      throw std::runtime_error("eigendecompose: characteristic polynomial residual " +
                               std::to_string(resid) + " exceeds 1e-8 * " +
                               std::to_string(scale));
    }
  }
  return Spectrum{std::move(vals)};
}

EigenSystem eigensystem(const GradientTensor& g) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(g.m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigensystem: eigenvalue iteration failed to converge");
  }
  const int n = g.n();
  std::vector<Complex> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = solver.eigenvalues()(i);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (vals[a].real() != vals[b].real()) return vals[a].real() < vals[b].real();
    return vals[a].imag() < vals[b].imag();
  });

  EigenSystem sys;
  std::vector<Complex> sorted(n);
  sys.right.resize(n, n);
  for (int i = 0; i < n; ++i) {
    sorted[i] = vals[order[i]];
    sys.right.col(i) = solver.eigenvectors().col(order[i]);
  }
  sys.spectrum = Spectrum{std::move(sorted)};

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys.right);
  const double smin = svd.singularValues()(n - 1);
  const double smax = svd.singularValues()(0);
  sys.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  sys.near_defective = !(sys.condition < kDefectiveConditionThreshold);
  sys.left = sys.right.inverse();
  return sys;
}

std::vector<int> match_to_previous(const std::vector<Complex>& prev,
                                   const std::vector<Complex>& cur, double tie_tol) {
  if (prev.size() != cur.size()) {
    throw std::invalid_argument("match_to_previous: size mismatch");
  }
  const int n = static_cast<int>(prev.size());
  std::vector<int> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  if (n == 1) return identity;

  // A branch assignment is only trusted when, for every previous value, the
  // best candidate beats the runner-up by a clear margin.
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    for (int j = 0; j < n; ++j) {
      const double d = std::abs(cur[j] - prev[i]);
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    if (second - best < tie_tol) return identity;
  }

  struct Cand {
    double d;
    int i, j;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cands.push_back({std::abs(cur[j] - prev[i]), i, j});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });

  std::vector<int> perm(n, -1);
  std::vector<bool> used(n, false);
  int assigned = 0;
  for (const Cand& c : cands) {
    if (perm[c.i] >= 0 || used[c.j]) continue;
    perm[c.i] = c.j;
    used[c.j] = true;
    if (++assigned == n) break;
  }
  return perm;
}

}  // namespace gradflow

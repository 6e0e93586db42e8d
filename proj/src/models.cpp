#include "gradflow/models.hpp"

#include <cmath>
#include <limits>

#include "gradflow/invariants.hpp"

namespace gradflow::models {

namespace {

constexpr double kDenomTol = 1e-12;

void check_n(int n, int lo, int hi, const char* what) {
  if (n < lo || n > hi) {
    throw std::invalid_argument(std::string(what) + ": n = " + std::to_string(n) +
                                " outside [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                "]");
  }
}

// Root of the real part of 1 + lambda0 * B(s) on [0, t]; the denominator
// starts at 1, so a vanishing magnitude means a sign change (or tangency)
// of the real part along the way.
double bisect_denominator_root(Complex lambda0, const std::function<Complex(double)>& b_integral,
                               double t) {
  const auto g = [&](double s) { return (1.0 + lambda0 * b_integral(s)).real(); };
  const int scan = 256;
  double lo = 0.0, hi = t;
  bool bracketed = false;
  double prev_s = 0.0, prev_g = g(0.0);
  for (int i = 1; i <= scan; ++i) {
    const double s = t * static_cast<double>(i) / scan;
    const double gs = g(s);
    if (prev_g > 0.0 && gs <= 0.0) {
      lo = prev_s;
      hi = s;
      bracketed = true;
      break;
    }
    prev_s = s;
    prev_g = gs;
  }
  if (!bracketed) return t;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearDamping: return "linear_damping";
    case ModelKind::ViscousDusty2D: return "viscous_dusty_2d";
    case ModelKind::RestrictedEuler: return "restricted_euler";
    case ModelKind::RestrictedEulerPoisson: return "restricted_euler_poisson";
    case ModelKind::TraceDynamics: return "trace_dynamics";
    case ModelKind::RE3DComplexPair: return "re3d_complex_pair";
    case ModelKind::REP2DGamma: return "rep2d_gamma";
  }
  return "unknown";
}

std::optional<ModelKind> model_kind_from_string(const std::string& name) {
  for (ModelKind k :
       {ModelKind::LinearDamping, ModelKind::ViscousDusty2D, ModelKind::RestrictedEuler,
        ModelKind::RestrictedEulerPoisson, ModelKind::TraceDynamics, ModelKind::RE3DComplexPair,
        ModelKind::REP2DGamma}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

void ModelSpec::validate() const {
  switch (kind) {
    case ModelKind::LinearDamping:
      check_n(n, 2, kMaxDimension, "linear_damping");
      if (damping) {
        if (damping->rows() != n || damping->cols() != n) {
          throw std::invalid_argument("linear_damping: damping matrix must be n x n");
        }
        if (!damping->allFinite()) {
          throw std::invalid_argument("linear_damping: damping matrix must be finite");
        }
      }
      break;
    case ModelKind::ViscousDusty2D:
      check_n(n, 2, 2, "viscous_dusty_2d");
      if (!(nu > 0.0)) throw std::invalid_argument("viscous_dusty_2d: viscosity must be positive");
      break;
    case ModelKind::RestrictedEuler:
      check_n(n, 2, kMaxDimension, "restricted_euler");
      if (!(theta > 0.0)) throw std::invalid_argument("restricted_euler: theta must be positive");
      break;
    case ModelKind::RestrictedEulerPoisson:
      check_n(n, 2, kMaxDimension, "restricted_euler_poisson");
      if (!std::isfinite(k)) throw std::invalid_argument("restricted_euler_poisson: bad coupling");
      break;
    case ModelKind::TraceDynamics:
      check_n(n, 3, kMaxDimension, "trace_dynamics");
      break;
    case ModelKind::RE3DComplexPair:
      check_n(n, 3, 3, "re3d_complex_pair");
      break;
    case ModelKind::REP2DGamma:
      check_n(n, 2, 2, "rep2d_gamma");
      if (!std::isfinite(k)) throw std::invalid_argument("rep2d_gamma: bad coupling");
      break;
  }
}

std::vector<Complex> rhs_restricted_euler(const std::vector<Complex>& lambdas, double theta) {
  const size_t n = lambdas.size();
  if (n < 2) throw std::invalid_argument("rhs_restricted_euler: need at least two eigenvalues");
  Complex mean_sq{0.0, 0.0};
  for (const Complex& l : lambdas) mean_sq += l * l;
  mean_sq /= static_cast<double>(n);
  std::vector<Complex> d(n);
  for (size_t i = 0; i < n; ++i) d[i] = theta * (-lambdas[i] * lambdas[i] + mean_sq);
  return d;
}

REPState rhs_rep(const REPState& s, double k) {
  const size_t n = s.lambdas.size();
  if (n < 2) throw std::invalid_argument("rhs_rep: need at least two eigenvalues");
  Complex div{0.0, 0.0};
  for (const Complex& l : s.lambdas) div += l;
  // The density is real; for conjugate-closed spectra the divergence is real
  // up to rounding, so only its real part drives rho.
  REPState d;
  d.rho = -s.rho * div.real();
  d.lambdas.resize(n);
  const double force = k * s.rho / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) d.lambdas[i] = -s.lambdas[i] * s.lambdas[i] + force;
  return d;
}

std::vector<double> rhs_trace(const std::vector<double>& m, int n) {
  const invariants::TraceVector tv(n, m);
  const double m_np1 = invariants::close_trace(tv);
  const double m2 = tv.at(2);
  std::vector<double> d(static_cast<size_t>(n - 1));
  for (int k = 2; k <= n; ++k) {
    const double next = k == n ? m_np1 : tv.at(k + 1);
    d[static_cast<size_t>(k - 2)] =
        -k * next + (static_cast<double>(k) / n) * tv.at(k - 1) * m2;
  }
  return d;
}

std::array<double, 2> rhs_re3d_complex_pair(double beta, double gamma) {
  return {-2.0 * beta * gamma, gamma * gamma + beta * beta / 3.0};
}

Complex damping_closed_form(Complex lambda0, const std::function<Complex(double)>& b_integral,
                            const std::function<Complex(double)>& b, double t) {
  if (!b_integral || !b) throw std::invalid_argument("damping_closed_form: missing b callbacks");
  const Complex denom = 1.0 + lambda0 * b_integral(t);
  // The solution is the quotient lambda0*b / denom, so it is singular only
  // when the denominator is small relative to the numerator; comparing against
  // an absolute floor would misfire on decaying branches where both vanish.
  if (std::abs(denom) < kDenomTol * std::abs(lambda0 * b(t))) {
    throw BlowupAtTime(bisect_denominator_root(lambda0, b_integral, t));
  }
  return lambda0 * b(t) / denom;
}

Complex damping_closed_form_scalar(Complex lambda0, double beta, double t) {
  const auto b = [beta](double s) { return Complex{std::exp(-beta * s), 0.0}; };
  const auto b_int = [beta](double s) {
    return Complex{beta == 0.0 ? s : (1.0 - std::exp(-beta * s)) / beta, 0.0};
  };
  if (beta == 0.0) return damping_closed_form(lambda0, b_int, b, t);
  // Scale the quotient by beta and group the constant terms first:
  // lambda = lambda0*b*beta / ((beta + lambda0) - lambda0*b). This keeps the
  // denominator fully accurate on decaying branches where the generic
  // 1 + lambda0*B form cancels catastrophically (e.g. lambda0 = -beta, where
  // the grouped denominator reduces to beta*b exactly).
  const Complex bt = b(t);
  const Complex denom = (beta + lambda0) - lambda0 * bt;
  if (std::abs(denom) < kDenomTol * std::abs(lambda0 * bt * beta)) {
    throw BlowupAtTime(bisect_denominator_root(lambda0, b_int, t));
  }
  return lambda0 * bt * beta / denom;
}

Eigen::MatrixXd rhs_damping_matrix(const Eigen::MatrixXd& m, const Eigen::MatrixXd& c) {
  if (m.rows() != m.cols() || c.rows() != c.cols() || m.rows() != c.rows()) {
    throw std::invalid_argument("rhs_damping_matrix: M and C must be square and congruent");
  }
  return -(m * m) + c * m;
}

double rep2d_gamma_rhs(double gamma, double k, double rho0, double lambda0_product) {
  if (!(gamma > 0.0)) {
    throw std::domain_error("rep2d_gamma_rhs: indicator must be positive, got " +
                            std::to_string(gamma));
  }
  return k * rho0 * std::log(gamma) + 2.0 * lambda0_product + k * rho0;
}

Eigen::VectorXd pack_complex(const std::vector<Complex>& v) {
  Eigen::VectorXd y(2 * static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    y(2 * static_cast<Eigen::Index>(i)) = v[i].real();
    y(2 * static_cast<Eigen::Index>(i) + 1) = v[i].imag();
  }
  return y;
}

std::vector<Complex> unpack_complex(const Eigen::VectorXd& y, int begin, int count) {
  if (begin < 0 || begin + 2 * count > y.size()) {
    throw std::invalid_argument("unpack_complex: range out of bounds");
  }
  std::vector<Complex> v(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    v[static_cast<size_t>(i)] = Complex{y(begin + 2 * i), y(begin + 2 * i + 1)};
  }
  return v;
}

namespace {

std::vector<std::string> lambda_names(int n, int first_index) {
  std::vector<std::string> names;
  for (int i = first_index; i < first_index + n; ++i) {
    names.push_back("re_lambda" + std::to_string(i));
    names.push_back("im_lambda" + std::to_string(i));
  }
  return names;
}

}  // namespace

PackedSystem pack_restricted_euler(const Spectrum& s0, double theta) {
  const int n = s0.n();
  PackedSystem sys;
  sys.y0 = pack_complex(s0.values);
  sys.component_names = lambda_names(n, 1);
  sys.lambda_begin = 0;
  sys.lambda_count = n;
  sys.rhs = [n, theta](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const std::vector<Complex> l = unpack_complex(y, 0, n);
    dy = pack_complex(rhs_restricted_euler(l, theta));
  };
  return sys;
}

PackedSystem pack_rep(const Spectrum& s0, double rho0, double k) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("pack_rep: density must be positive");
  const int n = s0.n();
  PackedSystem sys;
  sys.y0.resize(1 + 2 * n);
  sys.y0(0) = rho0;
  sys.y0.tail(2 * n) = pack_complex(s0.values);
  sys.component_names.push_back("rho");
  for (const std::string& s : lambda_names(n, 1)) sys.component_names.push_back(s);
  sys.lambda_begin = 1;
  sys.lambda_count = n;
  sys.rhs = [n, k](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    REPState s;
    s.rho = y(0);
    s.lambdas = unpack_complex(y, 1, n);
    const REPState d = rhs_rep(s, k);
    dy.resize(y.size());
    dy(0) = d.rho;
    dy.tail(2 * n) = pack_complex(d.lambdas);
  };
  return sys;
}

PackedSystem pack_trace(const std::vector<double>& m0, int n) {
  invariants::TraceVector(n, m0);  // validates
  PackedSystem sys;
  sys.y0 = Eigen::Map<const Eigen::VectorXd>(m0.data(), static_cast<Eigen::Index>(m0.size()));
  for (int k = 2; k <= n; ++k) sys.component_names.push_back("m" + std::to_string(k));
  sys.rhs = [n](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const std::vector<double> m(y.data(), y.data() + y.size());
    const std::vector<double> d = rhs_trace(m, n);
    dy = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  };
  return sys;
}

PackedSystem pack_re3d_complex_pair(double beta0, double gamma0) {
  PackedSystem sys;
  sys.y0.resize(2);
  sys.y0 << beta0, gamma0;
  sys.component_names = {"beta", "gamma"};
  sys.rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const auto d = rhs_re3d_complex_pair(y(0), y(1));
    dy.resize(2);
    dy << d[0], d[1];
  };
  return sys;
}

PackedSystem pack_rep2d_gamma(double d0, double lambda0_product, double k, double rho0) {
  PackedSystem sys;
  sys.y0.resize(2);
  sys.y0 << 1.0, d0;
  sys.component_names = {"gamma_indicator", "dgamma"};
  sys.rhs = [k, rho0, lambda0_product](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2);
    dy(0) = y(1);
    // Non-positive indicator values reached inside a trial step are reported
    // as NaN so the controller backs off instead of unwinding the stack.
    dy(1) = y(0) > 0.0 ? rep2d_gamma_rhs(y(0), k, rho0, lambda0_product)
                       : std::numeric_limits<double>::quiet_NaN();
  };
  return sys;
}

PackedSystem pack_damping_matrix(const Eigen::MatrixXd& m0, const Eigen::MatrixXd& c) {
  if (m0.rows() != m0.cols()) throw std::invalid_argument("pack_damping_matrix: M0 not square");
  const int n = static_cast<int>(m0.rows());
  check_n(n, 2, kMaxDimension, "pack_damping_matrix");
  if (c.rows() != n || c.cols() != n) {
    throw std::invalid_argument("pack_damping_matrix: C must match M0");
  }
  PackedSystem sys;
  sys.y0 = flatten(m0);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      sys.component_names.push_back("m_" + std::to_string(i) + "_" + std::to_string(j));
  const Eigen::MatrixXd cc = c;
  sys.rhs = [n, cc](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy = flatten(rhs_damping_matrix(unflatten(y, n), cc));
  };
  return sys;
}

PackedSystem pack_damping_spectral(Complex lambda0, double beta) {
  PackedSystem sys;
  sys.y0.resize(2);
  sys.y0 << lambda0.real(), lambda0.imag();
  sys.component_names = {"re_lambda1", "im_lambda1"};
  sys.lambda_begin = 0;
  sys.lambda_count = 1;
  sys.rhs = [beta](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const Complex l{y(0), y(1)};
    const Complex d = -l * l - beta * l;
    dy.resize(2);
    dy << d.real(), d.imag();
  };
  return sys;
}

}  // namespace gradflow::models

#include "gradflow/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "gradflow/blowup.hpp"
#include "gradflow/invariants.hpp"
#include "gradflow/models.hpp"
#include "gradflow/viscous2d.hpp"

namespace gradflow::runner {

namespace {

using models::ModelKind;
using scenario::ConfigError;
using scenario::DriftRow;
using scenario::RunReport;
using scenario::ScenarioConfig;
using scenario::format_double;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw NumericError("failed writing '" + path + "'");
}

const char* status_name(IntegrationStatus status) {
  switch (status) {
    case IntegrationStatus::Completed: return "completed";
    case IntegrationStatus::Blowup: return "blowup";
    case IntegrationStatus::EventStop: return "event-stop";
    case IntegrationStatus::StepUnderflow: return "step-underflow";
    case IntegrationStatus::RhsFailure: return "rhs-failure";
  }
  return "unknown";
}

IntegrationOptions make_options(const scenario::IntegrationConfig& c) {
  IntegrationOptions opts;
  opts.rel_tol = c.rel_tol;
  opts.abs_tol = c.abs_tol;
  opts.sample_count = c.sample_count;
  opts.blowup_threshold = c.blowup_threshold;
  return opts;
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(count));
  if (count == 1) {
    out.push_back(lo);
    return out;
  }
  for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
  out.back() = hi;
  return out;
}

/// Runs body(0..count-1) on a worker pool. Results must be written to
/// per-index slots by the body; the first failure (by index) is rethrown
/// after all workers finish, so behaviour is independent of scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, count);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          errors[static_cast<size_t>(i)] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

double spectrum_trace_tol(const std::vector<Complex>& lambdas) {
  double sup = 0.0;
  for (const Complex& z : lambdas) sup = std::max(sup, std::abs(z));
  return 1e-9 * std::max(1.0, sup);
}

/// Packs the integrable single-trajectory models. The density-indicator and
/// grid models are handled by their dedicated paths.
models::PackedSystem build_packed(const ScenarioConfig& config) {
  const auto& model = config.model;
  const auto& initial = config.initial;
  try {
    switch (model.kind) {
      case ModelKind::RestrictedEuler: {
        Spectrum s0(*initial.lambdas, true, spectrum_trace_tol(*initial.lambdas));
        return models::pack_restricted_euler(s0, model.theta);
      }
      case ModelKind::RestrictedEulerPoisson: {
        // The density-coupled flow does not preserve the trace, so arbitrary
        // spectra are admissible here.
        return models::pack_rep(Spectrum(*initial.lambdas), *initial.rho0, model.k);
      }
      case ModelKind::TraceDynamics:
        return models::pack_trace(*initial.traces, model.n);
      case ModelKind::RE3DComplexPair: {
        const Complex z = initial.lambdas->front();
        return models::pack_re3d_complex_pair(z.imag(), z.real());
      }
      case ModelKind::LinearDamping:
        return models::pack_damping_spectral(initial.lambdas->front(), model.beta);
      default:
        break;
    }
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("initial", ex.what());
  }
  throw ConfigError("model.kind", "not integrable as a packed system");
}

/// Evaluates the model's declared invariants (index-pair products or trace
/// invariants) at every recorded sample and reports the worst relative
/// drift per invariant. Models without declared invariants get an empty
/// table.
std::vector<DriftRow> drift_table(const models::ModelSpec& model, const TrajectoryRecord& traj) {
  const int n = model.n;
  std::vector<std::string> labels;
  std::function<std::vector<Complex>(const Eigen::VectorXd&)> values;

  switch (model.kind) {
    case ModelKind::RestrictedEuler: {
      const auto seqs = invariants::build_index_sequences(n);
      for (size_t i = 0; i < seqs.size(); ++i)
        labels.push_back("pair_product_" + std::to_string(i + 1));
      values = [seqs, n](const Eigen::VectorXd& y) {
        const auto lambdas = models::unpack_complex(y, 0, n);
        std::vector<Complex> out;
        out.reserve(seqs.size());
        for (const auto& seq : seqs) out.push_back(invariants::eval_invariant_product(seq, lambdas));
        return out;
      };
      break;
    }
    case ModelKind::RestrictedEulerPoisson: {
      const auto seqs = invariants::build_index_sequences(n);
      for (size_t i = 0; i < seqs.size(); ++i)
        labels.push_back("pair_product_density_" + std::to_string(i + 1));
      values = [seqs, n](const Eigen::VectorXd& y) {
        const double rho = y[0];
        const auto lambdas = models::unpack_complex(y, 1, n);
        std::vector<Complex> out;
        out.reserve(seqs.size());
        for (const auto& seq : seqs) out.push_back(invariants::eval_rep_invariant(seq, rho, lambdas));
        return out;
      };
      break;
    }
    case ModelKind::RE3DComplexPair: {
      const auto seqs = invariants::build_index_sequences(3);
      labels.push_back("pair_product_1");
      values = [seqs](const Eigen::VectorXd& y) {
        const double beta = y[0], gamma = y[1];
        const std::vector<Complex> lambdas{
            {gamma, beta}, {gamma, -beta}, {-2.0 * gamma, 0.0}};
        return std::vector<Complex>{invariants::eval_invariant_product(seqs.front(), lambdas)};
      };
      break;
    }
    case ModelKind::TraceDynamics: {
      if (n != 3 && n != 4) break;  // no invariant list beyond 4 dimensions
      labels.push_back("trace_invariant_1");
      if (n == 4) labels.push_back("trace_invariant_2");
      values = [n](const Eigen::VectorXd& y) {
        std::vector<double> m(y.data(), y.data() + y.size());
        const auto vals = invariants::eval_trace_invariants(invariants::TraceVector(n, std::move(m)));
        std::vector<Complex> out;
        out.reserve(vals.size());
        for (double v : vals) out.emplace_back(v, 0.0);
        return out;
      };
      break;
    }
    default:
      break;
  }
  if (!values || traj.size() == 0) return {};

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DriftRow> rows(labels.size());
  std::vector<Complex> v0;
  bool initial_ok = true;
  try {
    v0 = values(traj.states.front());
  } catch (const std::exception&) {
    initial_ok = false;
    v0.assign(labels.size(), Complex{});
  }
  std::vector<double> denom(labels.size(), 1.0);
  for (size_t r = 0; r < labels.size(); ++r) {
    rows[r].label = labels[r];
    rows[r].initial = v0[r];
    rows[r].max_rel_drift = initial_ok ? 0.0 : inf;
    if (std::abs(v0[r]) > 0.0) denom[r] = std::abs(v0[r]);
  }
  for (size_t s = 1; s < traj.size(); ++s) {
    try {
      const auto vals = values(traj.states[s]);
      for (size_t r = 0; r < labels.size(); ++r) {
        double d = std::abs(vals[r] - v0[r]) / denom[r];
        if (!std::isfinite(d)) d = inf;
        rows[r].max_rel_drift = std::max(rows[r].max_rel_drift, d);
      }
    } catch (const std::exception&) {
      for (auto& row : rows) row.max_rel_drift = inf;
    }
  }
  return rows;
}

void merge_drift(std::vector<DriftRow>& into, const std::vector<DriftRow>& other) {
  if (into.empty()) {
    into = other;
    return;
  }
  for (size_t r = 0; r < into.size() && r < other.size(); ++r)
    into[r].max_rel_drift = std::max(into[r].max_rel_drift, other[r].max_rel_drift);
}

std::string trajectory_csv(const TrajectoryRecord& traj, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "t";
  for (const auto& name : names) os << ',' << name;
  os << '\n';
  for (size_t s = 0; s < traj.size(); ++s) {
    os << format_double(traj.times[s]);
    const Eigen::VectorXd& y = traj.states[s];
    for (int c = 0; c < y.size(); ++c) os << ',' << format_double(y[c]);
    os << '\n';
  }
  return os.str();
}

nlohmann::json trajectory_json(const TrajectoryRecord& traj, const std::vector<std::string>& names) {
  nlohmann::json doc;
  doc["components"] = names;
  doc["status"] = status_name(traj.status);
  doc["times"] = traj.times;
  nlohmann::json states = nlohmann::json::array();
  for (const auto& y : traj.states) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < y.size(); ++c) row.push_back(y[c]);
    states.push_back(row);
  }
  doc["states"] = states;
  return doc;
}

std::string write_trajectory(const std::string& out_dir, const std::string& base,
                             const std::string& format, const TrajectoryRecord& traj,
                             const std::vector<std::string>& names) {
  if (format == "json") {
    const std::string name = base + "_trajectory.json";
    write_file(out_dir + "/" + name, trajectory_json(traj, names).dump(2) + "\n");
    return name;
  }
  const std::string name = base + "_trajectory.csv";
  write_file(out_dir + "/" + name, trajectory_csv(traj, names));
  return name;
}

void write_report(const std::string& out_dir, const std::string& base, const RunReport& report) {
  write_file(out_dir + "/" + base + "_report.json", scenario::report_to_json(report).dump(2) + "\n");
}

void count_outcomes(const std::vector<blowup::ClassificationVerdict>& verdicts,
                    std::map<std::string, double>& diagnostics) {
  int smooth = 0, breakdown = 0, inconclusive = 0;
  for (const auto& v : verdicts) {
    switch (v.outcome) {
      case blowup::Outcome::GlobalSmooth: ++smooth; break;
      case blowup::Outcome::FiniteTimeBreakdown: ++breakdown; break;
      case blowup::Outcome::Inconclusive: ++inconclusive; break;
    }
  }
  diagnostics["points"] = static_cast<double>(verdicts.size());
  diagnostics["count_global_smooth"] = smooth;
  diagnostics["count_finite_time_breakdown"] = breakdown;
  diagnostics["count_inconclusive"] = inconclusive;
}

}  // namespace

RunReport cmd_simulate(const ScenarioConfig& config, const CommandOptions& options) {
  if (config.sweep) throw ConfigError("sweep", "simulate takes no sweep block");
  if (config.model.kind == ModelKind::ViscousDusty2D)
    throw ConfigError("model.kind", "grid runs use the viscous command");
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(options.out_dir);
  const std::string format = options.format.value_or(config.output.format);

  RunReport report;
  report.digest = scenario::config_digest(config);
  report.command = "simulate";
  report.seed = options.seed;

  TrajectoryRecord traj;
  std::vector<std::string> names;

  if (config.model.kind == ModelKind::REP2DGamma) {
    blowup::Rep2dOptions ro;
    ro.t_max = config.integration.t_max;
    ro.rel_tol = config.integration.rel_tol;
    ro.abs_tol = config.integration.abs_tol;
    ro.sample_count = config.integration.sample_count;
    const Complex l1 = (*config.initial.lambdas)[0];
    const Complex l2 = (*config.initial.lambdas)[1];
    blowup::Rep2dReport rep;
    try {
      rep = blowup::classify_rep2d(l1, l2, *config.initial.rho0, config.model.k, ro);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("initial.lambdas", ex.what());
    }
    traj = std::move(rep.gamma_trajectory);
    names = {"gamma_indicator", "dgamma"};
    report.verdicts.push_back(rep.verdict);
    report.diagnostics["min_gamma"] = rep.min_gamma;
    report.diagnostics["max_energy_residual"] = rep.max_energy_residual;
  } else if (config.model.kind == ModelKind::LinearDamping && config.initial.matrix) {
    const int n = config.model.n;
    const Eigen::MatrixXd c =
        config.model.damping ? *config.model.damping
                             : Eigen::MatrixXd(-config.model.beta * Eigen::MatrixXd::Identity(n, n));
    traj = integrate_matrix_riccati(
        *config.initial.matrix, [c](const Eigen::MatrixXd& m, double) { return Eigen::MatrixXd(c * m); },
        0.0, config.integration.t_max, make_options(config.integration));
    names = models::pack_damping_matrix(*config.initial.matrix, c).component_names;
    blowup::DetectOptions dopts;
    dopts.threshold = config.integration.blowup_threshold;
    report.verdicts.push_back(blowup::detect_and_classify(traj, dopts));
    const auto condition = blowup::check_damping_condition(traj, c);
    double min_condition = std::numeric_limits<double>::infinity();
    bool crossed = false;
    for (const auto& branch : condition.branches) {
      min_condition = std::min(min_condition, branch.min_condition);
      crossed = crossed || branch.crossed;
    }
    report.diagnostics["min_damping_condition"] = min_condition;
    report.diagnostics["damping_condition_crossed"] = crossed ? 1.0 : 0.0;
    report.diagnostics["damping_condition_unreliable"] = condition.unreliable ? 1.0 : 0.0;
  } else {
    const auto packed = build_packed(config);
    traj = integrate(packed.rhs, packed.y0, 0.0, config.integration.t_max,
                     make_options(config.integration));
    names = packed.component_names;
    report.drift = drift_table(config.model, traj);
    double worst_drift = 0.0;
    for (const auto& row : report.drift) worst_drift = std::max(worst_drift, row.max_rel_drift);
    blowup::DetectOptions dopts;
    dopts.threshold = config.integration.blowup_threshold;
    if (packed.lambda_count > 0) {
      dopts.rate_begin = packed.lambda_begin;
      dopts.rate_count = 2 * packed.lambda_count;
    }
    dopts.invariant_drift_exceeded = worst_drift > 1e-3;
    report.verdicts.push_back(blowup::detect_and_classify(traj, dopts));
  }

  report.diagnostics["points"] = static_cast<double>(traj.size());
  report.trajectory_files.push_back(
      write_trajectory(options.out_dir, config.output.path, format, traj, names));
  report.wall_time_seconds = elapsed_seconds(start);
  write_report(options.out_dir, config.output.path, report);
  if (traj.status == IntegrationStatus::StepUnderflow || traj.status == IntegrationStatus::RhsFailure)
    throw NumericError(std::string("integration failed (") + status_name(traj.status) +
                       "); partial trajectory saved");
  return report;
}

namespace {

struct AxisPlan {
  std::vector<int> slots;           ///< start-vector slot per axis
  std::vector<std::vector<double>> values;  ///< grid values per axis
  std::vector<int> counts;
  int total = 1;
};

AxisPlan plan_axes(const scenario::SweepConfig& sweep,
                   const std::function<int(const std::string&)>& resolve, int max_points) {
  AxisPlan plan;
  for (const auto& axis : sweep.axes) {
    const int slot = resolve(axis.component);
    if (std::find(plan.slots.begin(), plan.slots.end(), slot) != plan.slots.end())
      throw ConfigError("sweep.axes", "component '" + axis.component + "' swept twice");
    plan.slots.push_back(slot);
    plan.values.push_back(linspace(axis.lo, axis.hi, axis.count));
    plan.counts.push_back(axis.count);
    plan.total *= axis.count;
    if (plan.total > max_points) throw ConfigError("sweep", "grid too large");
  }
  return plan;
}

std::vector<int> decode_index(int idx, const std::vector<int>& counts) {
  std::vector<int> out(counts.size());
  for (int a = static_cast<int>(counts.size()) - 1; a >= 0; --a) {
    out[static_cast<size_t>(a)] = idx % counts[static_cast<size_t>(a)];
    idx /= counts[static_cast<size_t>(a)];
  }
  return out;
}

std::string separatrix_csv_re3(double lo, double hi) {
  std::ostringstream os;
  os << "branch,lambda1,lambda2\n";
  const auto params = linspace(lo, hi, 201);
  for (double s : params) os << "lambda1_eq_lambda2," << format_double(s) << ',' << format_double(s) << '\n';
  for (double s : params)
    os << "lambda1_eq_minus2_lambda2," << format_double(-2.0 * s) << ',' << format_double(s) << '\n';
  for (double s : params)
    os << "lambda2_eq_minus2_lambda1," << format_double(s) << ',' << format_double(-2.0 * s) << '\n';
  return os.str();
}

std::string separatrix_csv_trace3(double lo, double hi) {
  std::ostringstream os;
  os << "branch,m2,m3\n";
  const auto params = linspace(std::max(0.0, lo), std::max(0.0, hi), 201);
  for (double m2 : params) {
    const double m3 = std::sqrt(m2 * m2 * m2 / 6.0);
    os << "positive_root," << format_double(m2) << ',' << format_double(m3) << '\n';
  }
  for (double m2 : params) {
    const double m3 = -std::sqrt(m2 * m2 * m2 / 6.0);
    os << "negative_root," << format_double(m2) << ',' << format_double(m3) << '\n';
  }
  return os.str();
}

}  // namespace

RunReport cmd_portrait(const ScenarioConfig& config, const CommandOptions& options) {
  if (!config.sweep) throw ConfigError("sweep", "portrait needs a sweep block");
  const auto start_time = std::chrono::steady_clock::now();
  std::filesystem::create_directories(options.out_dir);

  const auto kind = config.model.kind;
  const int n = config.model.n;
  std::vector<double> base;
  std::vector<std::string> start_names;
  std::function<int(const std::string&)> resolve;

  if (kind == ModelKind::RestrictedEuler) {
    if (n != 3) throw ConfigError("model.n", "spectral portraits are drawn for the 3-component model");
    if (config.sweep->axes.size() != 2)
      throw ConfigError("sweep.axes", "spectral portraits sweep exactly 2 components");
    for (const Complex& z : *config.initial.lambdas) {
      if (z.imag() != 0.0)
        throw ConfigError("initial.lambdas", "portrait sweeps need a real base spectrum");
      base.push_back(z.real());
    }
    for (int i = 1; i <= n; ++i) start_names.push_back("lambda" + std::to_string(i) + "_0");
    resolve = [n](const std::string& comp) -> int {
      if (comp.rfind("lambda", 0) == 0) {
        const int idx = std::atoi(comp.c_str() + 6);
        if (idx >= 1 && idx <= n) return idx - 1;
      }
      throw ConfigError("sweep.axes", "unknown spectral component '" + comp + "'");
    };
  } else if (kind == ModelKind::TraceDynamics) {
    const size_t axis_count = config.sweep->axes.size();
    if (!(axis_count == 2 || (n == 4 && axis_count == 3)))
      throw ConfigError("sweep.axes", "trace portraits sweep 2 components (3 in the 4-D flow)");
    if (n != 3 && n != 4) throw ConfigError("model.n", "trace portraits cover dimensions 3 and 4");
    base = *config.initial.traces;
    for (int k = 2; k <= n; ++k) start_names.push_back("m" + std::to_string(k) + "_0");
    resolve = [n](const std::string& comp) -> int {
      if (comp.size() >= 2 && comp[0] == 'm') {
        const int idx = std::atoi(comp.c_str() + 1);
        if (idx >= 2 && idx <= n) return idx - 2;
      }
      throw ConfigError("sweep.axes", "unknown trace component '" + comp + "'");
    };
  } else if (kind == ModelKind::RE3DComplexPair) {
    if (config.sweep->axes.size() != 2)
      throw ConfigError("sweep.axes", "conjugate-pair portraits sweep exactly 2 components");
    const Complex z = config.initial.lambdas->front();
    base = {z.imag(), z.real()};
    start_names = {"beta_0", "gamma_0"};
    resolve = [](const std::string& comp) -> int {
      if (comp == "beta") return 0;
      if (comp == "gamma") return 1;
      throw ConfigError("sweep.axes", "unknown pair component '" + comp + "'");
    };
  } else {
    throw ConfigError("model.kind", "portrait supports the spectral, trace, and conjugate-pair models");
  }

  const AxisPlan plan = plan_axes(*config.sweep, resolve, 200000);

  // The spectral sweep pins the swept components and uses the highest
  // unswept one to keep the spectrum trace-free.
  int free_slot = -1;
  if (kind == ModelKind::RestrictedEuler) {
    std::vector<bool> swept(base.size(), false);
    for (int slot : plan.slots) swept[static_cast<size_t>(slot)] = true;
    for (int i = static_cast<int>(base.size()) - 1; i >= 0; --i)
      if (!swept[static_cast<size_t>(i)]) {
        free_slot = i;
        break;
      }
    if (free_slot < 0) throw ConfigError("sweep.axes", "one spectral component must stay free");
  }

  std::vector<std::vector<double>> starts(static_cast<size_t>(plan.total));
  for (int idx = 0; idx < plan.total; ++idx) {
    const auto digits = decode_index(idx, plan.counts);
    std::vector<double> s = base;
    for (size_t a = 0; a < plan.slots.size(); ++a)
      s[static_cast<size_t>(plan.slots[a])] = plan.values[a][static_cast<size_t>(digits[a])];
    if (free_slot >= 0) {
      double sum = 0.0;
      for (size_t i = 0; i < s.size(); ++i)
        if (static_cast<int>(i) != free_slot) sum += s[i];
      s[static_cast<size_t>(free_slot)] = -sum;
    }
    starts[static_cast<size_t>(idx)] = std::move(s);
  }

  auto pack_point = [&](const std::vector<double>& s) {
    switch (kind) {
      case ModelKind::RestrictedEuler: {
        std::vector<Complex> lambdas;
        lambdas.reserve(s.size());
        for (double v : s) lambdas.emplace_back(v, 0.0);
        return models::pack_restricted_euler(Spectrum(lambdas, true, spectrum_trace_tol(lambdas)),
                                             config.model.theta);
      }
      case ModelKind::TraceDynamics:
        return models::pack_trace(s, n);
      default:
        return models::pack_re3d_complex_pair(s[0], s[1]);
    }
  };

  const std::vector<std::string> state_names = pack_point(starts.front()).component_names;
  const IntegrationOptions iopts = make_options(config.integration);

  struct Point {
    TrajectoryRecord traj;
    blowup::ClassificationVerdict verdict;
    std::vector<DriftRow> drift;
  };
  std::vector<Point> points(static_cast<size_t>(plan.total));
  parallel_for(plan.total, options.jobs, [&](int idx) {
    const auto packed = pack_point(starts[static_cast<size_t>(idx)]);
    Point p;
    p.traj = integrate(packed.rhs, packed.y0, 0.0, config.integration.t_max, iopts);
    blowup::DetectOptions dopts;
    dopts.threshold = config.integration.blowup_threshold;
    if (packed.lambda_count > 0) {
      dopts.rate_begin = packed.lambda_begin;
      dopts.rate_count = 2 * packed.lambda_count;
    }
    p.verdict = blowup::detect_and_classify(p.traj, dopts);
    p.drift = drift_table(config.model, p.traj);
    points[static_cast<size_t>(idx)] = std::move(p);
  });

  std::ostringstream os;
  os << "point";
  for (const auto& name : start_names) os << ',' << name;
  os << ",t";
  for (const auto& name : state_names) os << ',' << name;
  os << ",outcome\n";
  for (int idx = 0; idx < plan.total; ++idx) {
    const auto& p = points[static_cast<size_t>(idx)];
    const char* outcome = blowup::to_string(p.verdict.outcome);
    for (size_t s = 0; s < p.traj.size(); ++s) {
      os << idx;
      for (double v : starts[static_cast<size_t>(idx)]) os << ',' << format_double(v);
      os << ',' << format_double(p.traj.times[s]);
      const Eigen::VectorXd& y = p.traj.states[s];
      for (int c = 0; c < y.size(); ++c) os << ',' << format_double(y[c]);
      os << ',' << outcome << '\n';
    }
  }

  RunReport report;
  report.digest = scenario::config_digest(config);
  report.command = "portrait";
  report.seed = options.seed;
  const std::string data_name = config.output.path + "_portrait.csv";
  write_file(options.out_dir + "/" + data_name, os.str());
  report.trajectory_files.push_back(data_name);

  std::string overlay;
  if (kind == ModelKind::RestrictedEuler) {
    const auto& axes = config.sweep->axes;
    const double lo = std::min(axes[0].lo, axes[1].lo), hi = std::max(axes[0].hi, axes[1].hi);
    overlay = separatrix_csv_re3(lo, hi);
  } else if (kind == ModelKind::TraceDynamics && n == 3) {
    const auto& axes = config.sweep->axes;
    overlay = separatrix_csv_trace3(axes[0].lo, axes[0].hi);
  }
  if (!overlay.empty()) {
    const std::string overlay_name = config.output.path + "_separatrix.csv";
    write_file(options.out_dir + "/" + overlay_name, overlay);
    report.trajectory_files.push_back(overlay_name);
  }

  for (const auto& p : points) {
    report.verdicts.push_back(p.verdict);
    merge_drift(report.drift, p.drift);
  }
  count_outcomes(report.verdicts, report.diagnostics);
  report.wall_time_seconds = elapsed_seconds(start_time);
  write_report(options.out_dir, config.output.path, report);
  return report;
}

RunReport cmd_classify(const ScenarioConfig& config, const CommandOptions& options) {
  if (!config.sweep) throw ConfigError("sweep", "classify needs a sweep block");
  const auto kind = config.model.kind;
  if (kind != ModelKind::LinearDamping && kind != ModelKind::REP2DGamma)
    throw ConfigError("model.kind",
                      "classification sweeps cover the damped and 2-D density-coupled models");
  const auto start_time = std::chrono::steady_clock::now();
  std::filesystem::create_directories(options.out_dir);
  const auto& axes = config.sweep->axes;

  std::function<int(const std::string&)> resolve;
  if (kind == ModelKind::LinearDamping) {
    if (axes.size() != 1 && axes.size() != 2)
      throw ConfigError("sweep.axes", "damping sweeps cover lambda0 (and optionally lambda0_im)");
    resolve = [](const std::string& comp) -> int {
      if (comp == "lambda0") return 0;
      if (comp == "lambda0_im") return 1;
      throw ConfigError("sweep.axes", "unknown damping component '" + comp + "'");
    };
  } else {
    if (axes.size() != 2)
      throw ConfigError("sweep.axes", "the 2-D density-coupled sweep covers d0 and prod0");
    resolve = [](const std::string& comp) -> int {
      if (comp == "d0") return 0;
      if (comp == "prod0") return 1;
      throw ConfigError("sweep.axes", "unknown indicator component '" + comp + "'");
    };
  }
  const AxisPlan plan = plan_axes(*config.sweep, resolve, 1000000);

  std::vector<blowup::ClassificationVerdict> verdicts(static_cast<size_t>(plan.total));
  parallel_for(plan.total, options.jobs, [&](int idx) {
    const auto digits = decode_index(idx, plan.counts);
    double slot_values[2] = {0.0, 0.0};
    for (size_t a = 0; a < plan.slots.size(); ++a)
      slot_values[plan.slots[a]] = plan.values[a][static_cast<size_t>(digits[a])];
    if (kind == ModelKind::LinearDamping) {
      const Complex lambda0(slot_values[0], slot_values[1]);
      verdicts[static_cast<size_t>(idx)] = blowup::classify_damping(lambda0, config.model.beta);
    } else {
      const double d0 = slot_values[0], prod0 = slot_values[1];
      const double disc = d0 * d0 - 4.0 * prod0;
      Complex l1, l2;
      if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        l1 = Complex((d0 - root) / 2.0, 0.0);
        l2 = Complex((d0 + root) / 2.0, 0.0);
      } else {
        const double im = std::sqrt(-disc) / 2.0;
        l1 = Complex(d0 / 2.0, im);
        l2 = Complex(d0 / 2.0, -im);
      }
      blowup::Rep2dOptions ro;
      ro.t_max = config.integration.t_max;
      ro.rel_tol = config.integration.rel_tol;
      ro.abs_tol = config.integration.abs_tol;
      ro.sample_count = config.integration.sample_count;
      verdicts[static_cast<size_t>(idx)] =
          blowup::classify_rep2d(l1, l2, config.initial.rho0.value_or(0.0), config.model.k, ro)
              .verdict;
    }
  });

  std::ostringstream os;
  for (size_t a = 0; a < axes.size(); ++a) os << (a ? "," : "") << axes[a].component;
  os << ",outcome,t_star\n";
  for (int idx = 0; idx < plan.total; ++idx) {
    const auto digits = decode_index(idx, plan.counts);
    for (size_t a = 0; a < axes.size(); ++a)
      os << (a ? "," : "") << format_double(plan.values[a][static_cast<size_t>(digits[a])]);
    const auto& v = verdicts[static_cast<size_t>(idx)];
    os << ',' << blowup::to_string(v.outcome) << ',' << (v.t_star ? format_double(*v.t_star) : "")
       << '\n';
  }

  RunReport report;
  report.digest = scenario::config_digest(config);
  report.command = "classify";
  report.seed = options.seed;
  const std::string map_name = config.output.path + "_classification.csv";
  write_file(options.out_dir + "/" + map_name, os.str());
  report.trajectory_files.push_back(map_name);
  report.verdicts = std::move(verdicts);
  count_outcomes(report.verdicts, report.diagnostics);
  report.wall_time_seconds = elapsed_seconds(start_time);
  write_report(options.out_dir, config.output.path, report);
  return report;
}

RunReport cmd_viscous(const ScenarioConfig& config, const CommandOptions& options) {
  if (config.model.kind != ModelKind::ViscousDusty2D)
    throw ConfigError("model.kind", "viscous runs take the 2-D grid model");
  if (config.sweep) throw ConfigError("sweep", "viscous runs take no sweep block");
  const auto start_time = std::chrono::steady_clock::now();
  std::filesystem::create_directories(options.out_dir);

  const auto& vc = config.viscous;
  const auto potential = *config.initial.potential;
  const double box = vc.box;
  auto phi = [potential, box](double x, double y) {
    return scenario::eval_potential(potential, box, x, y);
  };

  viscous2d::Grid2DField field = viscous2d::init_from_potential(phi, config.model.nu, vc.grid_n, box);
  const auto outputs = linspace(0.0, vc.t_end, vc.output_count);

  struct DiagnosticsRow {
    double t, gap, max_lam2, min_lam1, vorticity, max_speed;
  };
  std::vector<DiagnosticsRow> rows;
  auto record = [&]() {
    const auto ef = viscous2d::eigen_field(field);
    rows.push_back({field.t, viscous2d::l1_gap(ef, field.h), ef.lam2.maxCoeff(), ef.lam1.minCoeff(),
                    field.vorticity_sup(), field.max_speed()});
  };
  record();
  for (size_t i = 1; i < outputs.size(); ++i) {
    const double target = outputs[i];
    while (field.t < target - 1e-12 * std::max(1.0, target)) {
      const double dt = std::min(0.9 * viscous2d::stable_dt(field), target - field.t);
      viscous2d::step(field, dt);
    }
    record();
  }

  RunReport report;
  report.digest = scenario::config_digest(config);
  report.command = "viscous";
  report.seed = options.seed;

  std::ostringstream diag;
  diag << "t,l1_gap,max_lam2,min_lam1,vorticity_sup,max_speed\n";
  for (const auto& r : rows)
    diag << format_double(r.t) << ',' << format_double(r.gap) << ',' << format_double(r.max_lam2)
         << ',' << format_double(r.min_lam1) << ',' << format_double(r.vorticity) << ','
         << format_double(r.max_speed) << '\n';
  const std::string diag_name = config.output.path + "_diagnostics.csv";
  write_file(options.out_dir + "/" + diag_name, diag.str());
  report.trajectory_files.push_back(diag_name);

  {
    const auto ef = viscous2d::eigen_field(field);
    std::ostringstream snap;
    snap << "x,y,u,v,lam1,lam2\n";
    for (int i = 0; i < field.n; ++i)
      for (int j = 0; j < field.n; ++j)
        snap << format_double(i * field.h) << ',' << format_double(j * field.h) << ','
             << format_double(field.u(i, j)) << ',' << format_double(field.v(i, j)) << ','
             << format_double(ef.lam1(i, j)) << ',' << format_double(ef.lam2(i, j)) << '\n';
    const std::string snap_name = config.output.path + "_field.csv";
    write_file(options.out_dir + "/" + snap_name, snap.str());
    report.trajectory_files.push_back(snap_name);

    nlohmann::json meta;
    meta["t"] = field.t;
    meta["nu"] = field.nu;
    meta["N"] = field.n;
    meta["L"] = field.box;
    meta["diagnostics"] = {{"l1_gap", rows.back().gap},
                           {"max_lam2", rows.back().max_lam2},
                           {"min_lam1", rows.back().min_lam1},
                           {"vorticity_sup", rows.back().vorticity},
                           {"max_speed", rows.back().max_speed}};
    const std::string meta_name = config.output.path + "_field_meta.json";
    write_file(options.out_dir + "/" + meta_name, meta.dump(2) + "\n");
    report.trajectory_files.push_back(meta_name);
  }

  if (!vc.nu_list.empty()) {
    const double study_t = vc.study_t_end > 0.0 ? vc.study_t_end : vc.t_end;
    std::vector<viscous2d::ViscosityRow> study;
    try {
      study = viscous2d::vanishing_viscosity_study(phi, vc.nu_list, study_t, vc.grid_n, box);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("viscous.nu_list", ex.what());
    }
    std::ostringstream table;
    table << "nu,l1_error,status\n";
    for (const auto& row : study)
      table << format_double(row.nu) << ',' << format_double(row.l1_error) << ','
            << (row.ok ? "ok" : "failed") << '\n';
    const std::string table_name = config.output.path + "_viscosity.csv";
    write_file(options.out_dir + "/" + table_name, table.str());
    report.trajectory_files.push_back(table_name);
    report.diagnostics["study_rows"] = static_cast<double>(study.size());
  }

  report.diagnostics["l1_gap_initial"] = rows.front().gap;
  report.diagnostics["l1_gap_final"] = rows.back().gap;
  report.diagnostics["max_lam2_final"] = rows.back().max_lam2;
  report.diagnostics["vorticity_final"] = rows.back().vorticity;
  report.wall_time_seconds = elapsed_seconds(start_time);
  write_report(options.out_dir, config.output.path, report);
  return report;
}

void print_sequences(int n, std::ostream& os) {
  const auto seqs = invariants::build_index_sequences(n);
  os << "dimension " << n << ": " << seqs.size() << " sequence(s)\n";
  for (size_t i = 0; i < seqs.size(); ++i) {
    os << "  sequence " << (i + 1) << ":";
    for (const auto& [a, b] : seqs[i].pairs) os << " (" << a << "," << b << ")";
    os << "  multiplier N=" << seqs[i].multiplier << '\n';
  }
}

bool check_sequence(int n, const std::vector<std::pair<int, int>>& pairs, std::ostream& os) {
  for (const auto& [a, b] : pairs)
    if (a < 1 || a > n || b < 1 || b > n || a == b) {
      os << "invalid pair (" << a << "," << b << ") for dimension " << n << '\n';
      return false;
    }
  const auto mult = invariants::uniform_multiplicity(pairs, n);
  if (mult) {
    os << "pair-sum identity holds with N=" << *mult << '\n';
    return true;
  }
  std::vector<int> counts(static_cast<size_t>(n), 0);
  for (const auto& [a, b] : pairs) {
    ++counts[static_cast<size_t>(a - 1)];
    ++counts[static_cast<size_t>(b - 1)];
  }
  os << "pair-sum identity fails: index multiplicities (";
  for (int i = 0; i < n; ++i) os << (i ? " " : "") << counts[static_cast<size_t>(i)];
  os << ") are not uniform\n";
  return false;
}

}  // namespace gradflow::runner

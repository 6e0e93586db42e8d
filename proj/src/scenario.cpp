#include "gradflow/scenario.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gradflow::scenario {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError(field, why);
}

void check_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(prefix + "." + item.key(), "unknown field");
  }
}

double get_number(const json& obj, const std::string& prefix, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(prefix + "." + key, "expected a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& prefix, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) fail(prefix + "." + key, "expected an integer");
  return obj[key].get<int>();
}

std::string get_string(const json& obj, const std::string& prefix, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(prefix + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

std::vector<Complex> parse_complex_list(const json& arr, const std::string& field) {
  if (!arr.is_array() || arr.empty()) fail(field, "expected a nonempty array of [re, im] pairs");
  std::vector<Complex> out;
  out.reserve(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    const json& entry = arr[i];
    const std::string where = field + "[" + std::to_string(i) + "]";
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number())
      fail(where, "expected an [re, im] pair");
    out.emplace_back(entry[0].get<double>(), entry[1].get<double>());
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const json& arr, const std::string& field) {
  if (!arr.is_array() || arr.empty()) fail(field, "expected a nonempty array of rows");
  const size_t n = arr.size();
  Eigen::MatrixXd m(static_cast<int>(n), static_cast<int>(n));
  for (size_t i = 0; i < n; ++i) {
    const json& row = arr[i];
    const std::string where = field + "[" + std::to_string(i) + "]";
    if (!row.is_array() || row.size() != n) fail(where, "expected a square row-major matrix");
    for (size_t j = 0; j < n; ++j) {
      if (!row[j].is_number()) fail(where + "[" + std::to_string(j) + "]", "expected a number");
      m(static_cast<int>(i), static_cast<int>(j)) = row[j].get<double>();
    }
  }
  return m;
}

models::ModelSpec parse_model(const json& doc) {
  if (!doc.contains("model")) fail("model", "missing");
  const json& obj = doc["model"];
  if (!obj.is_object()) fail("model", "expected an object");
  check_keys(obj, "model", {"kind", "n", "theta", "k", "beta", "nu", "damping"});
  models::ModelSpec spec;
  const std::string kind = get_string(obj, "model", "kind", "");
  const auto parsed = models::model_kind_from_string(kind);
  if (!parsed) fail("model.kind", "unknown model '" + kind + "'");
  spec.kind = *parsed;
  switch (spec.kind) {
    case models::ModelKind::ViscousDusty2D:
    case models::ModelKind::REP2DGamma:
      spec.n = get_int(obj, "model", "n", 2);
      break;
    case models::ModelKind::RE3DComplexPair:
      spec.n = get_int(obj, "model", "n", 3);
      break;
    default:
      spec.n = get_int(obj, "model", "n", 3);
      break;
  }
  spec.theta = get_number(obj, "model", "theta", 1.0);
  spec.k = get_number(obj, "model", "k", 1.0);
  spec.beta = get_number(obj, "model", "beta", 1.0);
  spec.nu = get_number(obj, "model", "nu", 0.02);
  if (obj.contains("damping")) spec.damping = parse_matrix(obj["damping"], "model.damping");
  try {
    spec.validate();
  } catch (const std::exception& ex) {
    fail("model", ex.what());
  }
  return spec;
}

InitialConfig parse_initial(const json& doc, const models::ModelSpec& model) {
  if (!doc.contains("initial")) fail("initial", "missing");
  const json& obj = doc["initial"];
  if (!obj.is_object()) fail("initial", "expected an object");
  check_keys(obj, "initial", {"lambdas", "rho0", "M0", "m0", "phi0"});
  InitialConfig initial;
  int block_count = 0;
  if (obj.contains("lambdas")) {
    initial.lambdas = parse_complex_list(obj["lambdas"], "initial.lambdas");
    ++block_count;
  }
  if (obj.contains("M0")) {
    initial.matrix = parse_matrix(obj["M0"], "initial.M0");
    ++block_count;
  }
  if (obj.contains("m0")) {
    const json& arr = obj["m0"];
    if (!arr.is_array() || arr.empty()) fail("initial.m0", "expected a nonempty array");
    std::vector<double> traces;
    for (size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) fail("initial.m0[" + std::to_string(i) + "]", "expected a number");
      traces.push_back(arr[i].get<double>());
    }
    initial.traces = std::move(traces);
    ++block_count;
  }
  if (obj.contains("phi0")) {
    const json& pot = obj["phi0"];
    if (!pot.is_object()) fail("initial.phi0", "expected an object");
    check_keys(pot, "initial.phi0", {"preset", "params"});
    PotentialConfig cfg;
    cfg.preset = get_string(pot, "initial.phi0", "preset", "");
    if (cfg.preset.empty()) fail("initial.phi0.preset", "missing");
    if (pot.contains("params")) {
      if (!pot["params"].is_object()) fail("initial.phi0.params", "expected an object");
      for (const auto& item : pot["params"].items()) {
        if (!item.value().is_number())
          fail("initial.phi0.params." + item.key(), "expected a number");
        cfg.params[item.key()] = item.value().get<double>();
      }
    }
    eval_potential(cfg, 1.0, 0.0, 0.0);  // rejects unknown presets
    initial.potential = std::move(cfg);
    ++block_count;
  }
  if (obj.contains("rho0")) {
    if (!obj["rho0"].is_number()) fail("initial.rho0", "expected a number");
    initial.rho0 = obj["rho0"].get<double>();
  }
  if (block_count == 0) fail("initial", "one of lambdas/M0/m0/phi0 is required");
  if (block_count > 1) fail("initial", "lambdas/M0/m0/phi0 are mutually exclusive");

  // Reject data blocks foreign to the model before complaining about missing
  // ones: "M0 is not for this model" beats "lambdas required" when the user
  // clearly supplied initial data of the wrong flavour.
  if (initial.rho0 && model.kind != models::ModelKind::RestrictedEulerPoisson &&
      model.kind != models::ModelKind::REP2DGamma)
    fail("initial.rho0", "only meaningful for density-coupled models");
  if (initial.matrix && model.kind != models::ModelKind::LinearDamping)
    fail("initial.M0", "full-tensor initial data is only supported for the damped model");

  const int n = model.n;
  auto need_lambdas = [&](size_t count, const char* why) {
    if (!initial.lambdas) fail("initial.lambdas", std::string("required: ") + why);
    if (initial.lambdas->size() != count)
      fail("initial.lambdas",
           "expected " + std::to_string(count) + " entries, got " + std::to_string(initial.lambdas->size()));
  };
  switch (model.kind) {
    case models::ModelKind::RestrictedEuler:
      need_lambdas(static_cast<size_t>(n), "one eigenvalue per dimension");
      break;
    case models::ModelKind::RestrictedEulerPoisson:
      need_lambdas(static_cast<size_t>(n), "one eigenvalue per dimension");
      if (!initial.rho0) fail("initial.rho0", "required for the density-coupled model");
      if (!(*initial.rho0 > 0.0)) fail("initial.rho0", "must be positive");
      break;
    case models::ModelKind::RE3DComplexPair:
      need_lambdas(1, "the pair member with positive imaginary part, as [gamma, beta]");
      break;
    case models::ModelKind::REP2DGamma:
      need_lambdas(2, "the two planar eigenvalues");
      if (!initial.rho0) fail("initial.rho0", "required for the density-coupled model");
      if (*initial.rho0 < 0.0) fail("initial.rho0", "must be nonnegative");
      break;
    case models::ModelKind::LinearDamping:
      if (!initial.lambdas && !initial.matrix)
        fail("initial", "the damped model takes either lambdas or M0");
      if (initial.lambdas && initial.lambdas->size() != 1)
        fail("initial.lambdas", "the damped spectral run takes a single eigenvalue");
      if (initial.matrix && initial.matrix->rows() != n)
        fail("initial.M0", "matrix size must match model.n");
      break;
    case models::ModelKind::TraceDynamics:
      if (!initial.traces) fail("initial.m0", "required: the trace vector (m_2, ..., m_n)");
      if (initial.traces->size() != static_cast<size_t>(n - 1))
        fail("initial.m0", "expected " + std::to_string(n - 1) + " entries (m_2, ..., m_n)");
      break;
    case models::ModelKind::ViscousDusty2D:
      if (!initial.potential) fail("initial.phi0", "required for the 2D viscous run");
      break;
  }
  return initial;
}

IntegrationConfig parse_integration(const json& doc) {
  IntegrationConfig cfg;
  if (!doc.contains("integration")) return cfg;
  const json& obj = doc["integration"];
  if (!obj.is_object()) fail("integration", "expected an object");
  check_keys(obj, "integration",
             {"t_max", "rel_tol", "abs_tol", "sample_count", "blowup_threshold"});
  cfg.t_max = get_number(obj, "integration", "t_max", cfg.t_max);
  cfg.rel_tol = get_number(obj, "integration", "rel_tol", cfg.rel_tol);
  cfg.abs_tol = get_number(obj, "integration", "abs_tol", cfg.abs_tol);
  cfg.sample_count = get_int(obj, "integration", "sample_count", cfg.sample_count);
  cfg.blowup_threshold = get_number(obj, "integration", "blowup_threshold", cfg.blowup_threshold);
  if (!(cfg.t_max > 0.0)) fail("integration.t_max", "must be positive");
  if (!(cfg.rel_tol > 0.0)) fail("integration.rel_tol", "must be positive");
  if (!(cfg.abs_tol > 0.0)) fail("integration.abs_tol", "must be positive");
  if (cfg.sample_count < 2) fail("integration.sample_count", "need at least 2 samples");
  if (cfg.blowup_threshold < 0.0) fail("integration.blowup_threshold", "must be nonnegative");
  return cfg;
}

std::optional<SweepConfig> parse_sweep(const json& doc) {
  if (!doc.contains("sweep")) return std::nullopt;
  const json& obj = doc["sweep"];
  if (!obj.is_object()) fail("sweep", "expected an object");
  check_keys(obj, "sweep", {"axes"});
  if (!obj.contains("axes") || !obj["axes"].is_array() || obj["axes"].empty())
    fail("sweep.axes", "expected a nonempty array");
  SweepConfig sweep;
  for (size_t i = 0; i < obj["axes"].size(); ++i) {
    const json& axis = obj["axes"][i];
    const std::string where = "sweep.axes[" + std::to_string(i) + "]";
    if (!axis.is_object()) fail(where, "expected an object");
    check_keys(axis, where, {"component", "range", "count"});
    SweepAxis out;
    out.component = get_string(axis, where, "component", "");
    if (out.component.empty()) fail(where + ".component", "missing");
    if (!axis.contains("range") || !axis["range"].is_array() || axis["range"].size() != 2 ||
        !axis["range"][0].is_number() || !axis["range"][1].is_number())
      fail(where + ".range", "expected [lo, hi]");
    out.lo = axis["range"][0].get<double>();
    out.hi = axis["range"][1].get<double>();
    out.count = get_int(axis, where, "count", 0);
    if (out.count < 1) fail(where + ".count", "must be at least 1");
    if (!(out.lo <= out.hi)) fail(where + ".range", "lo must not exceed hi");
    sweep.axes.push_back(std::move(out));
  }
  return sweep;
}

OutputConfig parse_output(const json& doc, const std::string& name) {
  OutputConfig cfg;
  cfg.path = name;
  if (!doc.contains("output")) return cfg;
  const json& obj = doc["output"];
  if (!obj.is_object()) fail("output", "expected an object");
  check_keys(obj, "output", {"format", "path"});
  cfg.format = get_string(obj, "output", "format", cfg.format);
  cfg.path = get_string(obj, "output", "path", cfg.path);
  if (cfg.format != "csv" && cfg.format != "json") fail("output.format", "expected csv or json");
  if (cfg.path.empty()) fail("output.path", "must not be empty");
  return cfg;
}

ViscousConfig parse_viscous(const json& doc) {
  ViscousConfig cfg;
  if (!doc.contains("viscous")) return cfg;
  const json& obj = doc["viscous"];
  if (!obj.is_object()) fail("viscous", "expected an object");
  check_keys(obj, "viscous", {"grid_n", "box", "t_end", "output_count", "nu_list", "study_t_end"});
  cfg.grid_n = get_int(obj, "viscous", "grid_n", cfg.grid_n);
  cfg.box = get_number(obj, "viscous", "box", cfg.box);
  cfg.t_end = get_number(obj, "viscous", "t_end", cfg.t_end);
  cfg.output_count = get_int(obj, "viscous", "output_count", cfg.output_count);
  cfg.study_t_end = get_number(obj, "viscous", "study_t_end", cfg.study_t_end);
  if (obj.contains("nu_list")) {
    if (!obj["nu_list"].is_array()) fail("viscous.nu_list", "expected an array");
    for (size_t i = 0; i < obj["nu_list"].size(); ++i) {
      if (!obj["nu_list"][i].is_number())
        fail("viscous.nu_list[" + std::to_string(i) + "]", "expected a number");
      cfg.nu_list.push_back(obj["nu_list"][i].get<double>());
    }
  }
  if (cfg.grid_n < 4) fail("viscous.grid_n", "grid too coarse");
  if (!(cfg.box > 0.0)) fail("viscous.box", "must be positive");
  if (!(cfg.t_end > 0.0)) fail("viscous.t_end", "must be positive");
  if (cfg.output_count < 2) fail("viscous.output_count", "need at least 2 outputs");
  if (cfg.study_t_end < 0.0) fail("viscous.study_t_end", "must be nonnegative");
  return cfg;
}

}  // namespace

ScenarioConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("(root)", "expected a JSON object");
  check_keys(doc, "(root)",
             {"name", "model", "initial", "integration", "sweep", "output", "viscous"});
  ScenarioConfig config;
  config.name = get_string(doc, "(root)", "name", "run");
  if (config.name.empty()) fail("name", "must not be empty");
  config.model = parse_model(doc);
  config.initial = parse_initial(doc, config.model);
  config.integration = parse_integration(doc);
  config.sweep = parse_sweep(doc);
  config.output = parse_output(doc, config.name);
  config.viscous = parse_viscous(doc);
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("(file)", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    fail("(file)", std::string("invalid JSON: ") + ex.what());
  }
  return parse_config(doc);
}

nlohmann::json to_json(const ScenarioConfig& config) {
  json doc;
  doc["name"] = config.name;

  json model;
  model["kind"] = models::to_string(config.model.kind);
  model["n"] = config.model.n;
  model["theta"] = config.model.theta;
  model["k"] = config.model.k;
  model["beta"] = config.model.beta;
  model["nu"] = config.model.nu;
  if (config.model.damping) {
    json rows = json::array();
    for (int i = 0; i < config.model.damping->rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < config.model.damping->cols(); ++j) row.push_back((*config.model.damping)(i, j));
      rows.push_back(row);
    }
    model["damping"] = rows;
  }
  doc["model"] = model;

  json initial;
  if (config.initial.lambdas) {
    json arr = json::array();
    for (const Complex& z : *config.initial.lambdas) arr.push_back(json::array({z.real(), z.imag()}));
    initial["lambdas"] = arr;
  }
  if (config.initial.rho0) initial["rho0"] = *config.initial.rho0;
  if (config.initial.matrix) {
    json rows = json::array();
    for (int i = 0; i < config.initial.matrix->rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < config.initial.matrix->cols(); ++j) row.push_back((*config.initial.matrix)(i, j));
      rows.push_back(row);
    }
    initial["M0"] = rows;
  }
  if (config.initial.traces) initial["m0"] = *config.initial.traces;
  if (config.initial.potential) {
    json pot;
    pot["preset"] = config.initial.potential->preset;
    if (!config.initial.potential->params.empty()) pot["params"] = config.initial.potential->params;
    initial["phi0"] = pot;
  }
  doc["initial"] = initial;

  json integration;
  integration["t_max"] = config.integration.t_max;
  integration["rel_tol"] = config.integration.rel_tol;
  integration["abs_tol"] = config.integration.abs_tol;
  integration["sample_count"] = config.integration.sample_count;
  integration["blowup_threshold"] = config.integration.blowup_threshold;
  doc["integration"] = integration;

  if (config.sweep) {
    json axes = json::array();
    for (const SweepAxis& axis : config.sweep->axes) {
      json a;
      a["component"] = axis.component;
      a["range"] = json::array({axis.lo, axis.hi});
      a["count"] = axis.count;
      axes.push_back(a);
    }
    doc["sweep"] = json{{"axes", axes}};
  }

  json output;
  output["format"] = config.output.format;
  output["path"] = config.output.path;
  doc["output"] = output;

  if (config.model.kind == models::ModelKind::ViscousDusty2D) {
    json viscous;
    viscous["grid_n"] = config.viscous.grid_n;
    viscous["box"] = config.viscous.box;
    viscous["t_end"] = config.viscous.t_end;
    viscous["output_count"] = config.viscous.output_count;
    if (!config.viscous.nu_list.empty()) viscous["nu_list"] = config.viscous.nu_list;
    if (config.viscous.study_t_end > 0.0) viscous["study_t_end"] = config.viscous.study_t_end;
    doc["viscous"] = viscous;
  }
  return doc;
}

std::string config_digest(const ScenarioConfig& config) {
  const std::string bytes = to_json(config).dump();
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

double eval_potential(const PotentialConfig& potential, double box, double x, double y) {
  auto param = [&](const char* key, double fallback) {
    const auto it = potential.params.find(key);
    return it == potential.params.end() ? fallback : it->second;
  };
  if (potential.preset == "zero") return 0.0;
  if (potential.preset == "gaussian") {
    const double amplitude = param("amplitude", 0.5);
    const double sigma = param("sigma", 0.15);
    const double cx = param("cx", 0.5 * box);
    const double cy = param("cy", 0.5 * box);
    if (!(sigma > 0.0)) throw ConfigError("initial.phi0.params.sigma", "must be positive");
    const double dx = x - cx, dy = y - cy;
    return amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
  if (potential.preset == "cosine") {
    const double amplitude = param("amplitude", 0.1);
    const double kx = param("kx", 1.0);
    const double ky = param("ky", 0.0);
    const double two_pi = 2.0 * M_PI;
    return amplitude * std::cos(two_pi * kx * x / box) * std::cos(two_pi * ky * y / box);
  }
  throw ConfigError("initial.phi0.preset", "unknown preset '" + potential.preset + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), result.ptr);
}

nlohmann::json report_to_json(const RunReport& report) {
  json doc;
  doc["digest"] = report.digest;
  doc["command"] = report.command;
  doc["seed"] = report.seed;
  doc["wall_time_seconds"] = report.wall_time_seconds;
  json verdicts = json::array();
  for (const auto& verdict : report.verdicts) {
    json v;
    v["outcome"] = blowup::to_string(verdict.outcome);
    v["t_star"] = verdict.t_star ? json(*verdict.t_star) : json(nullptr);
    v["orthant"] = verdict.orthant;
    v["rate_exponent"] = verdict.rate_exponent ? json(*verdict.rate_exponent) : json(nullptr);
    v["reason"] = verdict.reason;
    verdicts.push_back(v);
  }
  doc["verdicts"] = verdicts;
  json drift = json::array();
  for (const auto& row : report.drift) {
    json d;
    d["label"] = row.label;
    d["initial"] = json::array({row.initial.real(), row.initial.imag()});
    d["max_rel_drift"] = row.max_rel_drift;
    drift.push_back(d);
  }
  doc["drift"] = drift;
  doc["trajectory_files"] = report.trajectory_files;
  doc["diagnostics"] = report.diagnostics;
  return doc;
}

}  // namespace gradflow::scenario

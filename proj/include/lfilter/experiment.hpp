#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lfilter/adiabatic.hpp"
#include "lfilter/circuit.hpp"
#include "lfilter/filter.hpp"
#include "lfilter/observables.hpp"
#include "lfilter/tfi.hpp"

namespace lfilter {

struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> list)
      : std::runtime_error(list.empty() ? "invalid configuration" : list.front()),
        issues(std::move(list)) {}
};

enum class ExperimentKind {
  variance_sweep,
  adiabatic_sweep,
  entropy_sweep,
  theta_curve,
  gap_audit,
  depth_audit,
};

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::variance_sweep: return "variance_sweep";
    case ExperimentKind::adiabatic_sweep: return "adiabatic_sweep";
    case ExperimentKind::entropy_sweep: return "entropy_sweep";
    case ExperimentKind::theta_curve: return "theta_curve";
    case ExperimentKind::gap_audit: return "gap_audit";
    case ExperimentKind::depth_audit: return "depth_audit";
  }
  return "?";
}

inline std::optional<ExperimentKind> kind_from_name(const std::string& s) {
  for (ExperimentKind k :
       {ExperimentKind::variance_sweep, ExperimentKind::adiabatic_sweep,
        ExperimentKind::entropy_sweep, ExperimentKind::theta_curve, ExperimentKind::gap_audit,
        ExperimentKind::depth_audit})
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

/// Full description of one experiment run. Parsed from the flat key-value
/// config grammar (see README) and overridable from the command line.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::variance_sweep;
  unsigned seed = 1;
  int threads = 1;

  // model couplings (J, g, h); the site count comes from `n_list`
  double j = 1.0;
  double g = -1.05;
  double h = 0.5;

  bool state_afm = true;
  double theta = 0.0;

  std::vector<int> n_list;
  std::vector<double> delta_list;
  bool e_f_auto = true;
  double e_f = 0.0;

  double delta_inv_max = 0.0;
  double tau = 0.1;
  std::vector<int> steps_list;
  std::string shape = "sin-sin-squared";

  double curve_min = 0.0;
  double curve_max = M_PI / 2.0;
  int curve_points = 65;

  int cut = 0;  // 0 = half chain

  int dense_check_max_sites = 10;
  int adiabatic_dense_check_max_sites = 6;
  int eta_max_sites = 10;

  std::string out_path = "results.csv";
  bool timing = false;
  std::string circuit_path;

  ProductStateSpec state_spec(int n) const {
    return state_afm ? ProductStateSpec::afm(n) : ProductStateSpec::uniform(n, theta);
  }

  TfiParams model_params(int n) const { return {n, j, g, h}; }

  std::vector<std::string> validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> errs;
  const bool needs_n = kind != ExperimentKind::theta_curve;
  const bool needs_delta = kind == ExperimentKind::variance_sweep ||
                           kind == ExperimentKind::entropy_sweep ||
                           kind == ExperimentKind::gap_audit || kind == ExperimentKind::depth_audit;
  if (threads < 1) errs.push_back("experiment.threads must be >= 1");
  if (needs_n) {
    if (n_list.empty()) errs.push_back("sweep.n must be a nonempty list");
    for (int n : n_list)
      if (n < 2 || n > kMaxSites)
        errs.push_back("sweep.n entry " + std::to_string(n) + " outside [2, " +
                       std::to_string(kMaxSites) + "]");
  }
  if (needs_delta) {
    if (delta_list.empty()) errs.push_back("filter.delta must be a nonempty list");
    for (double d : delta_list)
      if (!(d > 0.0)) errs.push_back("filter.delta entries must be positive");
  }
  if (kind == ExperimentKind::adiabatic_sweep) {
    if (steps_list.empty()) errs.push_back("schedule.steps must be a nonempty list");
    for (int s : steps_list)
      if (s < 1) errs.push_back("schedule.steps entries must be positive");
    if (!(tau > 0.0)) errs.push_back("schedule.tau must be positive");
    if (!(delta_inv_max >= 0.0)) errs.push_back("schedule.delta_inv_max must be >= 0");
  }
  if (kind == ExperimentKind::depth_audit) {
    if (steps_list.size() > 1) errs.push_back("schedule.steps must be a single value for depth_audit");
    if (!(tau > 0.0)) errs.push_back("schedule.tau must be positive");
  }
  if (kind == ExperimentKind::theta_curve) {
    if (curve_points < 2) errs.push_back("curve.points must be >= 2");
    if (!(curve_max > curve_min)) errs.push_back("curve range must be increasing");
  }
  if (cut < 0) errs.push_back("entropy.cut must be >= 0");
  if (kind == ExperimentKind::entropy_sweep && cut > 0)
    for (int n : n_list)
      if (cut >= n) errs.push_back("entropy.cut must be < n for every n");
  try {
    schedule_value(shape, 0.5, 1.0);
  } catch (const std::exception&) {
    errs.push_back("schedule.shape '" + shape + "' is unknown");
  }
  if (out_path.empty()) errs.push_back("output.path must not be empty");
  return errs;
}

/// Parses the flat sectioned key-value grammar. Unknown keys are errors.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errs;
  std::map<std::string, std::string> kv;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        errs.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      errs.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) {
      errs.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    kv[section.empty() ? key : section + "." + key] = value;
  }

  auto take = [&](const char* name) -> std::optional<std::string> {
    auto it = kv.find(name);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto as_double = [&](const char* name, double& dst) {
    if (auto v = take(name)) {
      try {
        dst = std::stod(*v);
      } catch (...) {
        errs.push_back(std::string(name) + ": not a number: '" + *v + "'");
      }
    }
  };
  auto as_int = [&](const char* name, int& dst) {
    if (auto v = take(name)) {
      try {
        dst = std::stoi(*v);
      } catch (...) {
        errs.push_back(std::string(name) + ": not an integer: '" + *v + "'");
      }
    }
  };

  if (auto v = take("experiment.kind")) {
    if (auto k = kind_from_name(*v))
      cfg.kind = *k;
    else
      errs.push_back("experiment.kind: unknown kind '" + *v + "'");
  }
  if (auto v = take("experiment.seed")) {
    try {
      cfg.seed = static_cast<unsigned>(std::stoul(*v));
    } catch (...) {
      errs.push_back("experiment.seed: not an unsigned integer");
    }
  }
  as_int("experiment.threads", cfg.threads);

  as_double("model.j", cfg.j);
  as_double("model.g", cfg.g);
  as_double("model.h", cfg.h);

  if (auto v = take("state.kind")) {
    if (*v == "afm")
      cfg.state_afm = true;
    else if (*v == "theta")
      cfg.state_afm = false;
    else
      errs.push_back("state.kind must be 'afm' or 'theta'");
  }
  as_double("state.theta", cfg.theta);

  if (auto v = take("sweep.n")) {
    cfg.n_list.clear();
    for (const auto& tok : detail::split_list(*v)) {
      try {
        cfg.n_list.push_back(std::stoi(tok));
      } catch (...) {
        errs.push_back("sweep.n: not an integer: '" + tok + "'");
      }
    }
  }

  if (auto v = take("filter.delta")) {
    cfg.delta_list.clear();
    for (const auto& tok : detail::split_list(*v)) {
      try {
        cfg.delta_list.push_back(std::stod(tok));
      } catch (...) {
        errs.push_back("filter.delta: not a number: '" + tok + "'");
      }
    }
  }
  if (auto v = take("filter.delta_inv")) {
    for (const auto& tok : detail::split_list(*v)) {
      try {
        const double dinv = std::stod(tok);
        if (!(dinv > 0.0))
          errs.push_back("filter.delta_inv entries must be positive");
        else
          cfg.delta_list.push_back(1.0 / dinv);
      } catch (...) {
        errs.push_back("filter.delta_inv: not a number: '" + tok + "'");
      }
    }
  }
  if (auto v = take("filter.delta_log")) {
    const auto toks = detail::split_list(*v);
    if (toks.size() != 3) {
      errs.push_back("filter.delta_log needs: min max count");
    } else {
      try {
        const double lo = std::stod(toks[0]), hi = std::stod(toks[1]);
        const int count = std::stoi(toks[2]);
        if (!(lo > 0.0) || !(hi > lo) || count < 2) {
          errs.push_back("filter.delta_log: need 0 < min < max and count >= 2");
        } else {
          for (int i = 0; i < count; ++i)
            cfg.delta_list.push_back(
                std::exp(std::log(lo) + i * (std::log(hi) - std::log(lo)) / (count - 1)));
        }
      } catch (...) {
        errs.push_back("filter.delta_log: malformed numbers");
      }
    }
  }
  if (auto v = take("filter.e_f")) {
    if (*v == "auto") {
      cfg.e_f_auto = true;
    } else {
      cfg.e_f_auto = false;
      try {
        cfg.e_f = std::stod(*v);
      } catch (...) {
        errs.push_back("filter.e_f: expected 'auto' or a number");
      }
    }
  }

  as_double("schedule.delta_inv_max", cfg.delta_inv_max);
  as_double("schedule.tau", cfg.tau);
  if (auto v = take("schedule.steps")) {
    cfg.steps_list.clear();
    for (const auto& tok : detail::split_list(*v)) {
      try {
        cfg.steps_list.push_back(std::stoi(tok));
      } catch (...) {
        errs.push_back("schedule.steps: not an integer: '" + tok + "'");
      }
    }
  }
  if (auto v = take("schedule.shape")) cfg.shape = *v;

  as_double("curve.min", cfg.curve_min);
  as_double("curve.max", cfg.curve_max);
  as_int("curve.points", cfg.curve_points);

  if (auto v = take("entropy.cut")) {
    if (*v == "half") {
      cfg.cut = 0;
    } else {
      try {
        cfg.cut = std::stoi(*v);
      } catch (...) {
        errs.push_back("entropy.cut: expected 'half' or an integer");
      }
    }
  }

  as_int("checks.dense_max_sites", cfg.dense_check_max_sites);
  as_int("checks.adiabatic_dense_max_sites", cfg.adiabatic_dense_check_max_sites);
  as_int("checks.eta_max_sites", cfg.eta_max_sites);

  if (auto v = take("output.path")) cfg.out_path = *v;
  if (auto v = take("output.timing")) {
    if (*v == "on")
      cfg.timing = true;
    else if (*v == "off")
      cfg.timing = false;
    else
      errs.push_back("output.timing must be 'on' or 'off'");
  }
  if (auto v = take("output.circuit")) cfg.circuit_path = *v;

  for (const auto& [key, value] : kv) errs.push_back("unknown key: " + key);
  auto more = cfg.validate();
  errs.insert(errs.end(), more.begin(), more.end());
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Serializes a config in the same grammar parse_config_text accepts.
inline std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream o;
  o << "[experiment]\n";
  o << "kind = " << kind_name(cfg.kind) << "\n";
  o << "seed = " << cfg.seed << "\n";
  o << "threads = " << cfg.threads << "\n\n";
  o << "[model]\n";
  o << "j = " << detail::fmt17(cfg.j) << "\n";
  o << "g = " << detail::fmt17(cfg.g) << "\n";
  o << "h = " << detail::fmt17(cfg.h) << "\n\n";
  if (cfg.kind != ExperimentKind::theta_curve) {
    o << "[state]\n";
    o << "kind = " << (cfg.state_afm ? "afm" : "theta") << "\n";
    if (!cfg.state_afm) o << "theta = " << detail::fmt17(cfg.theta) << "\n";
    o << "\n[sweep]\n";
    o << "n =";
    for (int n : cfg.n_list) o << ' ' << n;
    o << "\n\n";
  }
  if (!cfg.delta_list.empty()) {
    o << "[filter]\n";
    o << "delta =";
    for (double d : cfg.delta_list) o << ' ' << detail::fmt17(d);
    o << "\n";
    o << "e_f = " << (cfg.e_f_auto ? std::string("auto") : detail::fmt17(cfg.e_f)) << "\n\n";
  }
  if (cfg.kind == ExperimentKind::adiabatic_sweep || cfg.kind == ExperimentKind::depth_audit) {
    o << "[schedule]\n";
    o << "delta_inv_max = " << detail::fmt17(cfg.delta_inv_max) << "\n";
    o << "tau = " << detail::fmt17(cfg.tau) << "\n";
    if (!cfg.steps_list.empty()) {
      o << "steps =";
      for (int s : cfg.steps_list) o << ' ' << s;
      o << "\n";
    }
    o << "shape = " << cfg.shape << "\n\n";
  }
  if (cfg.kind == ExperimentKind::theta_curve) {
    o << "[curve]\n";
    o << "min = " << detail::fmt17(cfg.curve_min) << "\n";
    o << "max = " << detail::fmt17(cfg.curve_max) << "\n";
    o << "points = " << cfg.curve_points << "\n\n";
  }
  if (cfg.kind == ExperimentKind::entropy_sweep) {
    o << "[entropy]\n";
    o << "cut = " << (cfg.cut == 0 ? std::string("half") : std::to_string(cfg.cut)) << "\n\n";
  }
  o << "[checks]\n";
  o << "dense_max_sites = " << cfg.dense_check_max_sites << "\n";
  o << "adiabatic_dense_max_sites = " << cfg.adiabatic_dense_check_max_sites << "\n";
  o << "eta_max_sites = " << cfg.eta_max_sites << "\n\n";
  o << "[output]\n";
  o << "path = " << cfg.out_path << "\n";
  o << "timing = " << (cfg.timing ? "on" : "off") << "\n";
  if (!cfg.circuit_path.empty()) o << "circuit = " << cfg.circuit_path << "\n";
  return o.str();
}

/// Desk-scale parameterizations of the benchmark figures.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  auto log_grid = [](double lo, double hi, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i)
      out.push_back(std::exp(std::log(lo) + i * (std::log(hi) - std::log(lo)) / (count - 1)));
    return out;
  };
  if (name == "fig2") {
    cfg.kind = ExperimentKind::variance_sweep;
    cfg.state_afm = true;
    cfg.n_list = {6, 8, 10, 12};
    cfg.delta_list = log_grid(0.05, 5.0, 13);
    cfg.out_path = "fig2.csv";
  } else if (name == "fig3") {
    cfg.kind = ExperimentKind::variance_sweep;
    cfg.state_afm = false;
    cfg.theta = M_PI / 6.0;
    cfg.n_list = {8, 10, 12};
    cfg.delta_list = log_grid(0.05, 5.0, 13);
    cfg.out_path = "fig3.csv";
  } else if (name == "fig4" || name == "fig5") {
    cfg.kind = ExperimentKind::adiabatic_sweep;
    if (name == "fig4") {
      cfg.state_afm = true;
    } else {
      cfg.state_afm = false;
      cfg.theta = M_PI / 6.0;
    }
    cfg.n_list = {6, 8, 10};
    cfg.delta_inv_max = 10.0;  // final width delta = 0.1
    cfg.tau = 0.1;
    cfg.steps_list = {250, 500, 1000, 2000};
    cfg.out_path = name + ".csv";
  } else if (name == "fig6") {
    cfg.kind = ExperimentKind::theta_curve;
    cfg.curve_min = 0.0;
    cfg.curve_max = M_PI / 2.0;
    cfg.curve_points = 65;
    cfg.out_path = "fig6.csv";
  } else if (name == "fig8") {
    cfg.kind = ExperimentKind::entropy_sweep;
    cfg.state_afm = false;
    cfg.theta = M_PI / 6.0;
    cfg.n_list = {8, 10, 12};
    cfg.delta_list = {1.0 / 0.5, 1.0, 1.0 / 2.0, 1.0 / 5.0, 1.0 / 10.0};
    std::sort(cfg.delta_list.begin(), cfg.delta_list.end());
    cfg.out_path = "fig8.csv";
  } else {
    throw ConfigError({"unknown preset '" + name + "'"});
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// run(): sweep orchestration with a bounded worker pool and ordered CSV writes
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr const char* kCsvColumns[] = {
    "N",           "theta_or_afm",        "delta",   "sigma0_sq", "sigma_L_sq_measured",
    "sigma_L_sq_theory", "E0",            "fidelity", "parent_energy", "T",
    "tau",         "entropy",             "depth",   "eta",       "wall_time",
    "status",      "gap_h2h_min",         "gap_lowest_nonzero"};
inline constexpr int kNumCols = 18;

struct Row {
  std::array<std::string, kNumCols> cells;
  bool flagged = false;

  void set(int col, double v) { cells[static_cast<std::size_t>(col)] = fmt17(v); }
  void set(int col, const std::string& v) { cells[static_cast<std::size_t>(col)] = v; }
  std::string join() const {
    std::string line;
    for (int i = 0; i < kNumCols; ++i) {
      if (i) line += ',';
      line += cells[static_cast<std::size_t>(i)];
    }
    return line;
  }
};

enum Col {
  kN = 0, kState, kDelta, kSigma0, kSigmaMeas, kSigmaTheory, kE0, kFidelity, kParentEnergy,
  kT, kTau, kEntropy, kDepth, kEta, kWallTime, kStatus, kGapH2H, kGapLowest,
};

struct SweepPoint {
  int n = 0;
  double delta = 0.0;
  int steps = 0;
  double theta = 0.0;
};

/// Experiment state shared by all workers; everything here is read-only
/// during the parallel phase.
struct RunContext {
  const ExperimentConfig& cfg;
  std::vector<SweepPoint> points;
  std::map<int, double> eta_by_n;  // precomputed, variance_sweep only
};

inline double resolve_e_f(const ExperimentConfig& cfg, double e0) {
  return cfg.e_f_auto ? e0 : cfg.e_f;
}

inline Row compute_variance_point(const RunContext& ctx, const SweepPoint& pt) {
  const auto& cfg = ctx.cfg;
  Row row;
  const auto spec = cfg.state_spec(pt.n);
  const auto terms = build_tfi(cfg.model_params(pt.n));
  const SparseOperator ham = assemble(terms, pt.n);
  const Moments cm = classical_moments(spec, terms);
  const Vector psi = product_state(spec);
  const FilterParams fp = FilterParams::from_delta(resolve_e_f(cfg, cm.mean), pt.delta);

  const Vector phi = filtered_state(ham, psi, fp);
  const Moments meas = energy_moments(ham, phi);

  row.set(kN, std::to_string(pt.n));
  row.set(kState, cfg.state_afm ? "afm" : fmt17(cfg.theta));
  row.set(kDelta, pt.delta);
  row.set(kSigma0, cm.variance);
  row.set(kSigmaMeas, meas.variance);
  row.set(kSigmaTheory, variance_theory(pt.delta, cm.variance));
  row.set(kE0, cm.mean);
  if (auto it = ctx.eta_by_n.find(pt.n); it != ctx.eta_by_n.end()) row.set(kEta, it->second);

  if (pt.n <= cfg.dense_check_max_sites) {
    // dense resolvent cross-check of the iterative path
    Matrix f = Matrix(ham.mat);
    f -= fp.e_f * Matrix::Identity(ham.dim(), ham.dim());
    f *= Complex(0.0, fp.delta_inv);
    f += Matrix::Identity(ham.dim(), ham.dim());
    Vector dense_phi = f.partialPivLu().solve(psi);
    if (fidelity(dense_phi, phi) < 1.0 - 1e-9)
      throw std::runtime_error("dense cross-check failed for the filtered state");
  }
  return row;
}

inline Row compute_entropy_point(const RunContext& ctx, const SweepPoint& pt) {
  const auto& cfg = ctx.cfg;
  Row row;
  const auto spec = cfg.state_spec(pt.n);
  const auto terms = build_tfi(cfg.model_params(pt.n));
  const SparseOperator ham = assemble(terms, pt.n);
  const Moments cm = classical_moments(spec, terms);
  const Vector psi = product_state(spec);
  const FilterParams fp = FilterParams::from_delta(resolve_e_f(cfg, cm.mean), pt.delta);
  const Vector phi = filtered_state(ham, psi, fp);
  const int cut = cfg.cut > 0 ? cfg.cut : pt.n / 2;

  row.set(kN, std::to_string(pt.n));
  row.set(kState, cfg.state_afm ? "afm" : fmt17(cfg.theta));
  row.set(kDelta, pt.delta);
  row.set(kSigma0, cm.variance);
  row.set(kE0, cm.mean);
  row.set(kEntropy, entanglement_entropy(phi, cut));
  return row;
}

inline Row compute_adiabatic_point(const RunContext& ctx, const SweepPoint& pt) {
  const auto& cfg = ctx.cfg;
  Row row;
  const auto spec = cfg.state_spec(pt.n);
  const auto terms = build_tfi(cfg.model_params(pt.n));
  const auto proj = projector_sum_terms(spec);
  const Moments cm = classical_moments(spec, terms);
  const Vector psi = product_state(spec);
  const double e_f = resolve_e_f(cfg, cm.mean);

  ScheduleSpec sched;
  sched.delta_inv_max = cfg.delta_inv_max;
  sched.tau = cfg.tau;
  sched.total_time = cfg.tau * pt.steps;
  sched.shape = cfg.shape;

  Trajectory traj = adiabatic_evolve(psi, terms, proj, e_f, sched);
  const TrajectoryPoint& fin = traj.points.back();

  row.set(kN, std::to_string(pt.n));
  row.set(kState, cfg.state_afm ? "afm" : fmt17(cfg.theta));
  if (cfg.delta_inv_max > 0.0) row.set(kDelta, 1.0 / cfg.delta_inv_max);
  row.set(kSigma0, cm.variance);
  row.set(kE0, cm.mean);
  row.set(kFidelity, fin.fidelity);
  row.set(kParentEnergy, fin.energy_raw_final);
  row.set(kT, sched.total_time);
  row.set(kTau, sched.tau);

  if (pt.n <= cfg.adiabatic_dense_check_max_sites) {
    // dense step-by-step propagator as an independent trajectory oracle
    FilterParams fp(e_f, cfg.delta_inv_max);
    ParentBuildOptions popts;
    popts.warn_stream = nullptr;
    const ParentHamiltonian ph = build_parent(terms, proj, fp, popts);
    Vector state = psi;
    const Matrix proj_d = Matrix(ph.projector_sum.mat);
    const Matrix comm_d = Matrix(ph.commutator_part->mat);
    const Matrix sand_d = Matrix(ph.sandwich_part->mat);
    for (int l = 1; l <= pt.steps; ++l) {
      const double s = static_cast<double>(l) / pt.steps;
      const double a = sched.value_at(s);
      Matrix gen = (proj_d + a * comm_d + a * a * sand_d) / (1.0 + a * a);
      Eigen::SelfAdjointEigenSolver<Matrix> es(gen);
      if (es.info() != Eigen::Success) throw std::runtime_error("dense oracle eigensolver failed");
      Vector phases(es.eigenvalues().size());
      for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases[i] = std::exp(Complex(0.0, -sched.tau * es.eigenvalues()[i]));
      state = es.eigenvectors() * phases.asDiagonal() *
              (es.eigenvectors().adjoint() * state);
    }
    const double fid_dense = fidelity(state, traj.final_state);
    if (fid_dense < 1.0 - 1e-7)
      throw std::runtime_error("dense trajectory cross-check failed (fidelity " +
                               fmt17(fid_dense) + ")");
  }
  return row;
}

inline Row compute_theta_point(const RunContext& ctx, const SweepPoint& pt) {
  const auto& cfg = ctx.cfg;
  Row row;
  row.set(kState, fmt17(pt.theta));
  row.set(kE0, theta_energy_density(pt.theta, cfg.g, cfg.h));
  return row;
}

inline Row compute_gap_point(const RunContext& ctx, const SweepPoint& pt) {
  const auto& cfg = ctx.cfg;
  Row row;
  const auto spec = cfg.state_spec(pt.n);
  const auto terms = build_tfi(cfg.model_params(pt.n));
  const auto proj = projector_sum_terms(spec);
  const Moments cm = classical_moments(spec, terms);
  const Vector psi = product_state(spec);
  const FilterParams fp(resolve_e_f(cfg, cm.mean), 1.0 / pt.delta);

  ParentBuildOptions popts;
  popts.warn_stream = nullptr;
  const ParentHamiltonian ph = build_parent(terms, proj, fp, popts);
  const GapCertificate cert = gap_certificate(ph);

  const SparseOperator ham = assemble(terms, pt.n);
  const Vector phi = filtered_state(ham, psi, fp);
  const double parent_energy = phi.dot(ph.apply_raw(phi)).real();

  row.set(kN, std::to_string(pt.n));
  row.set(kState, cfg.state_afm ? "afm" : fmt17(cfg.theta));
  row.set(kDelta, pt.delta);
  row.set(kSigma0, cm.variance);
  row.set(kE0, cm.mean);
  row.set(kParentEnergy, parent_energy);
  row.set(kGapH2H, cert.h2_minus_h_min);
  row.set(kGapLowest, cert.lowest_nonzero);
  if (!cert.passed) throw std::runtime_error("gap certificate failed");
  return row;
}

inline Row compute_depth_point(const RunContext& ctx, const SweepPoint& pt, bool export_requested) {
  const auto& cfg = ctx.cfg;
  Row row;
  const auto spec = cfg.state_spec(pt.n);
  const auto terms = build_tfi(cfg.model_params(pt.n));
  const auto proj = projector_sum_terms(spec);
  const Moments cm = classical_moments(spec, terms);
  const FilterParams fp(resolve_e_f(cfg, cm.mean), 1.0 / pt.delta);

  const TermDecomposition dec = decompose_parent(terms, proj, fp);
  ScheduleSpec sched;
  sched.delta_inv_max = 1.0 / pt.delta;
  sched.tau = cfg.tau;
  const int steps = cfg.steps_list.empty() ? 1 : cfg.steps_list.front();
  sched.total_time = cfg.tau * steps;
  sched.shape = cfg.shape;
  const DepthReport rep = depth_report(sched, dec);

  row.set(kN, std::to_string(pt.n));
  row.set(kState, cfg.state_afm ? "afm" : fmt17(cfg.theta));
  row.set(kDelta, pt.delta);
  row.set(kE0, cm.mean);
  row.set(kDepth, static_cast<double>(rep.per_step_depth));
  row.set(kT, sched.total_time);
  row.set(kTau, sched.tau);

  if (export_requested && !cfg.circuit_path.empty())
    export_circuit(schedule_layers(dec, sched.tau), cfg.circuit_path);
  return row;
}

}  // namespace detail

struct RunResult {
  int exit_code = 0;
  long rows = 0;
  long flagged = 0;
  std::string out_path;
};

/// Executes a validated experiment: sweep points run on a bounded worker
/// pool, rows are flushed to the CSV strictly in point order so identical
/// configurations produce byte-identical files for any thread count.
inline RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  {
    auto errs = cfg.validate();
    if (!errs.empty()) throw ConfigError(std::move(errs));
  }

  detail::RunContext ctx{cfg, {}, {}};

  switch (cfg.kind) {
    case ExperimentKind::variance_sweep:
    case ExperimentKind::entropy_sweep:
    case ExperimentKind::gap_audit:
    case ExperimentKind::depth_audit:
      for (int n : cfg.n_list)
        for (double d : cfg.delta_list) ctx.points.push_back({n, d, 0, 0.0});
      break;
    case ExperimentKind::adiabatic_sweep:
      for (int n : cfg.n_list)
        for (int s : cfg.steps_list) ctx.points.push_back({n, 0.0, s, 0.0});
      break;
    case ExperimentKind::theta_curve:
      for (int i = 0; i < cfg.curve_points; ++i) {
        const double t =
            cfg.curve_min + i * (cfg.curve_max - cfg.curve_min) / (cfg.curve_points - 1);
        ctx.points.push_back({0, 0.0, 0, t});
      }
      break;
  }

  // discreteness scale eta, once per system size (variance sweeps only)
  if (cfg.kind == ExperimentKind::variance_sweep) {
    for (int n : cfg.n_list) {
      if (n > cfg.eta_max_sites || ctx.eta_by_n.count(n)) continue;
      const auto spec = cfg.state_spec(n);
      const auto terms = build_tfi(cfg.model_params(n));
      const SparseOperator ham = assemble(terms, n);
      const Moments cm = classical_moments(spec, terms);
      ctx.eta_by_n[n] = discreteness_eta(ham, detail::resolve_e_f(cfg, cm.mean), cfg.eta_max_sites);
    }
  }

  std::ofstream out(cfg.out_path);
  if (!out) throw std::runtime_error("cannot open output file: " + cfg.out_path);
  for (int i = 0; i < detail::kNumCols; ++i) out << (i ? "," : "") << detail::kCsvColumns[i];
  out << "\n";
  out.flush();

  const std::size_t n_points = ctx.points.size();
  std::vector<detail::Row> rows(n_points);
  std::vector<char> done(n_points, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<long> flagged{0};

  auto compute = [&](std::size_t i) -> detail::Row {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Row row;
    try {
      switch (cfg.kind) {
        case ExperimentKind::variance_sweep:
          row = detail::compute_variance_point(ctx, ctx.points[i]);
          break;
        case ExperimentKind::entropy_sweep:
          row = detail::compute_entropy_point(ctx, ctx.points[i]);
          break;
        case ExperimentKind::adiabatic_sweep:
          row = detail::compute_adiabatic_point(ctx, ctx.points[i]);
          break;
        case ExperimentKind::theta_curve:
          row = detail::compute_theta_point(ctx, ctx.points[i]);
          break;
        case ExperimentKind::gap_audit:
          row = detail::compute_gap_point(ctx, ctx.points[i]);
          break;
        case ExperimentKind::depth_audit:
          row = detail::compute_depth_point(ctx, ctx.points[i], i == 0);
          break;
      }
      row.set(detail::kStatus, "ok");
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      row.set(detail::kStatus, "failed: " + msg);
      row.flagged = true;
      flagged.fetch_add(1);
    }
    if (cfg.timing) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      row.set(detail::kWallTime, dt.count());
    }
    return row;
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_points) return;
      detail::Row row = compute(i);
      {
        std::lock_guard<std::mutex> lk(mu);
        rows[i] = std::move(row);
        done[i] = 1;
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  const int n_threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n_points)));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);

  for (std::size_t i = 0; i < n_points; ++i) {
    std::unique_lock<std::mutex> lk(mu);
    cv.wait(lk, [&] { return done[i] != 0; });
    out << rows[i].join() << "\n";
    out.flush();
  }
  for (auto& th : pool) th.join();

  RunResult res;
  res.rows = static_cast<long>(n_points);
  res.flagged = flagged.load();
  res.exit_code = res.flagged > 0 ? 3 : 0;
  res.out_path = cfg.out_path;
  log << "experiment: " << kind_name(cfg.kind) << "\n";
  log << "points: " << res.rows << ", flagged: " << res.flagged << "\n";
  log << "output: " << res.out_path << "\n";
  return res;
}

}  // namespace lfilter

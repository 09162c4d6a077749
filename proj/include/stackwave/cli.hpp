#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stackwave/errors.hpp"
#include "stackwave/follower.hpp"
#include "stackwave/geometry.hpp"
#include "stackwave/grid.hpp"
#include "stackwave/leader.hpp"
#include "stackwave/oracle.hpp"
#include "stackwave/spaces.hpp"
#include "stackwave/wavesolver.hpp"

namespace stackwave::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_nonconvergence = 2;
inline constexpr int exit_verify_failed = 3;

// ---------------------------------------------------------------------------
// number formatting and parsing

/// Shortest decimal string that reads back to the same double.
inline std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// configuration

struct KeySpec {
  const char* key;
  const char* fallback;  // nullptr: required
  const char* help;
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> keys = {
      {"run.mode", "nash", "simulate | nash | leader | verify | sweep | oracle-regen"},
      {"run.seed", "1", "seed of the single mt19937_64 generator"},
      {"output.dir", "out", "directory for summary.json and CSV files"},
      {"output.field", "false", "also write the full space-time field (nash, leader)"},
      {"k", nullptr, "boundary speed, 0 <= k < 1"},
      {"T", nullptr, "time horizon"},
      {"partition.mode", "overlap", "overlap | split"},
      {"partition.split_time", "0", "split point in (0,T) for split mode"},
      {"grid.ny", "100", "space intervals"},
      {"grid.cfl", "0.8", "dt <= cfl*dy"},
      {"follower.sigma", "1", "follower control weight"},
      {"follower.tol", "1e-8", "relative CG tolerance"},
      {"follower.max_iter", "500", "CG iteration cap"},
      {"target.v2", "zero", "zero | one | sine:m | bump | random | CSV path"},
      {"target.v0", "reachable", "reachable | zero | one | sine:m | bump | CSV path"},
      {"target.v1", "reachable", "reachable | zero | one | sine:m | bump | CSV path"},
      {"leader.rho0", "0.05", "L2 ball radius around v0"},
      {"leader.rho1", "0.05", "H^-1 ball radius around v1"},
      {"leader.delta", "0", "constant delta in A (the dual solver needs 0)"},
      {"leader.tol", "1e-8", "prox residual tolerance"},
      {"leader.max_iter", "20000", "dual iteration cap"},
      {"leader.theta", "1", "Picard relaxation"},
      {"leader.coupling", "cg", "cg | picard: solver for the Sigma2 coupling in A*"},
      {"leader.slack", "0.02", "discretization allowance in the ball test"},
      {"leader.vi_directions", "20", "random directions in the VI certificate"},
      {"leader.override_speed_check", "false", "run even if k violates the speed bound"},
      {"simulate.control", "sine", "boundary trace: zero | sine | sine:f | smooth | bump | CSV path"},
      {"simulate.u0", "zero", "initial displacement preset"},
      {"simulate.u1", "zero", "initial velocity preset"},
      {"simulate.probe_y", "0.25", "probe location y"},
      {"simulate.probe_t", "0.5", "probe time t"},
      {"nash.w1", "smooth", "leader trace preset"},
      {"nash.gap_trials", "20", "random perturbations per magnitude"},
      {"verify.fault", "none", "none | flip-astar-sign"},
      {"sweep.mode", "nash", "mode run at every sweep point"},
      {"sweep.combine", "product", "product | zip"},
  };
  return keys;
}

inline const KeySpec* find_key(const std::string& key) {
  for (const auto& k : key_table())
    if (key == k.key) return &k;
  return nullptr;
}

class Config {
public:
  Config() = default;

  static Config parse(std::istream& in, const fs::path& base = {}) {
    Config c;
    c.base_ = base;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value", "");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (c.explicit_.count(key)) throw ConfigError("duplicate key '" + key + "'", key);
      c.set(key, value);
    }
    return c;
  }

  static Config load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string(), "");
    return parse(in, path.parent_path());
  }

  void set(const std::string& key, const std::string& value) {
    if (!find_key(key)) throw ConfigError("unknown key '" + key + "'", key);
    explicit_[key] = value;
  }

  bool has(const std::string& key) const { return explicit_.count(key) > 0; }

  /// Throws with the full list of required keys that are absent.
  void require_complete() const {
    std::vector<std::string> missing;
    for (const auto& k : key_table())
      if (!k.fallback && !has(k.key)) missing.emplace_back(k.key);
    if (missing.empty()) return;
    std::string msg = "missing required keys:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg, missing.front());
  }

  std::string str(const std::string& key) const {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("unknown key '" + key + "'", key);
    if (auto it = explicit_.find(key); it != explicit_.end()) return it->second;
    if (!spec->fallback) throw ConfigError("missing required key '" + key + "'", key);
    return spec->fallback;
  }

  double num(const std::string& key) const {
    const std::string s = str(key);
    const auto v = parse_double(s);
    if (!v || !std::isfinite(*v)) throw ConfigError(key + ": expected a number, got '" + s + "'", key);
    return *v;
  }

  int integer(const std::string& key) const {
    const double v = num(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer", key);
    return static_cast<int>(v);
  }

  bool flag(const std::string& key) const {
    const std::string s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'", key);
  }

  bool is_list(const std::string& key) const { return str(key).find(',') != std::string::npos; }

  /// Effective values of every key, in table order.
  json echo() const {
    json j = json::object();
    for (const auto& k : key_table())
      if (has(k.key) || k.fallback) j[k.key] = str(k.key);
    return j;
  }

  const std::map<std::string, std::string>& explicit_values() const noexcept { return explicit_; }
  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() || base_.empty() ? path : base_ / path;
  }

private:
  std::map<std::string, std::string> explicit_;
  fs::path base_;
};

// ---------------------------------------------------------------------------
// presets

inline std::vector<std::vector<double>> read_csv_numbers(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key + ": cannot read " + path.string(), key);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& cell : split(line, ',')) {
      const auto v = parse_double(cell);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ConfigError(key + ": non-numeric row in " + path.string(), key);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline bool is_preset_name(const std::string& s) {
  static const char* names[] = {"zero", "one", "sine", "smooth", "bump", "random", "reachable"};
  const std::string head = s.substr(0, s.find(':'));
  for (const char* n : names)
    if (head == n) return true;
  return false;
}

inline double preset_parameter(const std::string& spec, const std::string& key, double fallback) {
  const auto c = spec.find(':');
  if (c == std::string::npos) return fallback;
  const auto v = parse_double(spec.substr(c + 1));
  if (!v) throw ConfigError(key + ": bad preset parameter in '" + spec + "'", key);
  return *v;
}

/// Analytic boundary traces, so that closed-form references can use the same function.
inline std::function<double(double)> trace_function(const std::string& spec, double T, const std::string& key) {
  const std::string head = spec.substr(0, spec.find(':'));
  if (head == "zero") return [](double) { return 0.0; };
  if (head == "sine") {
    const double f = preset_parameter(spec, key, 1.0);
    return [f](double t) { return std::sin(f * M_PI * t); };
  }
  if (head == "smooth") {
    const double a = preset_parameter(spec, key, 1.0);
    return [a, T](double t) { return a * std::pow(std::sin(M_PI * t / T), 2); };
  }
  if (head == "bump") return [T](double t) { return std::exp(-std::pow((t - 0.5 * T) / (0.15 * T), 2)); };
  return nullptr;
}

inline ControlTrace trace_preset(const Config& cfg, const std::string& key, const GridSpec& g,
                                 const std::vector<char>& mask, Segment seg) {
  const std::string spec = cfg.str(key);
  ControlTrace tr(g.levels(), mask, seg);
  if (auto f = trace_function(spec, g.T, key)) {
    for (int n = 0; n <= g.nt; ++n)
      if (mask[n]) tr.values[n] = f(g.t(n));
    return tr;
  }
  if (is_preset_name(spec)) throw ConfigError(key + ": preset '" + spec + "' is not a trace", key);
  const auto rows = read_csv_numbers(cfg.resolve(spec), key);
  if (rows.size() != g.levels())
    throw ConfigError(key + ": expected " + std::to_string(g.levels()) + " rows, got " +
                          std::to_string(rows.size()),
                      key);
  for (int n = 0; n <= g.nt; ++n)
    if (mask[n]) tr.values[n] = rows[n].back();
  return tr;
}

inline GridFunction function_preset(const Config& cfg, const std::string& key, const GridSpec& g) {
  const std::string spec = cfg.str(key);
  const std::string head = spec.substr(0, spec.find(':'));
  GridFunction f(g.nodes(), 0.0);
  if (head == "zero") return f;
  if (head == "one" || head == "sine" || head == "bump") {
    const double m = preset_parameter(spec, key, 1.0);
    for (int j = 0; j <= g.ny; ++j) {
      const double y = g.y(j);
      f[j] = head == "one" ? 1.0 : head == "sine" ? std::sin(m * M_PI * y) : std::exp(-std::pow((y - 0.5) / 0.1, 2));
    }
    return f;
  }
  if (is_preset_name(spec)) throw ConfigError(key + ": preset '" + spec + "' is not a space function", key);
  const auto rows = read_csv_numbers(cfg.resolve(spec), key);
  if (rows.size() != g.nodes())
    throw ConfigError(key + ": expected " + std::to_string(g.nodes()) + " rows", key);
  for (int j = 0; j <= g.ny; ++j) f[j] = rows[j].back();
  return f;
}

/// Smooth random space-time field: three sine modes in y with random amplitudes and frequencies in t.
inline Field random_smooth_field(const GridSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(-1.0, 1.0), freq(0.5, 3.0);
  double a[3], w[3], ph[3];
  for (int m = 0; m < 3; ++m) {
    a[m] = amp(rng) / (m + 1);
    w[m] = freq(rng);
    ph[m] = 3.0 * amp(rng);
  }
  Field v(g);
  for (int n = 0; n <= g.nt; ++n)
    for (int j = 0; j <= g.ny; ++j) {
      double s = 0.0;
      for (int m = 0; m < 3; ++m) s += a[m] * std::sin((m + 1) * M_PI * g.y(j)) * std::cos(w[m] * g.t(n) + ph[m]);
      v(n, j) = s;
    }
  return v;
}

inline Field field_preset(const Config& cfg, const std::string& key, const GridSpec& g, std::mt19937_64& rng) {
  const std::string spec = cfg.str(key);
  const std::string head = spec.substr(0, spec.find(':'));
  Field v(g);
  if (head == "zero") return v;
  if (head == "random") return random_smooth_field(g, rng);
  if (head == "one" || head == "sine" || head == "bump") {
    const GridFunction f = function_preset(cfg, key, g);
    for (int n = 0; n <= g.nt; ++n)
      for (int j = 0; j <= g.ny; ++j) v(n, j) = f[j];
    return v;
  }
  if (is_preset_name(spec)) throw ConfigError(key + ": preset '" + spec + "' is not a field", key);
  const auto rows = read_csv_numbers(cfg.resolve(spec), key);
  if (rows.size() != g.levels()) throw ConfigError(key + ": expected one row per time level", key);
  for (int n = 0; n <= g.nt; ++n) {
    if (rows[n].size() < g.nodes()) throw ConfigError(key + ": expected one column per node", key);
    const std::size_t off = rows[n].size() - g.nodes();
    for (int j = 0; j <= g.ny; ++j) v(n, j) = rows[n][off + j];
  }
  return v;
}

// ---------------------------------------------------------------------------
// scenario assembly

struct Scenario {
  GridSpec grid;
  MovingDomain domain;
  BoundaryPartition partition;
  double sigma;
  Field v2;
  FollowerOptions fopt;
  std::uint64_t seed;
};

inline PartitionMode parse_partition(const Config& cfg) {
  const std::string m = cfg.str("partition.mode");
  if (m == "overlap") return PartitionMode::Overlap;
  if (m == "split") return PartitionMode::Split;
  throw ConfigError("partition.mode must be overlap or split, got '" + m + "'", "partition.mode");
}

inline Scenario build_scenario(const Config& cfg, std::mt19937_64& rng) {
  cfg.require_complete();
  const double T = cfg.num("T");
  const GridSpec g = GridSpec::from_cfl(cfg.integer("grid.ny"), T, cfg.num("grid.cfl"));
  MovingDomain d(cfg.num("k"), T);
  BoundaryPartition part = build_partition(parse_partition(cfg), g, cfg.num("partition.split_time"));
  FollowerOptions fo{cfg.num("follower.tol"), cfg.integer("follower.max_iter")};
  if (!(fo.tol > 0.0)) throw ConfigError("follower.tol must be positive", "follower.tol");
  if (fo.max_iter < 1) throw ConfigError("follower.max_iter must be >= 1", "follower.max_iter");
  Field v2 = field_preset(cfg, "target.v2", g, rng);
  return Scenario{g, d, std::move(part), cfg.num("follower.sigma"), std::move(v2), fo,
                  static_cast<std::uint64_t>(cfg.integer("run.seed"))};
}

/// Known control pair whose terminal state serves as a reachable target.
inline TerminalState reachable_target(const Follower& fol) {
  const GridSpec& g = fol.grid();
  ControlTrace w1 = fol.zero_leader(), w2 = fol.zero_follower();
  for (int n = 0; n <= g.nt; ++n) {
    const double s = std::sin(M_PI * g.t(n) / g.T);
    if (w1.mask[n]) w1.values[n] = 2.0 * s * s;
    if (w2.mask[n]) w2.values[n] = std::sin(2.0 * M_PI * g.t(n) / g.T) * s;
  }
  return terminal_state(fol.state(w1, w2));
}

inline LeaderProblem build_leader_problem(const Config& cfg, const Follower& fol) {
  const bool r0 = cfg.str("target.v0") == "reachable", r1 = cfg.str("target.v1") == "reachable";
  if (r0 != r1) throw ConfigError("target.v0 and target.v1 must both be reachable or neither", "target.v1");
  LeaderProblem pr;
  if (r0) {
    const TerminalState ts = reachable_target(fol);
    pr.v0_target = ts.vT;
    pr.v1_target = ts.vTprime;
  } else {
    pr.v0_target = function_preset(cfg, "target.v0", fol.grid());
    pr.v1_target = function_preset(cfg, "target.v1", fol.grid());
  }
  pr.rho0 = cfg.num("leader.rho0");
  pr.rho1 = cfg.num("leader.rho1");
  pr.delta = cfg.num("leader.delta");
  return pr;
}

inline LeaderOptions build_leader_options(const Config& cfg) {
  LeaderOptions o;
  o.tol = cfg.num("leader.tol");
  o.max_iter = cfg.integer("leader.max_iter");
  o.theta = cfg.num("leader.theta");
  const std::string c = cfg.str("leader.coupling");
  if (c == "cg")
    o.coupling = CouplingSolver::CG;
  else if (c == "picard")
    o.coupling = CouplingSolver::Picard;
  else
    throw ConfigError("leader.coupling must be cg or picard", "leader.coupling");
  if (!(o.theta > 0.0 && o.theta <= 1.0)) throw ConfigError("leader.theta must lie in (0,1]", "leader.theta");
  if (!(o.tol > 0.0)) throw ConfigError("leader.tol must be positive", "leader.tol");
  o.override_speed_check = cfg.flag("leader.override_speed_check");
  const std::string fault = cfg.str("verify.fault");
  if (fault != "none" && fault != "flip-astar-sign")
    throw ConfigError("verify.fault must be none or flip-astar-sign", "verify.fault");
  o.flip_astar_sign = fault == "flip-astar-sign";
  return o;
}

// ---------------------------------------------------------------------------
// outputs

/// Files produced by a run, written only after the run finishes.
struct RunOutput {
  json metrics = json::object();
  json checks = json::array();
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<double> history;  // convergence history, for failed runs
  bool checks_passed = true;
};

inline std::string csv_trace(const GridSpec& g, const ControlTrace& w) {
  std::string s = "t,value\n";
  for (int n = 0; n <= g.nt; ++n) s += fmt(g.t(n)) + "," + fmt(w.values[n]) + "\n";
  return s;
}

inline std::string csv_terminal(const GridSpec& g, const TerminalState& ts) {
  std::string s = "y,vT,vTprime\n";
  for (int j = 0; j <= g.ny; ++j) s += fmt(g.y(j)) + "," + fmt(ts.vT[j]) + "," + fmt(ts.vTprime[j]) + "\n";
  return s;
}

inline std::string csv_field(const Field& v) {
  const GridSpec& g = v.grid();
  std::string s = "t";
  for (int j = 0; j <= g.ny; ++j) s += ",y=" + fmt(g.y(j));
  s += "\n";
  for (int n = 0; n <= g.nt; ++n) {
    s += fmt(g.t(n));
    for (int j = 0; j <= g.ny; ++j) s += "," + fmt(v(n, j));
    s += "\n";
  }
  return s;
}

inline std::string csv_history(const std::vector<double>& h, const char* name) {
  std::string s = std::string("iteration,") + name + "\n";
  for (std::size_t i = 0; i < h.size(); ++i) s += std::to_string(i) + "," + fmt(h[i]) + "\n";
  return s;
}

inline void require_finite(const json& j, const std::string& where) {
  if (j.is_number_float() && !std::isfinite(j.get<double>()))
    throw ContractError("non-finite summary value at " + where);
  if (j.is_object())
    for (auto it = j.begin(); it != j.end(); ++it) require_finite(it.value(), where + "." + it.key());
  if (j.is_array())
    for (std::size_t i = 0; i < j.size(); ++i) require_finite(j[i], where + "[" + std::to_string(i) + "]");
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string(), "output.dir");
  out << s;
}

// ---------------------------------------------------------------------------
// run modes

inline double trace_norm(const Follower& fol, const ControlTrace& w) {
  return std::sqrt(trace_inner(fol.grid(), fol.partition(), w.segment, w.values, w.values));
}

/// Bilinear interpolation of a field at (y, t).
inline double probe(const Field& v, double y, double t) {
  const GridSpec& g = v.grid();
  if (!(y >= 0.0 && y <= 1.0 && t >= 0.0 && t <= g.T)) throw ConfigError("probe point outside the grid", "simulate.probe_t");
  const double sy = y / g.dy, st = t / g.dt;
  const int j = std::min(g.ny - 1, static_cast<int>(std::floor(sy)));
  const int n = std::min(g.nt - 1, static_cast<int>(std::floor(st)));
  const double a = sy - j, b = st - n;
  return (1 - a) * (1 - b) * v(n, j) + a * (1 - b) * v(n, j + 1) + (1 - a) * b * v(n + 1, j) + a * b * v(n + 1, j + 1);
}

inline RunOutput run_simulate(const Config& cfg, const Scenario& sc) {
  const GridSpec& g = sc.grid;
  const std::vector<char> all(g.levels(), 1);
  const ControlTrace b = trace_preset(cfg, "simulate.control", g, all, Segment::Full);
  const GridFunction u0 = function_preset(cfg, "simulate.u0", g);
  const GridFunction u1 = function_preset(cfg, "simulate.u1", g);
  const InitialData init = pullback_initial(g, u0, u1, sc.domain);
  const WaveSolver solver(g, sc.domain);
  const Field v = solver.forward(b.values, nullptr, &init);
  const TerminalState ts = terminal_state(v);
  const SpatialMetric metric(g);

  RunOutput out;
  const double py = cfg.num("simulate.probe_y"), pt = cfg.num("simulate.probe_t");
  out.metrics["max_abs"] = v.max_abs();
  out.metrics["probe_y"] = py;
  out.metrics["probe_t"] = pt;
  out.metrics["probe_value"] = probe(v, py, pt);
  const auto w = trace_function(cfg.str("simulate.control"), g.T, "simulate.control");
  const bool zero_init = std::all_of(u0.begin(), u0.end(), [](double x) { return x == 0.0; }) &&
                         std::all_of(u1.begin(), u1.end(), [](double x) { return x == 0.0; });
  if (sc.domain.k() == 0.0 && w && zero_init) {
    const double ref = oracle::dalembert_reference(w, py, pt, g.T);
    out.metrics["probe_reference"] = ref;
    out.metrics["probe_error"] = std::abs(out.metrics["probe_value"].get<double>() - ref);
  }
  out.metrics["vT_l2"] = metric.norm(Space::L2, ts.vT);
  out.metrics["vTprime_hm1"] = metric.norm(Space::Hm1, ts.vTprime);
  out.files.emplace_back("control.csv", csv_trace(g, b));
  out.files.emplace_back("terminal.csv", csv_terminal(g, ts));
  out.files.emplace_back("field.csv", csv_field(v));
  return out;
}

inline RunOutput run_nash(const Config& cfg, const Scenario& sc, std::mt19937_64& rng) {
  const GridSpec& g = sc.grid;
  const Follower fol(g, sc.domain, sc.partition, sc.sigma, sc.v2);
  const ControlTrace w1 = trace_preset(cfg, "nash.w1", g, sc.partition.mask1, Segment::Sigma1);
  const NashSolution sol = fol.best_response(w1, sc.fopt);

  RunOutput out;
  ControlTrace sw = sol.w2;
  sw *= sc.sigma;
  const ControlTrace grad = fol.gradient_from(sol.w2, sol.p);
  const double sw_norm = trace_norm(fol, sw);
  const int trials = cfg.integer("nash.gap_trials");
  double gap = 0.0;
  bool gap_ok = true;
  for (double mag : {0.01, 0.1}) {
    const NashGapReport r = fol.nash_gap_check(w1, sol.w2, trials, mag, rng);
    gap = mag == 0.01 ? r.min_gap : std::min(gap, r.min_gap);
    gap_ok = gap_ok && r.ok;
  }
  out.metrics["J2"] = fol.eval_J2(w1, sol.w2);
  out.metrics["w1_norm"] = trace_norm(fol, w1);
  out.metrics["w2_norm"] = trace_norm(fol, sol.w2);
  out.metrics["cg_iterations"] = sol.stats.iterations;
  out.metrics["grad0_norm"] = sol.stats.grad0_norm;
  out.metrics["final_grad_norm"] = sol.stats.final_grad_norm;
  out.metrics["stationarity_residual"] = sw_norm > 0.0 ? trace_norm(fol, grad) / sw_norm : trace_norm(fol, grad);
  out.metrics["nash_gap_min"] = gap;
  out.metrics["nash_gap_ok"] = gap_ok;
  out.files.emplace_back("w1.csv", csv_trace(g, w1));
  out.files.emplace_back("w2.csv", csv_trace(g, sol.w2));
  out.files.emplace_back("terminal.csv", csv_terminal(g, terminal_state(sol.v)));
  out.files.emplace_back("iters.csv", csv_history(sol.stats.history, "residual_norm"));
  if (cfg.flag("output.field")) out.files.emplace_back("field.csv", csv_field(sol.v));
  return out;
}

inline std::string csv_dual_log(const std::vector<DualLogEntry>& log) {
  std::string s = "iteration,objective,residual,lipschitz,restart\n";
  for (const auto& e : log)
    s += std::to_string(e.iteration) + "," + fmt(e.objective) + "," +
         (std::isfinite(e.residual) ? fmt(e.residual) : std::string("")) + "," + fmt(e.lipschitz) + "," +
         (e.restart ? "1" : "0") + "\n";
  return s;
}

inline RunOutput run_leader(const Config& cfg, const Scenario& sc, std::mt19937_64& rng) {
  const GridSpec& g = sc.grid;
  const Follower fol(g, sc.domain, sc.partition, sc.sigma, sc.v2);
  const LeaderOptions lo = build_leader_options(cfg);
  const Leader leader(fol, build_leader_problem(cfg, fol), lo);
  leader.require_speed_ok();
  const DualSolution sol = leader.minimize_dual();
  const LeaderRecovery rec = leader.recover_leader(sol.fstar);
  const ControllabilityResidual cr = leader.controllability_residual(rec.terminal, cfg.num("leader.slack"));
  const VIReport vi = leader.vi_residual(sol.fstar, cfg.integer("leader.vi_directions"), rng);

  RunOutput out;
  out.metrics["J"] = rec.J;
  out.metrics["J2"] = fol.eval_J2(rec.w1, rec.w2);
  out.metrics["w1_norm"] = trace_norm(fol, rec.w1);
  out.metrics["w2_norm"] = trace_norm(fol, rec.w2);
  out.metrics["d0"] = cr.d0;
  out.metrics["d1"] = cr.d1;
  out.metrics["inside"] = cr.inside;
  out.metrics["dual_objective"] = sol.objective;
  out.metrics["dual_iterations"] = sol.iterations;
  out.metrics["dual_restarts"] = sol.restarts;
  out.metrics["dual_monotone"] = sol.monotone;
  out.metrics["lipschitz"] = sol.lipschitz;
  out.metrics["prox_residual"] = sol.residual;
  out.metrics["vi_min"] = vi.min_value;
  out.metrics["vi_samples"] = vi.samples;
  out.metrics["vi_ok"] = vi.ok;
  out.metrics["f0_h10"] = leader.h10_norm(sol.fstar.f0);
  out.metrics["f1_l2"] = leader.l2_norm(sol.fstar.f1);
  std::string f = "y,f0,f1\n";
  for (int j = 0; j <= g.ny; ++j) f += fmt(g.y(j)) + "," + fmt(sol.fstar.f0[j]) + "," + fmt(sol.fstar.f1[j]) + "\n";
  out.files.emplace_back("w1.csv", csv_trace(g, rec.w1));
  out.files.emplace_back("w2.csv", csv_trace(g, rec.w2));
  out.files.emplace_back("terminal.csv", csv_terminal(g, rec.terminal));
  out.files.emplace_back("fstar.csv", f);
  out.files.emplace_back("iters.csv", csv_dual_log(sol.log));
  if (cfg.flag("output.field")) out.files.emplace_back("field.csv", csv_field(rec.v));
  return out;
}

// ---------------------------------------------------------------------------
// verify suite

struct Check {
  std::string name;
  double value;
  double threshold;
  bool passed;
  std::string detail;
};

inline void add_check(RunOutput& out, const Check& c) {
  out.checks.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"value", c.value},
                        {"threshold", c.threshold},
                        {"detail", c.detail}});
  out.checks_passed = out.checks_passed && c.passed;
}

inline ControlTrace random_trace(const Follower& fol, Segment s, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  ControlTrace w = s == Segment::Sigma1 ? fol.zero_leader() : fol.zero_follower();
  for (std::size_t n = 0; n < w.size(); ++n)
    if (w.mask[n]) w.values[n] = nd(rng);
  return w;
}

inline DualPoint random_dual(const GridSpec& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  DualPoint f = DualPoint::zero(g);
  for (int j = 1; j < g.ny; ++j) {
    f.f0[j] = nd(rng);
    f.f1[j] = nd(rng);
  }
  return f;
}

/// Max relative mismatch of sum tau (v, s) = sum tau b flux over random (b, s).
inline double transpose_duality_error(const WaveSolver& solver, int pairs, std::mt19937_64& rng) {
  const GridSpec& g = solver.grid();
  const SpatialMetric metric(g);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    std::vector<double> b(g.levels());
    for (double& x : b) x = nd(rng);
    Field s(g);
    for (double& x : s.data()) x = nd(rng);
    const Field v = solver.forward(b);
    const AdjointField p = solver.backward(s);
    const std::vector<double> fl = solver.flux(p, FluxMethod::Transpose);
    double lhs = 0.0, rhs = 0.0, scale = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
      const double term = g.time_weight(n) * metric.l2_inner(v.row(n), s.row(n));
      lhs += term;
      scale += std::abs(term);
      rhs += g.time_weight(n) * b[n] * fl[n];
    }
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(scale, 1e-300));
  }
  return worst;
}

struct OrderStudy {
  std::vector<int> ny;
  std::vector<double> error;
  std::vector<double> order;
};

/// Cylinder standing wave v = cos(pi t) sin(pi y) against the closed form at t = T.
inline OrderStudy standing_wave_order(double T, std::vector<int> nys, double cfl = 0.8) {
  OrderStudy s{nys, {}, {}};
  for (int ny : nys) {
    const GridSpec g = GridSpec::from_cfl(ny, T, cfl);
    const MovingDomain d(0.0, T);
    InitialData init{GridFunction(g.nodes()), GridFunction(g.nodes(), 0.0)};
    for (int j = 0; j <= ny; ++j) init.v0[j] = std::sin(M_PI * g.y(j));
    const Field v = WaveSolver(g, d).forward(std::vector<double>(g.levels(), 0.0), nullptr, &init);
    double e = 0.0;
    for (int n = 0; n <= g.nt; ++n)
      for (int j = 0; j <= ny; ++j) e = std::max(e, std::abs(v(n, j) - std::cos(M_PI * g.t(n)) * std::sin(M_PI * g.y(j))));
    s.error.push_back(e);
  }
  for (std::size_t i = 1; i < s.error.size(); ++i)
    s.order.push_back(std::log(s.error[i - 1] / s.error[i]) / std::log(double(s.ny[i]) / s.ny[i - 1]));
  return s;
}

/// Self-convergence at t = T on nested grids ny, 2ny, 4ny for smooth boundary data.
inline double moving_self_order(double k, double T, int ny) {
  std::vector<Field> sols;
  for (int m = 1; m <= 4; m *= 2) {
    const GridSpec g = GridSpec::from_cfl(ny * m, T);
    std::vector<double> b(g.levels());
    for (int n = 0; n <= g.nt; ++n) b[n] = std::pow(std::sin(M_PI * g.t(n) / T), 3);
    sols.push_back(WaveSolver(g, MovingDomain(k, T)).forward(b));
  }
  double e1 = 0.0, e2 = 0.0;
  for (int j = 0; j <= ny; ++j) {
    const double a = sols[0](sols[0].grid().nt, j), b = sols[1](sols[1].grid().nt, 2 * j),
                 c = sols[2](sols[2].grid().nt, 4 * j);
    e1 = std::max(e1, std::abs(a - b));
    e2 = std::max(e2, std::abs(b - c));
  }
  return std::log2(e1 / e2);
}

inline RunOutput run_verify(const Config& cfg, const Scenario& sc, std::mt19937_64& rng) {
  const GridSpec& g = sc.grid;
  RunOutput out;
  const Follower fol(g, sc.domain, sc.partition, sc.sigma, sc.v2);

  {
    const double e = transpose_duality_error(fol.solver(), 5, rng);
    add_check(out, {"transpose_duality", e, 1e-11, e <= 1e-11, "5 random (boundary, source) pairs"});
  }
  {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> b1(g.levels()), b2(g.levels()), b12(g.levels());
    for (std::size_t n = 0; n < b1.size(); ++n) {
      b1[n] = nd(rng);
      b2[n] = nd(rng);
      b12[n] = b1[n] + b2[n];
    }
    Field v = fol.solver().forward(b12);
    v -= fol.solver().forward(b1);
    v -= fol.solver().forward(b2);
    const double e = v.max_abs() / std::max(1e-300, fol.solver().forward(b12).max_abs());
    add_check(out, {"forward_linearity", e, 1e-12, e <= 1e-12, "S(b1+b2) - S(b1) - S(b2)"});
  }

  const LeaderOptions lo = build_leader_options(cfg);
  {
    LeaderProblem pr{zero_function(g), zero_function(g), 0.05, 0.05, 0.0};
    const Leader leader(fol, pr, lo);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const ControlTrace w = random_trace(fol, Segment::Sigma1, rng);
      const DualPoint f = random_dual(g, rng);
      const double lhs = leader.pairing(leader.apply_A(w), f);
      const double rhs = leader.leader_inner(w, leader.apply_Astar(f));
      const double scale = 1.0 + trace_norm(fol, w) * leader.dual_norm(f);
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    add_check(out, {"astar_adjointness", worst, 1e-8, worst <= 1e-8,
                    lo.flip_astar_sign ? "fault injected: A* sign flipped" : "10 random (w1, f) pairs"});
  }

  {
    Field v2 = random_smooth_field(g, rng);
    const Follower f2(g, sc.domain, sc.partition, sc.sigma, v2);
    const ControlTrace w1 = trace_preset(cfg, "nash.w1", g, sc.partition.mask1, Segment::Sigma1);
    FollowerOptions tight = sc.fopt;
    tight.tol = std::min(tight.tol, 1e-10);
    const NashSolution sol = f2.best_response(w1, tight);
    ControlTrace sw = sol.w2;
    sw *= sc.sigma;
    const double stat = trace_norm(f2, f2.gradient_from(sol.w2, sol.p)) / std::max(1e-300, trace_norm(f2, sw));
    add_check(out, {"nash_stationarity", stat, 1e-6, stat <= 1e-6, "|sigma w2 - flux(p)| / |sigma w2|"});

    const ControlTrace w2 = random_trace(f2, Segment::Sigma2, rng);
    const ControlTrace grad = f2.grad_J2_w2(w1, w2);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const ControlTrace d = random_trace(f2, Segment::Sigma2, rng);
      const double an = trace_inner(g, sc.partition, Segment::Sigma2, grad.values, d.values);
      const double fd = oracle::fd_directional(
          [&](double s) {
            ControlTrace w = w2;
            for (std::size_t n = 0; n < w.size(); ++n) w.values[n] += s * d.values[n];
            return f2.eval_J2(w1, w);
          },
          1e-4);
      worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-300));
    }
    add_check(out, {"follower_gradient_fd", worst, 1e-5, worst <= 1e-5, "5 random directions, h = 1e-4"});

    double gap = 0.0;
    for (double mag : {0.01, 0.1}) {
      const NashGapReport r = f2.nash_gap_check(w1, sol.w2, 20, mag, rng);
      gap = mag == 0.01 ? r.min_gap : std::min(gap, r.min_gap);
    }
    add_check(out, {"nash_gap", gap, -1e-10, gap >= -1e-10, "20 perturbations at magnitudes 0.01 and 0.1"});
  }

  {
    const Leader leader(fol, build_leader_problem(cfg, fol), lo);
    leader.require_speed_ok();
    try {
      const DualSolution sol = leader.minimize_dual();
      const VIReport vi = leader.vi_residual(sol.fstar, cfg.integer("leader.vi_directions"), rng);
      add_check(out, {"vi_certificate", vi.min_value, -1e-6, vi.min_value >= -1e-6,
                      std::to_string(vi.samples) + " sampled comparison points"});
      add_check(out, {"dual_monotone", sol.monotone ? 1.0 : 0.0, 1.0, sol.monotone, "objective nonincreasing"});
    } catch (const NonConvergence& e) {
      add_check(out, {"vi_certificate", e.history().empty() ? 0.0 : e.history().back(), 0.0, false, e.what()});
    }
  }

  {
    const OrderStudy s = standing_wave_order(0.75, {50, 100, 200});
    const double lo_ord = *std::min_element(s.order.begin(), s.order.end());
    const double hi_ord = *std::max_element(s.order.begin(), s.order.end());
    add_check(out, {"order_cylinder", lo_ord, 1.7, lo_ord >= 1.7 && hi_ord <= 2.3,
                    "standing wave, ny 50/100/200, orders " + fmt(s.order[0]) + ", " + fmt(s.order[1])});
    const double k = sc.domain.k() > 0.0 ? sc.domain.k() : 0.2;
    const double mo = moving_self_order(k, 0.75, 50);
    add_check(out, {"order_moving", mo, 0.9, mo >= 0.9, "self-convergence at k = " + fmt(k)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// dispatch

inline const std::vector<std::string>& mode_names() {
  static const std::vector<std::string> m = {"simulate", "nash", "leader", "verify", "sweep", "oracle-regen"};
  return m;
}

inline RunOutput run_mode(const std::string& mode, const Config& cfg) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("run.seed")));
  for (const auto& k : cfg.explicit_values())
    if (cfg.is_list(k.first))
      throw ConfigError("list value for '" + k.first + "' is only allowed in sweep mode", k.first);
  const Scenario sc = build_scenario(cfg, rng);
  if (mode == "simulate") return run_simulate(cfg, sc);
  if (mode == "nash") return run_nash(cfg, sc, rng);
  if (mode == "leader") return run_leader(cfg, sc, rng);
  if (mode == "verify") return run_verify(cfg, sc, rng);
  throw ConfigError("run.mode '" + mode + "' cannot run here", "run.mode");
}

inline json summary_skeleton(const std::string& mode, const Config& cfg) {
  json s;
  s["mode"] = mode;
  s["status"] = "ok";
  s["message"] = "";
  s["rng"] = "mt19937_64";
  s["seed"] = cfg.integer("run.seed");
  s["parameters"] = cfg.echo();
  s["metrics"] = json::object();
  s["checks"] = json::array();
  return s;
}

struct RunReport {
  int exit_code = exit_ok;
  json summary;
  std::string message;
};

/// Runs a single (non-sweep) mode and writes its outputs into `dir`.
inline RunReport execute(const std::string& mode, const Config& cfg, const fs::path& dir) {
  RunReport rep;
  rep.summary = summary_skeleton(mode, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  try {
    out = run_mode(mode, cfg);
  } catch (const NonConvergence& e) {
    rep.exit_code = exit_nonconvergence;
    rep.message = e.what();
    rep.summary["status"] = "nonconvergence";
    rep.summary["message"] = e.what();
    out.files.emplace_back("iters.csv", csv_history(e.history(), "residual"));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rep.exit_code == exit_ok) {
    rep.summary["metrics"] = out.metrics;
    rep.summary["checks"] = out.checks;
    if (!out.checks_passed) {
      rep.exit_code = exit_verify_failed;
      rep.summary["status"] = "failed";
      rep.summary["message"] = "one or more checks failed";
      rep.message = "one or more checks failed";
    }
  }
  require_finite(rep.summary, "summary");
  fs::create_directories(dir);
  for (const auto& [name, content] : out.files) write_text(dir / name, content);
  write_text(dir / "summary.json", rep.summary.dump(2) + "\n");
  write_text(dir / "timing.json", json{{"wall_seconds", wall}}.dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// sweep

inline RunReport run_sweep(const Config& cfg, const fs::path& dir, int jobs) {
  const std::string mode = cfg.str("sweep.mode");
  if (mode == "sweep" || mode == "oracle-regen" ||
      std::find(mode_names().begin(), mode_names().end(), mode) == mode_names().end())
    throw ConfigError("sweep.mode must be simulate, nash, leader or verify", "sweep.mode");
  const std::string combine = cfg.str("sweep.combine");
  if (combine != "product" && combine != "zip") throw ConfigError("sweep.combine must be product or zip", "sweep.combine");

  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [k, v] : cfg.explicit_values())
    if (cfg.is_list(k)) axes.emplace_back(k, split(v, ','));
  std::vector<std::vector<std::string>> points;
  if (axes.empty()) {
    points.emplace_back();
  } else if (combine == "zip") {
    const std::size_t len = axes.front().second.size();
    for (const auto& a : axes)
      if (a.second.size() != len) throw ConfigError("zip sweep needs equal list lengths", a.first);
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<std::string> p;
      for (const auto& a : axes) p.push_back(a.second[i]);
      points.push_back(p);
    }
  } else {
    points.emplace_back();
    for (const auto& a : axes) {
      std::vector<std::vector<std::string>> next;
      for (const auto& p : points)
        for (const auto& v : a.second) {
          auto q = p;
          q.push_back(v);
          next.push_back(q);
        }
      points = std::move(next);
    }
  }

  std::vector<Config> configs;
  for (const auto& p : points) {
    Config c = cfg;
    for (std::size_t i = 0; i < axes.size(); ++i) c.set(axes[i].first, p[i]);
    c.set("run.mode", mode);
    configs.push_back(c);
  }

  std::vector<RunReport> reports(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const fs::path rowdir = dir / "rows" / std::to_string(i);
      try {
        reports[i] = execute(mode, configs[i], rowdir);
      } catch (const std::exception& e) {
        reports[i].exit_code = exit_config;
        reports[i].message = e.what();
        reports[i].summary = json::object();
      }
    }
  };
  const int n_jobs = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::string> metric_keys;
  for (const auto& r : reports)
    if (r.summary.contains("metrics"))
      for (auto it = r.summary["metrics"].begin(); it != r.summary["metrics"].end(); ++it)
        if (std::find(metric_keys.begin(), metric_keys.end(), it.key()) == metric_keys.end())
          metric_keys.push_back(it.key());

  auto cell = [](const json& j) -> std::string {
    if (j.is_boolean()) return j.get<bool>() ? "1" : "0";
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number()) return fmt(j.get<double>());
    return "";
  };
  auto quote = [](std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::string csv = "row";
  for (const auto& a : axes) csv += "," + a.first;
  csv += ",status,exit_code";
  for (const auto& m : metric_keys) csv += "," + m;
  csv += ",message\n";
  RunReport total;
  total.summary = summary_skeleton("sweep", cfg);
  json rows = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    const std::string status = r.summary.contains("status") ? r.summary["status"].get<std::string>() : "error";
    csv += std::to_string(i);
    for (const auto& v : points[i]) csv += "," + quote(v);
    csv += "," + status + "," + std::to_string(r.exit_code);
    for (const auto& m : metric_keys)
      csv += "," + (r.summary.contains("metrics") && r.summary["metrics"].contains(m) ? cell(r.summary["metrics"][m]) : "");
    csv += "," + quote(r.message) + "\n";
    json row = {{"row", i}, {"status", status}, {"exit_code", r.exit_code}};
    for (std::size_t a = 0; a < axes.size(); ++a) row[axes[a].first] = points[i][a];
    rows.push_back(row);
  }
  total.summary["metrics"] = {{"rows", reports.size()}};
  total.summary["checks"] = rows;
  fs::create_directories(dir);
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "summary.json", total.summary.dump(2) + "\n");
  return total;
}

// ---------------------------------------------------------------------------
// golden fixtures

/// Tiny-grid scenario shared by the golden fixtures and their tests.
struct TinyScenario {
  GridSpec grid = GridSpec::with_steps(6, 20, 2.0);
  MovingDomain domain{0.2, 2.0};
  BoundaryPartition partition = build_partition(PartitionMode::Overlap, grid);
  double sigma = 1.0;

  Field v2() const {
    Field v(grid);
    for (int n = 0; n <= grid.nt; ++n)
      for (int j = 0; j <= grid.ny; ++j)
        v(n, j) = std::sin(M_PI * grid.y(j)) * (1.0 + grid.t(n)) + 0.3 * std::sin(2.0 * M_PI * grid.y(j)) * std::cos(2.0 * grid.t(n));
    return v;
  }
  ControlTrace w1() const {
    ControlTrace w = partition.zero_trace(Segment::Sigma1);
    for (int n = 0; n <= grid.nt; ++n) w.values[n] = std::cos(grid.t(n)) - 0.5 * std::sin(3.0 * grid.t(n));
    return w;
  }
  LeaderProblem problem() const {
    LeaderProblem pr{zero_function(grid), zero_function(grid), 0.05, 0.05, 0.0};
    for (int j = 1; j < grid.ny; ++j) {
      pr.v0_target[j] = std::sin(M_PI * grid.y(j));
      pr.v1_target[j] = 0.5 * std::sin(2.0 * M_PI * grid.y(j));
    }
    return pr;
  }
  DualPoint probe_point() const {
    DualPoint f = DualPoint::zero(grid);
    for (int j = 1; j < grid.ny; ++j) {
      f.f0[j] = std::sin(3.0 * j);
      f.f1[j] = std::cos(j);
    }
    return f;
  }
};

inline std::vector<std::pair<std::string, std::string>> golden_files() {
  std::vector<std::pair<std::string, std::string>> files;

  {
    auto sine = [](double t) { return std::sin(M_PI * t); };
    auto pulse = [](double t) { return t < 0.1 ? std::sin(M_PI * t / 0.1) : 0.0; };
    std::string s = "control,y,t,T,value\n";
    const std::vector<std::tuple<std::string, double, double, double>> pts = {
        {"sine", 0.25, 0.5, 0.75}, {"sine", 0.5, 0.75, 0.75}, {"sine", 0.1, 0.3, 0.75},
        {"sine", 0.8, 1.5, 2.0},   {"pulse", 0.95, 1.0, 2.0}, {"pulse", 0.9, 1.05, 2.0},
        {"pulse", 0.5, 0.55, 2.0}, {"pulse", 0.5, 1.55, 2.0}};
    for (const auto& [name, y, t, T] : pts) {
      const double v = name == "sine" ? oracle::dalembert_reference(sine, y, t, T)
                                      : oracle::dalembert_reference(pulse, y, t, T);
      s += name + "," + fmt(y) + "," + fmt(t) + "," + fmt(T) + "," + fmt(v) + "\n";
    }
    files.emplace_back("dalembert.csv", s);
  }

  {
    std::string s = "ny,quantity,value\n";
    for (int ny : {20, 100}) {
      const GridSpec g = GridSpec::from_cfl(ny, 1.0);
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ny - 1, ny - 1), K = M;
      for (int i = 0; i < ny - 1; ++i) {
        M(i, i) = 2.0 * g.dy / 3.0;
        K(i, i) = 2.0 / g.dy;
        if (i > 0) {
          M(i, i - 1) = M(i - 1, i) = g.dy / 6.0;
          K(i, i - 1) = K(i - 1, i) = -1.0 / g.dy;
        }
      }
      Eigen::VectorXd f(ny - 1);
      for (int i = 0; i < ny - 1; ++i) f(i) = std::sin(M_PI * g.y(i + 1));
      const Eigen::VectorXd mf = M * f;
      const Eigen::VectorXd r = K.ldlt().solve(mf);
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M, Eigen::EigenvaluesOnly);
      s += std::to_string(ny) + ",sine_l2_sq," + fmt(f.dot(mf)) + "\n";
      s += std::to_string(ny) + ",sine_h10_sq," + fmt(f.dot(K * f)) + "\n";
      s += std::to_string(ny) + ",sine_hm1_sq," + fmt(mf.dot(r)) + "\n";
      s += std::to_string(ny) + ",riesz_sine_max_error," + fmt((r - f / (M_PI * M_PI)).cwiseAbs().maxCoeff()) + "\n";
      s += std::to_string(ny) + ",lambda_min_K_M," + fmt(es.eigenvalues().minCoeff()) + "\n";
    }
    files.emplace_back("spaces.csv", s);
  }

  const TinyScenario tiny;
  const oracle::DenseSystem sys(tiny.grid, tiny.domain);
  const Field v2 = tiny.v2();
  const oracle::DenseFollower df(sys, tiny.partition, tiny.sigma, v2);
  {
    const ControlTrace w2 = df.best_response(tiny.w1());
    std::string s = "t,w2\n";
    for (int n = 0; n <= tiny.grid.nt; ++n) s += fmt(tiny.grid.t(n)) + "," + fmt(w2.values[n]) + "\n";
    files.emplace_back("tiny_best_response.csv", s);
  }
  {
    const Eigen::MatrixXd A = df.A_matrix(0.0);
    std::string s = "row,level,value\n";
    for (int i = 0; i < A.rows(); ++i)
      for (int n = 0; n < A.cols(); ++n) s += std::to_string(i) + "," + std::to_string(n) + "," + fmt(A(i, n)) + "\n";
    files.emplace_back("tiny_A.csv", s);
  }
  {
    const oracle::DenseDual dd(df, tiny.problem());
    const DualPoint fs = dd.solve();
    std::string s = "y,f0,f1\n";
    for (int j = 0; j <= tiny.grid.ny; ++j) s += fmt(tiny.grid.y(j)) + "," + fmt(fs.f0[j]) + "," + fmt(fs.f1[j]) + "\n";
    files.emplace_back("tiny_dual_solution.csv", s);
    std::string o = "quantity,value\n";
    o += "objective_at_solution," + fmt(dd.objective(fs)) + "\n";
    o += "objective_at_probe," + fmt(dd.objective(tiny.probe_point())) + "\n";
    files.emplace_back("tiny_dual_objective.csv", o);
  }
  std::string manifest = "format,1\n";
  for (const auto& f : files) manifest += "file," + f.first + "\n";
  files.emplace_back("MANIFEST.csv", manifest);
  return files;
}

inline void regenerate_golden(const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, content] : golden_files()) write_text(dir / name, content);
}

}  // namespace stackwave::cli

#include "fblc/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "fblc/symbolic/parser.hpp"

namespace fblc::cli {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) throw ConfigError(where + ": expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": cannot read '" + node.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> list(const YAML::Node& node, const std::string& where) {
  if (node.IsScalar()) return {scalar<T>(node, where)};
  if (!node.IsSequence()) throw ConfigError(where + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<T>(node[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename T>
void optional_scalar(const YAML::Node& parent, const char* key, const std::string& where, T& target) {
  if (parent[key]) target = scalar<T>(parent[key], where + "." + key);
}

void read_system(const YAML::Node& n, system::SystemText& s) {
  check_keys(n, "system", {"states", "inputs", "drift", "input_map", "output", "x0", "t0"});
  for (const char* key : {"states", "drift", "input_map", "output", "x0"}) {
    if (!n[key]) throw ConfigError(std::string("system: missing '") + key + "'");
  }
  s.states = list<std::string>(n["states"], "system.states");
  s.inputs = n["inputs"] ? list<std::string>(n["inputs"], "system.inputs") : std::vector<std::string>{"u"};
  s.drift = list<std::string>(n["drift"], "system.drift");
  const auto& g = n["input_map"];
  if (!g.IsSequence()) throw ConfigError("system.input_map: expected a list");
  s.input_map.clear();
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.input_map.push_back(list<std::string>(g[i], "system.input_map[" + std::to_string(i) + "]"));
  }
  s.output = list<std::string>(n["output"], "system.output");
  s.x0 = list<double>(n["x0"], "system.x0");
  s.t0 = 0.0;
  optional_scalar(n, "t0", "system", s.t0);
}

void read_run(const YAML::Node& n, sim::RunConfig& r) {
  check_keys(n, "run", {"t_end", "rtol", "atol", "max_step", "initial_step", "max_steps", "eps", "betas", "poles",
                        "event_tolerance", "max_order", "max_events", "xi0"});
  optional_scalar(n, "t_end", "run", r.t_end);
  optional_scalar(n, "rtol", "run", r.integrator.rtol);
  optional_scalar(n, "atol", "run", r.integrator.atol);
  optional_scalar(n, "max_step", "run", r.integrator.max_step);
  optional_scalar(n, "initial_step", "run", r.integrator.initial_step);
  optional_scalar(n, "max_steps", "run", r.integrator.max_steps);
  if (n["eps"]) r.eps = list<double>(n["eps"], "run.eps");
  if (n["betas"]) r.betas = list<double>(n["betas"], "run.betas");
  if (n["poles"]) r.poles = list<double>(n["poles"], "run.poles");
  optional_scalar(n, "event_tolerance", "run", r.event_tolerance);
  optional_scalar(n, "max_order", "run", r.max_order);
  optional_scalar(n, "max_events", "run", r.max_events);
  if (n["xi0"]) r.xi0 = list<double>(n["xi0"], "run.xi0");
  for (double e : r.eps.values()) {
    if (!(e > 0.0)) throw ConfigError("run.eps: thresholds must be positive");
  }
  for (double b : r.betas) {
    if (!(b > 0.0)) throw ConfigError("run.betas: bounds must be positive");
  }
  if (r.max_order < 1) throw ConfigError("run.max_order: must be at least 1");
}

void read_verify(const YAML::Node& n, sim::Theorem1Settings& v) {
  check_keys(n, "verify", {"seed", "starts", "inputs_per_start", "input_bound", "piece_length", "horizon",
                           "tolerance", "rtol", "atol", "box"});
  optional_scalar(n, "seed", "verify", v.seed);
  optional_scalar(n, "starts", "verify", v.starts);
  optional_scalar(n, "inputs_per_start", "verify", v.inputs_per_start);
  optional_scalar(n, "input_bound", "verify", v.input_bound);
  optional_scalar(n, "piece_length", "verify", v.piece_length);
  optional_scalar(n, "horizon", "verify", v.horizon);
  optional_scalar(n, "tolerance", "verify", v.tolerance);
  optional_scalar(n, "rtol", "verify", v.integrator.rtol);
  optional_scalar(n, "atol", "verify", v.integrator.atol);
  if (n["box"]) {
    const auto& b = n["box"];
    if (!b.IsSequence()) throw ConfigError("verify.box: expected a list of [lo, hi] pairs");
    v.box.clear();
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto pair = list<double>(b[i], "verify.box[" + std::to_string(i) + "]");
      if (pair.size() != 2 || !(pair[0] <= pair[1])) throw ConfigError("verify.box: each entry is [lo, hi]");
      v.box.emplace_back(pair[0], pair[1]);
    }
  }
  if (!(v.piece_length > 0.0) || !(v.horizon > 0.0)) throw ConfigError("verify: piece_length and horizon must be positive");
}

LandscapeSpec read_landscape(const YAML::Node& n) {
  check_keys(n, "landscape", {"axes", "fixed"});
  LandscapeSpec spec;
  if (!n["axes"] || !n["axes"].IsSequence()) throw ConfigError("landscape.axes: expected a list");
  for (std::size_t i = 0; i < n["axes"].size(); ++i) {
    const auto& a = n["axes"][i];
    const std::string where = "landscape.axes[" + std::to_string(i) + "]";
    check_keys(a, where, {"name", "lo", "hi", "count"});
    for (const char* key : {"name", "lo", "hi", "count"}) {
      if (!a[key]) throw ConfigError(where + ": missing '" + key + "'");
    }
    sim::GridAxis axis;
    axis.name = scalar<std::string>(a["name"], where + ".name");
    axis.lo = scalar<double>(a["lo"], where + ".lo");
    axis.hi = scalar<double>(a["hi"], where + ".hi");
    axis.count = scalar<std::size_t>(a["count"], where + ".count");
    if (axis.count == 0) throw ConfigError(where + ": count must be positive");
    spec.axes.push_back(axis);
  }
  if (n["fixed"]) {
    if (!n["fixed"].IsMap()) throw ConfigError("landscape.fixed: expected a mapping");
    for (const auto& kv : n["fixed"]) {
      const auto key = kv.first.as<std::string>();
      spec.fixed[key] = scalar<double>(kv.second, "landscape.fixed." + key);
    }
  }
  return spec;
}

// Shortest round-trip text, so emit then parse reproduces every double.
std::string num(double v) { return fbl::format_number(v); }

void emit_list(YAML::Emitter& out, const std::vector<double>& values) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double v : values) out << num(v);
  out << YAML::EndSeq;
}

void emit_list(YAML::Emitter& out, const std::vector<std::string>& values) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& v : values) out << YAML::DoubleQuoted << v;
  out << YAML::EndSeq;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  check_keys(root, "config", {"name", "system", "constraints", "reference", "run", "verify", "landscape", "plot"});
  ScenarioConfig cfg;
  optional_scalar(root, "name", "config", cfg.name);
  if (!root["system"]) throw ConfigError("config: missing 'system'");
  read_system(root["system"], cfg.system);
  if (root["constraints"] && !root["constraints"].IsNull()) {
    cfg.constraints = list<std::string>(root["constraints"], "constraints");
  }
  optional_scalar(root, "reference", "config", cfg.reference);
  if (root["run"]) read_run(root["run"], cfg.run);
  if (root["verify"]) read_verify(root["verify"], cfg.verify);
  if (root["landscape"]) cfg.landscape = read_landscape(root["landscape"]);
  optional_scalar(root, "plot", "config", cfg.plot);
  if (cfg.plot != "gnuplot" && cfg.plot != "python") throw ConfigError("plot: expected 'gnuplot' or 'python'");
  if (cfg.run.betas.size() > 1 && cfg.run.betas.size() != cfg.constraints.size()) {
    throw ConfigError("run.betas: give one bound or one per constraint");
  }
  if (!cfg.run.xi0.empty() && cfg.run.xi0.size() != cfg.constraints.size()) {
    throw ConfigError("run.xi0: give one offset per constraint");
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ScenarioConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;

  const auto& s = cfg.system;
  out << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "states" << YAML::Value;
  emit_list(out, s.states);
  out << YAML::Key << "inputs" << YAML::Value;
  emit_list(out, s.inputs);
  out << YAML::Key << "drift" << YAML::Value;
  emit_list(out, s.drift);
  out << YAML::Key << "input_map" << YAML::Value << YAML::BeginSeq;
  for (const auto& row : s.input_map) emit_list(out, row);
  out << YAML::EndSeq;
  out << YAML::Key << "output" << YAML::Value;
  emit_list(out, s.output);
  out << YAML::Key << "x0" << YAML::Value;
  emit_list(out, s.x0);
  out << YAML::Key << "t0" << YAML::Value << num(s.t0);
  out << YAML::EndMap;

  out << YAML::Key << "constraints" << YAML::Value;
  emit_list(out, cfg.constraints);
  out << YAML::Key << "reference" << YAML::Value << YAML::DoubleQuoted << cfg.reference;

  const auto& r = cfg.run;
  out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t_end" << YAML::Value << num(r.t_end);
  out << YAML::Key << "rtol" << YAML::Value << num(r.integrator.rtol);
  out << YAML::Key << "atol" << YAML::Value << num(r.integrator.atol);
  out << YAML::Key << "max_step" << YAML::Value << num(r.integrator.max_step);
  out << YAML::Key << "initial_step" << YAML::Value << num(r.integrator.initial_step);
  out << YAML::Key << "max_steps" << YAML::Value << r.integrator.max_steps;
  out << YAML::Key << "eps" << YAML::Value;
  emit_list(out, r.eps.values());
  out << YAML::Key << "betas" << YAML::Value;
  emit_list(out, r.betas);
  out << YAML::Key << "poles" << YAML::Value;
  emit_list(out, r.poles);
  out << YAML::Key << "event_tolerance" << YAML::Value << num(r.event_tolerance);
  out << YAML::Key << "max_order" << YAML::Value << r.max_order;
  out << YAML::Key << "max_events" << YAML::Value << r.max_events;
  out << YAML::Key << "xi0" << YAML::Value;
  emit_list(out, r.xi0);
  out << YAML::EndMap;

  const auto& v = cfg.verify;
  out << YAML::Key << "verify" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << v.seed;
  out << YAML::Key << "starts" << YAML::Value << v.starts;
  out << YAML::Key << "inputs_per_start" << YAML::Value << v.inputs_per_start;
  out << YAML::Key << "input_bound" << YAML::Value << num(v.input_bound);
  out << YAML::Key << "piece_length" << YAML::Value << num(v.piece_length);
  out << YAML::Key << "horizon" << YAML::Value << num(v.horizon);
  out << YAML::Key << "tolerance" << YAML::Value << num(v.tolerance);
  out << YAML::Key << "rtol" << YAML::Value << num(v.integrator.rtol);
  out << YAML::Key << "atol" << YAML::Value << num(v.integrator.atol);
  if (!v.box.empty()) {
    out << YAML::Key << "box" << YAML::Value << YAML::BeginSeq;
    for (const auto& [lo, hi] : v.box) emit_list(out, std::vector<double>{lo, hi});
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  if (cfg.landscape) {
    out << YAML::Key << "landscape" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "axes" << YAML::Value << YAML::BeginSeq;
    for (const auto& a : cfg.landscape->axes) {
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "name" << YAML::Value << a.name;
      out << YAML::Key << "lo" << YAML::Value << num(a.lo);
      out << YAML::Key << "hi" << YAML::Value << num(a.hi);
      out << YAML::Key << "count" << YAML::Value << a.count;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "fixed" << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (const auto& [name, value] : cfg.landscape->fixed) out << YAML::Key << name << YAML::Value << num(value);
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::Key << "plot" << YAML::Value << cfg.plot;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  Scenario sc;
  try {
    sc.system = system::parse_system(cfg.system);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  for (std::size_t k = 0; k < cfg.constraints.size(); ++k) {
    try {
      sc.constraints.push_back(symbolic::simplify(symbolic::parse_expr(cfg.constraints[k], cfg.system.states)));
    } catch (const std::exception& e) {
      throw ConfigError("constraints[" + std::to_string(k) + "]: " + e.what());
    }
  }
  try {
    sc.reference = symbolic::simplify(symbolic::parse_expr(cfg.reference, {}));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("reference: ") + e.what());
  }
  return sc;
}

}  // namespace fblc::cli

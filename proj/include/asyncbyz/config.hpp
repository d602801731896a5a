#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncbyz/engine.hpp"

namespace asyncbyz {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Double formatted with 17 significant digits: enough for an exact
// binary64 round trip.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Flat key=value configuration text: one `section.key = value` per line,
/// '#' comments, order irrelevant. Keeps line numbers so validation errors
/// can point at the offending line.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static ConfigFile parse(const std::string& text, const std::string& name = "<config>") {
    ConfigFile cfg;
    cfg.name_ = name;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = strip(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = strip(stripped.substr(0, eq));
      const std::string value = strip(stripped.substr(eq + 1));
      if (key.empty())
        throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.entries_.count(key))
        throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.entries_[key] = {value, lineno};
    }
    return cfg;
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string raw(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(name_ + ": missing key '" + key + "'");
    return it->second.value;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entries_.at(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError(where(key) + ": " + key + " must be a number (got '" + e.value + "')");
    }
  }

  long get_long(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entries_.at(key);
    try {
      std::size_t pos = 0;
      const long v = std::stol(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError(where(key) + ": " + key + " must be an integer (got '" + e.value + "')");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entries_.at(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError(where(key) + ": " + key +
                        " must be an unsigned 64-bit integer (got '" + e.value + "')");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError(where(key) + ": " + key + " must be a boolean (got '" + v + "')");
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    std::istringstream ss(raw(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stod(strip(tok)));
      } catch (...) {
        throw ConfigError(where(key) + ": " + key + " must be a comma-separated number list");
      }
    }
    return out;
  }

  // "<file>:<line>" anchor for error messages about this key.
  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return name_;
    return name_ + ":" + std::to_string(it->second.line);
  }

  const std::string& name() const { return name_; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

 private:
  static std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string name_;
  std::map<std::string, Entry> entries_;
};

namespace detail {

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "problem.kind", "problem.dimension", "problem.l-smooth", "problem.mu-min",
      "problem.sigma", "problem.sigma-l", "problem.domain-radius", "problem.x-star",
      "problem.logistic-pool",
      "schedule.kind", "schedule.m-honest", "schedule.m-byzantine", "schedule.lambda",
      "schedule.probs-honest", "schedule.probs-byzantine", "schedule.trace-path",
      "attack.kind", "attack.epsilon",
      "aggregator.base", "aggregator.ctma", "aggregator.lambda",
      "aggregator.gm-tolerance", "aggregator.gm-max-iters",
      "optimizer.eta", "optimizer.alpha-rule", "optimizer.gamma",
      "optimizer.beta-rule", "optimizer.beta-const", "optimizer.horizon",
      "run.seed", "run.trials", "run.metric-stride", "run.assertion-level",
  };
  return keys;
}

}  // namespace detail

/// Builds the full simulation description from a parsed config, applying
/// defaults and validating every field with line-anchored messages.
inline SimulationConfig load_simulation_config(const ConfigFile& cfg) {
  for (const std::string& key : cfg.keys()) {
    const auto& known = detail::known_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(cfg.where(key) + ": unknown key '" + key + "'");
  }

  SimulationConfig sim;
  auto reject = [&](const std::string& key, const std::string& msg) -> ConfigError {
    return ConfigError(cfg.where(key) + ": " + key + " " + msg);
  };

  try {
    sim.problem.kind = parse_problem_kind(cfg.get_string("problem.kind",
                                                         "additive-noise-quadratic"));
  } catch (const std::invalid_argument& e) {
    throw reject("problem.kind", e.what());
  }
  sim.problem.dimension = static_cast<int>(cfg.get_long("problem.dimension", 20));
  sim.problem.l_smooth = cfg.get_double("problem.l-smooth", 1.0);
  sim.problem.mu_min = cfg.get_double("problem.mu-min", 0.1);
  sim.problem.sigma = cfg.get_double("problem.sigma", 1.0);
  sim.problem.sigma_l = cfg.get_double("problem.sigma-l", 0.0);
  sim.problem.domain_radius = cfg.get_double("problem.domain-radius", 10.0);
  const std::string xstar = cfg.get_string("problem.x-star", "random");
  if (xstar == "zero")
    sim.problem.x_star_at_origin = true;
  else if (xstar == "random")
    sim.problem.x_star_at_origin = false;
  else
    throw reject("problem.x-star", "must be 'random' or 'zero' (got '" + xstar + "')");
  sim.problem.logistic_pool = static_cast<int>(cfg.get_long("problem.logistic-pool", 4096));

  try {
    sim.schedule.kind = parse_schedule_kind(cfg.get_string("schedule.kind", "iid-categorical"));
  } catch (const std::invalid_argument& e) {
    throw reject("schedule.kind", e.what());
  }
  sim.schedule.m_honest = static_cast<int>(cfg.get_long("schedule.m-honest", 1));
  sim.schedule.m_byzantine = static_cast<int>(cfg.get_long("schedule.m-byzantine", 0));
  sim.schedule.lambda = cfg.get_double("schedule.lambda", 0.0);
  if (!(sim.schedule.lambda >= 0.0 && sim.schedule.lambda < 0.5))
    throw reject("schedule.lambda",
                 "must be < 0.5 and >= 0 (got " + fmt17(sim.schedule.lambda) + ")");
  sim.schedule.probs_honest = cfg.get_doubles("schedule.probs-honest");
  sim.schedule.probs_byzantine = cfg.get_doubles("schedule.probs-byzantine");
  sim.schedule.trace_path = cfg.get_string("schedule.trace-path", "");

  if (cfg.has("attack.kind") && cfg.raw("attack.kind") != "none") {
    AttackSpec attack;
    try {
      attack.kind = parse_attack_kind(cfg.raw("attack.kind"));
    } catch (const std::invalid_argument& e) {
      throw reject("attack.kind", e.what());
    }
    attack.epsilon = cfg.get_double("attack.epsilon", 0.1);
    sim.attack = attack;
  }

  try {
    sim.aggregator.base =
        parse_base_aggregator(cfg.get_string("aggregator.base", "weighted-mean"));
  } catch (const std::invalid_argument& e) {
    throw reject("aggregator.base", e.what());
  }
  sim.aggregator.ctma = cfg.get_bool("aggregator.ctma", false);
  sim.aggregator.lambda = cfg.get_double("aggregator.lambda", sim.schedule.lambda);
  if (!(sim.aggregator.lambda >= 0.0 && sim.aggregator.lambda < 0.5))
    throw reject("aggregator.lambda",
                 "must be < 0.5 and >= 0 (got " + fmt17(sim.aggregator.lambda) + ")");
  sim.aggregator.gm_tolerance = cfg.get_double("aggregator.gm-tolerance", 1e-9);
  sim.aggregator.gm_max_iters = static_cast<int>(cfg.get_long("aggregator.gm-max-iters", 1000));

  sim.optimizer.eta = cfg.get_double("optimizer.eta", 0.0);  // absent: 1/(4LT) default
  if (cfg.has("optimizer.eta") && sim.optimizer.eta <= 0.0)
    throw reject("optimizer.eta", "must be > 0 (omit the key for the default rate)");
  const std::string alpha = cfg.get_string("optimizer.alpha-rule", "linear");
  if (alpha == "linear")
    sim.optimizer.alpha_rule = AlphaRule::Linear;
  else if (alpha == "momentum-form")
    sim.optimizer.alpha_rule = AlphaRule::MomentumForm;
  else
    throw reject("optimizer.alpha-rule", "must be 'linear' or 'momentum-form'");
  sim.optimizer.gamma = cfg.get_double("optimizer.gamma", 0.1);
  const std::string beta = cfg.get_string("optimizer.beta-rule", "one-over-s");
  if (beta == "one-over-s")
    sim.optimizer.beta_rule = BetaRule::OneOverS;
  else if (beta == "constant")
    sim.optimizer.beta_rule = BetaRule::Constant;
  else
    throw reject("optimizer.beta-rule", "must be 'one-over-s' or 'constant'");
  sim.optimizer.beta_const = cfg.get_double("optimizer.beta-const", 0.25);
  sim.optimizer.horizon = cfg.get_long("optimizer.horizon", 10000);
  sim.optimizer.domain_radius = sim.problem.domain_radius;

  sim.seed = cfg.get_u64("run.seed", 42);
  sim.trials = cfg.get_long("run.trials", 1);
  sim.metric_stride = cfg.get_long("run.metric-stride", 1);
  try {
    sim.assertion_level = parse_assertion_level(cfg.get_string("run.assertion-level", "off"));
  } catch (const std::invalid_argument& e) {
    throw reject("run.assertion-level", e.what());
  }

  // full cross-field validation with anchored reporting
  try {
    sim.schedule.horizon = sim.optimizer.horizon;
    sim.problem.validate();
    sim.schedule.validate();
    if (sim.attack) sim.attack->validate();
    sim.aggregator.validate();
    if (sim.trials < 1) throw std::invalid_argument("run.trials must be >= 1");
    if (sim.metric_stride < 1) throw std::invalid_argument("run.metric-stride must be >= 1");
    if (sim.optimizer.horizon < 1) throw std::invalid_argument("optimizer.horizon must be >= 1");
    if (sim.schedule.m_byzantine > 0 && sim.schedule.lambda > 0.0 && !sim.attack)
      throw std::invalid_argument("attack.kind required when adversarial workers are scheduled");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.name() + ": " + e.what());
  }
  return sim;
}

/// Canonical text form of a simulation description: every field, sorted by
/// key, numbers with 17 significant digits. Field order in the source file
/// cannot affect it.
inline std::string canonical_config(const SimulationConfig& sim) {
  std::map<std::string, std::string> kv;
  kv["problem.kind"] = to_string(sim.problem.kind);
  kv["problem.dimension"] = std::to_string(sim.problem.dimension);
  kv["problem.l-smooth"] = fmt17(sim.problem.l_smooth);
  kv["problem.mu-min"] = fmt17(sim.problem.mu_min);
  kv["problem.sigma"] = fmt17(sim.problem.sigma);
  kv["problem.sigma-l"] = fmt17(sim.problem.sigma_l);
  kv["problem.domain-radius"] = fmt17(sim.problem.domain_radius);
  kv["problem.x-star"] = sim.problem.x_star_at_origin ? "zero" : "random";
  kv["problem.logistic-pool"] = std::to_string(sim.problem.logistic_pool);
  kv["schedule.kind"] = to_string(sim.schedule.kind);
  kv["schedule.m-honest"] = std::to_string(sim.schedule.m_honest);
  kv["schedule.m-byzantine"] = std::to_string(sim.schedule.m_byzantine);
  kv["schedule.lambda"] = fmt17(sim.schedule.lambda);
  kv["schedule.trace-path"] = sim.schedule.trace_path;
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt17(v[i]);
    return s;
  };
  kv["schedule.probs-honest"] = list(sim.schedule.probs_honest);
  kv["schedule.probs-byzantine"] = list(sim.schedule.probs_byzantine);
  kv["attack.kind"] = sim.attack ? to_string(sim.attack->kind) : "none";
  kv["attack.epsilon"] = sim.attack ? fmt17(sim.attack->epsilon) : "";
  kv["aggregator.base"] = to_string(sim.aggregator.base);
  kv["aggregator.ctma"] = sim.aggregator.ctma ? "true" : "false";
  kv["aggregator.lambda"] = fmt17(sim.aggregator.lambda);
  kv["aggregator.gm-tolerance"] = fmt17(sim.aggregator.gm_tolerance);
  kv["aggregator.gm-max-iters"] = std::to_string(sim.aggregator.gm_max_iters);
  kv["optimizer.eta"] = sim.optimizer.eta > 0.0 ? fmt17(sim.optimizer.eta) : "theory";
  kv["optimizer.alpha-rule"] = to_string(sim.optimizer.alpha_rule);
  kv["optimizer.gamma"] = fmt17(sim.optimizer.gamma);
  kv["optimizer.beta-rule"] = to_string(sim.optimizer.beta_rule);
  kv["optimizer.beta-const"] = fmt17(sim.optimizer.beta_const);
  kv["optimizer.horizon"] = std::to_string(sim.optimizer.horizon);
  kv["run.seed"] = std::to_string(sim.seed);
  kv["run.trials"] = std::to_string(sim.trials);
  kv["run.metric-stride"] = std::to_string(sim.metric_stride);
  kv["run.assertion-level"] = to_string(sim.assertion_level);

  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

// FNV-1a over the canonical form, as a 16-hex-digit string.
inline std::string config_hash(const SimulationConfig& sim) {
  const std::string text = canonical_config(sim);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace asyncbyz

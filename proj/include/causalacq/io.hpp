#pragma once

// Config loading (TOML) and result files (CSV, JSON).

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <type_traits>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "causalacq/engine.hpp"
#include "causalacq/errors.hpp"

namespace causalacq::io {

struct ProbeConfig {
  int steps = 50;
  int seeds = 10;
  int instance = 0;
};

struct CliConfig {
  engine::BenchmarkConfig benchmark;
  ProbeConfig probe;
  std::string output_dir = "results";

  void validate() const {
    benchmark.validate();
    if (probe.steps < 1 || probe.seeds < 1 || probe.instance < 0)
      throw InputError("config: probe steps and seeds must be >= 1, instance >= 0");
  }
};

namespace detail {

inline void reject_unknown(const toml::table& tbl, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& [key, node] : tbl) {
    std::string k(key.str());
    if (!allowed.count(k))
      throw InputError("config: unknown key '" + k + "' in [" + section + "]");
  }
}

[[noreturn]] inline void break_range(const std::string& section, const char* key) {
  throw InputError(std::string("config: [") + section + "] " + key + " is out of range");
}

template <typename T>
void read(const toml::table& tbl, const std::string& section, const char* key, T& out) {
  const toml::node* node = tbl.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value_exact<std::string>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value_exact<bool>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (auto v = node->value_exact<std::int64_t>(); v && *v >= 0) {
      out = static_cast<std::uint64_t>(*v);
      return;
    }
  } else {
    if (auto v = node->value_exact<std::int64_t>()) {
      if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) break_range(section, key);
      out = static_cast<int>(*v);
      return;
    }
  }
  throw InputError(std::string("config: [") + section + "] " + key + " has the wrong type");
}

inline const toml::table* sub_table(const toml::table& tbl, const std::string& parent, const char* key) {
  const toml::node* node = tbl.get(key);
  if (!node) return nullptr;
  if (!node->is_table()) throw InputError("config: " + parent + key + " must be a table");
  return node->as_table();
}

inline graph::GraphKind parse_graph(const std::string& name, double edge_prob) {
  if (name == "complete") return graph::GraphKind::complete();
  if (name == "path") return graph::GraphKind::path();
  if (name == "erdos_renyi") return graph::GraphKind::erdos_renyi(edge_prob);
  throw InputError("config: unknown graph kind '" + name + "'");
}

}  // namespace detail

inline std::string graph_name(const graph::GraphKind& g) {
  switch (g.type) {
    case graph::GraphKind::Type::Complete: return "complete";
    case graph::GraphKind::Type::ErdosRenyi: return "erdos_renyi";
    case graph::GraphKind::Type::Path: return "path";
  }
  return "?";
}

/// Splits a comma-separated method list and builds methods sharing `tmpl`'s knobs.
inline std::vector<acquisition::AcqMethod> parse_method_list(const std::vector<std::string>& names,
                                                             const acquisition::AcqMethod& tmpl) {
  std::vector<acquisition::AcqMethod> out;
  std::set<std::string> seen;
  for (const auto& raw : names) {
    if (!seen.insert(raw).second) throw InputError("config: method '" + raw + "' listed twice");
    acquisition::AcqMethod m = tmpl;
    m.kind = acquisition::parse_method(raw);
    out.push_back(m);
  }
  return out;
}

inline std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline CliConfig config_from_toml(const toml::table& root) {
  using detail::read;
  detail::reject_unknown(root, "", {"benchmark", "episode", "acquisition", "optimizer", "output", "probe"});
  CliConfig cfg;
  auto& b = cfg.benchmark;
  std::vector<std::string> method_names{"civ", "random"};

  if (const auto* t = detail::sub_table(root, "", "benchmark")) {
    detail::reject_unknown(*t, "benchmark",
                           {"graph", "edge_prob", "p", "k_targets", "target_rule", "instances", "runs", "methods",
                            "base_seed", "jobs", "misspecification"});
    std::string graph = "complete", rule = "random";
    double edge_prob = 0.5;
    read(*t, "benchmark", "graph", graph);
    read(*t, "benchmark", "edge_prob", edge_prob);
    b.instance.graph = detail::parse_graph(graph, edge_prob);
    read(*t, "benchmark", "p", b.instance.p);
    read(*t, "benchmark", "k_targets", b.instance.k_targets);
    read(*t, "benchmark", "target_rule", rule);
    b.instance.target_rule = scm::parse_target_rule(rule);
    read(*t, "benchmark", "instances", b.instances);
    read(*t, "benchmark", "runs", b.runs);
    read(*t, "benchmark", "base_seed", b.base_seed);
    read(*t, "benchmark", "jobs", b.jobs);
    if (const toml::node* m = t->get("methods")) {
      const toml::array* arr = m->as_array();
      if (!arr) throw InputError("config: [benchmark] methods must be an array of strings");
      method_names.clear();
      for (const auto& el : *arr) {
        auto s = el.value_exact<std::string>();
        if (!s) throw InputError("config: [benchmark] methods must be an array of strings");
        method_names.push_back(*s);
      }
    }
    if (const auto* ms = detail::sub_table(*t, "benchmark.", "misspecification")) {
      detail::reject_unknown(*ms, "benchmark.misspecification", {"kind", "count"});
      std::string kind = "missing_edges";
      read(*ms, "benchmark.misspecification", "kind", kind);
      b.instance.misspec.kind = graph::parse_misspecification_kind(kind);
      read(*ms, "benchmark.misspecification", "count", b.instance.misspec.count);
      if (b.instance.misspec.count < 0) throw InputError("config: misspecification count must be >= 0");
    }
  }

  if (const auto* t = detail::sub_table(root, "", "episode")) {
    detail::reject_unknown(*t, "episode", {"T", "n", "warmup_obs", "variance_mode", "alpha0", "beta0"});
    std::string mode = "known";
    read(*t, "episode", "T", b.episode.T);
    read(*t, "episode", "n", b.episode.n);
    read(*t, "episode", "warmup_obs", b.episode.warmup_obs);
    read(*t, "episode", "variance_mode", mode);
    b.episode.variance = engine::parse_variance_kind(mode);
    read(*t, "episode", "alpha0", b.episode.alpha0);
    read(*t, "episode", "beta0", b.episode.beta0);
  }

  acquisition::AcqMethod tmpl;
  if (const auto* t = detail::sub_table(root, "", "acquisition")) {
    detail::reject_unknown(*t, "acquisition",
                           {"kappa", "ucb_beta", "mc_samples", "mc_candidates", "mc_noise", "spectral_gradient"});
    read(*t, "acquisition", "kappa", tmpl.kappa);
    read(*t, "acquisition", "ucb_beta", tmpl.ucb_beta);
    read(*t, "acquisition", "mc_samples", tmpl.mc_samples);
    read(*t, "acquisition", "mc_candidates", tmpl.mc_candidates);
    read(*t, "acquisition", "mc_noise", tmpl.mc_noise);
    std::string grad = "analytic";
    read(*t, "acquisition", "spectral_gradient", grad);
    if (grad == "analytic")
      tmpl.spectral_gradient = acquisition::GradientSource::Analytic;
    else if (grad == "finite_difference")
      tmpl.spectral_gradient = acquisition::GradientSource::FiniteDifference;
    else
      throw InputError("config: [acquisition] spectral_gradient must be analytic or finite_difference");
  }
  b.methods = parse_method_list(method_names, tmpl);

  if (const auto* t = detail::sub_table(root, "", "optimizer")) {
    detail::reject_unknown(*t, "optimizer", {"max_iters", "grad_tol", "step_init", "backtrack_factor", "armijo_c", "dual_init"});
    auto& o = b.episode.optimizer;
    read(*t, "optimizer", "max_iters", o.max_iters);
    read(*t, "optimizer", "grad_tol", o.grad_tol);
    read(*t, "optimizer", "step_init", o.step_init);
    read(*t, "optimizer", "backtrack_factor", o.backtrack_factor);
    read(*t, "optimizer", "armijo_c", o.armijo_c);
    read(*t, "optimizer", "dual_init", o.dual_init);
  }

  if (const auto* t = detail::sub_table(root, "", "output")) {
    detail::reject_unknown(*t, "output", {"dir"});
    read(*t, "output", "dir", cfg.output_dir);
  }

  if (const auto* t = detail::sub_table(root, "", "probe")) {
    detail::reject_unknown(*t, "probe", {"steps", "seeds", "instance"});
    read(*t, "probe", "steps", cfg.probe.steps);
    read(*t, "probe", "seeds", cfg.probe.seeds);
    read(*t, "probe", "instance", cfg.probe.instance);
  }
  return cfg;
}

inline CliConfig parse_config_string(std::string_view text) {
  try {
    return config_from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << e.description() << " at line " << e.source().begin.line;
    throw InputError(os.str());
  }
}

inline std::uint64_t parse_seed(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw InputError("");
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    throw InputError("seed must be an unsigned 64-bit integer: '" + s + "'");
  }
  if (used != s.size()) throw InputError("seed must be an unsigned 64-bit integer: '" + s + "'");
  return static_cast<std::uint64_t>(v);
}

/// Loads and validates a config file. `seed_env`, when set, overrides
/// base_seed; callers apply a command-line seed afterwards.
inline CliConfig load_config(const std::filesystem::path& path, const char* seed_env = std::getenv("CAUSALACQ_SEED")) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  CliConfig cfg = parse_config_string(ss.str());
  if (seed_env && *seed_env) cfg.benchmark.base_seed = parse_seed(seed_env);
  return cfg;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kStepsHeader = "method,instance,run,step,rel_dist,sq_a_dist,wall_time_s";
inline constexpr const char* kSummaryHeader = "method,step,mean_rel_dist,std_across_instances,sem_across_runs";
inline constexpr const char* kProbeHeader = "seed,step,distance";

inline void write_steps_csv(std::ostream& os, const engine::BenchmarkResult& res) {
  os << kStepsHeader << '\n';
  for (const auto& e : res.episodes) {
    if (!e.ok) continue;
    for (std::size_t t = 0; t < e.record.steps.size(); ++t) {
      const auto& s = e.record.steps[t];
      os << e.method << ',' << e.instance << ',' << e.run << ',' << t + 1 << ',' << format_double(s.rel_dist) << ','
         << format_double(s.sq_a_dist) << ',' << format_double(s.wall_time_s) << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& os, const engine::BenchmarkResult& res) {
  os << kSummaryHeader << '\n';
  for (const auto& r : res.summary)
    os << r.method << ',' << r.step << ',' << format_double(r.mean_rel_dist) << ','
       << format_double(r.std_across_instances) << ',' << format_double(r.sem_across_runs) << '\n';
}

inline void write_probe_csv(std::ostream& os, const std::vector<std::vector<double>>& trajectories) {
  os << kProbeHeader << '\n';
  for (std::size_t s = 0; s < trajectories.size(); ++s)
    for (std::size_t t = 0; t < trajectories[s].size(); ++t)
      os << s << ',' << t + 1 << ',' << format_double(trajectories[s][t]) << '\n';
}

inline nlohmann::json config_json(const CliConfig& cfg) {
  const auto& b = cfg.benchmark;
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : b.methods) methods.push_back(m.name());
  return {{"graph", graph_name(b.instance.graph)},
          {"edge_prob", b.instance.graph.edge_prob},
          {"p", b.instance.p},
          {"k_targets", b.instance.k_targets},
          {"target_rule", scm::to_string(b.instance.target_rule)},
          {"misspecification",
           {{"kind", graph::to_string(b.instance.misspec.kind)}, {"count", b.instance.misspec.count}}},
          {"instances", b.instances},
          {"runs", b.runs},
          {"methods", methods},
          {"base_seed", b.base_seed},
          {"T", b.episode.T},
          {"n", b.episode.n},
          {"warmup_obs", b.episode.warmup_obs},
          {"variance_mode", engine::to_string(b.episode.variance)}};
}

/// JSON summary: config echo, last-step statistics and a failure report.
inline nlohmann::json summary_json(const CliConfig& cfg, const engine::BenchmarkResult& res) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& e : res.episodes)
    if (!e.ok) failures.push_back({{"method", e.method}, {"instance", e.instance}, {"run", e.run}, {"error", e.error}});
  nlohmann::json last = nlohmann::json::object();
  for (const auto& r : res.summary) {
    if (r.step != cfg.benchmark.episode.T) continue;
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    last[r.method] = {{"mean_rel_dist", num(r.mean_rel_dist)},
                      {"std_across_instances", num(r.std_across_instances)},
                      {"sem_across_runs", num(r.sem_across_runs)}};
  }
  return {{"config", config_json(cfg)},
          {"ok", res.all_ok()},
          {"episodes_total", res.episodes.size()},
          {"episodes_failed", failures.size()},
          {"failures", failures},
          {"last_step", last}};
}

}  // namespace causalacq::io

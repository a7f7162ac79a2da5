// causalacq: generate instances, run benchmarks, probe CIV convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "causalacq/engine.hpp"
#include "causalacq/io.hpp"

namespace fs = std::filesystem;
using namespace causalacq;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string methods;
  std::string seed;
  int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML config file")->required();
  cmd->add_option("--out", c.out, "output directory (overrides [output] dir)");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--methods", c.methods, "comma-separated method subset");
  cmd->add_option("--seed", c.seed, "base seed (overrides file and CAUSALACQ_SEED)");
}

io::CliConfig resolve(const Common& c) {
  io::CliConfig cfg = io::load_config(c.config);
  if (!c.seed.empty()) cfg.benchmark.base_seed = io::parse_seed(c.seed);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.jobs > 0) cfg.benchmark.jobs = c.jobs;
  if (!c.methods.empty()) {
    acquisition::AcqMethod tmpl = cfg.benchmark.methods.front();
    cfg.benchmark.methods = io::parse_method_list(io::split_csv_list(c.methods), tmpl);
  }
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

int cmd_generate(const io::CliConfig& cfg) {
  fs::path dir = fs::path(cfg.output_dir) / "instances";
  fs::create_directories(dir);
  for (int i = 0; i < cfg.benchmark.instances; ++i) {
    auto bi = engine::make_instance(cfg.benchmark.instance, cfg.benchmark.base_seed, i);
    nlohmann::json j = scm::to_json(bi.truth);
    if (cfg.benchmark.instance.misspec.count > 0) j["learner_dag"] = graph::to_json(bi.learner_dag);
    char name[32];
    std::snprintf(name, sizeof name, "instance_%03d.json", i);
    open_out(dir / name) << j.dump(2) << '\n';
  }
  std::cout << "wrote " << cfg.benchmark.instances << " instance(s) to " << dir.string() << '\n';
  return 0;
}

int cmd_run(const io::CliConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  engine::BenchmarkResult res = engine::run_benchmark(cfg.benchmark);
  {
    auto os = open_out(dir / "steps.csv");
    io::write_steps_csv(os, res);
  }
  {
    auto os = open_out(dir / "summary.csv");
    io::write_summary_csv(os, res);
  }
  nlohmann::json summary = io::summary_json(cfg, res);
  open_out(dir / "summary.json") << summary.dump(2) << '\n';
  if (!res.all_ok()) {
    std::cerr << summary["failures"].dump() << '\n';
    return 1;
  }
  std::cout << "wrote results to " << dir.string() << '\n';
  return 0;
}

int cmd_probe(const io::CliConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  auto bi = engine::make_instance(cfg.benchmark.instance, cfg.benchmark.base_seed, cfg.probe.instance);
  std::vector<std::vector<double>> traj;
  for (int s = 0; s < cfg.probe.seeds; ++s)
    traj.push_back(engine::consistency_probe(bi.truth, cfg.probe.steps, derive_seed(cfg.benchmark.base_seed, "probe", s),
                                             cfg.benchmark.episode.optimizer));
  auto os = open_out(dir / "probe.csv");
  io::write_probe_csv(os, traj);
  std::cout << "wrote " << (dir / "probe.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning benchmark for optimal shift interventions"};
  app.require_subcommand(1);
  Common gen, run, probe;
  auto* g = app.add_subcommand("generate", "write instance JSON files");
  auto* r = app.add_subcommand("run", "run the benchmark and write CSV/JSON results");
  auto* p = app.add_subcommand("probe", "trace |a_t - a*| for CIV with n = 1");
  add_common(g, gen);
  add_common(r, run);
  add_common(p, probe);
  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_generate(resolve(gen));
    if (r->parsed()) return cmd_run(resolve(run));
    return cmd_probe(resolve(probe));
  } catch (const std::exception& e) {
    nlohmann::json err{{"ok", false}, {"error", e.what()}};
    std::cerr << err.dump() << '\n';
    return 2;
  }
}

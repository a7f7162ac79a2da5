#pragma once

// Active-learning episodes and multi-instance benchmarks.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "causalacq/acquisition.hpp"
#include "causalacq/errors.hpp"
#include "causalacq/graph.hpp"
#include "causalacq/optimizer.hpp"
#include "causalacq/posterior.hpp"
#include "causalacq/rng.hpp"
#include "causalacq/scm.hpp"

namespace causalacq::engine {

using scm::Matrix;
using scm::Vector;

enum class VarianceKind { Known, Unknown };

inline VarianceKind parse_variance_kind(std::string_view s) {
  if (s == "known") return VarianceKind::Known;
  if (s == "unknown") return VarianceKind::Unknown;
  throw InputError("unknown variance mode: " + std::string(s));
}

inline std::string to_string(VarianceKind k) { return k == VarianceKind::Known ? "known" : "unknown"; }

struct EpisodeConfig {
  int T = 50;
  int n = 1;
  int warmup_obs = 0;
  acquisition::AcqMethod method;
  VarianceKind variance = VarianceKind::Known;
  double alpha0 = 2.0;
  double beta0 = 1.0;
  optimizer::OptimizerConfig optimizer;

  void validate() const {
    if (T < 1) throw InputError("EpisodeConfig: T must be >= 1");
    if (n < 1) throw InputError("EpisodeConfig: n must be >= 1");
    if (warmup_obs < 0) throw InputError("EpisodeConfig: warmup_obs must be >= 0");
    method.validate();
    optimizer.validate();
    const bool needs_third_moment =
        method.kind == acquisition::MethodKind::Civ || method.kind == acquisition::MethodKind::CivOw;
    if (variance == VarianceKind::Unknown && needs_third_moment && !(alpha0 + 0.5 * (warmup_obs + n) > 2.0))
      throw InputError("EpisodeConfig: unknown-variance " + method.name() +
                       " needs alpha0 + (warmup_obs + n)/2 > 2; add observational warm-up");
  }
};

struct StepRecord {
  Vector a;          // a^(t)
  Vector a_est;      // a*_t after absorbing the step's samples
  double rel_dist = 0.0;
  double sq_a_dist = 0.0;
  double wall_time_s = 0.0;
};

struct RunRecord {
  std::vector<StepRecord> steps;
};

/// Called after every posterior update with the step index (1-based).
using StepObserver = std::function<void(int, const posterior::DagBlrPosterior&)>;

/// |(I - B_true)^{-1} a_est - mu*| / |mu*|.
inline double relative_distance(const scm::Instance& inst, const Vector& a_est) {
  Vector mu_t = scm::solve_shift(inst.scm.dag, inst.scm.B, a_est);
  return (mu_t - inst.mu_star).norm() / inst.mu_star.norm();
}

inline posterior::DagBlrPosterior make_prior(const scm::Instance& inst, const graph::Dag& learner_dag,
                                            const EpisodeConfig& cfg) {
  if (learner_dag.size() != inst.size()) throw InputError("run_episode: learner DAG has wrong size");
  posterior::VarianceMode mode = posterior::UnknownVariance{};
  if (cfg.variance == VarianceKind::Known) mode = posterior::KnownVariance{inst.scm.sigma2};
  return posterior::init_prior(learner_dag, cfg.alpha0, cfg.beta0, mode);
}

/// Runs an episode starting from an explicit belief state.
inline RunRecord run_episode_from(const scm::Instance& inst, posterior::DagBlrPosterior post, const EpisodeConfig& cfg,
                                  std::uint64_t seed, const StepObserver& observer = {}) {
  cfg.validate();
  const int p = inst.size();
  if (post.size() != p) throw InputError("run_episode: posterior has wrong size");

  if (cfg.warmup_obs > 0) {
    Vector zero = Vector::Zero(p);
    post = posterior::update(post, {scm::sample(inst.scm, zero, cfg.warmup_obs, derive_seed(seed, "warmup")), zero});
  }

  RunRecord rec;
  rec.steps.reserve(static_cast<std::size_t>(cfg.T));
  std::vector<Vector> chosen;
  Vector prev_a = posterior::estimate_a_star(post, inst.mu_star);
  for (int t = 1; t <= cfg.T; ++t) {
    const auto start = std::chrono::steady_clock::now();
    acquisition::AcqContext ctx(post, inst.mu_star, cfg.n);

    double f_best = inst.mu_star.squaredNorm();
    for (const Vector& a : chosen)
      f_best = std::min(f_best, (scm::solve_shift(post.dag, ctx.mean_B(), a) - inst.mu_star).squaredNorm());

    Vector a = optimizer::select_next(cfg.method, ctx, prev_a, derive_seed(seed, t, "select"), cfg.optimizer, f_best);
    post = posterior::update(post, {scm::sample(inst.scm, a, cfg.n, derive_seed(seed, t, "sample")), a});
    if (observer) observer(t, post);

    StepRecord s;
    s.a_est = posterior::estimate_a_star(post, inst.mu_star);
    s.rel_dist = relative_distance(inst, s.a_est);
    s.sq_a_dist = (s.a_est - inst.a_star).squaredNorm();
    s.a = a;
    s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.steps.push_back(std::move(s));
    chosen.push_back(a);
    prev_a = std::move(a);
  }
  return rec;
}

/// Runs an episode from the configured prior over `learner_dag`
/// (the true DAG unless a misspecified one is supplied).
inline RunRecord run_episode(const scm::Instance& inst, const EpisodeConfig& cfg, std::uint64_t seed,
                             const std::optional<graph::Dag>& learner_dag = std::nullopt,
                             const StepObserver& observer = {}) {
  const graph::Dag& dag = learner_dag ? *learner_dag : inst.scm.dag;
  return run_episode_from(inst, make_prior(inst, dag, cfg), cfg, seed, observer);
}

/// Distance |a^(t) - a*| per step for CIV with n = 1, started from the estimate only.
inline std::vector<double> consistency_probe(const scm::Instance& inst, int T, std::uint64_t seed,
                                             const optimizer::OptimizerConfig& opt = {}) {
  if (inst.sink_only()) throw InputError("consistency_probe: a* targets only sink nodes, CIV is identically zero");
  EpisodeConfig cfg;
  cfg.T = T;
  cfg.n = 1;
  cfg.method.kind = acquisition::MethodKind::Civ;
  cfg.optimizer = opt;
  cfg.optimizer.dual_init = false;
  RunRecord rec = run_episode(inst, cfg, seed);
  std::vector<double> out;
  out.reserve(rec.steps.size());
  for (const auto& s : rec.steps) out.push_back((s.a - inst.a_star).norm());
  return out;
}

struct InstanceSpec {
  graph::GraphKind graph = graph::GraphKind::complete();
  int p = 10;
  int k_targets = 1;
  scm::TargetRule target_rule = scm::TargetRule::Random;
  graph::Misspecification misspec{graph::Misspecification::Kind::MissingEdges, 0};
};

/// Ground truth plus the DAG handed to the learner.
struct BenchmarkInstance {
  scm::Instance truth;
  graph::Dag learner_dag;
};

/// Instance `index`: seeded by base_seed + index, retried with derived seeds
/// while the requested support or misspecification is infeasible.
inline BenchmarkInstance make_instance(const InstanceSpec& spec, std::uint64_t base_seed, int index) {
  const std::uint64_t seed0 = base_seed + static_cast<std::uint64_t>(index);
  std::string last_error;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? seed0 : derive_seed(seed0, attempt);
    try {
      scm::Instance inst = scm::gen_instance(spec.graph, spec.p, spec.k_targets, spec.target_rule, seed);
      graph::Dag learner = graph::perturb(inst.scm.dag, spec.misspec, derive_seed(seed, "misspec"));
      return {std::move(inst), std::move(learner)};
    } catch (const InputError& e) {
      last_error = e.what();
    }
  }
  throw InputError("make_instance: no feasible instance after 100 attempts (" + last_error + ")");
}

struct BenchmarkConfig {
  InstanceSpec instance;
  std::vector<acquisition::AcqMethod> methods;
  int instances = 1;
  int runs = 1;
  EpisodeConfig episode;  // `method` is overridden per method
  std::uint64_t base_seed = 0;
  int jobs = 1;

  void validate() const {
    if (instances < 1 || runs < 1) throw InputError("BenchmarkConfig: instances and runs must be >= 1");
    if (methods.empty()) throw InputError("BenchmarkConfig: no methods");
    if (jobs < 1) throw InputError("BenchmarkConfig: jobs must be >= 1");
    if (instance.p < 2) throw InputError("BenchmarkConfig: p must be >= 2");
    if (instance.k_targets < 1 || instance.k_targets > instance.p)
      throw InputError("BenchmarkConfig: k_targets must lie in [1, p]");
    for (const auto& m : methods) m.validate();
    episode.validate();
  }
};

inline std::uint64_t episode_seed(std::uint64_t base_seed, int instance, const std::string& method, int run) {
  return derive_seed(base_seed, instance, method, run);
}

struct EpisodeResult {
  std::string method;
  int instance = 0;
  int run = 0;
  bool ok = false;
  std::string error;
  RunRecord record;
};

struct SummaryRow {
  std::string method;
  int step = 0;
  double mean_rel_dist = 0.0;
  double std_across_instances = 0.0;
  double sem_across_runs = 0.0;
};

struct BenchmarkResult {
  std::vector<EpisodeResult> episodes;  // ordered by (method, instance, run)
  std::vector<SummaryRow> summary;      // ordered by (method, step)

  bool all_ok() const {
    return std::all_of(episodes.begin(), episodes.end(), [](const EpisodeResult& e) { return e.ok; });
  }
};

namespace detail {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Runs task(i) for i in [0, count) on up to `jobs` threads.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& task) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) task(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Per-step statistics of rel_dist: mean over instances of per-instance run
/// means, their standard deviation (ddof 1), and the mean over instances of
/// the per-instance standard error across runs. Failed episodes are skipped.
inline std::vector<SummaryRow> summarize(const std::vector<EpisodeResult>& episodes,
                                         const std::vector<std::string>& methods, int T) {
  std::vector<SummaryRow> rows;
  for (const auto& name : methods) {
    std::map<int, std::vector<const EpisodeResult*>> by_instance;
    for (const auto& e : episodes)
      if (e.ok && e.method == name) by_instance[e.instance].push_back(&e);
    for (int t = 0; t < T; ++t) {
      std::vector<double> inst_means, inst_sems;
      for (const auto& [idx, eps] : by_instance) {
        std::vector<double> vals;
        for (const auto* e : eps) vals.push_back(e->record.steps[static_cast<std::size_t>(t)].rel_dist);
        inst_means.push_back(detail::mean(vals));
        inst_sems.push_back(detail::sample_std(vals) / std::sqrt(static_cast<double>(vals.size())));
      }
      SummaryRow r;
      r.method = name;
      r.step = t + 1;
      if (inst_means.empty()) {
        r.mean_rel_dist = r.std_across_instances = r.sem_across_runs = std::numeric_limits<double>::quiet_NaN();
      } else {
        r.mean_rel_dist = detail::mean(inst_means);
        r.std_across_instances = detail::sample_std(inst_means);
        r.sem_across_runs = detail::mean(inst_sems);
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  std::vector<BenchmarkInstance> instances;
  instances.reserve(static_cast<std::size_t>(cfg.instances));
  for (int i = 0; i < cfg.instances; ++i) instances.push_back(make_instance(cfg.instance, cfg.base_seed, i));

  const int M = static_cast<int>(cfg.methods.size());
  const int total = M * cfg.instances * cfg.runs;
  BenchmarkResult out;
  out.episodes.resize(static_cast<std::size_t>(total));
  detail::parallel_for(total, cfg.jobs, [&](int task) {
    const int m = task / (cfg.instances * cfg.runs);
    const int i = (task / cfg.runs) % cfg.instances;
    const int r = task % cfg.runs;
    EpisodeResult& res = out.episodes[static_cast<std::size_t>(task)];
    res.method = cfg.methods[m].name();
    res.instance = i;
    res.run = r;
    EpisodeConfig ep = cfg.episode;
    ep.method = cfg.methods[m];
    const auto& bi = instances[static_cast<std::size_t>(i)];
    try {
      res.record = run_episode(bi.truth, ep, episode_seed(cfg.base_seed, i, res.method, r), bi.learner_dag);
      res.ok = true;
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
  });

  std::vector<std::string> names;
  for (const auto& m : cfg.methods) names.push_back(m.name());
  out.summary = summarize(out.episodes, names, cfg.episode.T);
  return out;
}

}  // namespace causalacq::engine

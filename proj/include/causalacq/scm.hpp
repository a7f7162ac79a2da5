#pragma once

// Ground-truth linear Gaussian SCM x = Bx + a + eps, eps ~ N(0, diag(sigma2)).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "causalacq/errors.hpp"
#include "causalacq/graph.hpp"
#include "causalacq/rng.hpp"

namespace causalacq::scm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Shift intervention: entry i is added to node i's structural equation.
using Intervention = Vector;

struct LinearScm {
  graph::Dag dag;
  Matrix B;       // B(i, k) != 0 only for k in pa(i)
  Vector sigma2;  // noise variances, all > 0

  int size() const { return dag.size(); }

  void validate() const {
    const int p = dag.size();
    if (B.rows() != p || B.cols() != p || sigma2.size() != p) throw InputError("LinearScm: shape mismatch");
    for (int i = 0; i < p; ++i) {
      if (!(sigma2[i] > 0.0) || !std::isfinite(sigma2[i])) throw InputError("LinearScm: sigma2 must be positive");
      for (int k = 0; k < p; ++k)
        if (B(i, k) != 0.0 && !dag.has_edge(k, i)) throw InputError("LinearScm: B has weight off the DAG support");
    }
  }
};

/// (I - B)^{-1} a by forward substitution in topological order.
inline Vector solve_shift(const graph::Dag& dag, const Matrix& B, const Vector& a) {
  Vector x(a.size());
  for (int i : dag.topo()) {
    double s = a[i];
    for (int k : dag.parents(i)) s += B(i, k) * x[k];
    x[i] = s;
  }
  return x;
}

/// (I - B)^{-T} g by back substitution in reverse topological order.
inline Vector solve_shift_transposed(const graph::Dag& dag, const Matrix& B, const Vector& g) {
  Vector y = g;
  auto topo = dag.topo();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    int i = *it;
    for (int k : dag.parents(i)) y[k] += B(i, k) * y[i];
  }
  return y;
}

/// Target mean reached by shift a: (I - B)^{-1} a.
inline Vector target_mean(const graph::Dag& dag, const Matrix& B, const Intervention& a) {
  return solve_shift(dag, B, a);
}

/// Shift whose interventional mean is mu: (I - B) mu.
inline Intervention optimal_intervention(const Matrix& B, const Vector& mu) { return mu - B * mu; }

/// (I - B)^{-1} Sigma (I - B)^{-T}.
inline Matrix covariance(const LinearScm& scm) {
  const int p = scm.size();
  Matrix A(p, p);
  for (int j = 0; j < p; ++j) A.col(j) = solve_shift(scm.dag, scm.B, Vector::Unit(p, j));
  return A * scm.sigma2.asDiagonal() * A.transpose();
}

/// Edge weights ~ Unif([-1,-0.25] U [0.25,1]) on the DAG support, unit noise.
inline LinearScm gen_weights(const graph::Dag& dag, std::uint64_t seed) {
  const int p = dag.size();
  Rng rng(seed);
  LinearScm scm{dag, Matrix::Zero(p, p), Vector::Ones(p)};
  for (auto [from, to] : dag.edges()) {
    double magnitude = 0.25 + 0.75 * uniform01(rng);
    scm.B(to, from) = uniform01(rng) < 0.5 ? -magnitude : magnitude;
  }
  return scm;
}

/// Rescales every variable to unit marginal variance: B_ik <- B_ik s_k / s_i,
/// sigma_i <- sigma_i / s_i with s_i the marginal std of the input model.
inline LinearScm standardize(const LinearScm& scm) {
  const int p = scm.size();
  Vector s = covariance(scm).diagonal().cwiseSqrt();
  LinearScm out = scm;
  for (int i = 0; i < p; ++i) {
    for (int k : scm.dag.parents(i)) out.B(i, k) = scm.B(i, k) * s[k] / s[i];
    out.sigma2[i] = scm.sigma2[i] / (s[i] * s[i]);
  }
  return out;
}

/// n independent rows x = (I - B)^{-1}(a + eps).
inline Matrix sample(const LinearScm& scm, const Intervention& a, int n, Rng& rng) {
  if (n < 1) throw InputError("sample: n must be >= 1");
  const int p = scm.size();
  if (a.size() != p) throw InputError("sample: intervention has wrong dimension");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector sd = scm.sigma2.cwiseSqrt();
  Matrix X(n, p);
  for (int r = 0; r < n; ++r) {
    for (int i : scm.dag.topo()) {
      double v = a[i] + sd[i] * normal(rng);
      for (int k : scm.dag.parents(i)) v += scm.B(i, k) * X(r, k);
      X(r, i) = v;
    }
  }
  return X;
}

inline Matrix sample(const LinearScm& scm, const Intervention& a, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample(scm, a, n, rng);
}

enum class TargetRule { Random, MostDownstream };

inline TargetRule parse_target_rule(std::string_view s) {
  if (s == "random") return TargetRule::Random;
  if (s == "most_downstream") return TargetRule::MostDownstream;
  throw InputError("unknown target rule: " + std::string(s));
}

inline std::string to_string(TargetRule r) { return r == TargetRule::Random ? "random" : "most_downstream"; }

/// One synthetic benchmark problem: the true SCM, its optimal shift and the
/// target mean that shift reaches.
struct Instance {
  LinearScm scm;
  Intervention a_star;
  Vector mu_star;

  int size() const { return scm.size(); }

  /// True when every targeted node is a sink (acquisitions degenerate).
  bool sink_only() const {
    for (int i = 0; i < size(); ++i)
      if (a_star[i] != 0.0 && !scm.dag.is_sink(i)) return false;
    return true;
  }
};

namespace detail {

inline std::vector<int> choose_support(const graph::Dag& dag, int k, TargetRule rule, Rng& rng) {
  const int p = dag.size();
  std::vector<bool> sink(static_cast<std::size_t>(p));
  bool any_non_sink = false;
  for (int i = 0; i < p; ++i) {
    sink[i] = dag.is_sink(i);
    any_non_sink = any_non_sink || !sink[i];
  }
  if (!any_non_sink) throw InputError("gen_instance: every node is a sink, no admissible support");

  auto all_sinks = [&](const std::vector<int>& s) {
    for (int v : s)
      if (!sink[v]) return false;
    return true;
  };

  if (rule == TargetRule::MostDownstream) {
    auto topo = dag.topo();
    std::vector<int> support(topo.end() - k, topo.end());
    if (all_sinks(support)) {
      // swap the most upstream chosen node for the most downstream non-sink
      for (int r = p - k - 1; r >= 0; --r) {
        if (!sink[topo[r]]) {
          support.front() = topo[r];
          break;
        }
      }
      if (all_sinks(support)) throw InputError("gen_instance: no most-downstream support avoids sink-only targets");
    }
    return support;
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> nodes(static_cast<std::size_t>(p));
    std::iota(nodes.begin(), nodes.end(), 0);
    graph::detail::shuffle(rng, nodes);
    nodes.resize(static_cast<std::size_t>(k));
    if (!all_sinks(nodes)) return nodes;
  }
  throw InputError("gen_instance: could not draw a support that is not sink-only");
}

}  // namespace detail

/// Builds an instance from the DAG of an already-generated SCM.
inline Instance instance_from_scm(LinearScm scm, int k_targets, TargetRule rule, std::uint64_t seed) {
  const int p = scm.size();
  if (k_targets < 1 || k_targets > p) throw InputError("gen_instance: k_targets must lie in [1, p]");
  Rng rng(seed);
  std::vector<int> support = detail::choose_support(scm.dag, k_targets, rule, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a = Vector::Zero(p);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int v : support) a[v] = normal(rng);
    norm = a.norm();
  }
  a /= norm;
  Vector mu = solve_shift(scm.dag, scm.B, a);
  return Instance{std::move(scm), std::move(a), std::move(mu)};
}

/// DAG -> weights -> standardization -> unit-norm a* on k targets -> mu*.
inline Instance gen_instance(const graph::GraphKind& kind, int p, int k_targets, TargetRule rule,
                             std::uint64_t seed) {
  if (k_targets < 1 || k_targets > p) throw InputError("gen_instance: k_targets must lie in [1, p]");
  graph::Dag dag = graph::generate(kind, p, derive_seed(seed, "dag"));
  LinearScm scm = standardize(gen_weights(dag, derive_seed(seed, "weights")));
  return instance_from_scm(std::move(scm), k_targets, rule, derive_seed(seed, "target"));
}

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j) {
  auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace detail

inline nlohmann::json to_json(const Instance& inst) {
  const int p = inst.size();
  std::vector<double> b;
  b.reserve(static_cast<std::size_t>(p) * p);
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < p; ++k) b.push_back(inst.scm.B(i, k));
  return {{"dag", graph::to_json(inst.scm.dag)},
          {"B", b},
          {"sigma2", detail::vector_json(inst.scm.sigma2)},
          {"a_star", detail::vector_json(inst.a_star)},
          {"mu_star", detail::vector_json(inst.mu_star)}};
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    graph::Dag dag = graph::dag_from_json(j.at("dag"));
    const int p = dag.size();
    auto b = j.at("B").get<std::vector<double>>();
    if (static_cast<int>(b.size()) != p * p) throw InputError("Instance JSON: B has wrong size");
    Matrix B(p, p);
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < p; ++k) B(i, k) = b[static_cast<std::size_t>(i) * p + k];
    LinearScm scm{std::move(dag), std::move(B), detail::vector_from_json(j.at("sigma2"))};
    scm.validate();
    Instance inst{std::move(scm), detail::vector_from_json(j.at("a_star")), detail::vector_from_json(j.at("mu_star"))};
    if (inst.a_star.size() != p || inst.mu_star.size() != p) throw InputError("Instance JSON: vector size mismatch");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("Instance JSON: ") + e.what());
  }
}

}  // namespace causalacq::scm

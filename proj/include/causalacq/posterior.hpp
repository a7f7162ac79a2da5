#pragma once

// DAG-BLR: independent normal-inverse-gamma beliefs over each node's incoming
// edge weights and noise variance, updated under known shift interventions.
//
//   sigma_i^2 ~ IG(alpha_i, beta_i),  B_{i,pa(i)} | sigma_i^2 ~ N(m_i, sigma_i^2 M_i)

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "causalacq/errors.hpp"
#include "causalacq/graph.hpp"
#include "causalacq/rng.hpp"
#include "causalacq/scm.hpp"

namespace causalacq::posterior {

using scm::Matrix;
using scm::Vector;

struct NodeBelief {
  double alpha = 0.0;
  double beta = 0.0;
  Vector m;  // |pa(i)|
  Matrix M;  // |pa(i)| x |pa(i)|, SPD
};

struct KnownVariance {
  Vector sigma2;
};
struct UnknownVariance {};
using VarianceMode = std::variant<KnownVariance, UnknownVariance>;

inline bool is_known(const VarianceMode& mode) { return std::holds_alternative<KnownVariance>(mode); }

/// Samples drawn under a single shift intervention.
struct Batch {
  Matrix X;  // n x p
  Vector a;

  int size() const { return static_cast<int>(X.rows()); }
};

struct DagBlrPosterior {
  graph::Dag dag;
  std::vector<NodeBelief> nodes;
  VarianceMode mode = UnknownVariance{};
  long sample_count = 0;

  int size() const { return dag.size(); }

  /// Re-checks dimensions and positive definiteness of every M_i.
  void validate() const {
    const int p = dag.size();
    if (static_cast<int>(nodes.size()) != p) throw InternalError("DagBlrPosterior: node count mismatch");
    if (auto* kv = std::get_if<KnownVariance>(&mode); kv && kv->sigma2.size() != p)
      throw InputError("DagBlrPosterior: known sigma2 has wrong dimension");
    for (int i = 0; i < p; ++i) {
      const auto d = static_cast<Eigen::Index>(dag.parents(i).size());
      const auto& nb = nodes[i];
      if (nb.m.size() != d || nb.M.rows() != d || nb.M.cols() != d)
        throw InternalError("DagBlrPosterior: node " + std::to_string(i + 1) + " has mismatched m/M dimensions");
      if (d > 0) {
        Eigen::LLT<Matrix> llt(nb.M);
        if (llt.info() != Eigen::Success)
          throw InternalError("DagBlrPosterior: M of node " + std::to_string(i + 1) +
                              " lost positive definiteness (min diag " + std::to_string(nb.M.diagonal().minCoeff()) +
                              ")");
      }
    }
  }
};

/// m_i = 0, M_i = I, alpha_i = alpha0, beta_i = beta0 for every node.
inline DagBlrPosterior init_prior(const graph::Dag& dag, double alpha0, double beta0, VarianceMode mode) {
  if (!is_known(mode) && !(alpha0 > 0.0)) throw InputError("init_prior: alpha0 must be positive");
  if (beta0 < 0.0) throw InputError("init_prior: beta0 must be non-negative");
  DagBlrPosterior post{dag, {}, std::move(mode), 0};
  post.nodes.reserve(static_cast<std::size_t>(dag.size()));
  for (int i = 0; i < dag.size(); ++i) {
    const auto d = static_cast<Eigen::Index>(dag.parents(i).size());
    post.nodes.push_back(NodeBelief{alpha0, beta0, Vector::Zero(d), Matrix::Identity(d, d)});
  }
  post.validate();
  return post;
}

namespace detail {

inline Vector gather(const Vector& x, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out[static_cast<Eigen::Index>(j)] = x[idx[j]];
  return out;
}

// One observation (x_pa, y) folded in by Sherman-Morrison; equivalent to the
// inverse-form conjugate update but never forms M^{-1}.
inline void absorb(NodeBelief& nb, const Vector& x_pa, double y) {
  if (x_pa.size() == 0) {
    nb.beta += 0.5 * y * y;
    return;
  }
  Vector w = nb.M * x_pa;
  double denom = 1.0 + x_pa.dot(w);
  double resid = y - x_pa.dot(nb.m);
  nb.m += w * (resid / denom);
  nb.M.noalias() -= (w * w.transpose()) / denom;
  nb.M = 0.5 * (nb.M + nb.M.transpose()).eval();
  nb.beta += 0.5 * resid * resid / denom;
}

}  // namespace detail

/// Conjugate update with a batch drawn under shift `batch.a`. Returns a new
/// posterior; the input is untouched.
inline DagBlrPosterior update(const DagBlrPosterior& post, const Batch& batch) {
  const int p = post.size();
  if (batch.X.cols() != p || batch.a.size() != p) throw InputError("update: batch dimension does not match p");
  if (batch.size() < 1) throw InputError("update: empty batch");
  if (!batch.X.allFinite() || !batch.a.allFinite()) throw InputError("update: batch has non-finite entries");

  DagBlrPosterior out = post;
  const int n = batch.size();
  for (int i = 0; i < p; ++i) {
    const auto& pa = post.dag.parents(i);
    auto& nb = out.nodes[i];
    for (int r = 0; r < n; ++r) {
      Vector row = batch.X.row(r).transpose();
      detail::absorb(nb, detail::gather(row, pa), row[i] - batch.a[i]);
    }
    nb.alpha += 0.5 * n;
  }
  out.sample_count += n;
  out.validate();
  return out;
}

/// E[B | D]: row i holds m_i on pa(i), zero elsewhere.
inline Matrix posterior_mean_B(const DagBlrPosterior& post) {
  const int p = post.size();
  Matrix E = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    const auto& pa = post.dag.parents(i);
    for (std::size_t j = 0; j < pa.size(); ++j) E(i, pa[j]) = post.nodes[i].m[static_cast<Eigen::Index>(j)];
  }
  return E;
}

/// (I - E[B]) mu*.
inline scm::Intervention estimate_a_star(const DagBlrPosterior& post, const Vector& mu_star) {
  if (mu_star.size() != post.size()) throw InputError("estimate_a_star: mu* has wrong dimension");
  return scm::optimal_intervention(posterior_mean_B(post), mu_star);
}

/// Plug-in outcome (I - E[B])^{-1} a'.
inline Vector hypothetical_sample(const DagBlrPosterior& post, const scm::Intervention& a_prime) {
  if (a_prime.size() != post.size()) throw InputError("hypothetical_sample: a' has wrong dimension");
  return scm::solve_shift(post.dag, posterior_mean_B(post), a_prime);
}

/// M_i after absorbing n copies of the plug-in outcome of a' (rank-one
/// downdate). alpha, beta and m are unaffected by such data.
inline std::vector<Matrix> augmented_M(const DagBlrPosterior& post, const scm::Intervention& a_prime, int n) {
  if (n < 1) throw InputError("augmented_M: n must be >= 1");
  Vector xbar = hypothetical_sample(post, a_prime);
  std::vector<Matrix> out;
  out.reserve(post.nodes.size());
  for (int i = 0; i < post.size(); ++i) {
    const Matrix& M = post.nodes[i].M;
    if (M.rows() == 0) {
      out.push_back(M);
      continue;
    }
    Vector x = detail::gather(xbar, post.dag.parents(i));
    Vector w = M * x;
    out.push_back(M - (n * (w * w.transpose())) / (1.0 + n * x.dot(w)));
  }
  return out;
}

/// One joint draw (B, sigma2) from the posterior. In known-variance mode
/// sigma2 is the fixed vector.
struct ParameterDraw {
  Matrix B;
  Vector sigma2;
};

/// Cholesky factors of every M_i, reusable across many draws.
inline std::vector<Matrix> cholesky_factors(const DagBlrPosterior& post) {
  std::vector<Matrix> L;
  L.reserve(post.nodes.size());
  for (const auto& nb : post.nodes) {
    if (nb.M.rows() == 0) {
      L.emplace_back(0, 0);
      continue;
    }
    Eigen::LLT<Matrix> llt(nb.M);
    if (llt.info() != Eigen::Success) throw InternalError("cholesky_factors: M is not positive definite");
    L.emplace_back(llt.matrixL());
  }
  return L;
}

inline ParameterDraw draw_parameters(const DagBlrPosterior& post, const std::vector<Matrix>& chol, Rng& rng) {
  const int p = post.size();
  ParameterDraw draw{Matrix::Zero(p, p), Vector(p)};
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto* known = std::get_if<KnownVariance>(&post.mode);
  for (int i = 0; i < p; ++i) {
    const auto& nb = post.nodes[i];
    double s2;
    if (known) {
      s2 = known->sigma2[i];
    } else if (nb.beta <= 0.0) {
      s2 = 0.0;
    } else {
      std::gamma_distribution<double> gamma(nb.alpha, 1.0 / nb.beta);
      s2 = 1.0 / gamma(rng);
    }
    draw.sigma2[i] = s2;
    const auto& pa = post.dag.parents(i);
    if (pa.empty()) continue;
    Vector z(static_cast<Eigen::Index>(pa.size()));
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
    Vector b = nb.m + std::sqrt(s2) * (chol[i] * z);
    for (std::size_t j = 0; j < pa.size(); ++j) draw.B(i, pa[j]) = b[static_cast<Eigen::Index>(j)];
  }
  return draw;
}

inline nlohmann::json to_json(const DagBlrPosterior& post) {
  nlohmann::json mode;
  if (const auto* kv = std::get_if<KnownVariance>(&post.mode)) {
    mode = {{"kind", "known"}, {"sigma2", std::vector<double>(kv->sigma2.data(), kv->sigma2.data() + kv->sigma2.size())}};
  } else {
    mode = {{"kind", "unknown"}};
  }
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nb : post.nodes) {
    nlohmann::json M = nlohmann::json::array();
    for (Eigen::Index r = 0; r < nb.M.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(nb.M.cols()));
      for (Eigen::Index c = 0; c < nb.M.cols(); ++c) row[static_cast<std::size_t>(c)] = nb.M(r, c);
      M.push_back(row);
    }
    nodes.push_back({{"alpha", nb.alpha},
                     {"beta", nb.beta},
                     {"m", std::vector<double>(nb.m.data(), nb.m.data() + nb.m.size())},
                     {"M", std::move(M)}});
  }
  return {{"mode", std::move(mode)}, {"nodes", std::move(nodes)}, {"sample_count", post.sample_count}};
}

inline DagBlrPosterior posterior_from_json(const nlohmann::json& j, const graph::Dag& dag) {
  try {
    DagBlrPosterior post;
    post.dag = dag;
    const auto& mode = j.at("mode");
    if (mode.at("kind") == "known") {
      auto s = mode.at("sigma2").get<std::vector<double>>();
      post.mode = KnownVariance{Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()))};
    } else {
      post.mode = UnknownVariance{};
    }
    for (const auto& jn : j.at("nodes")) {
      NodeBelief nb;
      nb.alpha = jn.at("alpha").get<double>();
      nb.beta = jn.at("beta").get<double>();
      auto m = jn.at("m").get<std::vector<double>>();
      nb.m = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
      const auto d = nb.m.size();
      nb.M.resize(d, d);
      const auto& jM = jn.at("M");
      if (static_cast<Eigen::Index>(jM.size()) != d) throw InputError("posterior JSON: M has wrong size");
      for (Eigen::Index r = 0; r < d; ++r) {
        auto row = jM.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != d) throw InputError("posterior JSON: M has wrong size");
        for (Eigen::Index c = 0; c < d; ++c) nb.M(r, c) = row[static_cast<std::size_t>(c)];
      }
      post.nodes.push_back(std::move(nb));
    }
    post.sample_count = j.value("sample_count", 0L);
    post.validate();
    return post;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("posterior JSON: ") + e.what());
  } catch (const InternalError& e) {
    throw InputError(std::string("posterior JSON: ") + e.what());
  }
}

}  // namespace causalacq::posterior

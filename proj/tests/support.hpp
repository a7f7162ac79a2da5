#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "causalacq/graph.hpp"
#include "causalacq/posterior.hpp"
#include "causalacq/scm.hpp"

namespace testing_support {

using namespace causalacq;
using scm::Matrix;
using scm::Vector;

inline Matrix dense_inverse_shift(const Matrix& B) {
  const auto p = B.rows();
  return (Matrix::Identity(p, p) - B).inverse();
}

/// Posterior after a few random interventional batches; gives non-trivial
/// m, M, alpha, beta without hand-crafting SPD matrices.
inline posterior::DagBlrPosterior random_posterior(const scm::LinearScm& truth, posterior::VarianceMode mode,
                                                   std::uint64_t seed, int batches = 4, int n = 2,
                                                   double alpha0 = 2.0, double beta0 = 1.0) {
  auto post = posterior::init_prior(truth.dag, alpha0, beta0, std::move(mode));
  Rng rng(seed);
  for (int b = 0; b < batches; ++b) {
    Vector a = uniform_sphere(rng, truth.size());
    post = posterior::update(post, {scm::sample(truth, a, n, rng), a});
  }
  return post;
}

inline scm::Instance small_instance(int p, std::uint64_t seed, int k = 2,
                                    graph::GraphKind kind = graph::GraphKind::complete()) {
  return scm::gen_instance(kind, p, k, scm::TargetRule::Random, seed);
}

/// Central differences of a scalar function.
template <typename Fn>
Vector finite_difference(Fn&& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size()), xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    g[k] = (f(xp) - f(xm)) / (2 * h);
    xp[k] = xm[k] = x[k];
  }
  return g;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (static_cast<double>(i) + static_cast<double>(j));
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

/// R^2 of the least-squares fit y ~ c0 + c1 x.
inline double affine_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double r = pearson(x, y);
  return r * r;
}

}  // namespace testing_support

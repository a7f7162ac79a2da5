#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "causalacq/posterior.hpp"
#include "support.hpp"

using namespace causalacq;
using namespace testing_support;
using posterior::Batch;
using posterior::KnownVariance;
using posterior::UnknownVariance;

namespace {

// Inverse-form normal-inverse-gamma update for one node.
struct ConjugateOracle {
  double alpha, beta;
  Vector m;
  Matrix M;
};

ConjugateOracle conjugate_oracle(const posterior::NodeBelief& prior, const Matrix& Xpa, const Vector& y) {
  Matrix P0 = prior.M.inverse();
  Matrix P = P0 + Xpa.transpose() * Xpa;
  Matrix M = P.inverse();
  Vector m = M * (P0 * prior.m + Xpa.transpose() * y);
  double beta = prior.beta + 0.5 * (y.squaredNorm() + prior.m.dot(P0 * prior.m) - m.dot(P * m));
  return {prior.alpha + 0.5 * static_cast<double>(y.size()), beta, m, M};
}

void expect_same(const posterior::DagBlrPosterior& a, const posterior::DagBlrPosterior& b, double tol) {
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_NEAR(a.nodes[i].alpha, b.nodes[i].alpha, tol);
    EXPECT_NEAR(a.nodes[i].beta, b.nodes[i].beta, tol);
    if (a.nodes[i].m.size() > 0) {
      EXPECT_LE((a.nodes[i].m - b.nodes[i].m).cwiseAbs().maxCoeff(), tol);
      EXPECT_LE((a.nodes[i].M - b.nodes[i].M).cwiseAbs().maxCoeff(), tol);
    }
  }
}

}  // namespace

TEST(Prior, IdentityScaleAndZeroMean) {
  auto dag = graph::generate(graph::GraphKind::erdos_renyi(0.5), 4, 2);
  auto post = posterior::init_prior(dag, 2.0, 0.0, KnownVariance{Vector::Ones(4)});
  for (int i = 0; i < 4; ++i) {
    const auto d = static_cast<Eigen::Index>(dag.parents(i).size());
    EXPECT_EQ(post.nodes[i].m, Vector::Zero(d));
    EXPECT_EQ(post.nodes[i].M, Matrix::Identity(d, d));
    EXPECT_EQ(post.nodes[i].alpha, 2.0);
    EXPECT_EQ(post.nodes[i].beta, 0.0);
  }
  EXPECT_EQ(posterior::posterior_mean_B(post), Matrix::Zero(4, 4));
}

TEST(Prior, RootNodeHasEmptyBelief) {
  auto dag = graph::Dag::from_parents(2, {{}, {0}});
  auto post = posterior::init_prior(dag, 1.0, 1.0, UnknownVariance{});
  EXPECT_EQ(post.nodes[0].m.size(), 0);
  EXPECT_EQ(post.nodes[0].M.rows(), 0);
}

TEST(Prior, RejectsInvalidHyperparameters) {
  auto dag = graph::Dag::from_parents(2, {{}, {0}});
  EXPECT_THROW(posterior::init_prior(dag, 0.0, 1.0, UnknownVariance{}), InputError);
  EXPECT_THROW(posterior::init_prior(dag, 1.0, -1.0, UnknownVariance{}), InputError);
  EXPECT_NO_THROW(posterior::init_prior(dag, 0.0, 1.0, KnownVariance{Vector::Ones(2)}));
  EXPECT_THROW(posterior::init_prior(dag, 1.0, 1.0, KnownVariance{Vector::Ones(3)}), InputError);
}

TEST(Update, SingleSampleHandFormula) {
  auto dag = graph::Dag::from_parents(2, {{}, {0}});
  auto post = posterior::init_prior(dag, 1.0, 0.0, UnknownVariance{});
  const double xpa = 0.7, xi = -1.3, ai = 0.4;
  Matrix X(1, 2);
  X << xpa, xi;
  Vector a(2);
  a << 0.0, ai;
  auto out = posterior::update(post, {X, a});
  EXPECT_NEAR(out.nodes[1].M(0, 0), 1.0 / (1.0 + xpa * xpa), 1e-15);
  EXPECT_NEAR(out.nodes[1].m[0], (xi - ai) * xpa / (1.0 + xpa * xpa), 1e-15);
  EXPECT_EQ(out.nodes[1].alpha, 1.5);
  EXPECT_EQ(out.sample_count, 1);
  EXPECT_EQ(post.sample_count, 0);  // input untouched
}

TEST(Update, MatchesInverseFormOracle) {
  auto inst = small_instance(5, 21, 2);
  auto post = random_posterior(inst.scm, UnknownVariance{}, 3);
  Rng rng(9);
  Vector a = uniform_sphere(rng, 5);
  Matrix X = scm::sample(inst.scm, a, 7, rng);
  auto out = posterior::update(post, {X, a});
  for (int i = 0; i < 5; ++i) {
    const auto& pa = inst.scm.dag.parents(i);
    Matrix Xpa(7, static_cast<Eigen::Index>(pa.size()));
    for (std::size_t j = 0; j < pa.size(); ++j) Xpa.col(static_cast<Eigen::Index>(j)) = X.col(pa[j]);
    Vector y = X.col(i).array() - a[i];
    auto ref = conjugate_oracle(post.nodes[i], Xpa, y);
    EXPECT_NEAR(out.nodes[i].alpha, ref.alpha, 1e-12);
    EXPECT_NEAR(out.nodes[i].beta, ref.beta, 1e-9 * (1 + std::abs(ref.beta)));
    if (!pa.empty()) {
      EXPECT_LT((out.nodes[i].m - ref.m).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT((out.nodes[i].M - ref.M).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Update, BatchEqualsSequential) {
  auto inst = small_instance(6, 5, 2);
  auto prior = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  Rng rng(4);
  Vector a = uniform_sphere(rng, 6);
  Matrix X = scm::sample(inst.scm, a, 12, rng);
  auto whole = posterior::update(prior, {X, a});
  auto split = posterior::update(posterior::update(prior, {X.topRows(5), a}), {X.bottomRows(7), a});
  expect_same(whole, split, 1e-10);
  EXPECT_EQ(split.sample_count, 12);
}

TEST(Update, OrderOfBatchesDoesNotMatter) {
  auto inst = small_instance(5, 6, 2);
  auto prior = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  Rng rng(8);
  std::vector<Batch> batches;
  for (int b = 0; b < 4; ++b) {
    Vector a = uniform_sphere(rng, 5);
    batches.push_back({scm::sample(inst.scm, a, 3, rng), a});
  }
  auto fwd = prior, rev = prior;
  for (int b = 0; b < 4; ++b) fwd = posterior::update(fwd, batches[b]);
  for (int b = 3; b >= 0; --b) rev = posterior::update(rev, batches[b]);
  expect_same(fwd, rev, 1e-10);
}

TEST(Update, ConvergesToLeastSquares) {
  auto inst = small_instance(5, 13, 2);
  auto prior = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  const int N = 20000;
  Matrix X = scm::sample(inst.scm, Vector::Zero(5), N, std::uint64_t{3});
  auto post = posterior::update(prior, {X, Vector::Zero(5)});
  Matrix E = posterior::posterior_mean_B(post);
  for (int i = 0; i < 5; ++i) {
    const auto& pa = inst.scm.dag.parents(i);
    if (pa.empty()) continue;
    Matrix Xpa(N, static_cast<Eigen::Index>(pa.size()));
    for (std::size_t j = 0; j < pa.size(); ++j) Xpa.col(static_cast<Eigen::Index>(j)) = X.col(pa[j]);
    Vector ols = Xpa.colPivHouseholderQr().solve(Vector(X.col(i)));
    for (std::size_t j = 0; j < pa.size(); ++j) {
      EXPECT_NEAR(E(i, pa[j]), ols[static_cast<Eigen::Index>(j)], 1e-3);
      EXPECT_NEAR(E(i, pa[j]), inst.scm.B(i, pa[j]), 0.1);
    }
  }
}

TEST(Update, ContractionRate) {
  auto inst = small_instance(4, 2, 2);
  auto prior = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  double e1 = 0, e4 = 0;
  const int N = 500, reps = 40;
  for (int r = 0; r < reps; ++r) {
    Matrix X = scm::sample(inst.scm, Vector::Zero(4), 4 * N, derive_seed(r, "contraction"));
    auto p1 = posterior::update(prior, {X.topRows(N), Vector::Zero(4)});
    auto p4 = posterior::update(prior, {X, Vector::Zero(4)});
    e1 += (posterior::posterior_mean_B(p1) - inst.scm.B).norm();
    e4 += (posterior::posterior_mean_B(p4) - inst.scm.B).norm();
  }
  const double ratio = e4 / e1;
  EXPECT_GT(ratio, 0.5 / 1.5);
  EXPECT_LT(ratio, 0.5 * 1.5);
}

TEST(Update, BetaNonNegativeAndPositiveDefinite) {
  auto inst = small_instance(6, 31, 3);
  auto post = random_posterior(inst.scm, UnknownVariance{}, 5, 30, 3, 2.0, 0.0);
  for (const auto& nb : post.nodes) EXPECT_GE(nb.beta, -1e-9);
  EXPECT_NO_THROW(post.validate());
}

TEST(Update, RejectsBadBatches) {
  auto inst = small_instance(3, 1, 1);
  auto post = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  EXPECT_THROW(posterior::update(post, {Matrix::Zero(1, 2), Vector::Zero(3)}), InputError);
  EXPECT_THROW(posterior::update(post, {Matrix::Zero(1, 3), Vector::Zero(2)}), InputError);
  EXPECT_THROW(posterior::update(post, {Matrix::Zero(0, 3), Vector::Zero(3)}), InputError);
  Matrix bad = Matrix::Zero(1, 3);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(posterior::update(post, {bad, Vector::Zero(3)}), InputError);
}

TEST(Update, ValidateFlagsIndefiniteScale) {
  auto inst = small_instance(3, 1, 1);
  auto post = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  int child = inst.scm.dag.topo()[2];
  post.nodes[child].M(0, 0) = -1.0;
  EXPECT_THROW(post.validate(), InternalError);
}

TEST(Estimate, MatchesMatrixAlgebra) {
  auto inst = small_instance(6, 4, 2);
  auto post = random_posterior(inst.scm, KnownVariance{inst.scm.sigma2}, 7);
  Matrix E = posterior::posterior_mean_B(post);
  EXPECT_LT((posterior::estimate_a_star(post, inst.mu_star) - (Matrix::Identity(6, 6) - E) * inst.mu_star).norm(),
            1e-12);
  auto fresh = posterior::init_prior(inst.scm.dag, 2.0, 1.0, KnownVariance{inst.scm.sigma2});
  EXPECT_EQ(posterior::estimate_a_star(fresh, inst.mu_star), inst.mu_star);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k)
      if (!inst.scm.dag.has_edge(k, i)) {
        EXPECT_EQ(E(i, k), 0.0);
      }
}

TEST(Estimate, ExactMeanRecoversOptimalShift) {
  auto inst = small_instance(5, 3, 2);
  auto post = posterior::init_prior(inst.scm.dag, 2.0, 1.0, UnknownVariance{});
  for (int i = 0; i < 5; ++i) {
    const auto& pa = inst.scm.dag.parents(i);
    for (std::size_t j = 0; j < pa.size(); ++j) post.nodes[i].m[static_cast<Eigen::Index>(j)] = inst.scm.B(i, pa[j]);
  }
  EXPECT_LT((posterior::estimate_a_star(post, inst.mu_star) - inst.a_star).norm(), 1e-12);
}

TEST(Hypothetical, ChainSubstitutionAndResidual) {
  auto dag = graph::Dag::from_parents(2, {{}, {0}});
  auto post = posterior::init_prior(dag, 2.0, 1.0, UnknownVariance{});
  post.nodes[1].m[0] = 0.6;
  Vector a(2);
  a << 0.3, -0.5;
  Vector x = posterior::hypothetical_sample(post, a);
  EXPECT_NEAR(x[0], 0.3, 1e-15);
  EXPECT_NEAR(x[1], -0.5 + 0.6 * 0.3, 1e-15);

  auto inst = small_instance(7, 2, 3);
  auto rp = random_posterior(inst.scm, UnknownVariance{}, 1);
  Rng rng(3);
  Vector ap = uniform_sphere(rng, 7);
  Vector xb = posterior::hypothetical_sample(rp, ap);
  EXPECT_LT(((Matrix::Identity(7, 7) - posterior::posterior_mean_B(rp)) * xb - ap).norm(), 1e-12);
}

TEST(Augment, ZeroShiftLeavesScaleUnchanged) {
  auto inst = small_instance(5, 8, 2);
  auto post = random_posterior(inst.scm, UnknownVariance{}, 2);
  auto aug = posterior::augmented_M(post, Vector::Zero(5), 3);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(aug[i], post.nodes[i].M);
}

TEST(Augment, MatchesExplicitInverseAndLoewnerOrder) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto inst = small_instance(6, s, 2);
    auto post = random_posterior(inst.scm, UnknownVariance{}, s + 1);
    Rng rng(s);
    Vector ap = uniform_sphere(rng, 6);
    const int n = 1 + static_cast<int>(s % 3);
    auto aug = posterior::augmented_M(post, ap, n);
    Vector xb = posterior::hypothetical_sample(post, ap);
    for (int i = 0; i < 6; ++i) {
      const auto& pa = inst.scm.dag.parents(i);
      if (pa.empty()) continue;
      Vector x = posterior::detail::gather(xb, pa);
      Matrix ref = (post.nodes[i].M.inverse() + n * x * x.transpose()).inverse();
      EXPECT_LT((aug[i] - ref).cwiseAbs().maxCoeff(), 1e-10);
      Eigen::SelfAdjointEigenSolver<Matrix> es(post.nodes[i].M - aug[i]);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
  }
}

TEST(Augment, PluginDataLeavesMeanAndScaleParametersFixed) {
  auto inst = small_instance(6, 12, 3);
  auto post = random_posterior(inst.scm, UnknownVariance{}, 4);
  Rng rng(5);
  Vector ap = uniform_sphere(rng, 6);
  const int n = 3;
  Vector xb = posterior::hypothetical_sample(post, ap);
  Matrix X = xb.transpose().replicate(n, 1);
  auto full = posterior::update(post, {X, ap});
  auto aug = posterior::augmented_M(post, ap, n);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(full.nodes[i].alpha, post.nodes[i].alpha + 0.5 * n);
    EXPECT_NEAR(full.nodes[i].beta, post.nodes[i].beta, 1e-12);
    if (post.nodes[i].m.size() == 0) continue;
    EXPECT_LT((full.nodes[i].m - post.nodes[i].m).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((full.nodes[i].M - aug[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Draw, MomentsMatchPosterior) {
  auto inst = small_instance(3, 2, 1);
  auto post = random_posterior(inst.scm, UnknownVariance{}, 3, 5, 2, 3.0, 2.0);
  auto chol = posterior::cholesky_factors(post);
  Rng rng(11);
  const int K = 40000;
  int child = inst.scm.dag.topo()[2];
  int parent = inst.scm.dag.parents(child)[0];
  double sum_b = 0, sum_s2 = 0;
  for (int k = 0; k < K; ++k) {
    auto d = posterior::draw_parameters(post, chol, rng);
    sum_b += d.B(child, parent);
    sum_s2 += d.sigma2[child];
  }
  const auto& nb = post.nodes[child];
  const double mean_s2 = nb.beta / (nb.alpha - 1.0);
  EXPECT_NEAR(sum_b / K, nb.m[0], 5 * std::sqrt(mean_s2 * nb.M(0, 0) / K));
  EXPECT_NEAR(sum_s2 / K, mean_s2, 0.03 * mean_s2);
}

TEST(Json, RoundTrip) {
  auto inst = small_instance(4, 3, 2);
  for (posterior::VarianceMode mode : {posterior::VarianceMode{UnknownVariance{}},
                                       posterior::VarianceMode{KnownVariance{inst.scm.sigma2}}}) {
    auto post = random_posterior(inst.scm, mode, 5);
    auto back = posterior::posterior_from_json(nlohmann::json::parse(posterior::to_json(post).dump()), inst.scm.dag);
    expect_same(post, back, 0.0);
    EXPECT_EQ(posterior::is_known(back.mode), posterior::is_known(post.mode));
    EXPECT_EQ(back.sample_count, post.sample_count);
  }
}

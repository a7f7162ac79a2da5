#include <gtest/gtest.h>

#include "causalacq/scm.hpp"
#include "support.hpp"

using namespace causalacq;
using namespace testing_support;

TEST(Solve, MatchesDenseInverse) {
  auto inst = small_instance(8, 3, 3);
  Rng rng(1);
  Vector a = standard_normal(rng, 8);
  Matrix A = dense_inverse_shift(inst.scm.B);
  EXPECT_LT((scm::solve_shift(inst.scm.dag, inst.scm.B, a) - A * a).norm(), 1e-12);
  EXPECT_LT((scm::solve_shift_transposed(inst.scm.dag, inst.scm.B, a) - A.transpose() * a).norm(), 1e-12);
}

TEST(Solve, OptimalInterventionInvertsTargetMean) {
  auto inst = small_instance(6, 4, 2);
  EXPECT_LT((scm::optimal_intervention(inst.scm.B, inst.mu_star) - inst.a_star).norm(), 1e-12);
  EXPECT_LT((scm::target_mean(inst.scm.dag, inst.scm.B, inst.a_star) - inst.mu_star).norm(), 1e-12);
}

TEST(Weights, SupportAndMagnitude) {
  auto dag = graph::generate(graph::GraphKind::erdos_renyi(0.5), 10, 3);
  auto m = scm::gen_weights(dag, 5);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(m.sigma2[i], 1.0);
    for (int k = 0; k < 10; ++k) {
      if (dag.has_edge(k, i)) {
        EXPECT_GE(std::abs(m.B(i, k)), 0.25);
        EXPECT_LE(std::abs(m.B(i, k)), 1.0);
      } else {
        EXPECT_EQ(m.B(i, k), 0.0);
      }
    }
  }
  EXPECT_NO_THROW(m.validate());
}

TEST(Standardize, UnitMarginalVariance) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto dag = graph::generate(graph::GraphKind::complete(), 15, s);
    auto m = scm::standardize(scm::gen_weights(dag, s));
    Matrix C = scm::covariance(m);
    for (int i = 0; i < 15; ++i) EXPECT_NEAR(C(i, i), 1.0, 1e-10);
    EXPECT_NO_THROW(m.validate());
  }
}

TEST(Sample, MomentsMatchModel) {
  auto inst = small_instance(4, 8, 2);
  Vector a(4);
  a << 0.3, -0.2, 0.5, 0.1;
  const int N = 40000;
  Matrix X = scm::sample(inst.scm, a, N, std::uint64_t{17});
  Vector mean = X.colwise().mean();
  Vector expected = scm::solve_shift(inst.scm.dag, inst.scm.B, a);
  Matrix C = scm::covariance(inst.scm);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(mean[i], expected[i], 5 * std::sqrt(C(i, i) / N));
  Matrix centered = X.rowwise() - mean.transpose();
  Matrix emp = centered.transpose() * centered / (N - 1);
  EXPECT_LT((emp - C).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Sample, RejectsBadArguments) {
  auto inst = small_instance(3, 1, 1);
  EXPECT_THROW(scm::sample(inst.scm, Vector::Zero(3), 0, std::uint64_t{1}), InputError);
  EXPECT_THROW(scm::sample(inst.scm, Vector::Zero(2), 1, std::uint64_t{1}), InputError);
}

TEST(Instance, InvariantsHold) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto inst = scm::gen_instance(graph::GraphKind::erdos_renyi(0.4), 8, 3, scm::TargetRule::Random, s);
    EXPECT_NEAR(inst.a_star.norm(), 1.0, 1e-12);
    int support = 0;
    for (int i = 0; i < 8; ++i) support += inst.a_star[i] != 0.0;
    EXPECT_EQ(support, 3);
    EXPECT_FALSE(inst.sink_only());
    EXPECT_LT((scm::solve_shift(inst.scm.dag, inst.scm.B, inst.a_star) - inst.mu_star).norm(), 1e-12);
  }
}

TEST(Instance, MostDownstreamUsesTailOfTopologicalOrder) {
  auto inst = scm::gen_instance(graph::GraphKind::complete(), 10, 4, scm::TargetRule::MostDownstream, 2);
  auto topo = inst.scm.dag.topo();
  // the last node of a complete DAG is the only sink, so the tail is admissible
  for (int r = 6; r < 10; ++r) EXPECT_NE(inst.a_star[topo[r]], 0.0);
  for (int r = 0; r < 6; ++r) EXPECT_EQ(inst.a_star[topo[r]], 0.0);
}

TEST(Instance, MostDownstreamSwapsInNonSinkWhenTailIsAllSinks) {
  // 0 -> 1, and 2, 3 isolated (sinks); topo by Kahn is 0,1,2,3
  graph::Dag dag = graph::Dag::from_parents(4, {{}, {0}, {}, {}});
  scm::LinearScm m = scm::gen_weights(dag, 1);
  auto inst = scm::instance_from_scm(m, 2, scm::TargetRule::MostDownstream, 3);
  EXPECT_FALSE(inst.sink_only());
  EXPECT_NE(inst.a_star[0], 0.0);
}

TEST(Instance, EmptyGraphIsRejected) {
  EXPECT_THROW(scm::gen_instance(graph::GraphKind::erdos_renyi(0.0), 5, 2, scm::TargetRule::Random, 1), InputError);
  EXPECT_THROW(scm::gen_instance(graph::GraphKind::complete(), 5, 0, scm::TargetRule::Random, 1), InputError);
  EXPECT_THROW(scm::gen_instance(graph::GraphKind::complete(), 5, 6, scm::TargetRule::Random, 1), InputError);
}

TEST(Instance, DeterministicAndJsonRoundTrip) {
  auto a = scm::gen_instance(graph::GraphKind::path(), 5, 2, scm::TargetRule::Random, 42);
  auto b = scm::gen_instance(graph::GraphKind::path(), 5, 2, scm::TargetRule::Random, 42);
  EXPECT_EQ(scm::to_json(a).dump(), scm::to_json(b).dump());
  auto back = scm::instance_from_json(nlohmann::json::parse(scm::to_json(a).dump()));
  EXPECT_EQ(back.scm.dag, a.scm.dag);
  EXPECT_EQ(back.scm.B, a.scm.B);
  EXPECT_EQ(back.a_star, a.a_star);
  EXPECT_EQ(back.mu_star, a.mu_star);
}

TEST(Instance, JsonRejectsOffSupportWeights) {
  auto a = scm::gen_instance(graph::GraphKind::path(), 3, 1, scm::TargetRule::Random, 1);
  auto j = scm::to_json(a);
  int sink = a.scm.dag.topo()[2], src = a.scm.dag.topo()[0];
  j["B"][src * 3 + sink] = 0.5;  // edge sink -> src does not exist
  EXPECT_THROW(scm::instance_from_json(j), InputError);
}

TEST(TargetRule, Names) {
  EXPECT_EQ(scm::parse_target_rule("most_downstream"), scm::TargetRule::MostDownstream);
  EXPECT_EQ(scm::to_string(scm::TargetRule::Random), "random");
  EXPECT_THROW(scm::parse_target_rule("upstream"), InputError);
}

#include "dsqp/admm.hpp"
#include "dsqp/averaging.hpp"
#include "dsqp/mpc.hpp"
#include "dsqp/ocp.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace dsqp;
using namespace dsqp::testing;

namespace {

// Two scalar subsystems, N = 1; the second one copies x_1(0).
PartitionedNlp example_one() {
  OcpSpec spec;
  spec.N = 1;
  spec.terminal_input = false;
  spec.copy_terminal_state = false;
  spec.copy_penalty = 0.0;
  SubsystemOcp s1, s2;
  s1.dynamics = std::make_shared<LinearDynamics>(Mat::Constant(1, 1, 0.9), Mat::Constant(1, 1, 1.0),
                                                 Mat(1, 0));
  s1.Q = s1.P = Mat::Identity(1, 1);
  s1.R = Mat::Identity(1, 1);
  s1.u_min = Vec::Constant(1, -1.0);
  s1.u_max = Vec::Constant(1, 1.0);
  s2.dynamics = std::make_shared<LinearDynamics>(Mat::Constant(1, 1, 0.8), Mat(1, 0),
                                                 Mat::Constant(1, 1, 0.5));
  s2.Q = s2.P = Mat::Identity(1, 1);
  s2.R = Mat(0, 0);
  s2.u_min = s2.u_max = Vec(0);
  s2.links = {NeighborLink{0, {0}}};
  spec.subsystems = {s1, s2};
  return assemble_nlp(spec, {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)});
}

}  // namespace

TEST(Example1, ConsensusMatrices) {
  const PartitionedNlp nlp = example_one();
  ASSERT_EQ(nlp.num_vars(0), 3);
  ASSERT_EQ(nlp.num_vars(1), 3);
  ASSERT_EQ(nlp.n_c(), 1);
  Mat E1_expected(1, 3), E2_expected(1, 3);
  E1_expected << 1, 0, 0;
  E2_expected << 0, 0, -1;
  EXPECT_LE((Mat(nlp.E(0)) - E1_expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((Mat(nlp.E(1)) - E2_expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(nlp.c().size(), 1);
  EXPECT_EQ(nlp.c()[0], 0.0);
}

TEST(Example1, AveragingMatrix) {
  const PartitionedNlp nlp = example_one();
  const Mat M = AveragingOperator(nlp).matrix();
  Mat expected = Mat::Identity(6, 6);
  expected(0, 0) = expected(0, 5) = expected(5, 0) = expected(5, 5) = 0.5;
  EXPECT_LE((M - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Example1, DecentralizedAverageIsTheTwoTermMean) {
  const PartitionedNlp nlp = example_one();
  DecentralizedAveraging dec(nlp);
  MessageBus bus(2, dec.edges());
  std::vector<Vec> v = {Vec(3), Vec(3)};
  v[0] << 1.5, 2.0, 3.0;
  v[1] << -4.0, 5.0, 0.25;
  const std::vector<Vec> z = dec.run(v, bus);
  EXPECT_EQ(z[0][0], (1.5 + 0.25) / 2);
  EXPECT_EQ(z[1][2], (1.5 + 0.25) / 2);
  EXPECT_EQ(z[0][1], 2.0);
  EXPECT_EQ(z[0][2], 3.0);
  EXPECT_EQ(z[1][0], -4.0);
  EXPECT_EQ(z[1][1], 5.0);
  EXPECT_EQ(bus.messages(), 2);
}

TEST(Averaging, TwoScalarOperator) {
  SpMat E(1, 2);
  E.insert(0, 0) = 1.0;
  E.insert(0, 1) = -1.0;
  AveragingOperator op(E, Vec::Zero(1));
  Mat expected = Mat::Constant(2, 2, 0.5);
  EXPECT_LE((op.matrix() - expected).cwiseAbs().maxCoeff(), 1e-15);
  Vec v(2);
  v << 1.0, 3.0;
  const Vec z = op.project(v);
  EXPECT_NEAR(z[0], 2.0, 1e-15);
  EXPECT_NEAR(z[1], 2.0, 1e-15);
}

TEST(Averaging, NoCouplingIsIdentity) {
  AveragingOperator op(SpMat(0, 3), Vec(0));
  EXPECT_LE((op.matrix() - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(1);
  const Vec y = random_vector(rng, 3);
  auto [z, lambda] = averaging_centralized(y, Vec::Zero(3), op, 1.0);
  EXPECT_EQ((z - y).norm(), 0.0);
  EXPECT_EQ(lambda.size(), 0);
}

TEST(Averaging, ProjectorIdentities) {
  const RunConfig cfg = small_chain_config(4, 3);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, split_chain_state(cfg.initial_state()));
  const AveragingOperator op(nlp);
  const Mat M = op.matrix();
  const Mat E = Mat(nlp.E_stacked());
  EXPECT_LE((E * M).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((M * M - M).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Averaging, DecentralizedMatchesCentralizedOnChain) {
  const RunConfig cfg = case_config(1);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, split_chain_state(cfg.initial_state()));
  const AveragingOperator op(nlp);
  DecentralizedAveraging dec(nlp);
  MessageBus bus(nlp.num_subsystems(), dec.edges());
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec v = random_vector(rng, nlp.n());
    const Vec zc = op.project(v);
    const Vec zd = nlp.stack_z(dec.run(nlp.split_z(v), bus, trial % 2 == 1));
    EXPECT_LE((zc - zd).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Averaging, DroppedMessageIsAnError) {
  const PartitionedNlp nlp = example_one();
  DecentralizedAveraging dec(nlp);
  MessageBus bus(2, dec.edges());
  bus.drop_next(1, 0);
  try {
    dec.run({Vec::Zero(3), Vec::Zero(3)}, bus);
    FAIL() << "expected MissingMessage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMessage);
  }
}

TEST(DualUpdate, Basics) {
  const Vec y = Vec::Constant(3, 2.0);
  const Vec g = Vec::Constant(3, 0.5);
  EXPECT_EQ((dual_update(y, y, g, 1.0) - g).norm(), 0.0);
  Vec e1 = Vec::Zero(3);
  e1[0] = 1.0;
  EXPECT_EQ((dual_update(e1, Vec::Zero(3), Vec::Zero(3), 1.0) - e1).norm(), 0.0);
}

TEST(DualUpdate, StaysInRowSpace) {
  const RunConfig cfg = small_chain_config(3, 2);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, split_chain_state(cfg.initial_state()));
  const AveragingOperator op(nlp);
  std::mt19937_64 rng(4);
  const Mat E = Mat(nlp.E_stacked());
  Vec gamma = E.transpose() * random_vector(rng, nlp.n_c());
  for (int trial = 0; trial < 10; ++trial) {
    const Vec y = random_vector(rng, nlp.n());
    auto [z, lambda] = averaging_centralized(y, gamma, op, 1.0);
    gamma = dual_update(y, z, gamma, 1.0);
    EXPECT_LE((gamma - E.transpose() * lambda).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((E * z - nlp.c()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

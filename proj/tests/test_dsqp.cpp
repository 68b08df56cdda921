#include "dsqp/dsqp.hpp"
#include "dsqp/mpc.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace dsqp;
using namespace dsqp::testing;

namespace {

// Subsystem 1: min 1/2 |z - (1, 1)|^2 on the unit circle.
// Subsystem 2: min 1/2 (c - 2)^2 + 1/2 d^2 on d = sin(c).  Coupling: z1[0] = c.
PartitionedNlp circle_and_sine() {
  FunctionalSubsystem::Callbacks a;
  a.n = 2;
  a.n_g = 1;
  a.f = [](const Vec& z) { return 0.5 * (z - Vec::Ones(2)).squaredNorm(); };
  a.grad = [](const Vec& z) { return Vec(z - Vec::Ones(2)); };
  a.hess_f = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  a.g = [](const Vec& z) { return Vec::Constant(1, z.squaredNorm() - 1.0); };
  a.jac_g = [](const Vec& z) { return Mat(2.0 * z.transpose()); };
  a.hess_g = [](const Vec&, const Vec& w) { return Mat(2.0 * w[0] * Mat::Identity(2, 2)); };
  a.gauss_newton = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };

  FunctionalSubsystem::Callbacks b;
  b.n = 2;
  b.n_g = 1;
  b.f = [](const Vec& z) { return 0.5 * std::pow(z[0] - 2.0, 2) + 0.5 * z[1] * z[1]; };
  b.grad = [](const Vec& z) {
    Vec g(2);
    g << z[0] - 2.0, z[1];
    return g;
  };
  b.hess_f = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  b.g = [](const Vec& z) { return Vec::Constant(1, z[1] - std::sin(z[0])); };
  b.jac_g = [](const Vec& z) {
    Mat J(1, 2);
    J << -std::cos(z[0]), 1.0;
    return J;
  };
  b.hess_g = [](const Vec& z, const Vec& w) {
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = w[0] * std::sin(z[0]);
    return H;
  };
  b.gauss_newton = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };

  SpMat E1(1, 2), E2(1, 2);
  E1.insert(0, 0) = 1.0;
  E2.insert(0, 0) = -1.0;
  return PartitionedNlp({std::make_shared<FunctionalSubsystem>(a), std::make_shared<FunctionalSubsystem>(b)},
                        {E1, E2}, Vec::Zero(1));
}

PrimalDualPoint toy_solution(const PartitionedNlp& nlp) {
  PrimalDualPoint p0 = PrimalDualPoint::zeros(nlp);
  p0.z << 0.8, 0.6, 0.8, 0.7;
  return solve_to_kkt(nlp, p0, 1e-12, 100, HessianMode::Exact).p;
}

}  // namespace

TEST(Dsqp, SolutionIsAFixedPoint) {
  const PartitionedNlp nlp = circle_and_sine();
  const PrimalDualPoint star = toy_solution(nlp);
  ASSERT_LE(kkt_residual(nlp, star), 1e-10);
  DsqpSettings s;
  s.k_max = 4;
  s.l_max = 7;
  s.hessian = HessianMode::Exact;
  std::vector<DsqpTraceRow> trace;
  DsqpSolver solver(nlp, s);
  const Vec gamma0 = Mat(nlp.E_stacked()).transpose() * star.lambda;
  const DsqpResult r = solver.run(nlp, star, gamma0, &star, &trace);
  for (double d : r.dist_history) EXPECT_LE(d, 1e-7);
  for (const auto& row : trace) EXPECT_LE(row.dist_ref, 1e-7);
}

TEST(Dsqp, InexactSqpContractsNearSolution) {
  const PartitionedNlp nlp = circle_and_sine();
  const PrimalDualPoint star = toy_solution(nlp);
  PrimalDualPoint p0 = star;
  p0.z += Vec::Constant(4, 3e-3);
  p0.nu += Vec::Constant(2, -2e-3);
  DsqpSettings s;
  s.k_max = 6;
  s.l_max = 200;
  s.hessian = HessianMode::Exact;
  const DsqpResult r = dsqp_run(nlp, p0, s, nullptr, &star);
  ASSERT_EQ(r.dist_history.size(), 7u);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < r.dist_history.size(); ++k) {
    if (r.dist_history[k] > 1e-2 || r.dist_history[k] < 1e-9) continue;
    worst = std::max(worst, r.dist_history[k + 1] / r.dist_history[k]);
  }
  EXPECT_LT(worst, 1.0);
  EXPECT_LT(r.dist_history.back(), 1e-2 * r.dist_history.front());
}

TEST(Dsqp, TraceRecordsEveryInnerIteration) {
  const PartitionedNlp nlp = circle_and_sine();
  const PrimalDualPoint star = toy_solution(nlp);
  DsqpSettings s;
  s.k_max = 2;
  s.l_max = 5;
  std::vector<DsqpTraceRow> trace;
  DsqpSolver solver(nlp, s);
  PrimalDualPoint p0 = PrimalDualPoint::zeros(nlp);
  p0.z << 0.8, 0.6, 0.8, 0.7;
  solver.run(nlp, p0, Vec::Zero(4), &star, &trace);
  ASSERT_EQ(trace.size(), 10u);
  EXPECT_EQ(trace.front().k, 0);
  EXPECT_EQ(trace.front().l, 1);
  EXPECT_EQ(trace.back().k, 1);
  EXPECT_EQ(trace.back().l, 5);
  for (const auto& row : trace) EXPECT_LE(row.consensus, 1e-12);
}

TEST(Dsqp, DecentralizedRunMatchesCentralized) {
  RunConfig cfg = small_chain_config(4, 3);
  const ChainSetup setup = make_chain_setup(cfg);
  const auto xs = split_chain_state(cfg.initial_state());
  const PartitionedNlp nlp = assemble_nlp(setup.spec, xs);
  const PrimalDualPoint p0 = solve_to_kkt(nlp, constant_guess(nlp, setup.spec, xs)).p;
  const auto xs1 = split_chain_state(chain_step(cfg.initial_state(), Vec::Constant(4, 5.0), 0.04, cfg.plant));
  const PartitionedNlp nlp1 = assemble_nlp(setup.spec, xs1);
  DsqpSettings s;
  s.k_max = 2;
  s.l_max = 6;
  const DsqpResult c = dsqp_run(nlp1, p0, s);
  s.averaging = AveragingMode::Decentralized;
  const DsqpResult d = dsqp_run(nlp1, p0, s);
  EXPECT_LE((c.p.stacked() - d.p.stacked()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((c.gamma - d.gamma).cwiseAbs().maxCoeff(), 1e-12);
}

#include "dsqp/dsqp.hpp"
#include "dsqp/mpc.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace dsqp;
using namespace dsqp::testing;

TEST(Layout, SingleSubsystemHasNoCoupling) {
  RunConfig cfg = small_chain_config(1, 3);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, {Vec::Zero(4)});
  EXPECT_EQ(nlp.n_c(), 0);
  EXPECT_EQ(nlp.E_stacked().rows(), 0);
  const SubsystemLayout L = make_layout(s.spec, 0);
  EXPECT_EQ(L.nw, 0);
  EXPECT_EQ(L.n, (L.N + 1) * 4 + L.Nu);
}

TEST(Layout, ThreeChainConsensusRowsMatchEnumeration) {
  const int S = 3, N = 2;
  RunConfig cfg = small_chain_config(S, N);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, std::vector<Vec>(S, Vec::Zero(4)));
  // Neighbor position copies at tau = 0..N for each directed neighbor pair.
  EXPECT_EQ(nlp.n_c(), 2 * (S - 1) * (N + 1));

  // Independent enumeration: cart i holds, per stage, q of its left then right neighbor.
  const int Nu = N + 1;
  std::set<std::tuple<int, int, int, int>> expected;
  for (int i = 0; i < S; ++i) {
    std::vector<int> nb;
    if (i > 0) nb.push_back(i - 1);
    if (i + 1 < S) nb.push_back(i + 1);
    const int nw = static_cast<int>(nb.size());
    for (int tau = 0; tau <= N; ++tau) {
      for (int k = 0; k < nw; ++k) {
        expected.insert({nb[k], 4 * tau, i, 4 * (N + 1) + Nu + tau * nw + k});
      }
    }
  }
  std::set<std::tuple<int, int, int, int>> got;
  for (const auto& r : nlp.rows()) {
    EXPECT_EQ(r.plus_coef, 1.0);
    EXPECT_EQ(r.minus_coef, -1.0);
    got.insert({r.plus_sub, r.plus_index, r.minus_sub, r.minus_index});
  }
  EXPECT_EQ(got, expected);
}

TEST(Layout, InputOffsetsMatchEnumeration) {
  const int S = 3, N = 2;
  RunConfig cfg = small_chain_config(S, N);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, std::vector<Vec>(S, Vec::Zero(4)));
  const std::vector<int> off = input_offsets(s.spec);
  int base = 0;
  for (int i = 0; i < S; ++i) {
    EXPECT_EQ(off[i], base + 4 * (N + 1));
    const int nw = (i > 0) + (i + 1 < S);
    base += 4 * (N + 1) + (N + 1) + (N + 1) * nw;
  }
  EXPECT_EQ(base, nlp.n());

  PrimalDualPoint p = PrimalDualPoint::zeros(nlp);
  p.z[off[0]] = 3.2;
  const Vec u = extract_input(p, s.spec);
  EXPECT_EQ(u[0], 3.2);
  EXPECT_EQ(u[1], 0.0);
  std::mt19937_64 rng(1);
  p.z = random_vector(rng, nlp.n());
  EXPECT_LE(extract_input(p, s.spec).norm(), p.stacked().norm());
}

TEST(Derivatives, PendulumOcpMatchesFiniteDifferences) {
  RunConfig cfg = small_chain_config(3, 3);
  const ChainSetup s = make_chain_setup(cfg);
  const PartitionedNlp nlp = assemble_nlp(s.spec, split_chain_state(cfg.initial_state()));
  std::mt19937_64 rng(3);
  const Vec z = 0.5 * random_vector(rng, nlp.n());
  const DerivativeReport r = check_derivatives(nlp, z, 1e-5);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.worst.gradient, 1e-5);
  EXPECT_LE(r.worst.eq_jacobian, 1e-5);
  EXPECT_LE(r.worst.ineq_jacobian, 1e-5);
  EXPECT_LE(r.worst.hessian, 1e-5);
}

TEST(Derivatives, QuadraticHessianExact) {
  std::mt19937_64 rng(5);
  const Mat H = random_spd(rng, 4);
  auto s = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      H, random_vector(rng, 4), Mat(0, 4), Vec(0), Mat(0, 4), Vec(0)));
  const PartitionedNlp nlp({s}, {SpMat(0, 4)}, Vec(0));
  const DerivativeReport r = check_derivatives(nlp, random_vector(rng, 4), 1e-9);
  EXPECT_LE(r.worst.hessian, 1e-9);
}

TEST(Derivatives, SineConstraintAtQuarterPi) {
  FunctionalSubsystem::Callbacks cb;
  cb.n = 2;
  cb.n_g = 1;
  cb.f = [](const Vec& z) { return 0.5 * z.squaredNorm(); };
  cb.grad = [](const Vec& z) { return z; };
  cb.hess_f = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  cb.g = [](const Vec& z) { return Vec::Constant(1, std::sin(z[0]) - z[1]); };
  cb.jac_g = [](const Vec& z) {
    Mat J(1, 2);
    J << std::cos(z[0]), -1.0;
    return J;
  };
  cb.hess_g = [](const Vec& z, const Vec& w) {
    Mat Hm = Mat::Zero(2, 2);
    Hm(0, 0) = -w[0] * std::sin(z[0]);
    return Hm;
  };
  auto s = std::make_shared<FunctionalSubsystem>(cb);
  const PartitionedNlp nlp({s}, {SpMat(0, 2)}, Vec(0));
  Vec z(2);
  z << M_PI / 4, 0.3;
  const DerivativeReport r = check_derivatives(nlp, z, 1e-5);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.worst.eq_jacobian, 1e-5);
  EXPECT_LE(r.worst.hessian, 1e-5);
}

TEST(KktResidual, ZeroAtOracleAndBoundedBelowByViolation) {
  RunConfig cfg = small_chain_config(3, 4);
  const ChainSetup s = make_chain_setup(cfg);
  const auto xs = split_chain_state(0.1 * cfg.initial_state());
  const PartitionedNlp nlp = assemble_nlp(s.spec, xs);
  const KktSolveResult r = solve_to_kkt(nlp, constant_guess(nlp, s.spec, xs));
  EXPECT_LE(kkt_residual(nlp, r.p), 1e-8);
  PrimalDualPoint q = r.p;
  q.z[4] += 0.1;  // x(1) of cart 1 enters the dynamics equality
  Vec g = nlp.subsystem(0).eq(q.z.segment(0, nlp.num_vars(0)));
  EXPECT_GE(kkt_residual(nlp, q), g.cwiseAbs().maxCoeff());
}

TEST(KktResidual, HandSolvedConsensusQp) {
  // min 1/2 a^2 - a + 1/2 b^2 - 3 b  s.t.  a - b = 0  ->  a = b = 2, lambda = -1.
  auto s1 = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      Mat::Identity(1, 1), Vec::Constant(1, -1.0), Mat(0, 1), Vec(0), Mat(0, 1), Vec(0)));
  auto s2 = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      Mat::Identity(1, 1), Vec::Constant(1, -3.0), Mat(0, 1), Vec(0), Mat(0, 1), Vec(0)));
  SpMat E1(1, 1), E2(1, 1);
  E1.insert(0, 0) = 1.0;
  E2.insert(0, 0) = -1.0;
  const PartitionedNlp nlp({s1, s2}, {E1, E2}, Vec::Zero(1));
  PrimalDualPoint p = PrimalDualPoint::zeros(nlp);
  p.z << 2.0, 2.0;
  p.lambda << -1.0;
  EXPECT_LE(kkt_residual(nlp, p), 1e-10);
}

TEST(SolveToKkt, QpTerminatesInOneIteration) {
  std::mt19937_64 rng(8);
  const DenseQp d = random_qp(rng, 5, 2, 3);
  auto s = std::make_shared<FunctionalSubsystem>(
      FunctionalSubsystem::quadratic(d.H, d.q, d.A_eq, d.b_eq, d.A_in, d.b_in));
  const PartitionedNlp nlp({s}, {SpMat(0, 5)}, Vec(0));
  const KktSolveResult r = solve_to_kkt(nlp, PrimalDualPoint::zeros(nlp));
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LE((r.p.z - *enumerate_qp(d)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(SolveToKkt, RosenbrockOnALine) {
  // min (1 - x)^2 + 100 (y - x^2)^2  s.t.  x + y = 1
  FunctionalSubsystem::Callbacks cb;
  cb.n = 2;
  cb.n_g = 1;
  cb.f = [](const Vec& z) {
    return std::pow(1 - z[0], 2) + 100 * std::pow(z[1] - z[0] * z[0], 2);
  };
  cb.grad = [](const Vec& z) {
    Vec g(2);
    g[0] = -2 * (1 - z[0]) - 400 * z[0] * (z[1] - z[0] * z[0]);
    g[1] = 200 * (z[1] - z[0] * z[0]);
    return g;
  };
  cb.hess_f = [](const Vec& z) {
    Mat H(2, 2);
    H << 2 - 400 * (z[1] - 3 * z[0] * z[0]), -400 * z[0], -400 * z[0], 200;
    return H;
  };
  cb.g = [](const Vec& z) { return Vec::Constant(1, z[0] + z[1] - 1); };
  cb.jac_g = [](const Vec&) { return Mat(Mat::Ones(1, 2)); };
  auto s = std::make_shared<FunctionalSubsystem>(cb);
  const PartitionedNlp nlp({s}, {SpMat(0, 2)}, Vec(0));
  PrimalDualPoint p0 = PrimalDualPoint::zeros(nlp);
  p0.z << 0.5, 0.5;
  const KktSolveResult r = solve_to_kkt(nlp, p0, 1e-10, 100, HessianMode::Exact);
  EXPECT_LE(kkt_residual(nlp, r.p), 1e-9);

  double best_x = 0.0, best_f = 1e300;
  for (double x = -3.0; x <= 3.0; x += 1e-3) {
    Vec z(2);
    z << x, 1 - x;
    const double f = cb.f(z);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  EXPECT_NEAR(r.p.z[0], best_x, 2e-3);
  EXPECT_NEAR(r.p.z[0] + r.p.z[1], 1.0, 1e-10);
}

TEST(Regularity, NearSetpointIsRegular) {
  RunConfig cfg = small_chain_config(3, 4);
  const ChainSetup s = make_chain_setup(cfg);
  const auto xs = split_chain_state(0.05 * cfg.initial_state());
  const PartitionedNlp nlp = assemble_nlp(s.spec, xs);
  const KktSolveResult r = solve_to_kkt(nlp, constant_guess(nlp, s.spec, xs));
  const RegularityReport rep = check_regularity(nlp, r.p);
  EXPECT_GT(rep.complementarity_margin, 0.0);
  EXPECT_GT(rep.licq_sigma_min, 0.0);
  EXPECT_GT(rep.reduced_hessian_min, 0.0);
  EXPECT_TRUE(rep.regular);
}

TEST(Regularity, DuplicatedConsensusRowIsRejected) {
  auto q = [] {
    return std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
        Mat::Identity(2, 2), Vec::Zero(2), Mat(0, 2), Vec(0), Mat(0, 2), Vec(0)));
  };
  SpMat E1(2, 2), E2(2, 2);
  E1.insert(0, 0) = 1.0;
  E1.insert(1, 0) = 1.0;
  E2.insert(0, 0) = -1.0;
  E2.insert(1, 0) = -1.0;
  EXPECT_THROW(PartitionedNlp({q(), q()}, {E1, E2}, Vec::Zero(2)), Error);
}

TEST(Regularity, DuplicatedEqualityBreaksLicq) {
  Mat A(2, 2);
  A << 1.0, 0.0, 1.0, 0.0;
  auto s1 = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      Mat::Identity(2, 2), Vec::Zero(2), A, Vec::Zero(2), Mat(0, 2), Vec(0)));
  auto s2 = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      Mat::Identity(1, 1), Vec::Zero(1), Mat(0, 1), Vec(0), Mat(0, 1), Vec(0)));
  SpMat E1(1, 2), E2(1, 1);
  E1.insert(0, 1) = 1.0;
  E2.insert(0, 0) = -1.0;
  const PartitionedNlp nlp({s1, s2}, {E1, E2}, Vec::Zero(1));
  const RegularityReport rep = check_regularity(nlp, PrimalDualPoint::zeros(nlp));
  EXPECT_LE(rep.licq_sigma_min, 1e-8);
  EXPECT_FALSE(rep.regular);
}

TEST(Regularity, ReducedHessianMatchesDenseOracle) {
  std::mt19937_64 rng(12);
  std::vector<std::shared_ptr<const SubsystemProblem>> subs;
  std::vector<Mat> Hs, As;
  for (int i = 0; i < 2; ++i) {
    Hs.push_back(random_spd(rng, 5, 0.1));
    As.push_back(random_matrix(rng, 2, 5));
    subs.push_back(std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
        Hs[i], random_vector(rng, 5), As[i], random_vector(rng, 2), Mat(0, 5), Vec(0))));
  }
  SpMat E1(1, 5), E2(1, 5);
  E1.insert(0, 0) = 1.0;
  E2.insert(0, 0) = -1.0;
  const PartitionedNlp nlp(subs, {E1, E2}, Vec::Zero(1));
  const RegularityReport rep = check_regularity(nlp, PrimalDualPoint::zeros(nlp));
  for (int i = 0; i < 2; ++i) {
    const Mat K = Eigen::FullPivLU<Mat>(As[i]).kernel();
    const Mat Z = Eigen::HouseholderQR<Mat>(K).householderQ() * Mat::Identity(5, K.cols());
    const double oracle = Eigen::SelfAdjointEigenSolver<Mat>(Z.transpose() * Hs[i] * Z).eigenvalues()[0];
    EXPECT_NEAR(rep.reduced_hessian_min_eig[i], oracle, 1e-8);
  }
}

TEST(BuildQp, QuadraticExactHessianIsConstant) {
  std::mt19937_64 rng(13);
  const Mat H = random_spd(rng, 4);
  auto s = std::make_shared<FunctionalSubsystem>(FunctionalSubsystem::quadratic(
      H, random_vector(rng, 4), Mat(0, 4), Vec(0), Mat(0, 4), Vec(0)));
  const PartitionedNlp nlp({s}, {SpMat(0, 4)}, Vec(0));
  for (int k = 0; k < 3; ++k) {
    PrimalDualPoint p = PrimalDualPoint::zeros(nlp);
    p.z = random_vector(rng, 4);
    const auto lin = build_qp(nlp, p, HessianMode::Exact);
    EXPECT_LE((lin.blocks[0].H - H).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BuildQp, AutoFallsBackWhenReducedHessianIsIndefinite) {
  RunConfig cfg = small_chain_config(3, 3);
  const ChainSetup s = make_chain_setup(cfg);
  const auto xs = split_chain_state(cfg.initial_state());
  const PartitionedNlp nlp = assemble_nlp(s.spec, xs);
  std::mt19937_64 rng(3);
  int fallbacks = 0, kept = 0;
  for (double scale : {0.0, 200.0}) {
    PrimalDualPoint p = constant_guess(nlp, s.spec, xs);
    p.z += 0.5 * random_vector(rng, nlp.n());
    p.nu = scale * random_vector(rng, nlp.n_g());
    const auto exact = build_qp(nlp, p, HessianMode::Exact);
    const auto lin = build_qp(nlp, p, HessianMode::Auto);
    for (int i = 0; i < nlp.num_subsystems(); ++i) {
      const bool pd = reduced_hessian_pd(exact.blocks[i].H, exact.blocks[i].Jg, 1e-8);
      EXPECT_EQ(static_cast<bool>(lin.exact_used[i]), pd);
      kept += pd;
      if (!pd) {
        ++fallbacks;
        const Mat gn = nlp.subsystem(i).gauss_newton_hessian(p.z_i(nlp, i));
        EXPECT_LE((lin.blocks[i].H - gn).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
  EXPECT_GT(fallbacks, 0);
  EXPECT_GT(kept, 0);
}

TEST(BuildQp, GaussNewtonIgnoresMultipliers) {
  RunConfig cfg = small_chain_config(2, 3);
  const ChainSetup s = make_chain_setup(cfg);
  const auto xs = split_chain_state(cfg.initial_state());
  const PartitionedNlp nlp = assemble_nlp(s.spec, xs);
  PrimalDualPoint p = constant_guess(nlp, s.spec, xs);
  const auto a = build_qp(nlp, p, HessianMode::GaussNewton);
  p.nu.setConstant(7.0);
  p.mu.setConstant(3.0);
  const auto b = build_qp(nlp, p, HessianMode::GaussNewton);
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    EXPECT_EQ((a.blocks[i].H - b.blocks[i].H).norm(), 0.0);
  }
}

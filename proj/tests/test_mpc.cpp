#include "dsqp/mpc.hpp"
#include "dsqp/reports.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dsqp;
using namespace dsqp::testing;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("dsqp_test_" + name);
  std::filesystem::remove_all(d);
  return d.string();
}

}  // namespace

TEST(Config, RoundTrip) {
  for (int k = 1; k <= 3; ++k) {
    const RunConfig c = case_config(k);
    const RunConfig d = parse_config(to_json(c));
    EXPECT_EQ(to_json(c).dump(), to_json(d).dump());
  }
}

TEST(Config, CasePresets) {
  const RunConfig c1 = case_config(1), c2 = case_config(2), c3 = case_config(3);
  EXPECT_EQ(c1.dsqp.k_max, 1);
  EXPECT_EQ(c1.dsqp.l_max, 6);
  EXPECT_EQ(c2.dsqp.k_max, 3);
  EXPECT_EQ(c3.N, 7);
  EXPECT_DOUBLE_EQ(c3.h, 0.057);
  EXPECT_EQ(c3.dsqp.hessian, HessianMode::GaussNewton);
  EXPECT_EQ(c1.num_steps(), 250);
  const Vec x1 = c1.initial_state(), x2 = c2.initial_state();
  EXPECT_EQ(x1[0], -1.0);
  EXPECT_EQ(x1[4], 1.0);
  EXPECT_EQ(x2[4 * 19], 20.0);
  EXPECT_DOUBLE_EQ(x1[2], M_PI);
}

TEST(Config, Rejections) {
  nlohmann::json j = to_json(case_config(1));
  j["schema_version"] = 99;
  EXPECT_THROW(parse_config(j), Error);
  j = to_json(case_config(1));
  j["ocp"]["N"] = 5;
  EXPECT_THROW(parse_config(j), Error);
  j = to_json(case_config(1));
  j["ocp"]["Q"] = {1.0, 2.0};
  EXPECT_THROW(parse_config(j), Error);
  j = to_json(case_config(1));
  j["initial_condition"]["type"] = "upside";
  EXPECT_THROW(parse_config(j), Error);
  try {
    load_config("/nonexistent/cfg.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Config, AutoBeta2UsesDesign) {
  nlohmann::json j = to_json(small_chain_config(2, 3));
  j["ocp"]["beta2"] = "auto";
  const RunConfig c = parse_config(j);
  EXPECT_FALSE(c.beta2.has_value());
  const ChainSetup s = make_chain_setup(c);
  EXPECT_EQ(s.spec.beta2, s.terminal.beta2);
}

TEST(ClosedLoop, SetpointStaysPut) {
  RunConfig cfg = small_chain_config(3, 4);
  cfg.initial.type = "zero";
  ClosedLoopOptions o;
  o.max_steps = 10;
  const ClosedLoopLog log = run_closed_loop(cfg, o);
  ASSERT_FALSE(log.aborted) << log.abort_reason;
  ASSERT_EQ(log.steps.size(), 10u);
  for (const auto& st : log.steps) EXPECT_LE(st.u.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(log.J_cl(), 1e-8);
}

TEST(ClosedLoop, ModesProduceIdenticalLogs) {
  RunConfig cfg = small_chain_config(4, 4);
  ClosedLoopOptions o;
  o.max_steps = 8;
  o.mode = AveragingMode::Centralized;
  const ClosedLoopLog a = run_closed_loop(cfg, o);
  o.mode = AveragingMode::Decentralized;
  const ClosedLoopLog b = run_closed_loop(cfg, o);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_LE((a.steps[k].x - b.steps[k].x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((a.steps[k].u - b.steps[k].u).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_EQ(a.total_messages(), 0);
  EXPECT_GT(b.total_messages(), 0);
}

TEST(ClosedLoop, InputsRespectBounds) {
  RunConfig cfg = small_chain_config(3, 4);
  ClosedLoopOptions o;
  o.max_steps = 15;
  const ClosedLoopLog log = run_closed_loop(cfg, o);
  ASSERT_FALSE(log.aborted) << log.abort_reason;
  EXPECT_LE(log.max_abs_input(), cfg.plant.u_max + 1e-6);
}

TEST(Reports, EmptyLog) {
  ClosedLoopLog log;
  const RunConfig cfg = small_chain_config(2, 3);
  const std::string dir = temp_dir("empty");
  const ReportPaths p = emit_reports(log, cfg, "centralized", dir);
  EXPECT_EQ(slurp(p.trajectories), "t,q_1,dq_1,phi_1,dphi_1,u_1,q_2,dq_2,phi_2,dphi_2,u_2\n");
  EXPECT_EQ(slurp(p.optimizer), "t,opt_error,kkt_residual,messages,scalars\n");
  const auto j = nlohmann::json::parse(slurp(p.summary));
  EXPECT_TRUE(j["J_cl"].is_null());
  EXPECT_EQ(j["config"]["schema_version"], kConfigSchemaVersion);
}

TEST(Reports, JclRecomputedFromTrajectories) {
  RunConfig cfg = small_chain_config(3, 4);
  ClosedLoopOptions o;
  o.max_steps = 12;
  const ClosedLoopLog log = run_closed_loop(cfg, o);
  ASSERT_FALSE(log.aborted);
  const std::string dir = temp_dir("jcl");
  const ReportPaths p = emit_reports(log, cfg, "decentralized", dir);

  std::ifstream in(p.trajectories);
  std::string line;
  std::getline(in, line);
  const Vec qd = cfg.Q.diagonal();
  const double r = cfg.R(0, 0);
  double sum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 1u + 5 * 3);
    for (int i = 0; i < 3; ++i) {
      const double* c = &v[1 + 5 * i];
      sum += 0.5 * (qd[0] * c[0] * c[0] + qd[1] * c[1] * c[1] + qd[2] * c[2] * c[2] + qd[3] * c[3] * c[3]) +
             0.5 * r * c[4] * c[4];
    }
    ++rows;
  }
  EXPECT_EQ(rows, 12);
  const auto j = nlohmann::json::parse(slurp(p.summary));
  EXPECT_NEAR(sum / rows, j["J_cl"].get<double>(), 1e-12);
}

TEST(Reports, ByteStableAcrossRuns) {
  RunConfig cfg = small_chain_config(3, 4);
  ClosedLoopOptions o;
  o.max_steps = 5;
  o.reference = true;
  o.trace = true;
  o.transcript = true;
  o.mode = AveragingMode::Decentralized;
  const std::string d1 = temp_dir("stable1"), d2 = temp_dir("stable2");
  const ReportPaths a = emit_reports(run_closed_loop(cfg, o), cfg, "decentralized", d1);
  const ReportPaths b = emit_reports(run_closed_loop(cfg, o), cfg, "decentralized", d2);
  for (auto [x, y] : {std::pair{a.trajectories, b.trajectories}, {a.optimizer, b.optimizer},
                      {a.summary, b.summary}, {a.trace, b.trace}, {a.transcript, b.transcript}}) {
    ASSERT_FALSE(x.empty());
    EXPECT_EQ(slurp(x), slurp(y)) << x;
  }
  const std::string trace = slurp(a.trace);
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "step,k,l,consensus,kkt_residual,dist_ref");
}

TEST(Reports, UnwritableDirectory) {
  ClosedLoopLog log;
  EXPECT_THROW(emit_reports(log, small_chain_config(2, 3), "centralized", "/proc/definitely/not"), Error);
}

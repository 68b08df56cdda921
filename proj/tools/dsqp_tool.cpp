#include "dsqp/certificates.hpp"
#include "dsqp/config.hpp"
#include "dsqp/mpc.hpp"
#include "dsqp/reports.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

using namespace dsqp;
using nlohmann::json;

namespace {

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

int cmd_run(const std::string& cfg_path, const std::string& mode_name, const std::string& out,
            bool reference, std::optional<std::uint64_t> seed, bool trace, bool transcript,
            int max_steps) {
  RunConfig cfg = load_config(cfg_path);
  if (seed) cfg.seed = *seed;
  ClosedLoopOptions opt;
  opt.mode = parse_averaging_mode(mode_name);
  opt.reference = reference || trace;
  opt.trace = trace;
  opt.transcript = transcript;
  opt.max_steps = max_steps;
  const auto t0 = std::chrono::steady_clock::now();
  const ClosedLoopLog log = run_closed_loop(cfg, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ReportPaths paths = emit_reports(log, cfg, mode_name, out);
  std::printf("%s: %zu/%d samples, J_cl %.4f, max|u| %.3f, final max|phi| %.4f, max|q| %.4f, %.1f s\n",
              cfg.case_id.c_str(), log.steps.size(), log.planned_steps, log.J_cl(),
              log.steps.empty() ? 0.0 : log.max_abs_input(), log.final_max_angle(),
              log.final_max_position(), wall);
  std::printf("reports in %s\n", paths.summary.c_str());
  if (log.aborted) {
    std::fprintf(stderr, "aborted: %s\n", log.abort_reason.c_str());
    return 2;
  }
  return 0;
}

int cmd_certify(const std::string& cfg_path, const std::string& out, int samples) {
  RunConfig cfg = load_config(cfg_path);
  if (samples > 0) cfg.certificate.samples = samples;
  const ChainSetpoint sp = chain_setpoint(cfg);
  const Certificate cert = certify(sp.nlp, sp.p_star, certificate_options(cfg));

  json report;
  report["config"] = to_json(cfg);
  report["certificate"] = to_json(cert);

  const ChainRtiConstants rc = chain_rti_constants(cfg, sp.setup);
  json rti;
  rti["estimated"] = rc.estimated;
  rti["envelope_fit_error"] = rc.envelope_fit_error;
  rti["at_configured_a_p"] = to_json(rti_chain(rc.base));
  try {
    const double a_p = a_p_for_delta5(rc.base, cfg.delta);
    RtiBaseConstants b = rc.base;
    b.a_p = a_p;
    rti["a_p_for_delta"] = a_p;
    rti["at_a_p_for_delta"] = to_json(rti_chain(b));
    if (!cert.inconclusive) {
      const int l = lmax_bound(a_p, cert.a_w, cert.c1, cert.c2);
      const double a_back = accuracy_for_lmax(l, cert.a_w, cert.c1, cert.c2);
      rti["lmax_for_a_p"] = l;
      rti["round_trip"] = {{"a", a_back}, {"lmax", lmax_bound(a_back, cert.a_w, cert.c1, cert.c2)}};
    }
  } catch (const Error& e) {
    rti["note"] = e.what();
  }
  report["rti"] = rti;
  write_text(out, report.dump(2) + "\n");

  std::printf("a_w %.6f  |A| %.6f  rho(A) %.6f  c1 %.4f  c2 %.4f  d2 %.4f\n", cert.a_w, cert.norm_A,
              cert.spectral_radius, cert.c1, cert.c2, cert.d2);
  if (cert.lmax) {
    std::printf("lmax(a = %g) = %d\n", cert.target_accuracy, *cert.lmax);
  } else {
    std::printf("inconclusive: %s\n", cert.note.c_str());
  }
  if (rti.contains("lmax_for_a_p")) {
    std::printf("a_p for delta_5 = %g s: %.4e, lmax %d\n", cfg.delta, rti["a_p_for_delta"].get<double>(),
                rti["lmax_for_a_p"].get<int>());
  }
  std::printf("report written to %s\n", out.c_str());
  return cert.inconclusive ? 3 : 0;
}

int cmd_design_terminal(const std::string& cfg_path) {
  const RunConfig cfg = load_config(cfg_path);
  const TerminalDesign d = design_terminal(cfg.plant, cfg.Q, cfg.R, cfg.terminal_delta, cfg.mu);
  json j;
  j["P_i"] = mat_json(d.P_i);
  j["K_i"] = mat_json(d.K_i);
  j["beta2"] = d.beta2;
  j["delta_q_min_eig"] = d.min_eig;
  j["mu"] = d.mu;
  j["closed_loop_radius"] = d.closed_loop_radius;
  j["riccati_residual"] = d.riccati_residual;
  if (cfg.beta2) {
    j["configured_beta2"] = *cfg.beta2;
    j["configured_delta_q_min_eig"] =
        terminal_min_eig(cfg.plant, d, cfg.Q, cfg.R, cfg.terminal_delta, *cfg.beta2);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed SQP for NMPC of coupled pendulums"};
  app.require_subcommand(1);

  std::string cfg, out, mode = "decentralized";
  bool reference = false, trace = false, transcript = false;
  std::optional<std::uint64_t> seed;
  int max_steps = -1, samples = 0;

  auto* run = app.add_subcommand("run", "closed-loop simulation");
  run->add_option("--config", cfg, "config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "averaging")->check(CLI::IsMember({"centralized", "decentralized"}));
  run->add_option("--out", out, "output directory")->required();
  run->add_flag("--reference", reference, "also solve each OCP to KKT accuracy for |p - p*|");
  run->add_option("--seed", seed, "override the config seed");
  run->add_flag("--trace", trace, "write dsqp_trace.csv (implies --reference)");
  run->add_flag("--transcript", transcript, "write transcript.jsonl of the message bus");
  run->add_option("--steps", max_steps, "stop after this many samples");

  auto* cert = app.add_subcommand("certify", "ADMM and RTI constants at the setpoint");
  cert->add_option("--config", cfg, "config JSON")->required()->check(CLI::ExistingFile);
  cert->add_option("--out", out, "report JSON")->required();
  cert->add_option("--samples", samples, "override certificate.samples");

  auto* term = app.add_subcommand("design-terminal", "Riccati terminal cost and beta2");
  term->add_option("--config", cfg, "config JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(cfg, mode, out, reference, seed, trace, transcript, max_steps);
    if (*cert) return cmd_certify(cfg, out, samples);
    if (*term) return cmd_design_terminal(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

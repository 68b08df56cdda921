#include "dsqp/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dsqp {

ChainSetup make_chain_setup(const RunConfig& c) {
  ChainSetup s;
  s.terminal = design_terminal(c.plant, c.Q, c.R, c.terminal_delta, c.mu);
  const double beta2 = c.beta2 ? *c.beta2 : s.terminal.beta2;
  s.spec = make_chain_ocp(c.plant, c.N, c.h, c.Q, c.R, s.terminal.P_i, c.beta, beta2, c.copy_penalty);
  s.spec.terminal_input = c.terminal_input;
  s.spec.copy_terminal_state = c.copy_terminal_state;
  s.spec.validate();
  return s;
}

PrimalDualPoint constant_guess(const PartitionedNlp& nlp, const OcpSpec& spec,
                               const std::vector<Vec>& x_now) {
  PrimalDualPoint p = PrimalDualPoint::zeros(nlp);
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const SubsystemLayout L = make_layout(spec, i);
    Vec zi = Vec::Zero(L.n);
    for (int tau = 0; tau <= L.N; ++tau) zi.segment(L.x(tau), L.nx) = x_now[i];
    const auto& links = spec.subsystems[i].links;
    for (int tau = 0; tau < L.Nc; ++tau) {
      for (std::size_t l = 0; l < links.size(); ++l) {
        for (std::size_t k = 0; k < links[l].components.size(); ++k) {
          zi[L.copy(tau, static_cast<int>(l), static_cast<int>(k))] =
              x_now[links[l].source][links[l].components[k]];
        }
      }
    }
    p.z.segment(nlp.var_offset(i), L.n) = zi;
  }
  return p;
}

Vec extract_input(const PrimalDualPoint& p, const OcpSpec& spec) {
  const std::vector<int> off = input_offsets(spec);
  Vec u(static_cast<Eigen::Index>(off.size()));
  for (std::size_t i = 0; i < off.size(); ++i) {
    require(off[i] < p.z.size(), ErrorCode::DimensionMismatch, "input offset outside z");
    u[i] = p.z[off[i]];
  }
  return u;
}

double chain_stage_cost(const Vec& x, const Vec& u, const Mat& Q, const Mat& R) {
  require(x.size() == 4 * u.size(), ErrorCode::DimensionMismatch, "chain state and input sizes");
  double l = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Vec xi = x.segment(4 * i, 4);
    l += 0.5 * xi.dot(Q * xi) + 0.5 * R(0, 0) * u[i] * u[i];
  }
  return l;
}

std::vector<Vec> split_chain_state(const Vec& x) {
  std::vector<Vec> out(x.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.segment(4 * i, 4);
  return out;
}

double ClosedLoopLog::J_cl() const {
  if (steps.empty() || aborted) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& st : steps) s += st.stage_cost;
  return s / static_cast<double>(steps.size());
}

double ClosedLoopLog::max_abs_input() const {
  double m = 0.0;
  for (const auto& st : steps) m = std::max(m, st.u.cwiseAbs().maxCoeff());
  return m;
}

double ClosedLoopLog::final_max_angle() const {
  if (steps.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Vec& x = steps.back().x;
  double m = 0.0;
  for (Eigen::Index i = 0; i < x.size() / 4; ++i) {
    m = std::max(m, std::abs(std::remainder(x[4 * i + 2], 2.0 * M_PI)));
  }
  return m;
}

double ClosedLoopLog::final_max_position() const {
  if (steps.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Vec& x = steps.back().x;
  double m = 0.0;
  for (Eigen::Index i = 0; i < x.size() / 4; ++i) m = std::max(m, std::abs(x[4 * i]));
  return m;
}

long ClosedLoopLog::total_messages() const {
  long s = 0;
  for (const auto& st : steps) s += st.messages;
  return s;
}

long ClosedLoopLog::total_scalars() const {
  long s = 0;
  for (const auto& st : steps) s += st.scalars;
  return s;
}

ClosedLoopLog run_closed_loop(const RunConfig& config, const ClosedLoopOptions& options) {
  config.validate();
  const ChainSetup setup = make_chain_setup(config);
  const OcpSpec& spec = setup.spec;
  const int t_n = config.num_steps();
  const int n_samples = options.max_steps >= 0 ? std::min(options.max_steps, t_n + 1) : t_n + 1;

  ClosedLoopLog log;
  log.planned_steps = t_n + 1;
  log.beta2 = spec.beta2;

  Vec x = config.initial_state();
  PartitionedNlp nlp = assemble_nlp(spec, split_chain_state(x));

  DsqpSettings settings = config.dsqp;
  settings.averaging = options.mode;
  DsqpSolver solver(nlp, settings);
  solver.admm().bus().record_transcript(options.transcript);

  PrimalDualPoint p, p_ref;
  Vec gamma;
  bool have_ref = false;
  try {
    KktSolveResult init = solve_to_kkt(nlp, constant_guess(nlp, spec, split_chain_state(x)),
                                       config.init_tol, config.init_max_outer);
    log.init_iterations = init.iterations;
    log.init_residual = init.residual;
    p = init.p;
    gamma = nlp.n_c() ? Vec(nlp.E_stacked().transpose() * p.lambda) : Vec(Vec::Zero(nlp.n()));
    p_ref = p;
    have_ref = true;
  } catch (const KktSolveError& e) {
    log.aborted = true;
    log.abort_reason = std::string("initial solve failed: ") + e.what();
    return log;
  }

  for (int step = 0; step < n_samples; ++step) {
    ClosedLoopStep rec;
    rec.t = step * config.delta;
    rec.x = x;
    try {
      if (step > 0) nlp = assemble_nlp(spec, split_chain_state(x));
      if (options.reference && step > 0) {
        try {
          p_ref = solve_to_kkt(nlp, have_ref ? p_ref : p, config.init_tol, config.init_max_outer).p;
          have_ref = true;
        } catch (const KktSolveError& e) {
          p_ref = e.best();
        }
      }
      solver.admm().bus().reset_counters();
      std::vector<DsqpTraceRow> trace;
      DsqpResult r = solver.run(nlp, p, gamma, options.reference ? &p_ref : nullptr,
                                options.trace ? &trace : nullptr);
      p = std::move(r.p);
      gamma = std::move(r.gamma);
      for (auto& row : trace) log.trace.push_back({step, row});
      rec.messages = solver.admm().bus().messages();
      rec.scalars = solver.admm().bus().scalars();
      rec.exact_blocks = r.exact_hessian_blocks;
      rec.gn_blocks = r.gn_hessian_blocks;
      if (options.reference) rec.opt_error = distance(p, p_ref);
      rec.kkt = kkt_residual(nlp, p);
      rec.u = extract_input(p, spec);
      if (rec.u.cwiseAbs().maxCoeff() > config.plant.u_max + 1e-6) {
        throw Error(ErrorCode::ConstraintViolation,
                    "applied input exceeds the bound at t = " + std::to_string(rec.t));
      }
      rec.stage_cost = chain_stage_cost(x, rec.u, config.Q, config.R);
      if (step + 1 < n_samples) x = chain_step(x, rec.u, config.delta, config.plant);
      if (!x.allFinite()) throw Error(ErrorCode::Diverged, "plant state is not finite");
    } catch (const Error& e) {
      log.aborted = true;
      char where[96];
      std::snprintf(where, sizeof where, "t = %.2f, max|z| of the warm start %.3g: ", rec.t,
                    p.z.size() ? p.z.cwiseAbs().maxCoeff() : 0.0);
      log.abort_reason = where + std::string(e.what());
      break;
    }
    log.steps.push_back(rec);
    if (options.on_step) options.on_step(log.steps.back());
  }
  if (options.transcript) log.transcript = solver.admm().bus().transcript();
  return log;
}

ChainSetpoint chain_setpoint(const RunConfig& config) {
  config.validate();
  ChainSetup setup = make_chain_setup(config);
  const std::vector<Vec> x0(config.plant.S, Vec::Zero(4));
  PartitionedNlp nlp = assemble_nlp(setup.spec, x0);
  PrimalDualPoint p = solve_to_kkt(nlp, constant_guess(nlp, setup.spec, x0), config.init_tol,
                                   config.init_max_outer)
                          .p;
  return {std::move(setup), std::move(nlp), std::move(p)};
}

CertificateOptions certificate_options(const RunConfig& config) {
  CertificateOptions o;
  o.samples = config.certificate.samples;
  o.radius = config.certificate.radius;
  o.seed = config.seed;
  o.rho = config.dsqp.rho;
  o.target_accuracy = config.certificate.target_accuracy;
  o.lanczos_steps = config.certificate.lanczos_steps;
  return o;
}

RtiModel make_chain_rti_model(const RunConfig& config, const ChainSetup& setup) {
  RtiModel m;
  const int S = config.plant.S;
  m.nx = 4 * S;
  m.nu = S;
  const PendulumChainParams plant = config.plant;
  m.field = [plant](const Vec& x, const Vec& u) { return chain_ode(x, u, plant); };
  m.step = [plant](const Vec& x, const Vec& u, double dt) { return chain_step(x, u, dt, plant); };
  const OcpSpec spec = setup.spec;
  const double tol = config.init_tol;
  const int max_outer = config.init_max_outer;
  m.oracle = [spec, tol, max_outer](const Vec& x) {
    const std::vector<Vec> xs = split_chain_state(x);
    const PartitionedNlp nlp = assemble_nlp(spec, xs);
    KktSolveResult r = solve_to_kkt(nlp, constant_guess(nlp, spec, xs), tol, max_outer);
    OracleSample s;
    for (int i = 0; i < nlp.num_subsystems(); ++i) {
      s.V += nlp.subsystem(i).objective(r.p.z.segment(nlp.var_offset(i), nlp.num_vars(i)));
    }
    s.u = extract_input(r.p, spec);
    s.p = r.p.stacked();
    return s;
  };
  return m;
}

ChainRtiConstants chain_rti_constants(const RunConfig& config, const ChainSetup& setup) {
  const RtiInputs& in = config.certificate.rti;
  ChainRtiConstants out;
  RtiBaseConstants& b = out.base;
  b.V_bar = in.V_bar;
  b.r_p = in.r_p;
  b.r_x = in.r_x;
  b.delta = config.delta;
  b.delta1 = in.delta1;
  b.a_p = in.a_p;
  const bool complete = in.a1 && in.a2 && in.a3 && in.L_fx_c && in.L_fu_c && in.L_px && in.L_Vx;
  RtiBaseConstants est;
  if (!complete) {
    RtiEstimateOptions o;
    o.samples = config.certificate.lipschitz_samples;
    o.radius = config.certificate.lipschitz_radius;
    o.seed = config.seed;
    o.delta = config.delta;
    const RtiEstimate e = estimate_rti_constants(make_chain_rti_model(config, setup), o);
    est = e.base;
    out.envelope_fit_error = e.envelope_fit_error;
  }
  auto pick = [&](const std::optional<double>& given, double estimated, double& dst, const char* name) {
    if (given) {
      dst = *given;
    } else {
      dst = estimated;
      out.estimated.emplace_back(name);
    }
  };
  pick(in.a1, est.a1, b.a1, "a1");
  pick(in.a2, est.a2, b.a2, "a2");
  pick(in.a3, est.a3, b.a3, "a3");
  pick(in.L_fx_c, est.L_fx_c, b.L_fx_c, "L_fx_c");
  pick(in.L_fu_c, est.L_fu_c, b.L_fu_c, "L_fu_c");
  pick(in.L_px, est.L_px, b.L_px, "L_px");
  pick(in.L_Vx, est.L_Vx, b.L_Vx, "L_Vx");
  if (in.L_Vp) b.L_Vp = *in.L_Vp;
  return out;
}

}  // namespace dsqp

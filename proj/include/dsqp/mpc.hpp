#pragma once

#include "dsqp/certificates.hpp"
#include "dsqp/config.hpp"
#include "dsqp/dsqp.hpp"
#include "dsqp/pendulum.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dsqp {

struct ChainSetup {
  OcpSpec spec;
  TerminalDesign terminal;
};

/// Terminal design at terminal_delta, then the chain OCP with the resulting P_i.
ChainSetup make_chain_setup(const RunConfig& config);

/// x(tau) = x_now, u = 0, copies set to the neighbors' current values, zero duals.
PrimalDualPoint constant_guess(const PartitionedNlp& nlp, const OcpSpec& spec,
                               const std::vector<Vec>& x_now);

/// u_i(0) of every subsystem, read straight out of z.
Vec extract_input(const PrimalDualPoint& p, const OcpSpec& spec);

/// sum_i x_i'Q x_i / 2 + u_i'R u_i / 2.
double chain_stage_cost(const Vec& x, const Vec& u, const Mat& Q, const Mat& R);

/// Splits the stacked chain state into per-cart blocks of four.
std::vector<Vec> split_chain_state(const Vec& x);

struct ClosedLoopStep {
  double t = 0.0;
  Vec x;
  Vec u;
  double stage_cost = 0.0;
  double opt_error = std::numeric_limits<double>::quiet_NaN();  ///< |p - p*| with a reference
  double kkt = 0.0;
  long messages = 0;
  long scalars = 0;
  int exact_blocks = 0;
  int gn_blocks = 0;
};

struct TraceRecord {
  int step = 0;
  DsqpTraceRow row;
};

struct ClosedLoopLog {
  std::vector<ClosedLoopStep> steps;
  int planned_steps = 0;  ///< t_n + 1
  bool aborted = false;
  std::string abort_reason;
  int init_iterations = 0;
  double init_residual = 0.0;
  double beta2 = 1.0;
  std::vector<TraceRecord> trace;
  std::vector<std::string> transcript;

  /// (1 / (t_n + 1)) sum of the stage costs; NaN if nothing was logged or the run aborted.
  double J_cl() const;
  double max_abs_input() const;
  /// max_i |phi_i| (wrapped to (-pi, pi]) and max_i |q_i| at the last logged step.
  double final_max_angle() const;
  double final_max_position() const;
  long total_messages() const;
  long total_scalars() const;
};

struct ClosedLoopOptions {
  AveragingMode mode = AveragingMode::Decentralized;
  bool reference = false;
  bool trace = false;
  bool transcript = false;
  /// Stop after this many samples (-1: full horizon T_f).
  int max_steps = -1;
  std::function<void(const ClosedLoopStep&)> on_step;
};

/// Closed-loop system-optimizer simulation: oracle solve at t = 0, then one
/// warm-started dSQP call per sample, first input applied to the coupled plant.
ClosedLoopLog run_closed_loop(const RunConfig& config, const ClosedLoopOptions& options = {});

/// NLP at the upright equilibrium and its KKT point (solved, not assumed).
struct ChainSetpoint {
  ChainSetup setup;
  PartitionedNlp nlp;
  PrimalDualPoint p_star;
};
ChainSetpoint chain_setpoint(const RunConfig& config);

/// Certificate options taken from config.certificate, config.seed and config.dsqp.rho.
CertificateOptions certificate_options(const RunConfig& config);

/// Plant and ideal NMPC of the chain for the RTI constant estimation. The oracle
/// solves the OCP to KKT accuracy from the constant guess; V is the optimal cost.
RtiModel make_chain_rti_model(const RunConfig& config, const ChainSetup& setup);

/// Published constants from config.certificate.rti, missing ones estimated.
struct ChainRtiConstants {
  RtiBaseConstants base;
  std::vector<std::string> estimated;  ///< names of the estimated entries
  double envelope_fit_error = 0.0;
};
ChainRtiConstants chain_rti_constants(const RunConfig& config, const ChainSetup& setup);

}  // namespace dsqp

#pragma once

#include "dsqp/averaging.hpp"
#include "dsqp/message_bus.hpp"
#include "dsqp/nlp.hpp"
#include "dsqp/qp.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace dsqp {

/// Linearization of one subsystem at z^k (the data of its SQP subproblem block).
struct LocalQp {
  Mat H;
  Vec grad;
  Mat Jg;
  Vec g;
  Mat Jh;
  Vec h;
  Vec z_lin;
};

/// Local step of ADMM for subsystem i:
/// min 1/2 (y-z^k)'H(y-z^k) + grad'(y-z^k) + gamma'y + rho/2 |y - z|^2
/// s.t. g + Jg (y - z^k) = 0, h + Jh (y - z^k) <= 0.
DenseQp make_local_qp(const LocalQp& block, double rho, const Vec& z_i, const Vec& gamma_i);

enum class AveragingMode { Centralized, Decentralized };

/// "centralized" or "decentralized".
AveragingMode parse_averaging_mode(const std::string& name);

struct AdmmOptions {
  double rho = 1.0;
  AveragingMode mode = AveragingMode::Centralized;
  bool parallel = true;
  QpOptions qp;
};

/// w = (z, gamma/rho) plus the last local solutions.
struct AdmmState {
  Vec z;
  Vec gamma;
  Vec y;
  Vec nu;
  Vec mu;
  int l = 0;
};

/// Consensus ADMM on the SQP subproblem. Holds the per-subsystem QP solvers (for
/// factorization reuse and working-set warm starts), the averaging operator and
/// the message bus used in decentralized mode.
class AdmmEngine {
 public:
  AdmmEngine(const PartitionedNlp& structure, AdmmOptions options);

  /// Exactly l_max rounds of local solve, averaging and dual update. The observer
  /// sees the state after each round.
  AdmmState run(const std::vector<LocalQp>& blocks, AdmmState state, int l_max,
                const std::function<void(const AdmmState&)>& observer = {});

  const AveragingOperator& averaging() const { return *avg_; }
  MessageBus& bus() { return *bus_; }
  const AdmmOptions& options() const { return options_; }
  void set_mode(AveragingMode mode) { options_.mode = mode; }
  void set_parallel(bool on) { options_.parallel = on; }
  /// Forget cached working sets (next local solves start cold).
  void reset_warm_starts();
  long qp_iterations() const { return qp_iterations_; }

 private:
  AdmmOptions options_;
  int S_;
  std::vector<int> var_off_, eq_off_, ineq_off_;
  std::shared_ptr<AveragingOperator> avg_;
  std::unique_ptr<DecentralizedAveraging> dec_;
  std::unique_ptr<MessageBus> bus_;
  std::vector<DenseQpSolver> solvers_;
  std::vector<QpSolution> warm_;
  std::vector<char> has_warm_;
  long qp_iterations_ = 0;
};

/// Convenience: one-shot run with a fresh engine.
AdmmState admm_run(const PartitionedNlp& structure, const std::vector<LocalQp>& blocks,
                   const Vec& z0, const Vec& gamma0, int l_max, const AdmmOptions& options = {});

}  // namespace dsqp

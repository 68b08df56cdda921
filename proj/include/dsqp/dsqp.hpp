#pragma once

#include "dsqp/admm.hpp"
#include "dsqp/nlp.hpp"
#include "dsqp/qp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dsqp {

enum class HessianMode { Exact, GaussNewton, Auto };

HessianMode parse_hessian_mode(const std::string& s);
const char* to_string(HessianMode m);

struct DsqpSettings {
  int k_max = 1;
  int l_max = 6;
  double rho = 1.0;
  HessianMode hessian = HessianMode::Auto;
  double qp_tol = 1e-8;
  /// Auto mode keeps the exact Hessian only if the reduced Hessian has
  /// eigenvalues above this floor.
  double reg_floor = 1e-8;
  AveragingMode averaging = AveragingMode::Centralized;
  bool parallel = true;

  void validate() const;
};

struct QpLinearization {
  std::vector<LocalQp> blocks;
  std::vector<char> exact_used;  ///< per subsystem: exact Hessian (1) or GN (0)
};

/// True if Z'HZ - floor I is positive definite, Z a null-space basis of Jg.
bool reduced_hessian_pd(const Mat& H, const Mat& Jg, double floor = 0.0);
/// Smallest eigenvalue of Z'HZ (+inf if the null space is trivial).
double reduced_hessian_min_eig(const Mat& H, const Mat& Jg);

QpLinearization build_qp(const PartitionedNlp& nlp, const PrimalDualPoint& p, HessianMode mode,
                         double reg_floor = 1e-8, bool parallel = false);

struct DsqpTraceRow {
  int k = 0;
  int l = 0;
  double consensus = 0.0;  ///< |Ez - c|_inf
  double kkt = 0.0;
  double dist_ref = -1.0;  ///< |p - p_ref|, -1 if no reference
};

struct DsqpResult {
  PrimalDualPoint p;
  Vec gamma;
  /// |p^k - p_ref| for k = 0..k_max (only with a reference).
  std::vector<double> dist_history;
  int exact_hessian_blocks = 0;
  int gn_hessian_blocks = 0;
};

/// Outer SQP loop with ADMM as inner solver; owns the ADMM engine so working sets
/// and factorizations survive across calls.
class DsqpSolver {
 public:
  DsqpSolver(const PartitionedNlp& structure, DsqpSettings settings);

  /// Exactly k_max outer iterations from p0 with consensus dual gamma0.
  DsqpResult run(const PartitionedNlp& nlp, const PrimalDualPoint& p0, const Vec& gamma0,
                 const PrimalDualPoint* reference = nullptr,
                 std::vector<DsqpTraceRow>* trace = nullptr);

  const DsqpSettings& settings() const { return settings_; }
  AdmmEngine& admm() { return admm_; }

 private:
  DsqpSettings settings_;
  AdmmEngine admm_;
};

/// One-shot dSQP; gamma0 defaults to E' lambda0.
DsqpResult dsqp_run(const PartitionedNlp& nlp, const PrimalDualPoint& p0,
                    const DsqpSettings& settings, const Vec* gamma0 = nullptr,
                    const PrimalDualPoint* reference = nullptr);

/// Carries the best iterate when the centralized SQP fails to converge.
class KktSolveError : public Error {
 public:
  KktSolveError(ErrorCode code, const std::string& what, PrimalDualPoint best, double residual)
      : Error(code, what), best_(std::move(best)), residual_(residual) {}
  const PrimalDualPoint& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  PrimalDualPoint best_;
  double residual_;
};

struct KktSolveResult {
  PrimalDualPoint p;
  int iterations = 0;
  double residual = 0.0;
};

/// Full-step centralized SQP; each QP is solved exactly on the stacked system.
KktSolveResult solve_to_kkt(const PartitionedNlp& nlp, const PrimalDualPoint& p0,
                            double tol = 1e-8, int max_outer = 100,
                            HessianMode mode = HessianMode::Auto, const QpOptions& qp = {});

struct RegularityReport {
  double complementarity_margin = 0.0;  ///< min_j |h_j| + |mu_j|
  int active = 0;
  int inactive = 0;
  double licq_sigma_min = 0.0;
  std::vector<double> reduced_hessian_min_eig;
  double reduced_hessian_min = 0.0;
  bool regular = false;
};

RegularityReport check_regularity(const PartitionedNlp& nlp, const PrimalDualPoint& p,
                                  double activation_tol = 1e-6);

}  // namespace dsqp

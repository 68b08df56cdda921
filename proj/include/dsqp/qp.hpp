#pragma once

#include "dsqp/linalg.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace dsqp {

/// min 1/2 y'Hy + q'y  s.t.  A_eq y = b_eq,  A_in y <= b_in.
struct DenseQp {
  Mat H;
  Vec q;
  Mat A_eq;
  Vec b_eq;
  Mat A_in;
  Vec b_in;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_eq() const { return A_eq.rows(); }
  Eigen::Index num_ineq() const { return A_in.rows(); }
  void validate() const;
};

/// Same problem with sparse data, used for the stacked centralized QP.
struct SparseQp {
  SpMat H;
  Vec q;
  SpMat A_eq;
  Vec b_eq;
  SpMat A_in;
  Vec b_in;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_eq() const { return A_eq.rows(); }
  Eigen::Index num_ineq() const { return A_in.rows(); }
  void validate() const;
};

struct QpSolution {
  Vec y;
  Vec nu;  ///< equality multipliers
  Vec mu;  ///< inequality multipliers, >= 0
  /// Inequalities with A_in y - b_in >= -activation_tol.
  std::vector<int> active_set;
  /// Working set of the final active-set iteration (used for warm starts).
  std::vector<int> working_set;
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct QpOptions {
  double tol = 1e-8;
  double activation_tol = 1e-6;
  int max_iterations = 2000;
};

/// KKT residual of (y, nu, mu) for a dense QP: stationarity, primal feasibility,
/// complementarity and dual sign, as an infinity norm.
double qp_kkt_residual(const DenseQp& qp, const Vec& y, const Vec& nu, const Vec& mu);
double qp_kkt_residual(const SparseQp& qp, const Vec& y, const Vec& nu, const Vec& mu);

/// Dual active-set solver (Goldfarb-Idnani) for dense strictly convex QPs.
///
/// Working-set KKT systems are solved with a null-space factorization: a QR of the
/// working-set constraint matrix and a Cholesky of the reduced Hessian. The
/// factorization of the last working set is cached, so repeated solves with the same
/// matrices and only a changed linear term (the ADMM case) reuse it.
class DenseQpSolver {
 public:
  explicit DenseQpSolver(QpOptions options = {});
  ~DenseQpSolver();
  DenseQpSolver(DenseQpSolver&&) noexcept;
  DenseQpSolver& operator=(DenseQpSolver&&) noexcept;

  QpSolution solve(const DenseQp& qp, const QpSolution* warm_start = nullptr);

  const QpOptions& options() const { return options_; }
  /// Number of factorizations performed over the solver's lifetime.
  long factorizations() const;

 private:
  struct Cache;
  QpOptions options_;
  std::unique_ptr<Cache> cache_;
};

/// One-shot convenience wrapper around DenseQpSolver.
QpSolution solve(const DenseQp& qp, const QpSolution* warm_start = nullptr,
                 const QpOptions& options = {});

/// Same dual active-set iteration with sparse LU on the full KKT matrix.
QpSolution solve_sparse(const SparseQp& qp, const QpSolution* warm_start = nullptr,
                        const QpOptions& options = {});

/// Solves [[H, A'],[A, 0]] (y, nu) = (-q, b).
std::pair<Vec, Vec> solve_equality_kkt(const Mat& H, const Vec& q, const Mat& A_eq,
                                       const Vec& b_eq);

}  // namespace dsqp

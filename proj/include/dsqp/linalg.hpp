#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsqp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Error categories shared by all solver layers.
enum class ErrorCode {
  DimensionMismatch,
  InvalidInput,
  NotTwoAssigned,
  RankDeficient,
  Infeasible,
  NotStrictlyConvex,
  MaxIterations,
  SingularKkt,
  SingularEEt,
  MissingMessage,
  EvaluationFailure,
  Diverged,
  NoConvergence,
  NotStabilizing,
  Inconclusive,
  ConstraintViolation,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

/// Largest singular value of a dense matrix.
double spectral_norm(const Mat& a);

/// Smallest singular value (0 for empty matrices).
double min_singular_value(const Mat& a);

/// Orthonormal basis of the null space of `a` (columns), via full QR of a^T.
Mat null_space_basis(const Mat& a, double rank_tol = 1e-10);

/// Numerical rank from a column-pivoted QR.
int numerical_rank(const Mat& a, double rel_tol = 1e-10);

/// Largest eigenvalue of a symmetric operator given only as a product
/// y = op(x). Lanczos with full reorthogonalization; exact for dim <= max_steps.
double lanczos_max_eigenvalue(const std::function<void(const Vec&, Vec&)>& op, int dim,
                              int max_steps = 400, double tol = 1e-12);

/// Central finite-difference Jacobian of a vector map.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double step = 1e-6);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

/// Dense copy of a block-diagonal assembly.
Mat block_diagonal(const std::vector<Mat>& blocks);

/// Stable FNV-1a hash over the raw bytes of a vector.
std::uint64_t hash_values(const Vec& v);

}  // namespace dsqp

#include "dsqp/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

namespace dsqp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotTwoAssigned: return "NotTwoAssigned";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotStrictlyConvex: return "NotStrictlyConvex";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::SingularKkt: return "SingularKkt";
    case ErrorCode::SingularEEt: return "SingularEEt";
    case ErrorCode::MissingMessage: return "MissingMessage";
    case ErrorCode::EvaluationFailure: return "EvaluationFailure";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotStabilizing: return "NotStabilizing";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  // Symmetric eigenproblem on the smaller Gram matrix is much cheaper than SVD.
  if (a.rows() >= a.cols()) {
    Mat g = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  Mat g = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double min_singular_value(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(a);
  return svd.singularValues().minCoeff();
}

Mat null_space_basis(const Mat& a, double rank_tol) {
  const auto n = a.cols();
  if (a.rows() == 0) return Mat::Identity(n, n);
  Eigen::ColPivHouseholderQR<Mat> qr(a.transpose());
  qr.setThreshold(rank_tol);
  const auto r = qr.rank();
  Mat q = qr.householderQ();
  return q.rightCols(n - r);
}

int numerical_rank(const Mat& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  qr.setThreshold(rel_tol);
  return static_cast<int>(qr.rank());
}

double lanczos_max_eigenvalue(const std::function<void(const Vec&, Vec&)>& op, int dim,
                              int max_steps, double tol) {
  if (dim == 0) return 0.0;
  const int m = std::min(max_steps, dim);
  Mat basis(dim, m);
  Vec alpha(m), beta(m);
  // Deterministic start vector with support on every coordinate.
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + 0.37 * i);
  v.normalize();
  Vec w(dim);
  double best = -std::numeric_limits<double>::infinity();
  int k = 0;
  for (; k < m; ++k) {
    basis.col(k) = v;
    op(v, w);
    alpha[k] = v.dot(w);
    w -= alpha[k] * v;
    if (k > 0) w -= beta[k - 1] * basis.col(k - 1);
    // Full reorthogonalization, twice for stability.
    for (int pass = 0; pass < 2; ++pass) {
      w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    }
    beta[k] = w.norm();

    Eigen::SelfAdjointEigenSolver<Mat> es;
    Vec diag = alpha.head(k + 1);
    Vec sub = beta.head(k);
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Eigen::Index top = k;
    const double ritz = es.eigenvalues()[top];
    const double residual = std::abs(beta[k] * es.eigenvectors()(k, top));
    best = ritz;
    if (residual <= tol * std::max(1.0, std::abs(ritz)) || beta[k] <= 1e-14) break;
    v = w / beta[k];
  }
  return best;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double step) {
  Vec f0 = f(x);
  Mat jac(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    Vec fp = f(xp);
    xp[j] = x[j] - h;
    Vec fm = f(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

bool all_finite(const Vec& v) { return v.allFinite(); }
bool all_finite(const Mat& m) { return m.allFinite(); }

Mat block_diagonal(const std::vector<Mat>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out = Mat::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

std::uint64_t hash_values(const Vec& v) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    const double x = v[i];
    std::memcpy(&bits, &x, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace dsqp

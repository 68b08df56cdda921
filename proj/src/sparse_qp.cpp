#include "dsqp/qp.hpp"

#include "active_set_core.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace dsqp {

void SparseQp::validate() const {
  const auto n = H.rows();
  require(H.cols() == n, ErrorCode::DimensionMismatch, "H must be square");
  require(q.size() == n, ErrorCode::DimensionMismatch, "q size");
  require(A_eq.rows() == 0 || A_eq.cols() == n, ErrorCode::DimensionMismatch, "A_eq cols");
  require(b_eq.size() == A_eq.rows(), ErrorCode::DimensionMismatch, "b_eq size");
  require(A_in.rows() == 0 || A_in.cols() == n, ErrorCode::DimensionMismatch, "A_in cols");
  require(b_in.size() == A_in.rows(), ErrorCode::DimensionMismatch, "b_in size");
}

double qp_kkt_residual(const SparseQp& qp, const Vec& y, const Vec& nu, const Vec& mu) {
  double r = 0.0;
  Vec stat = qp.H * y + qp.q;
  if (qp.num_eq() > 0) stat += qp.A_eq.transpose() * nu;
  if (qp.num_ineq() > 0) stat += qp.A_in.transpose() * mu;
  if (stat.size() > 0) r = stat.lpNorm<Eigen::Infinity>();
  if (qp.num_eq() > 0) r = std::max(r, (qp.A_eq * y - qp.b_eq).lpNorm<Eigen::Infinity>());
  if (qp.num_ineq() > 0) {
    Vec s = qp.A_in * y - qp.b_in;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      r = std::max(r, std::max(s[j], 0.0));
      r = std::max(r, std::abs(mu[j] * s[j]));
      r = std::max(r, std::max(-mu[j], 0.0));
    }
  }
  return r;
}

namespace {

using RowSpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// LU of the full working-set KKT matrix.
class SparseKkt {
 public:
  explicit SparseKkt(const SparseQp& qp) : qp_(qp), rows_(qp.A_in) {}

  int num_vars() const { return static_cast<int>(qp_.H.rows()); }
  int num_eq() const { return static_cast<int>(qp_.A_eq.rows()); }
  int num_ineq() const { return static_cast<int>(qp_.A_in.rows()); }
  const Vec& q() const { return qp_.q; }
  const Vec& b_eq() const { return qp_.b_eq; }
  const Vec& b_in() const { return qp_.b_in; }

  double ineq_dot(int j, const Vec& y) const {
    double s = 0.0;
    for (RowSpMat::InnerIterator it(rows_, j); it; ++it) s += it.value() * y[it.col()];
    return s;
  }
  void ineq_row(int j, Vec& out) const {
    out = Vec::Zero(num_vars());
    for (RowSpMat::InnerIterator it(rows_, j); it; ++it) out[it.col()] = it.value();
  }

  void factor(const std::vector<int>& working) {
    if (valid_ && working == working_) return;
    valid_ = false;
    const int n = num_vars();
    const int me = num_eq();
    const int m = me + static_cast<int>(working.size());
    std::vector<Triplet> t;
    t.reserve(qp_.H.nonZeros() + 2 * qp_.A_eq.nonZeros() + 8 * working.size());
    for (int k = 0; k < qp_.H.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp_.H, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (int k = 0; k < qp_.A_eq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp_.A_eq, k); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n + it.row(), it.value());
      }
    }
    for (std::size_t w = 0; w < working.size(); ++w) {
      const int r = n + me + static_cast<int>(w);
      for (RowSpMat::InnerIterator it(rows_, working[w]); it; ++it) {
        t.emplace_back(r, it.col(), it.value());
        t.emplace_back(it.col(), r, it.value());
      }
    }
    SpMat K(n + m, n + m);
    K.setFromTriplets(t.begin(), t.end());
    K.makeCompressed();
    lu_.analyzePattern(K);
    lu_.factorize(K);
    ++factorizations_;
    if (lu_.info() != Eigen::Success) {
      throw Error(ErrorCode::RankDeficient, "working-set KKT matrix is singular");
    }
    working_ = working;
    valid_ = true;
  }

  void solve(const Vec& r1, const Vec& r2, Vec& y, Vec& lam) {
    const int n = num_vars();
    Vec rhs(n + r2.size());
    rhs << r1, r2;
    Vec s = lu_.solve(rhs);
    if (!s.allFinite()) throw Error(ErrorCode::SingularKkt, "non-finite KKT solution");
    y = s.head(n);
    lam = s.tail(r2.size());
  }

  bool dependent(const Vec& a_p, const Vec& dy) const {
    return dy.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, a_p.lpNorm<Eigen::Infinity>());
  }

 private:
  const SparseQp& qp_;
  RowSpMat rows_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<int> working_;
  bool valid_ = false;
  long factorizations_ = 0;
};

}  // namespace

QpSolution solve_sparse(const SparseQp& qp, const QpSolution* warm_start,
                        const QpOptions& options) {
  qp.validate();
  SparseKkt kkt(qp);
  QpSolution sol = detail::dual_active_set(kkt, warm_start, options);
  sol.kkt_residual = qp_kkt_residual(qp, sol.y, sol.nu, sol.mu);
  return sol;
}

}  // namespace dsqp

#include "dsqp/qp.hpp"

#include "active_set_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>

namespace dsqp {

void DenseQp::validate() const {
  const auto n = H.rows();
  require(H.cols() == n, ErrorCode::DimensionMismatch, "H must be square");
  require(q.size() == n, ErrorCode::DimensionMismatch, "q size");
  require(A_eq.cols() == n || (A_eq.rows() == 0), ErrorCode::DimensionMismatch, "A_eq cols");
  require(b_eq.size() == A_eq.rows(), ErrorCode::DimensionMismatch, "b_eq size");
  require(A_in.cols() == n || (A_in.rows() == 0), ErrorCode::DimensionMismatch, "A_in cols");
  require(b_in.size() == A_in.rows(), ErrorCode::DimensionMismatch, "b_in size");
  require(H.allFinite() && q.allFinite() && A_eq.allFinite() && b_eq.allFinite() &&
              A_in.allFinite() && b_in.allFinite(),
          ErrorCode::InvalidInput, "non-finite QP data");
}

double qp_kkt_residual(const DenseQp& qp, const Vec& y, const Vec& nu, const Vec& mu) {
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

// Null-space factorization of the working-set KKT matrix.
class DenseKkt {
 public:
  DenseKkt(const Mat& H, const Vec& q, const Mat& A_eq, const Vec& b_eq, const Mat& A_in,
           const Vec& b_in)
      : H_(H), q_(q), A_eq_(A_eq), b_eq_(b_eq), A_in_(A_in), b_in_(b_in) {}

  int num_vars() const { return static_cast<int>(H_.rows()); }
  int num_eq() const { return static_cast<int>(A_eq_.rows()); }
  int num_ineq() const { return static_cast<int>(A_in_.rows()); }
  const Vec& q() const { return q_; }
  const Vec& b_eq() const { return b_eq_; }
  const Vec& b_in() const { return b_in_; }

  double ineq_dot(int j, const Vec& y) const { return A_in_.row(j).dot(y); }
  void ineq_row(int j, Vec& out) const { out = A_in_.row(j).transpose(); }

  void invalidate() { valid_ = false; }
  long factorizations() const { return factorizations_; }

  void factor(const std::vector<int>& working) {
    if (valid_ && working == working_) return;
    valid_ = false;
    const int n = num_vars();
    const int m = num_eq() + static_cast<int>(working.size());
    if (m > n) throw Error(ErrorCode::RankDeficient, "more working constraints than variables");
    Mat At(n, m);
    if (num_eq() > 0) At.leftCols(num_eq()) = A_eq_.transpose();
    for (std::size_t k = 0; k < working.size(); ++k) {
      At.col(num_eq() + k) = A_in_.row(working[k]).transpose();
    }
    ++factorizations_;
    if (m > 0) {
      Eigen::HouseholderQR<Mat> qr(At);
      Mat Q = qr.householderQ();
      R_ = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
      // Relative to each column, looser than dependent() so a row accepted there is kept here.
      for (int i = 0; i < m; ++i) {
        if (std::abs(R_(i, i)) <= 1e-12 * std::max(At.col(i).norm(), 1e-300)) {
          throw Error(ErrorCode::RankDeficient, "working-set constraints are linearly dependent");
        }
      }
      Y_ = Q.leftCols(m);
      Z_ = Q.rightCols(n - m);
    } else {
      R_.resize(0, 0);
      Y_.resize(n, 0);
      Z_ = Mat::Identity(n, n);
    }
    HZ_ = H_ * Z_;
    Mat reduced = Z_.transpose() * HZ_;
    llt_.compute(reduced);
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorCode::NotStrictlyConvex, "reduced Hessian is not positive definite");
    }
    const auto& L = llt_.matrixL();
    for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
      if (!(L(i, i) > 1e-12 * std::sqrt(std::max(1.0, reduced.diagonal().maxCoeff())))) {
        throw Error(ErrorCode::NotStrictlyConvex, "reduced Hessian is singular");
      }
    }
    working_ = working;
    valid_ = true;
  }

  // [[H, A_W'],[A_W, 0]] (y, lam) = (r1, r2)
  void solve(const Vec& r1, const Vec& r2, Vec& y, Vec& lam) const {
    const Eigen::Index m = R_.rows();
    Vec yY;
    if (m > 0) {
      yY = R_.transpose().triangularView<Eigen::Lower>().solve(r2);
      y = Y_ * yY;
    } else {
      y = Vec::Zero(H_.rows());
    }
    if (Z_.cols() > 0) {
      Vec rhs = Z_.transpose() * (r1 - H_ * y);
      Vec yZ = llt_.solve(rhs);
      y += Z_ * yZ;
    }
    if (m > 0) {
      Vec t = Y_.transpose() * (r1 - H_ * y);
      lam = R_.triangularView<Eigen::Upper>().solve(t);
    } else {
      lam.resize(0);
    }
  }

  bool dependent(const Vec& a_p, const Vec&) const {
    if (Z_.cols() == 0) return true;
    const double an = a_p.norm();
    return (Z_.transpose() * a_p).norm() <= 1e-10 * std::max(an, 1e-300);
  }

 private:
  const Mat& H_;
  const Vec& q_;
  const Mat& A_eq_;
  const Vec& b_eq_;
  const Mat& A_in_;
  const Vec& b_in_;

  bool valid_ = false;
  std::vector<int> working_;
  Mat Y_, Z_, R_, HZ_;
  Eigen::LLT<Mat> llt_;
  long factorizations_ = 0;
};

}  // namespace

struct DenseQpSolver::Cache {
  Mat H, A_eq, A_in;
  Vec q, b_eq, b_in;
  std::unique_ptr<DenseKkt> kkt;
  long retired_factorizations = 0;

  bool same_matrices(const DenseQp& qp) const {
    return kkt && H.rows() == qp.H.rows() && A_eq.rows() == qp.A_eq.rows() &&
           A_in.rows() == qp.A_in.rows() && A_eq.cols() == qp.A_eq.cols() &&
           A_in.cols() == qp.A_in.cols() && H == qp.H && A_eq == qp.A_eq && A_in == qp.A_in;
  }
};

DenseQpSolver::DenseQpSolver(QpOptions options)
    : options_(options), cache_(std::make_unique<Cache>()) {}
DenseQpSolver::~DenseQpSolver() = default;
DenseQpSolver::DenseQpSolver(DenseQpSolver&&) noexcept = default;
DenseQpSolver& DenseQpSolver::operator=(DenseQpSolver&&) noexcept = default;

long DenseQpSolver::factorizations() const {
  return cache_->retired_factorizations + (cache_->kkt ? cache_->kkt->factorizations() : 0);
}

QpSolution DenseQpSolver::solve(const DenseQp& qp, const QpSolution* warm_start) {
  qp.validate();
  Cache& c = *cache_;
  if (!c.same_matrices(qp)) {
    if (c.kkt) c.retired_factorizations += c.kkt->factorizations();
    c.H = qp.H;
    c.A_eq = qp.A_eq;
    c.A_in = qp.A_in;
    c.kkt = std::make_unique<DenseKkt>(c.H, c.q, c.A_eq, c.b_eq, c.A_in, c.b_in);
  }
  c.q = qp.q;
  c.b_eq = qp.b_eq;
  c.b_in = qp.b_in;
  QpSolution sol = detail::dual_active_set(*c.kkt, warm_start, options_);
  sol.kkt_residual = qp_kkt_residual(qp, sol.y, sol.nu, sol.mu);
  return sol;
}

QpSolution solve(const DenseQp& qp, const QpSolution* warm_start, const QpOptions& options) {
  DenseQpSolver solver(options);
  return solver.solve(qp, warm_start);
}

std::pair<Vec, Vec> solve_equality_kkt(const Mat& H, const Vec& q, const Mat& A_eq,
                                       const Vec& b_eq) {
  const auto n = H.rows();
  const auto m = A_eq.rows();
  require(H.cols() == n && q.size() == n && b_eq.size() == m && (m == 0 || A_eq.cols() == n),
          ErrorCode::DimensionMismatch, "equality KKT dimensions");
  Mat K = Mat::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  if (m > 0) {
    K.topRightCorner(n, m) = A_eq.transpose();
    K.bottomLeftCorner(m, n) = A_eq;
  }
  Vec rhs(n + m);
  rhs << -q, b_eq;
  Eigen::FullPivLU<Mat> lu(K);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularKkt, "KKT matrix is singular");
  Vec sol = lu.solve(rhs);
  return {sol.head(n), sol.tail(m)};
}

}  // namespace dsqp

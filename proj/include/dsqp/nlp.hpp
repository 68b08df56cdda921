#pragma once

#include "dsqp/linalg.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace dsqp {

/// Everything the SQP layer needs from one subsystem at a point.
struct SubsystemEval {
  double f = 0.0;
  Vec grad;
  Vec g;
  Mat Jg;  ///< n_g x n
  Vec h;
  Mat Jh;  ///< n_h x n
  Mat hess;  ///< Lagrangian Hessian f + nu'g + mu'h (only if requested)
};

/// One block of  min sum f_i(z_i)  s.t.  g_i(z_i) = 0,  h_i(z_i) <= 0.
class SubsystemProblem {
 public:
  virtual ~SubsystemProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual double objective(const Vec& z) const = 0;
  virtual Vec gradient(const Vec& z) const = 0;
  virtual Vec eq(const Vec& z) const = 0;
  virtual Mat eq_jacobian(const Vec& z) const = 0;
  virtual Vec ineq(const Vec& z) const = 0;
  virtual Mat ineq_jacobian(const Vec& z) const = 0;
  /// Hessian of f + nu'g + mu'h.
  virtual Mat lagrangian_hessian(const Vec& z, const Vec& nu, const Vec& mu) const = 0;

  /// Gauss-Newton Hessian M'M for least-squares objectives.
  virtual bool has_gauss_newton() const { return false; }
  virtual Mat gauss_newton_hessian(const Vec& z) const;

  /// Batch evaluation. Models with shared intermediate work override this.
  virtual SubsystemEval evaluate(const Vec& z, const Vec* nu, const Vec* mu) const;
};

/// Subsystem assembled from callables; used for small test problems.
class FunctionalSubsystem : public SubsystemProblem {
 public:
  struct Callbacks {
    int n = 0;
    int n_g = 0;
    int n_h = 0;
    std::function<double(const Vec&)> f;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess_f;
    std::function<Vec(const Vec&)> g;
    std::function<Mat(const Vec&)> jac_g;
    /// sum_k w_k Hess g_k; zero if unset.
    std::function<Mat(const Vec&, const Vec&)> hess_g;
    std::function<Vec(const Vec&)> h;
    std::function<Mat(const Vec&)> jac_h;
    std::function<Mat(const Vec&, const Vec&)> hess_h;
    std::function<Mat(const Vec&)> gauss_newton;
  };

  explicit FunctionalSubsystem(Callbacks cb);

  /// 1/2 z'Hz + q'z with linear constraints.
  static FunctionalSubsystem quadratic(const Mat& H, const Vec& q, const Mat& A_eq,
                                       const Vec& b_eq, const Mat& A_in, const Vec& b_in);

  int num_vars() const override { return cb_.n; }
  int num_eq() const override { return cb_.n_g; }
  int num_ineq() const override { return cb_.n_h; }
  double objective(const Vec& z) const override { return cb_.f(z); }
  Vec gradient(const Vec& z) const override { return cb_.grad(z); }
  Vec eq(const Vec& z) const override;
  Mat eq_jacobian(const Vec& z) const override;
  Vec ineq(const Vec& z) const override;
  Mat ineq_jacobian(const Vec& z) const override;
  Mat lagrangian_hessian(const Vec& z, const Vec& nu, const Vec& mu) const override;
  bool has_gauss_newton() const override { return static_cast<bool>(cb_.gauss_newton); }
  Mat gauss_newton_hessian(const Vec& z) const override;

 private:
  Callbacks cb_;
};

/// One consensus row: coefficient pair on two subsystems.
struct ConsensusRow {
  int plus_sub = -1;   ///< holder of the original (+1)
  int plus_index = -1;
  int minus_sub = -1;  ///< holder of the copy (-1)
  int minus_index = -1;
  double plus_coef = 1.0;
  double minus_coef = -1.0;
};

/// Partially separable NLP: subsystems coupled only through sum E_i z_i = c.
class PartitionedNlp {
 public:
  PartitionedNlp(std::vector<std::shared_ptr<const SubsystemProblem>> subsystems,
                 std::vector<SpMat> E, Vec c);

  int num_subsystems() const { return static_cast<int>(subs_.size()); }
  const SubsystemProblem& subsystem(int i) const { return *subs_[i]; }
  std::shared_ptr<const SubsystemProblem> subsystem_ptr(int i) const { return subs_[i]; }

  int n() const { return n_; }
  int n_g() const { return n_g_; }
  int n_h() const { return n_h_; }
  int n_c() const { return static_cast<int>(c_.size()); }

  int var_offset(int i) const { return var_off_[i]; }
  int eq_offset(int i) const { return eq_off_[i]; }
  int ineq_offset(int i) const { return ineq_off_[i]; }
  int num_vars(int i) const { return var_off_[i + 1] - var_off_[i]; }
  int num_eq(int i) const { return eq_off_[i + 1] - eq_off_[i]; }
  int num_ineq(int i) const { return ineq_off_[i + 1] - ineq_off_[i]; }

  const SpMat& E(int i) const { return E_[i]; }
  const SpMat& E_stacked() const { return E_all_; }
  const Vec& c() const { return c_; }
  const std::vector<ConsensusRow>& rows() const { return rows_; }

  /// Subsystems whose variables subsystem i copies (+1 side of rows where i is -1).
  const std::vector<int>& in_neighbors(int i) const { return in_[i]; }
  const std::vector<int>& out_neighbors(int i) const { return out_[i]; }
  /// Union of in- and out-neighbors, ascending.
  const std::vector<int>& neighbors(int i) const { return nbr_[i]; }

  Vec stack_z(const std::vector<Vec>& parts) const;
  std::vector<Vec> split_z(const Vec& z) const;

 private:
  std::vector<std::shared_ptr<const SubsystemProblem>> subs_;
  std::vector<SpMat> E_;
  SpMat E_all_;
  Vec c_;
  std::vector<int> var_off_, eq_off_, ineq_off_;
  int n_ = 0, n_g_ = 0, n_h_ = 0;
  std::vector<ConsensusRow> rows_;
  std::vector<std::vector<int>> in_, out_, nbr_;
};

/// p = (z, nu, mu, lambda).
struct PrimalDualPoint {
  Vec z;
  Vec nu;
  Vec mu;
  Vec lambda;

  static PrimalDualPoint zeros(const PartitionedNlp& nlp);
  Vec stacked() const;
  Eigen::Index size() const { return z.size() + nu.size() + mu.size() + lambda.size(); }

  auto z_i(const PartitionedNlp& nlp, int i) const {
    return z.segment(nlp.var_offset(i), nlp.num_vars(i));
  }
  auto nu_i(const PartitionedNlp& nlp, int i) const {
    return nu.segment(nlp.eq_offset(i), nlp.num_eq(i));
  }
  auto mu_i(const PartitionedNlp& nlp, int i) const {
    return mu.segment(nlp.ineq_offset(i), nlp.num_ineq(i));
  }
};

/// Euclidean distance between two points (all four blocks).
double distance(const PrimalDualPoint& a, const PrimalDualPoint& b);

/// max of stationarity, g, Ez - c, max(h,0), mu.*h and min(mu,0), all inf-norms.
double kkt_residual(const PartitionedNlp& nlp, const PrimalDualPoint& p);

struct DerivativeBlockError {
  double gradient = 0.0;
  double eq_jacobian = 0.0;
  double ineq_jacobian = 0.0;
  double hessian = 0.0;
};

struct DerivativeReport {
  std::vector<DerivativeBlockError> per_subsystem;
  DerivativeBlockError worst;
  bool passed = false;
};

/// Compares analytic derivatives with central differences at z. The Hessian is
/// checked on the Lagrangian with the given multipliers (deterministic values
/// if omitted).
DerivativeReport check_derivatives(const PartitionedNlp& nlp, const Vec& z, double tol = 1e-5,
                                   const Vec* nu = nullptr, const Vec* mu = nullptr);

}  // namespace dsqp

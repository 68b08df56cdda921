#pragma once

#include "dsqp/nlp.hpp"

#include <memory>
#include <vector>

namespace dsqp {

/// x+ = F(x, u, w), where w holds frozen neighbor quantities.
class DiscreteDynamics {
 public:
  virtual ~DiscreteDynamics() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual int nw() const = 0;

  virtual Vec step(const Vec& x, const Vec& u, const Vec& w) const = 0;
  /// dF/d(x, u, w), nx x (nx + nu + nw).
  virtual Mat jacobian(const Vec& x, const Vec& u, const Vec& w) const = 0;
  /// sum_k c_k Hess F_k with respect to (x, u, w).
  virtual Mat weighted_hessian(const Vec& x, const Vec& u, const Vec& w, const Vec& c) const = 0;

  /// Value, Jacobian and (if c is given) the weighted Hessian in one call.
  virtual void evaluate(const Vec& x, const Vec& u, const Vec& w, const Vec* c, Vec& value,
                        Mat& jac, Mat* hess) const;
};

/// x+ = A x + B u + W w.
class LinearDynamics : public DiscreteDynamics {
 public:
  LinearDynamics(Mat A, Mat B, Mat W);
  int nx() const override { return static_cast<int>(A_.rows()); }
  int nu() const override { return static_cast<int>(B_.cols()); }
  int nw() const override { return static_cast<int>(W_.cols()); }
  Vec step(const Vec& x, const Vec& u, const Vec& w) const override;
  Mat jacobian(const Vec& x, const Vec& u, const Vec& w) const override;
  Mat weighted_hessian(const Vec& x, const Vec& u, const Vec& w, const Vec& c) const override;

 private:
  Mat A_, B_, W_;
};

/// Subsystem i copies the listed state components of subsystem `source`.
struct NeighborLink {
  int source = -1;
  std::vector<int> components;
};

struct SubsystemOcp {
  std::shared_ptr<const DiscreteDynamics> dynamics;
  Mat Q, R, P;
  /// Input bounds; infinite entries are dropped.
  Vec u_min, u_max;
  /// Optional state bounds on x(1..N); empty means none.
  Vec x_min, x_max;
  /// Ascending in `source`. The dynamics' w argument concatenates the copied
  /// components in this order.
  std::vector<NeighborLink> links;
};

struct OcpSpec {
  std::vector<SubsystemOcp> subsystems;
  int N = 10;
  double h = 0.04;
  double beta = 1.0;
  double beta2 = 1.0;
  double copy_penalty = 1e-5;
  /// Include an extra input u(N) with cost u'Ru/2 (so inputs span tau = 0..N).
  bool terminal_input = true;
  /// Copy neighbor states at tau = 0..N instead of 0..N-1.
  bool copy_terminal_state = true;

  void validate() const;
};

/// Index map of one subsystem's decision vector
/// z_i = [x(0..N), u(0..Nu-1), copies(tau = 0..Nc-1, link, component)].
struct SubsystemLayout {
  int nx = 0, nu = 0, nw = 0;
  int N = 0, Nu = 0, Nc = 0;
  int n = 0, n_g = 0, n_h = 0;
  std::vector<int> link_offset;  ///< offset of each link inside one stage's copy block

  int x(int tau) const { return tau * nx; }
  int u(int tau) const { return (N + 1) * nx + tau * nu; }
  int copy(int tau, int link, int k) const {
    return (N + 1) * nx + Nu * nu + tau * nw + link_offset[link] + k;
  }
  int copies_begin() const { return (N + 1) * nx + Nu * nu; }
};

SubsystemLayout make_layout(const OcpSpec& spec, int i);

/// Subsystem NLP block of the OCP with the initial condition pinned to x_now.
class OcpSubsystem : public SubsystemProblem {
 public:
  OcpSubsystem(const OcpSpec& spec, int index, Vec x_now);

  const SubsystemLayout& layout() const { return layout_; }
  const Vec& x_now() const { return x_now_; }

  int num_vars() const override { return layout_.n; }
  int num_eq() const override { return layout_.n_g; }
  int num_ineq() const override { return layout_.n_h; }
  double objective(const Vec& z) const override;
  Vec gradient(const Vec& z) const override;
  Vec eq(const Vec& z) const override;
  Mat eq_jacobian(const Vec& z) const override;
  Vec ineq(const Vec& z) const override;
  Mat ineq_jacobian(const Vec& z) const override;
  Mat lagrangian_hessian(const Vec& z, const Vec& nu, const Vec& mu) const override;
  bool has_gauss_newton() const override { return true; }
  /// The objective is quadratic, so its Hessian is the Gauss-Newton matrix.
  Mat gauss_newton_hessian(const Vec&) const override { return hess_f_; }
  SubsystemEval evaluate(const Vec& z, const Vec* nu, const Vec* mu) const override;

 private:
  void stage_args(const Vec& z, int tau, Vec& x, Vec& u, Vec& w) const;
  void scatter_stage(const Mat& block, Mat& out, int tau, int row_offset, bool hessian) const;
  std::vector<int> stage_columns(int tau) const;

  SubsystemOcp sub_;
  SubsystemLayout layout_;
  Vec x_now_;
  Mat hess_f_;
  Mat A_in_;
  Vec b_in_;
};

/// Builds the partially separable NLP: dynamics and the initial-state pin as
/// equalities, bounds as inequalities, one consensus row per original/copy pair.
PartitionedNlp assemble_nlp(const OcpSpec& spec, const std::vector<Vec>& x_now);

/// Offsets of u_i(0) in the stacked z.
std::vector<int> input_offsets(const OcpSpec& spec);

}  // namespace dsqp

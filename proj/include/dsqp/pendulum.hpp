#pragma once

#include "dsqp/ocp.hpp"

#include <functional>
#include <optional>

namespace dsqp {

/// Chain of carts with inverted pendulums coupled by springs.
struct PendulumChainParams {
  int S = 20;
  double cart_mass = 2.0;
  double pendulum_mass = 0.25;
  double length = 0.2;
  double spring = 0.1;
  double gravity = 9.81;
  double u_max = 100.0;

  void validate() const;
};

/// x = (q, q', phi, phi'); phi = 0 is upright.
Vec pendulum_ode(const Vec& x, double u, std::optional<double> q_left,
                 std::optional<double> q_right, const PendulumChainParams& p);

/// Classical RK4 step of an autonomous field (inputs frozen by the caller).
Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double h);

/// RK4 discretization of one pendulum with u and neighbor positions frozen over
/// the step. w holds the present neighbors' positions, left before right.
/// Derivatives are propagated analytically through the RK4 stages.
class PendulumDynamics : public DiscreteDynamics {
 public:
  PendulumDynamics(PendulumChainParams params, double h, bool has_left, bool has_right);

  int nx() const override { return 4; }
  int nu() const override { return 1; }
  int nw() const override { return nw_; }
  Vec step(const Vec& x, const Vec& u, const Vec& w) const override;
  Mat jacobian(const Vec& x, const Vec& u, const Vec& w) const override;
  Mat weighted_hessian(const Vec& x, const Vec& u, const Vec& w, const Vec& c) const override;
  void evaluate(const Vec& x, const Vec& u, const Vec& w, const Vec* c, Vec& value, Mat& jac,
                Mat* hess) const override;

 private:
  PendulumChainParams p_;
  double h_;
  int nw_;
};

/// Stacked chain state (4 per cart) and inputs (1 per cart).
Vec chain_ode(const Vec& x, const Vec& u, const PendulumChainParams& p);
/// One RK4 step of the fully coupled chain.
Vec chain_step(const Vec& x, const Vec& u, double h, const PendulumChainParams& p);

/// Central-difference linearization of x+ = f(x, u).
std::pair<Mat, Mat> linearize_discrete(const std::function<Vec(const Vec&, const Vec&)>& f,
                                       const Vec& x0, const Vec& u0, double step = 1e-6);

struct RiccatiResult {
  Mat P;
  Mat K;
  double residual = 0.0;
  int iterations = 0;
};

/// P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q by fixed-point iteration from P = Q.
RiccatiResult riccati_design(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                             double tol = 1e-10, int max_iterations = 200000);
double riccati_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

struct Beta2Result {
  double beta2 = 1.0;
  double min_eig = 0.0;
  int grid_index = 0;
};

/// Smallest beta2 = 1 + 0.05 j with Delta Q = beta2 (P - A_K'PA_K)/mu - Q_K > 0.
Beta2Result beta2_search(const Mat& A, const Mat& B, const Mat& K, const Mat& P, const Mat& Q,
                         const Mat& R, double mu, double step = 0.05, double beta2_max = 1000.0);
/// Minimum eigenvalue of Delta Q at a given beta2.
double delta_q_min_eig(const Mat& A, const Mat& B, const Mat& K, const Mat& P, const Mat& Q,
                       const Mat& R, double mu, double beta2);

struct TerminalDesign {
  Mat P_i;  ///< per-subsystem terminal weight
  Mat K_i;  ///< per-subsystem terminal gain
  double beta2 = 1.0;
  double mu = 1.01;
  double min_eig = 0.0;
  double closed_loop_radius = 0.0;  ///< spectral radius of the coupled A + BK
  double riccati_residual = 0.0;
};

/// Decentralized design: uncoupled Riccati per cart, then the beta2 search on the
/// coupled chain linearized at the origin.
TerminalDesign design_terminal(const PendulumChainParams& p, const Mat& Q_i, const Mat& R_i,
                               double delta, double mu = 1.01);

/// Delta Q minimum eigenvalue of a finished design at another beta2.
double terminal_min_eig(const PendulumChainParams& p, const TerminalDesign& d, const Mat& Q_i,
                        const Mat& R_i, double delta, double beta2);

/// Weights used throughout the benchmark.
Mat pendulum_Q();
Mat pendulum_R();

/// OCP for the chain: frozen-neighbor RK4 at h, links to q of the adjacent carts.
OcpSpec make_chain_ocp(const PendulumChainParams& p, int N, double h, const Mat& Q_i,
                       const Mat& R_i, const Mat& P_i, double beta, double beta2,
                       double copy_penalty = 1e-5);

}  // namespace dsqp

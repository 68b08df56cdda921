#include "dsqp/pendulum.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dsqp {

void PendulumChainParams::validate() const {
  require(S >= 1, ErrorCode::InvalidInput, "chain needs at least one cart");
  require(cart_mass > 0 && pendulum_mass > 0 && length > 0 && spring >= 0 && gravity > 0 &&
              u_max > 0,
          ErrorCode::InvalidInput, "pendulum parameters must be positive");
}

Vec pendulum_ode(const Vec& x, double u, std::optional<double> q_left,
                 std::optional<double> q_right, const PendulumChainParams& p) {
  const double m = p.pendulum_mass, l = p.length, g = p.gravity;
  const double s = std::sin(x[2]), c = std::cos(x[2]);
  double F = 0.0;
  if (q_left) F += p.spring * (*q_left - x[0]);
  if (q_right) F += p.spring * (*q_right - x[0]);
  const double num = u + 0.75 * m * g * s * c - 0.5 * m * l * x[3] * x[3] * s + F;
  const double den = p.cart_mass + m - 0.75 * m * c * c;
  const double qdd = num / den;
  Vec dx(4);
  dx << x[1], qdd, x[3], 1.5 * g / l * s + 1.5 / l * c * qdd;
  return dx;
}

Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double h) {
  const Vec k1 = field(x);
  const Vec k2 = field(x + 0.5 * h * k1);
  const Vec k3 = field(x + 0.5 * h * k2);
  const Vec k4 = field(x + h * k3);
  Vec out = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  require(out.allFinite(), ErrorCode::EvaluationFailure, "RK4 step produced a non-finite state");
  return out;
}

namespace {

// Pendulum ODE on the augmented argument s = (q, q', phi, phi', u, w...).
struct OdeEval {
  Vec f;
  Mat J;     // 4 x m
  Mat Hqdd;  // m x m
  Mat Hphidd;
};

void ode_eval(const Vec& s, int nw, const PendulumChainParams& p, bool second, OdeEval& out) {
  const int m_arg = 5 + nw;
  const double m = p.pendulum_mass, l = p.length, g = p.gravity, k = p.spring;
  const double phi = s[2], dphi = s[3];
  const double sn = std::sin(phi), cs = std::cos(phi);
  double F = 0.0;
  for (int j = 0; j < nw; ++j) F += k * (s[5 + j] - s[0]);
  const double num = s[4] + 0.75 * m * g * sn * cs - 0.5 * m * l * dphi * dphi * sn + F;
  const double den = p.cart_mass + m - 0.75 * m * cs * cs;
  const double qdd = num / den;
  const double A = 1.5 * g / l, B = 1.5 / l;

  out.f.resize(4);
  out.f << s[1], qdd, dphi, A * sn + B * cs * qdd;

  Vec dnum = Vec::Zero(m_arg), dden = Vec::Zero(m_arg);
  dnum[0] = -k * nw;
  dnum[2] = 0.75 * m * g * (cs * cs - sn * sn) - 0.5 * m * l * dphi * dphi * cs;
  dnum[3] = -m * l * dphi * sn;
  dnum[4] = 1.0;
  for (int j = 0; j < nw; ++j) dnum[5 + j] = k;
  dden[2] = 1.5 * m * cs * sn;

  const Vec dqdd = dnum / den - num / (den * den) * dden;
  Vec dphidd = B * cs * dqdd;
  dphidd[2] += A * cs - B * sn * qdd;

  out.J = Mat::Zero(4, m_arg);
  out.J(0, 1) = 1.0;
  out.J.row(1) = dqdd.transpose();
  out.J(2, 3) = 1.0;
  out.J.row(3) = dphidd.transpose();
  if (!second) return;

  Mat hnum = Mat::Zero(m_arg, m_arg), hden = Mat::Zero(m_arg, m_arg);
  hnum(2, 2) = -3.0 * m * g * sn * cs + 0.5 * m * l * dphi * dphi * sn;
  hnum(2, 3) = hnum(3, 2) = -m * l * dphi * cs;
  hnum(3, 3) = -m * l * sn;
  hden(2, 2) = 1.5 * m * (cs * cs - sn * sn);

  const double d2 = den * den;
  out.Hqdd = hnum / den - (dnum * dden.transpose() + dden * dnum.transpose()) / d2 -
             num / d2 * hden + 2.0 * num / (d2 * den) * dden * dden.transpose();
  out.Hphidd = B * cs * out.Hqdd;
  Vec e = Vec::Zero(m_arg);
  e[2] = 1.0;
  out.Hphidd -= B * sn * (e * dqdd.transpose() + dqdd * e.transpose());
  out.Hphidd(2, 2) += -A * sn - B * cs * qdd;
}

}  // namespace

PendulumDynamics::PendulumDynamics(PendulumChainParams params, double h, bool has_left,
                                   bool has_right)
    : p_(params), h_(h), nw_(static_cast<int>(has_left) + static_cast<int>(has_right)) {
  p_.validate();
  require(h_ > 0.0, ErrorCode::InvalidInput, "step size must be positive");
}

Vec PendulumDynamics::step(const Vec& x, const Vec& u, const Vec& w) const {
  Vec value;
  Mat jac;
  evaluate(x, u, w, nullptr, value, jac, nullptr);
  return value;
}

Mat PendulumDynamics::jacobian(const Vec& x, const Vec& u, const Vec& w) const {
  Vec value;
  Mat jac;
  evaluate(x, u, w, nullptr, value, jac, nullptr);
  return jac;
}

Mat PendulumDynamics::weighted_hessian(const Vec& x, const Vec& u, const Vec& w,
                                       const Vec& c) const {
  Vec value;
  Mat jac, hess;
  evaluate(x, u, w, &c, value, jac, &hess);
  return hess;
}

// RK4 with forward sensitivities of every stage input; the weighted Hessian is
// assembled from stage adjoints: sum_i S_i' (sum_j w_ij Hess f_j(s_i)) S_i.
void PendulumDynamics::evaluate(const Vec& x, const Vec& u, const Vec& w, const Vec* c,
                                Vec& value, Mat& jac, Mat* hess) const {
  const int m = 5 + nw_;
  const bool second = c != nullptr && hess != nullptr;
  const double h = h_;
  const double stage_coef[4] = {0.0, 0.5 * h, 0.5 * h, h};
  const double weight[4] = {h / 6.0, h / 3.0, h / 3.0, h / 6.0};

  Vec s(m);
  s.segment(4, 1) = u;
  s.tail(nw_) = w;
  Mat S = Mat::Zero(m, m);  // d(stage input)/d(x, u, w)
  S.bottomRightCorner(m - 4, m - 4).setIdentity();

  OdeEval ev[4];
  Mat Sst[4];
  Mat dk[4];
  Vec ks[4];
  value = x;
  jac = Mat::Zero(4, m);
  jac.leftCols(4).setIdentity();
  for (int i = 0; i < 4; ++i) {
    s.head(4) = x;
    S.topRows(4).setZero();
    S.topLeftCorner(4, 4).setIdentity();
    if (i > 0) {
      s.head(4) += stage_coef[i] * ks[i - 1];
      S.topRows(4) += stage_coef[i] * dk[i - 1];
    }
    ode_eval(s, nw_, p_, second, ev[i]);
    ks[i] = ev[i].f;
    dk[i] = ev[i].J * S;
    Sst[i] = S;
    value += weight[i] * ks[i];
    jac += weight[i] * dk[i];
  }
  require(value.allFinite(), ErrorCode::EvaluationFailure, "pendulum RK4 step is not finite");
  if (!second) return;

  // Adjoints of the stage outputs k_i for the functional c' x+.
  Vec adj[4];
  adj[3] = weight[3] * (*c);
  for (int i = 2; i >= 0; --i) {
    adj[i] = weight[i] * (*c) + stage_coef[i + 1] * ev[i + 1].J.leftCols(4).transpose() * adj[i + 1];
  }
  *hess = Mat::Zero(m, m);
  for (int i = 0; i < 4; ++i) {
    Mat inner = adj[i][1] * ev[i].Hqdd + adj[i][3] * ev[i].Hphidd;
    *hess += Sst[i].transpose() * inner * Sst[i];
  }
}

Vec chain_ode(const Vec& x, const Vec& u, const PendulumChainParams& p) {
  const int S = static_cast<int>(u.size());
  require(x.size() == 4 * S, ErrorCode::DimensionMismatch, "chain state size");
  Vec dx(4 * S);
  for (int i = 0; i < S; ++i) {
    std::optional<double> left, right;
    if (i > 0) left = x[4 * (i - 1)];
    if (i + 1 < S) right = x[4 * (i + 1)];
    dx.segment(4 * i, 4) = pendulum_ode(x.segment(4 * i, 4), u[i], left, right, p);
  }
  return dx;
}

Vec chain_step(const Vec& x, const Vec& u, double h, const PendulumChainParams& p) {
  return rk4_step([&](const Vec& y) { return chain_ode(y, u, p); }, x, h);
}

std::pair<Mat, Mat> linearize_discrete(const std::function<Vec(const Vec&, const Vec&)>& f,
                                       const Vec& x0, const Vec& u0, double step) {
  Mat A = fd_jacobian([&](const Vec& x) { return f(x, u0); }, x0, step);
  Mat B = fd_jacobian([&](const Vec& u) { return f(x0, u); }, u0, step);
  return {A, B};
}

double riccati_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  const Mat BtP = B.transpose() * P;
  const Mat rhs = A.transpose() * P * A -
                  (A.transpose() * P * B) * (R + BtP * B).ldlt().solve(BtP * A) + Q;
  return (P - rhs).cwiseAbs().maxCoeff();
}

RiccatiResult riccati_design(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol,
                             int max_iterations) {
  require(A.rows() == A.cols() && B.rows() == A.rows() && Q.rows() == A.rows() &&
              R.rows() == B.cols(),
          ErrorCode::DimensionMismatch, "Riccati dimensions");
  RiccatiResult res;
  Mat P = Q;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 1; it <= max_iterations; ++it) {
    const Mat BtP = B.transpose() * P;
    Mat next = A.transpose() * P * A -
               (A.transpose() * P * B) * (R + BtP * B).ldlt().solve(BtP * A) + Q;
    next = 0.5 * (next + next.transpose());
    const double diff = (next - P).cwiseAbs().maxCoeff();
    P = next;
    res.iterations = it;
    require(P.allFinite(), ErrorCode::NoConvergence, "Riccati iteration diverged");
    if (diff <= tol) break;
    // Stop once rounding noise dominates the update.
    if (diff < best) {
      best = diff;
      stalled = 0;
    } else if (++stalled > 50) {
      break;
    }
    if (it == max_iterations) throw Error(ErrorCode::NoConvergence, "Riccati iteration limit");
  }
  res.P = P;
  res.K = -(B.transpose() * P * B + R).ldlt().solve(B.transpose() * P * A);
  res.residual = riccati_residual(A, B, Q, R, P);
  return res;
}

double delta_q_min_eig(const Mat& A, const Mat& B, const Mat& K, const Mat& P, const Mat& Q,
                       const Mat& R, double mu, double beta2) {
  const Mat AK = A + B * K;
  const Mat QK = Q + K.transpose() * R * K;
  Mat dQ = beta2 * (P - AK.transpose() * P * AK) / mu - QK;
  dQ = 0.5 * (dQ + dQ.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(dQ, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Beta2Result beta2_search(const Mat& A, const Mat& B, const Mat& K, const Mat& P, const Mat& Q,
                         const Mat& R, double mu, double step, double beta2_max) {
  require(mu > 1.0, ErrorCode::InvalidInput, "mu must exceed 1");
  const Mat AK = A + B * K;
  Eigen::EigenSolver<Mat> es(AK, false);
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    throw Error(ErrorCode::NotStabilizing,
                "A + BK is not Schur stable (spectral radius " + std::to_string(radius) + ")");
  }
  Beta2Result r;
  for (int j = 0;; ++j) {
    const double b2 = 1.0 + step * j;
    if (b2 > beta2_max) break;
    const double e = delta_q_min_eig(A, B, K, P, Q, R, mu, b2);
    if (e > 0.0) {
      r.beta2 = b2;
      r.min_eig = e;
      r.grid_index = j;
      return r;
    }
  }
  throw Error(ErrorCode::NotStabilizing, "no beta2 on the grid makes Delta Q positive definite");
}

Mat pendulum_Q() {
  Vec d(4);
  d << 1.0, 1e-4, 10.0, 1e-4;
  return d.asDiagonal();
}

Mat pendulum_R() { return Mat::Constant(1, 1, 1e-3); }

TerminalDesign design_terminal(const PendulumChainParams& p, const Mat& Q_i, const Mat& R_i,
                               double delta, double mu) {
  p.validate();
  auto f_single = [&](const Vec& x, const Vec& u) {
    return rk4_step([&](const Vec& y) { return pendulum_ode(y, u[0], std::nullopt, std::nullopt, p); },
                    x, delta);
  };
  auto [Ai, Bi] = linearize_discrete(f_single, Vec::Zero(4), Vec::Zero(1));
  RiccatiResult ric = riccati_design(Ai, Bi, Q_i, R_i);

  const int S = p.S;
  auto f_chain = [&](const Vec& x, const Vec& u) { return chain_step(x, u, delta, p); };
  auto [A, B] = linearize_discrete(f_chain, Vec::Zero(4 * S), Vec::Zero(S));
  std::vector<Mat> Ks(S, ric.K), Ps(S, ric.P), Qs(S, Q_i), Rs(S, R_i);
  const Mat K = block_diagonal(Ks), P = block_diagonal(Ps), Q = block_diagonal(Qs),
            R = block_diagonal(Rs);

  TerminalDesign d;
  d.P_i = ric.P;
  d.K_i = ric.K;
  d.mu = mu;
  d.riccati_residual = ric.residual;
  Eigen::EigenSolver<Mat> es(A + B * K, false);
  d.closed_loop_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  const Beta2Result b = beta2_search(A, B, K, P, Q, R, mu);
  d.beta2 = b.beta2;
  d.min_eig = b.min_eig;
  return d;
}

double terminal_min_eig(const PendulumChainParams& p, const TerminalDesign& d, const Mat& Q_i,
                        const Mat& R_i, double delta, double beta2) {
  const int S = p.S;
  auto f_chain = [&](const Vec& x, const Vec& u) { return chain_step(x, u, delta, p); };
  auto [A, B] = linearize_discrete(f_chain, Vec::Zero(4 * S), Vec::Zero(S));
  std::vector<Mat> Ks(S, d.K_i), Ps(S, d.P_i), Qs(S, Q_i), Rs(S, R_i);
  return delta_q_min_eig(A, B, block_diagonal(Ks), block_diagonal(Ps), block_diagonal(Qs),
                         block_diagonal(Rs), d.mu, beta2);
}

OcpSpec make_chain_ocp(const PendulumChainParams& p, int N, double h, const Mat& Q_i,
                       const Mat& R_i, const Mat& P_i, double beta, double beta2,
                       double copy_penalty) {
  p.validate();
  OcpSpec spec;
  spec.N = N;
  spec.h = h;
  spec.beta = beta;
  spec.beta2 = beta2;
  spec.copy_penalty = copy_penalty;
  for (int i = 0; i < p.S; ++i) {
    SubsystemOcp s;
    const bool left = i > 0, right = i + 1 < p.S;
    s.dynamics = std::make_shared<PendulumDynamics>(p, h, left, right);
    s.Q = Q_i;
    s.R = R_i;
    s.P = P_i;
    s.u_min = Vec::Constant(1, -p.u_max);
    s.u_max = Vec::Constant(1, p.u_max);
    if (left) s.links.push_back({i - 1, {0}});
    if (right) s.links.push_back({i + 1, {0}});
    spec.subsystems.push_back(std::move(s));
  }
  return spec;
}

}  // namespace dsqp

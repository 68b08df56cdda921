#pragma once

#include "dsqp/admm.hpp"
#include "dsqp/config.hpp"
#include "dsqp/nlp.hpp"
#include "dsqp/qp.hpp"

#include <optional>
#include <random>

namespace dsqp::testing {

inline Mat random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Vec random_vector(std::mt19937_64& rng, int n) {
  return random_matrix(rng, n, 1).col(0);
}

inline Mat random_spd(std::mt19937_64& rng, int n, double shift = 0.5) {
  const Mat a = random_matrix(rng, n, n);
  return a * a.transpose() + shift * Mat::Identity(n, n);
}

/// Random strictly convex QP whose feasible set contains a known point.
inline DenseQp random_qp(std::mt19937_64& rng, int n, int m_eq, int m_in) {
  DenseQp qp;
  qp.H = random_spd(rng, n);
  qp.q = random_vector(rng, n);
  const Vec y0 = random_vector(rng, n);
  qp.A_eq = random_matrix(rng, m_eq, n);
  qp.b_eq = qp.A_eq * y0;
  qp.A_in = random_matrix(rng, m_in, n);
  std::uniform_real_distribution<double> slack(0.0, 1.0);
  qp.b_in = qp.A_in * y0;
  for (int i = 0; i < m_in; ++i) qp.b_in[i] += slack(rng);
  return qp;
}

/// Brute force: every subset of inequalities as equalities; keep the feasible,
/// dual-feasible candidate with the smallest objective.
inline std::optional<Vec> enumerate_qp(const DenseQp& qp) {
  const int n = static_cast<int>(qp.num_vars()), me = static_cast<int>(qp.num_eq()),
            mi = static_cast<int>(qp.num_ineq());
  std::optional<Vec> best;
  double best_f = 0.0;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < mi; ++j)
      if (mask & (1u << j)) act.push_back(j);
    const int m = me + static_cast<int>(act.size());
    if (m > n) continue;
    Mat K = Mat::Zero(n + m, n + m);
    Vec rhs = Vec::Zero(n + m);
    K.topLeftCorner(n, n) = qp.H;
    rhs.head(n) = -qp.q;
    Mat A(m, n);
    Vec b(m);
    if (me) {
      A.topRows(me) = qp.A_eq;
      b.head(me) = qp.b_eq;
    }
    for (std::size_t k = 0; k < act.size(); ++k) {
      A.row(me + k) = qp.A_in.row(act[k]);
      b[me + k] = qp.b_in[act[k]];
    }
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
    rhs.tail(m) = b;
    Eigen::FullPivLU<Mat> lu(K);
    if (lu.rank() < n + m) continue;
    const Vec s = lu.solve(rhs);
    const Vec y = s.head(n);
    bool ok = true;
    for (int j = 0; j < mi && ok; ++j) ok = qp.A_in.row(j).dot(y) <= qp.b_in[j] + 1e-9;
    for (std::size_t k = 0; k < act.size() && ok; ++k) ok = s[n + me + k] >= -1e-9;
    if (!ok) continue;
    const double f = 0.5 * y.dot(qp.H * y) + qp.q.dot(y);
    if (!best || f < best_f) {
      best = y;
      best_f = f;
    }
  }
  return best;
}

/// The SQP subproblem of `blocks` assembled as one sparse QP, solved centrally.
/// Returns (z, nu, mu, lambda) of the subproblem.
inline PrimalDualPoint solve_stacked_qp(const PartitionedNlp& nlp, const std::vector<LocalQp>& blocks) {
  const int n = nlp.n(), ng = nlp.n_g(), nh = nlp.n_h(), nc = nlp.n_c();
  Mat H = Mat::Zero(n, n), Aeq = Mat::Zero(ng + nc, n), Ain = Mat::Zero(nh, n);
  Vec q(n), beq(ng + nc), bin(nh);
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const auto& b = blocks[i];
    const int o = nlp.var_offset(i), ni = nlp.num_vars(i), e = nlp.eq_offset(i), m = nlp.ineq_offset(i);
    H.block(o, o, ni, ni) = b.H;
    q.segment(o, ni) = b.grad - b.H * b.z_lin;
    Aeq.block(e, o, b.Jg.rows(), ni) = b.Jg;
    beq.segment(e, b.Jg.rows()) = b.Jg * b.z_lin - b.g;
    Ain.block(m, o, b.Jh.rows(), ni) = b.Jh;
    bin.segment(m, b.Jh.rows()) = b.Jh * b.z_lin - b.h;
  }
  if (nc) {
    Aeq.bottomRows(nc) = Mat(nlp.E_stacked());
    beq.tail(nc) = nlp.c();
  }
  SparseQp qp{H.sparseView(), q, Aeq.sparseView(), beq, Ain.sparseView(), bin};
  QpOptions o;
  o.tol = 1e-11;
  const QpSolution s = solve_sparse(qp, nullptr, o);
  PrimalDualPoint p;
  p.z = s.y;
  p.nu = s.nu.head(ng);
  p.lambda = s.nu.tail(nc);
  p.mu = s.mu;
  return p;
}

/// Case-1 settings on a shorter chain and horizon, for fast tests.
inline RunConfig small_chain_config(int S = 3, int N = 4) {
  RunConfig c = case_config(1);
  c.plant.S = S;
  c.N = N;
  c.horizon = N * c.h;
  return c;
}

}  // namespace dsqp::testing

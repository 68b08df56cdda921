#pragma once

// Dual active-set iteration shared by the dense and sparse QP backends.
//
// Invariant between outer iterations: y minimizes the objective subject to the
// equalities and the working set W, and every working-set multiplier is >= 0.
// Each outer iteration adds the most violated inequality (lowest index on ties),
// dropping working-set constraints whose multipliers would turn negative.

#include "dsqp/qp.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace dsqp::detail {

template <class Backend>
QpSolution dual_active_set(Backend& kkt, const QpSolution* warm, const QpOptions& opt) {
  const int n = kkt.num_vars();
  const int m_eq = kkt.num_eq();
  const int m_in = kkt.num_ineq();
  const Vec& q = kkt.q();
  const Vec& b_eq = kkt.b_eq();
  const Vec& b_in = kkt.b_in();

  std::vector<int> working;
  if (warm != nullptr) {
    std::vector<char> seen(m_in, 0);
    for (int j : warm->working_set) {
      if (j >= 0 && j < m_in && !seen[j]) {
        seen[j] = 1;
        working.push_back(j);
      }
    }
  }

  Vec y(n), lam;
  auto rhs_b = [&]() {
    Vec r(m_eq + static_cast<int>(working.size()));
    r.head(m_eq) = b_eq;
    for (std::size_t k = 0; k < working.size(); ++k) r[m_eq + k] = b_in[working[k]];
    return r;
  };
  auto primal_solve = [&]() {
    kkt.factor(working);
    kkt.solve(-q, rhs_b(), y, lam);
  };

  int iterations = 0;
  // Warm start: drop dependent rows first, then constraints with negative multipliers.
  while (true) {
    ++iterations;
    try {
      primal_solve();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RankDeficient && !working.empty()) {
        working.pop_back();
        continue;
      }
      throw;
    }
    int drop = -1;
    double most_negative = 0.0;
    for (std::size_t k = 0; k < working.size(); ++k) {
      if (lam[m_eq + k] < most_negative) {
        most_negative = lam[m_eq + k];
        drop = static_cast<int>(k);
      }
    }
    if (drop < 0) break;
    working.erase(working.begin() + drop);
  }

  std::vector<char> in_working(m_in, 0);
  for (int j : working) in_working[j] = 1;

  Vec a_p(n), dy(n), dlam;
  while (true) {
    int p = -1;
    double worst = opt.tol;
    for (int j = 0; j < m_in; ++j) {
      if (in_working[j]) continue;
      const double v = kkt.ineq_dot(j, y) - b_in[j];
      if (v > worst) {
        worst = v;
        p = j;
      }
    }
    if (p < 0) break;

    kkt.ineq_row(p, a_p);
    double u_p = 0.0;
    while (true) {
      if (++iterations > opt.max_iterations) {
        throw Error(ErrorCode::MaxIterations,
                    "active-set iteration limit " + std::to_string(opt.max_iterations));
      }
      const int m_w = m_eq + static_cast<int>(working.size());
      kkt.solve(-a_p, Vec::Zero(m_w), dy, dlam);

      double t_dual = std::numeric_limits<double>::infinity();
      int block = -1;
      for (std::size_t k = 0; k < working.size(); ++k) {
        const double dl = dlam[m_eq + k];
        if (dl < 0.0) {
          const double r = std::max(0.0, lam[m_eq + k]) / (-dl);
          if (r < t_dual) {
            t_dual = r;
            block = static_cast<int>(k);
          }
        }
      }

      const double slope = a_p.dot(dy);
      const bool dependent = kkt.dependent(a_p, dy) || !(slope < 0.0);
      if (dependent) {
        if (block < 0) {
          throw Error(ErrorCode::Infeasible,
                      "inequality " + std::to_string(p) + " cannot be satisfied");
        }
        lam += t_dual * dlam;
        u_p += t_dual;
      } else {
        const double slack = kkt.ineq_dot(p, y) - b_in[p];
        const double t_full = -slack / slope;
        if (t_full <= t_dual) {
          working.push_back(p);
          in_working[p] = 1;
          primal_solve();
          break;
        }
        y += t_dual * dy;
        lam += t_dual * dlam;
        u_p += t_dual;
      }
      // Partial step: the blocking constraint leaves the working set.
      in_working[working[block]] = 0;
      working.erase(working.begin() + block);
      Vec shrunk(lam.size() - 1);
      shrunk.head(m_eq + block) = lam.head(m_eq + block);
      shrunk.tail(lam.size() - m_eq - block - 1) = lam.tail(lam.size() - m_eq - block - 1);
      lam = std::move(shrunk);
      kkt.factor(working);
    }
  }

  QpSolution sol;
  sol.y = y;
  sol.nu = lam.head(m_eq);
  sol.mu = Vec::Zero(m_in);
  for (std::size_t k = 0; k < working.size(); ++k) {
    sol.mu[working[k]] = std::max(0.0, lam[m_eq + k]);
  }
  sol.working_set = working;
  for (int j = 0; j < m_in; ++j) {
    if (kkt.ineq_dot(j, y) - b_in[j] >= -opt.activation_tol) sol.active_set.push_back(j);
  }
  sol.iterations = iterations;
  return sol;
}

}  // namespace dsqp::detail

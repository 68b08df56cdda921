#include "dsqp/nlp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <set>

namespace dsqp {

Mat SubsystemProblem::gauss_newton_hessian(const Vec&) const {
  throw Error(ErrorCode::InvalidInput, "subsystem has no Gauss-Newton Hessian");
}

SubsystemEval SubsystemProblem::evaluate(const Vec& z, const Vec* nu, const Vec* mu) const {
  SubsystemEval e;
  e.f = objective(z);
  e.grad = gradient(z);
  e.g = eq(z);
  e.Jg = eq_jacobian(z);
  e.h = ineq(z);
  e.Jh = ineq_jacobian(z);
  if (nu != nullptr && mu != nullptr) e.hess = lagrangian_hessian(z, *nu, *mu);
  return e;
}

FunctionalSubsystem::FunctionalSubsystem(Callbacks cb) : cb_(std::move(cb)) {
  require(cb_.n >= 0 && cb_.f && cb_.grad && cb_.hess_f, ErrorCode::InvalidInput,
          "functional subsystem needs f, grad and hess_f");
  require(cb_.n_g == 0 || (cb_.g && cb_.jac_g), ErrorCode::InvalidInput, "missing g callbacks");
  require(cb_.n_h == 0 || (cb_.h && cb_.jac_h), ErrorCode::InvalidInput, "missing h callbacks");
}

FunctionalSubsystem FunctionalSubsystem::quadratic(const Mat& H, const Vec& q, const Mat& A_eq,
                                                   const Vec& b_eq, const Mat& A_in,
                                                   const Vec& b_in) {
  Callbacks cb;
  cb.n = static_cast<int>(H.rows());
  cb.n_g = static_cast<int>(A_eq.rows());
  cb.n_h = static_cast<int>(A_in.rows());
  cb.f = [H, q](const Vec& z) { return 0.5 * z.dot(H * z) + q.dot(z); };
  cb.grad = [H, q](const Vec& z) -> Vec { return H * z + q; };
  cb.hess_f = [H](const Vec&) -> Mat { return H; };
  cb.g = [A_eq, b_eq](const Vec& z) -> Vec { return A_eq * z - b_eq; };
  cb.jac_g = [A_eq](const Vec&) -> Mat { return A_eq; };
  cb.h = [A_in, b_in](const Vec& z) -> Vec { return A_in * z - b_in; };
  cb.jac_h = [A_in](const Vec&) -> Mat { return A_in; };
  return FunctionalSubsystem(std::move(cb));
}

Vec FunctionalSubsystem::eq(const Vec& z) const { return cb_.n_g ? cb_.g(z) : Vec(0); }
Mat FunctionalSubsystem::eq_jacobian(const Vec& z) const {
  return cb_.n_g ? cb_.jac_g(z) : Mat(0, cb_.n);
}
Vec FunctionalSubsystem::ineq(const Vec& z) const { return cb_.n_h ? cb_.h(z) : Vec(0); }
Mat FunctionalSubsystem::ineq_jacobian(const Vec& z) const {
  return cb_.n_h ? cb_.jac_h(z) : Mat(0, cb_.n);
}

Mat FunctionalSubsystem::lagrangian_hessian(const Vec& z, const Vec& nu, const Vec& mu) const {
  Mat H = cb_.hess_f(z);
  if (cb_.n_g && cb_.hess_g) H += cb_.hess_g(z, nu);
  if (cb_.n_h && cb_.hess_h) H += cb_.hess_h(z, mu);
  return H;
}

Mat FunctionalSubsystem::gauss_newton_hessian(const Vec& z) const {
  if (!cb_.gauss_newton) return SubsystemProblem::gauss_newton_hessian(z);
  return cb_.gauss_newton(z);
}

PartitionedNlp::PartitionedNlp(std::vector<std::shared_ptr<const SubsystemProblem>> subsystems,
                               std::vector<SpMat> E, Vec c)
    : subs_(std::move(subsystems)), E_(std::move(E)), c_(std::move(c)) {
  const int S = static_cast<int>(subs_.size());
  require(static_cast<int>(E_.size()) == S, ErrorCode::DimensionMismatch,
          "one coupling matrix per subsystem");
  var_off_.assign(S + 1, 0);
  eq_off_.assign(S + 1, 0);
  ineq_off_.assign(S + 1, 0);
  for (int i = 0; i < S; ++i) {
    require(subs_[i] != nullptr, ErrorCode::InvalidInput, "null subsystem");
    var_off_[i + 1] = var_off_[i] + subs_[i]->num_vars();
    eq_off_[i + 1] = eq_off_[i] + subs_[i]->num_eq();
    ineq_off_[i + 1] = ineq_off_[i] + subs_[i]->num_ineq();
  }
  n_ = var_off_[S];
  n_g_ = eq_off_[S];
  n_h_ = ineq_off_[S];
  const int nc = static_cast<int>(c_.size());
  for (int i = 0; i < S; ++i) {
    if (E_[i].rows() == 0 && E_[i].cols() == 0) E_[i].resize(nc, subs_[i]->num_vars());
    require(E_[i].rows() == nc && E_[i].cols() == subs_[i]->num_vars(),
            ErrorCode::DimensionMismatch, "E_" + std::to_string(i) + " has wrong shape");
  }

  // Stacked E and per-row ownership.
  std::vector<Triplet> trip;
  std::vector<std::vector<std::pair<int, int>>> row_entries(nc);
  std::vector<std::vector<double>> row_vals(nc);
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k < E_[i].outerSize(); ++k) {
      for (SpMat::InnerIterator it(E_[i], k); it; ++it) {
        if (it.value() == 0.0) continue;
        trip.emplace_back(it.row(), var_off_[i] + it.col(), it.value());
        row_entries[it.row()].push_back({i, static_cast<int>(it.col())});
        row_vals[it.row()].push_back(it.value());
      }
    }
  }
  E_all_.resize(nc, n_);
  E_all_.setFromTriplets(trip.begin(), trip.end());
  E_all_.makeCompressed();

  in_.assign(S, {});
  out_.assign(S, {});
  nbr_.assign(S, {});
  std::vector<std::set<int>> in_set(S), out_set(S);
  rows_.resize(nc);
  for (int r = 0; r < nc; ++r) {
    const auto& e = row_entries[r];
    if (e.size() != 2 || e[0].first == e[1].first) {
      throw Error(ErrorCode::NotTwoAssigned,
                  "consensus row " + std::to_string(r) + " does not couple exactly two subsystems");
    }
    int a = 0, b = 1;
    if (row_vals[r][0] < 0.0 && row_vals[r][1] > 0.0) std::swap(a, b);
    ConsensusRow row;
    row.plus_sub = e[a].first;
    row.plus_index = e[a].second;
    row.plus_coef = row_vals[r][a];
    row.minus_sub = e[b].first;
    row.minus_index = e[b].second;
    row.minus_coef = row_vals[r][b];
    rows_[r] = row;
    in_set[row.minus_sub].insert(row.plus_sub);
    out_set[row.plus_sub].insert(row.minus_sub);
  }
  for (int i = 0; i < S; ++i) {
    in_[i].assign(in_set[i].begin(), in_set[i].end());
    out_[i].assign(out_set[i].begin(), out_set[i].end());
    std::set<int> u(in_set[i]);
    u.insert(out_set[i].begin(), out_set[i].end());
    nbr_[i].assign(u.begin(), u.end());
  }

  if (nc > 0) {
    SpMat EEt = E_all_ * SpMat(E_all_.transpose());
    Eigen::SimplicialLDLT<SpMat> ldlt(EEt);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
      const Vec d = ldlt.vectorD();
      const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
      ok = (d.array() > 1e-10 * scale).all();
    }
    if (!ok) throw Error(ErrorCode::RankDeficient, "consensus matrix E lacks full row rank");
  }
}

Vec PartitionedNlp::stack_z(const std::vector<Vec>& parts) const {
  require(static_cast<int>(parts.size()) == num_subsystems(), ErrorCode::DimensionMismatch,
          "stack_z part count");
  Vec z(n_);
  for (int i = 0; i < num_subsystems(); ++i) {
    require(parts[i].size() == num_vars(i), ErrorCode::DimensionMismatch, "stack_z part size");
    z.segment(var_off_[i], num_vars(i)) = parts[i];
  }
  return z;
}

std::vector<Vec> PartitionedNlp::split_z(const Vec& z) const {
  require(z.size() == n_, ErrorCode::DimensionMismatch, "split_z size");
  std::vector<Vec> parts(num_subsystems());
  for (int i = 0; i < num_subsystems(); ++i) parts[i] = z.segment(var_off_[i], num_vars(i));
  return parts;
}

PrimalDualPoint PrimalDualPoint::zeros(const PartitionedNlp& nlp) {
  return {Vec::Zero(nlp.n()), Vec::Zero(nlp.n_g()), Vec::Zero(nlp.n_h()), Vec::Zero(nlp.n_c())};
}

Vec PrimalDualPoint::stacked() const {
  Vec s(size());
  s << z, nu, mu, lambda;
  return s;
}

double distance(const PrimalDualPoint& a, const PrimalDualPoint& b) {
  return std::sqrt((a.z - b.z).squaredNorm() + (a.nu - b.nu).squaredNorm() +
                   (a.mu - b.mu).squaredNorm() + (a.lambda - b.lambda).squaredNorm());
}

double kkt_residual(const PartitionedNlp& nlp, const PrimalDualPoint& p) {
  require(p.z.size() == nlp.n() && p.nu.size() == nlp.n_g() && p.mu.size() == nlp.n_h() &&
              p.lambda.size() == nlp.n_c(),
          ErrorCode::DimensionMismatch, "primal-dual point does not match the NLP");
  double r = 0.0;
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const auto& sub = nlp.subsystem(i);
    const Vec zi = p.z_i(nlp, i);
    const Vec nui = p.nu_i(nlp, i);
    const Vec mui = p.mu_i(nlp, i);
    Vec stat = sub.gradient(zi);
    if (nlp.n_c() > 0) stat += nlp.E(i).transpose() * p.lambda;
    if (sub.num_eq() > 0) {
      stat += sub.eq_jacobian(zi).transpose() * nui;
      r = std::max(r, sub.eq(zi).lpNorm<Eigen::Infinity>());
    }
    if (sub.num_ineq() > 0) {
      stat += sub.ineq_jacobian(zi).transpose() * mui;
      const Vec h = sub.ineq(zi);
      for (Eigen::Index j = 0; j < h.size(); ++j) {
        r = std::max(r, std::max(h[j], 0.0));
        r = std::max(r, std::abs(mui[j] * h[j]));
        r = std::max(r, std::max(-mui[j], 0.0));
      }
    }
    if (stat.size() > 0) r = std::max(r, stat.lpNorm<Eigen::Infinity>());
  }
  if (nlp.n_c() > 0) r = std::max(r, (nlp.E_stacked() * p.z - nlp.c()).lpNorm<Eigen::Infinity>());
  return r;
}

namespace {

double rel_error(const Mat& analytic, const Mat& fd) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

Vec default_multipliers(int n, double phase) {
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = 0.5 + 0.4 * std::sin(phase + 0.7 * k);
  return v;
}

}  // namespace

DerivativeReport check_derivatives(const PartitionedNlp& nlp, const Vec& z, double tol,
                                   const Vec* nu, const Vec* mu) {
  DerivativeReport rep;
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const auto& sub = nlp.subsystem(i);
    const Vec zi = z.segment(nlp.var_offset(i), nlp.num_vars(i));
    const Vec nui = nu ? Vec(nu->segment(nlp.eq_offset(i), nlp.num_eq(i)))
                       : default_multipliers(sub.num_eq(), 1.0);
    const Vec mui = mu ? Vec(mu->segment(nlp.ineq_offset(i), nlp.num_ineq(i)))
                       : default_multipliers(sub.num_ineq(), 2.0);
    DerivativeBlockError e;
    Mat fd_grad = fd_jacobian([&](const Vec& x) { return Vec::Constant(1, sub.objective(x)); }, zi);
    e.gradient = rel_error(sub.gradient(zi).transpose(), fd_grad);
    if (sub.num_eq() > 0) {
      e.eq_jacobian = rel_error(sub.eq_jacobian(zi), fd_jacobian([&](const Vec& x) { return sub.eq(x); }, zi));
    }
    if (sub.num_ineq() > 0) {
      e.ineq_jacobian =
          rel_error(sub.ineq_jacobian(zi), fd_jacobian([&](const Vec& x) { return sub.ineq(x); }, zi));
    }
    auto lag_grad = [&](const Vec& x) -> Vec {
      Vec g = sub.gradient(x);
      if (sub.num_eq() > 0) g += sub.eq_jacobian(x).transpose() * nui;
      if (sub.num_ineq() > 0) g += sub.ineq_jacobian(x).transpose() * mui;
      return g;
    };
    e.hessian = rel_error(sub.lagrangian_hessian(zi, nui, mui), fd_jacobian(lag_grad, zi));
    rep.per_subsystem.push_back(e);
    rep.worst.gradient = std::max(rep.worst.gradient, e.gradient);
    rep.worst.eq_jacobian = std::max(rep.worst.eq_jacobian, e.eq_jacobian);
    rep.worst.ineq_jacobian = std::max(rep.worst.ineq_jacobian, e.ineq_jacobian);
    rep.worst.hessian = std::max(rep.worst.hessian, e.hessian);
  }
  rep.passed = rep.worst.gradient <= tol && rep.worst.eq_jacobian <= tol &&
               rep.worst.ineq_jacobian <= tol && rep.worst.hessian <= tol;
  return rep;
}

}  // namespace dsqp

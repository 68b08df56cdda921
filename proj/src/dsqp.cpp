#include "dsqp/dsqp.hpp"

#include "parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace dsqp {

HessianMode parse_hessian_mode(const std::string& s) {
  if (s == "exact") return HessianMode::Exact;
  if (s == "gauss_newton" || s == "gn") return HessianMode::GaussNewton;
  if (s == "auto") return HessianMode::Auto;
  throw Error(ErrorCode::InvalidInput, "unknown Hessian mode '" + s + "'");
}

const char* to_string(HessianMode m) {
  switch (m) {
    case HessianMode::Exact: return "exact";
    case HessianMode::GaussNewton: return "gauss_newton";
    case HessianMode::Auto: return "auto";
  }
  return "auto";
}

void DsqpSettings::validate() const {
  require(k_max >= 1, ErrorCode::InvalidInput, "k_max must be >= 1");
  require(l_max >= 1, ErrorCode::InvalidInput, "l_max must be >= 1");
  require(rho > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  require(qp_tol > 0.0, ErrorCode::InvalidInput, "qp_tol must be positive");
  require(reg_floor >= 0.0, ErrorCode::InvalidInput, "reg_floor must be >= 0");
}

namespace {

Mat reduced_hessian(const Mat& H, const Mat& Jg) {
  if (Jg.rows() == 0) return H;
  const Mat Z = null_space_basis(Jg);
  return Z.transpose() * H * Z;
}

}  // namespace

bool reduced_hessian_pd(const Mat& H, const Mat& Jg, double floor) {
  Mat R = reduced_hessian(H, Jg);
  if (R.rows() == 0) return true;
  R = 0.5 * (R + R.transpose());
  R.diagonal().array() -= floor;
  Eigen::LLT<Mat> llt(R);
  return llt.info() == Eigen::Success;
}

double reduced_hessian_min_eig(const Mat& H, const Mat& Jg) {
  Mat R = reduced_hessian(H, Jg);
  if (R.rows() == 0) return std::numeric_limits<double>::infinity();
  R = 0.5 * (R + R.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(R, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

QpLinearization build_qp(const PartitionedNlp& nlp, const PrimalDualPoint& p, HessianMode mode,
                         double reg_floor, bool parallel) {
  const int S = nlp.num_subsystems();
  QpLinearization lin;
  lin.blocks.resize(S);
  lin.exact_used.assign(S, 0);
  detail::for_each_index(S, parallel, [&](int i) {
    const auto& sub = nlp.subsystem(i);
    const Vec zi = p.z_i(nlp, i);
    const Vec nui = p.nu_i(nlp, i);
    const Vec mui = p.mu_i(nlp, i);
    const bool want_exact = mode != HessianMode::GaussNewton || !sub.has_gauss_newton();
    SubsystemEval e = want_exact ? sub.evaluate(zi, &nui, &mui) : sub.evaluate(zi, nullptr, nullptr);
    LocalQp& b = lin.blocks[i];
    bool exact = want_exact;
    if (mode == HessianMode::Auto && sub.has_gauss_newton() &&
        !reduced_hessian_pd(e.hess, e.Jg, reg_floor)) {
      exact = false;
    }
    b.H = exact ? e.hess : sub.gauss_newton_hessian(zi);
    b.H = 0.5 * (b.H + b.H.transpose());
    b.grad = std::move(e.grad);
    b.Jg = std::move(e.Jg);
    b.g = std::move(e.g);
    b.Jh = std::move(e.Jh);
    b.h = std::move(e.h);
    b.z_lin = zi;
    if (b.Jg.rows() == 0) b.Jg.resize(0, zi.size());
    if (b.Jh.rows() == 0) b.Jh.resize(0, zi.size());
    lin.exact_used[i] = exact ? 1 : 0;
    if (!(b.H.allFinite() && b.grad.allFinite() && b.Jg.allFinite() && b.g.allFinite() &&
          b.Jh.allFinite() && b.h.allFinite())) {
      throw Error(ErrorCode::EvaluationFailure,
                  "non-finite derivative in subsystem " + std::to_string(i));
    }
  });
  return lin;
}

DsqpSolver::DsqpSolver(const PartitionedNlp& structure, DsqpSettings settings)
    : settings_(settings),
      admm_(structure, [&] {
        settings.validate();
        AdmmOptions o;
        o.rho = settings.rho;
        o.mode = settings.averaging;
        o.parallel = settings.parallel;
        o.qp.tol = settings.qp_tol;
        return o;
      }()) {}

DsqpResult DsqpSolver::run(const PartitionedNlp& nlp, const PrimalDualPoint& p0,
                           const Vec& gamma0, const PrimalDualPoint* reference,
                           std::vector<DsqpTraceRow>* trace) {
  require(gamma0.size() == nlp.n(), ErrorCode::DimensionMismatch, "gamma0 size");
  DsqpResult res;
  res.p = p0;
  res.gamma = gamma0;
  if (reference) res.dist_history.push_back(distance(res.p, *reference));
  const auto& avg = admm_.averaging();
  for (int k = 0; k < settings_.k_max; ++k) {
    QpLinearization lin = build_qp(nlp, res.p, settings_.hessian, settings_.reg_floor,
                                   settings_.parallel);
    for (char e : lin.exact_used) (e ? res.exact_hessian_blocks : res.gn_hessian_blocks)++;
    AdmmState st;
    st.z = res.p.z;
    st.gamma = res.gamma;
    std::function<void(const AdmmState&)> observer;
    if (trace) {
      observer = [&](const AdmmState& s) {
        PrimalDualPoint q{s.z, s.nu, s.mu, avg.lambda_from_gamma(s.gamma)};
        DsqpTraceRow row;
        row.k = k;
        row.l = s.l;
        row.consensus = nlp.n_c() ? (nlp.E_stacked() * s.z - nlp.c()).lpNorm<Eigen::Infinity>() : 0.0;
        row.kkt = kkt_residual(nlp, q);
        row.dist_ref = reference ? distance(q, *reference) : -1.0;
        trace->push_back(row);
      };
    }
    st = admm_.run(lin.blocks, st, settings_.l_max, observer);
    res.p.z = st.z;
    res.p.nu = st.nu;
    res.p.mu = st.mu;
    res.p.lambda = avg.lambda_from_gamma(st.gamma);
    res.gamma = st.gamma;
    if (!res.p.stacked().allFinite()) throw Error(ErrorCode::Diverged, "dSQP iterate is not finite");
    if (reference) res.dist_history.push_back(distance(res.p, *reference));
  }
  return res;
}

DsqpResult dsqp_run(const PartitionedNlp& nlp, const PrimalDualPoint& p0,
                    const DsqpSettings& settings, const Vec* gamma0,
                    const PrimalDualPoint* reference) {
  DsqpSolver solver(nlp, settings);
  Vec g = gamma0 ? *gamma0
                 : (nlp.n_c() ? Vec(nlp.E_stacked().transpose() * p0.lambda) : Vec(Vec::Zero(nlp.n())));
  return solver.run(nlp, p0, g, reference);
}

namespace {

SpMat block_diag_sparse(const std::vector<const Mat*>& blocks, int rows, int cols,
                        const std::vector<int>& row_off, const std::vector<int>& col_off) {
  std::vector<Triplet> t;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Mat& m = *blocks[b];
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        if (m(r, c) != 0.0) t.emplace_back(row_off[b] + r, col_off[b] + c, m(r, c));
  }
  SpMat s(rows, cols);
  s.setFromTriplets(t.begin(), t.end());
  s.makeCompressed();
  return s;
}

}  // namespace

KktSolveResult solve_to_kkt(const PartitionedNlp& nlp, const PrimalDualPoint& p0, double tol,
                            int max_outer, HessianMode mode, const QpOptions& qp_options) {
  require(p0.stacked().allFinite(), ErrorCode::InvalidInput, "initial point is not finite");
  const int S = nlp.num_subsystems();
  std::vector<int> voff(S), eoff(S), ioff(S);
  for (int i = 0; i < S; ++i) {
    voff[i] = nlp.var_offset(i);
    eoff[i] = nlp.eq_offset(i);
    ioff[i] = nlp.ineq_offset(i);
  }
  PrimalDualPoint p = p0;
  double res = kkt_residual(nlp, p);
  PrimalDualPoint best = p;
  double best_res = res;
  if (res <= tol) return {p, 0, res};

  QpSolution warm;
  bool have_warm = false;
  for (int it = 1; it <= max_outer; ++it) {
    QpLinearization lin = build_qp(nlp, p, mode);
    std::vector<const Mat*> Hs, Jgs, Jhs;
    Vec q(nlp.n()), beq(nlp.n_g() + nlp.n_c()), bin(nlp.n_h());
    for (int i = 0; i < S; ++i) {
      const auto& b = lin.blocks[i];
      Hs.push_back(&b.H);
      Jgs.push_back(&b.Jg);
      Jhs.push_back(&b.Jh);
      q.segment(voff[i], b.grad.size()) = b.grad - b.H * b.z_lin;
      beq.segment(eoff[i], b.g.size()) = b.Jg * b.z_lin - b.g;
      bin.segment(ioff[i], b.h.size()) = b.Jh * b.z_lin - b.h;
    }
    beq.tail(nlp.n_c()) = nlp.c();
    SparseQp qp;
    qp.H = block_diag_sparse(Hs, nlp.n(), nlp.n(), voff, voff);
    qp.q = q;
    SpMat Jg = block_diag_sparse(Jgs, nlp.n_g(), nlp.n(), eoff, voff);
    std::vector<Triplet> t;
    for (int k = 0; k < Jg.outerSize(); ++k)
      for (SpMat::InnerIterator i(Jg, k); i; ++i) t.emplace_back(i.row(), i.col(), i.value());
    const SpMat& E = nlp.E_stacked();
    for (int k = 0; k < E.outerSize(); ++k)
      for (SpMat::InnerIterator i(E, k); i; ++i) t.emplace_back(nlp.n_g() + i.row(), i.col(), i.value());
    qp.A_eq.resize(nlp.n_g() + nlp.n_c(), nlp.n());
    qp.A_eq.setFromTriplets(t.begin(), t.end());
    qp.b_eq = beq;
    qp.A_in = block_diag_sparse(Jhs, nlp.n_h(), nlp.n(), ioff, voff);
    qp.b_in = bin;

    QpSolution sol;
    try {
      sol = solve_sparse(qp, have_warm ? &warm : nullptr, qp_options);
    } catch (const Error& e) {
      throw KktSolveError(e.code(), std::string("centralized QP failed: ") + e.what(), best, best_res);
    }
    p.z = sol.y;
    p.nu = sol.nu.head(nlp.n_g());
    p.lambda = sol.nu.tail(nlp.n_c());
    p.mu = sol.mu;
    warm = std::move(sol);
    have_warm = true;
    if (!p.stacked().allFinite()) {
      throw KktSolveError(ErrorCode::Diverged, "SQP iterate is not finite", best, best_res);
    }
    res = kkt_residual(nlp, p);
    if (res < best_res) {
      best = p;
      best_res = res;
    }
    if (res <= tol) return {p, it, res};
  }
  throw KktSolveError(ErrorCode::MaxIterations,
                      "SQP did not reach tolerance (best residual " + std::to_string(best_res) + ")",
                      best, best_res);
}

RegularityReport check_regularity(const PartitionedNlp& nlp, const PrimalDualPoint& p,
                                  double activation_tol) {
  RegularityReport rep;
  rep.complementarity_margin = std::numeric_limits<double>::infinity();
  std::vector<Eigen::RowVectorXd> rows;
  Mat G(0, nlp.n());
  int total_rows = nlp.n_g() + nlp.n_c();
  std::vector<std::pair<int, Mat>> active_rows;
  rep.reduced_hessian_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const auto& sub = nlp.subsystem(i);
    const Vec zi = p.z_i(nlp, i), nui = p.nu_i(nlp, i), mui = p.mu_i(nlp, i);
    SubsystemEval e = sub.evaluate(zi, &nui, &mui);
    Mat act(0, zi.size());
    for (Eigen::Index j = 0; j < e.h.size(); ++j) {
      rep.complementarity_margin = std::min(rep.complementarity_margin, std::abs(e.h[j]) + std::abs(mui[j]));
      if (e.h[j] >= -activation_tol) {
        ++rep.active;
        act.conservativeResize(act.rows() + 1, Eigen::NoChange);
        act.row(act.rows() - 1) = e.Jh.row(j);
      } else {
        ++rep.inactive;
      }
    }
    total_rows += static_cast<int>(act.rows());
    active_rows.push_back({i, Mat(e.Jg.rows() + act.rows(), zi.size())});
    active_rows.back().second << e.Jg, act;
    const double ev = reduced_hessian_min_eig(e.hess, e.Jg);
    rep.reduced_hessian_min_eig.push_back(ev);
    rep.reduced_hessian_min = std::min(rep.reduced_hessian_min, ev);
  }
  if (nlp.n_h() == 0) rep.complementarity_margin = std::numeric_limits<double>::infinity();

  G = Mat::Zero(total_rows, nlp.n());
  int r = 0;
  for (const auto& [i, blk] : active_rows) {
    G.block(r, nlp.var_offset(i), blk.rows(), blk.cols()) = blk;
    r += static_cast<int>(blk.rows());
  }
  if (nlp.n_c() > 0) G.bottomRows(nlp.n_c()) = Mat(nlp.E_stacked());
  if (G.rows() == 0) {
    rep.licq_sigma_min = std::numeric_limits<double>::infinity();
  } else if (G.rows() > G.cols()) {
    rep.licq_sigma_min = 0.0;
  } else {
    Mat GG = G * G.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(GG, Eigen::EigenvaluesOnly);
    rep.licq_sigma_min = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
  }
  rep.regular = rep.complementarity_margin > 0.0 && rep.licq_sigma_min > 1e-10 &&
                rep.reduced_hessian_min > 0.0;
  return rep;
}

}  // namespace dsqp

#include "dsqp/certificates.hpp"

#include "parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <random>

namespace dsqp {

std::vector<std::vector<int>> active_sets(const PartitionedNlp& nlp, const Vec& z, double tol) {
  std::vector<std::vector<int>> act(nlp.num_subsystems());
  for (int i = 0; i < nlp.num_subsystems(); ++i) {
    const Vec h = nlp.subsystem(i).ineq(z.segment(nlp.var_offset(i), nlp.num_vars(i)));
    for (Eigen::Index j = 0; j < h.size(); ++j)
      if (h[j] >= -tol) act[i].push_back(static_cast<int>(j));
  }
  return act;
}

QpCertificateInputs certificate_inputs(const PartitionedNlp& nlp, const QpLinearization& lin,
                                       const std::vector<std::vector<int>>& active, double rho) {
  const int S = nlp.num_subsystems();
  require(static_cast<int>(lin.blocks.size()) == S && static_cast<int>(active.size()) == S,
          ErrorCode::DimensionMismatch, "one block and one active set per subsystem");
  QpCertificateInputs in;
  in.rho = rho;
  in.E = nlp.E_stacked();
  for (int i = 0; i < S; ++i) {
    const auto& b = lin.blocks[i];
    in.H.push_back(b.H);
    in.Jg.push_back(b.Jg);
    Mat JA(active[i].size(), b.H.cols());
    for (std::size_t r = 0; r < active[i].size(); ++r) JA.row(r) = b.Jh.row(active[i][r]);
    in.Jh_active.push_back(JA);
  }
  return in;
}

AdmmLtiModel::AdmmLtiModel(const QpCertificateInputs& in) : rho_(in.rho), E_(in.E) {
  require(rho_ > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  const std::size_t S = in.H.size();
  require(in.Jg.size() == S && in.Jh_active.size() == S, ErrorCode::DimensionMismatch,
          "certificate inputs");
  off_.push_back(0);
  double max_x = 0.0;
  for (std::size_t i = 0; i < S; ++i) {
    const Mat& H = in.H[i];
    const int ni = static_cast<int>(H.rows());
    const int me = static_cast<int>(in.Jg[i].rows()), ma = static_cast<int>(in.Jh_active[i].rows());
    const int m = ni + me + ma;
    Mat K = Mat::Zero(m, m);
    K.topLeftCorner(ni, ni) = H + rho_ * Mat::Identity(ni, ni);
    if (me) {
      K.block(0, ni, ni, me) = in.Jg[i].transpose();
      K.block(ni, 0, me, ni) = in.Jg[i];
    }
    if (ma) {
      K.block(0, ni + me, ni, ma) = in.Jh_active[i].transpose();
      K.block(ni + me, 0, ma, ni) = in.Jh_active[i];
    }
    Eigen::FullPivLU<Mat> lu(K);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::SingularKkt, "local KKT matrix of subsystem " + std::to_string(i) +
                                              " is singular");
    }
    Mat rhs = Mat::Zero(m, ni);
    rhs.topRows(ni).setIdentity();
    const Mat X = lu.solve(rhs);
    if (!X.allFinite()) throw Error(ErrorCode::SingularKkt, "local KKT solve is not finite");
    max_x = std::max(max_x, spectral_norm(X));
    Mat T = rho_ * X.topRows(ni);
    T_.push_back(0.5 * (T + T.transpose()));
    off_.push_back(off_.back() + ni);
  }
  n_ = off_.back();
  require(E_.cols() == n_, ErrorCode::DimensionMismatch, "E columns must match the blocks");
  d2_ = std::sqrt(2.0) * rho_ * max_x;
  if (E_.rows() > 0) {
    eet_.compute(E_ * SpMat(E_.transpose()));
    if (eet_.info() != Eigen::Success) throw Error(ErrorCode::SingularEEt, "EE' is singular");
  }
}

Mat AdmmLtiModel::T() const { return block_diagonal(T_); }

Vec AdmmLtiModel::apply_T(const Vec& v) const {
  Vec out(n_);
  for (std::size_t i = 0; i < T_.size(); ++i) {
    const int ni = off_[i + 1] - off_[i];
    out.segment(off_[i], ni) = T_[i] * v.segment(off_[i], ni);
  }
  return out;
}

Vec AdmmLtiModel::apply_M(const Vec& v) const {
  if (E_.rows() == 0) return v;
  const Vec s = eet_.solve(E_ * v);
  return v - E_.transpose() * s;
}

Vec AdmmLtiModel::apply_A(const Vec& w) const {
  require(w.size() == 2 * n_, ErrorCode::DimensionMismatch, "w = (z, gamma/rho)");
  const Vec z = w.head(n_), u = w.tail(n_);
  const Vec v = apply_T(z) + u - apply_T(u);
  const Vec mv = apply_M(v);
  Vec out(2 * n_);
  out << mv, v - mv;
  return out;
}

Mat AdmmLtiModel::dense_A() const {
  Mat A(2 * n_, 2 * n_);
  Vec e = Vec::Zero(2 * n_);
  for (int j = 0; j < 2 * n_; ++j) {
    e[j] = 1.0;
    A.col(j) = apply_A(e);
    e[j] = 0.0;
  }
  return A;
}

double AdmmLtiModel::restricted_norm(int lanczos_steps) const {
  // |A on S|^2 = lambda_max(T M T + (I - T)(I - M)(I - T)).
  auto op = [&](const Vec& x, Vec& y) {
    const Vec tx = apply_T(x);
    const Vec ix = x - tx;
    const Vec mix = apply_M(ix);
    const Vec a = apply_T(apply_M(tx));
    const Vec b = ix - mix;
    y = a + b - apply_T(b);
  };
  const double lam = lanczos_max_eigenvalue(op, n_, lanczos_steps, 1e-13);
  return std::sqrt(std::max(0.0, lam));
}

double AdmmLtiModel::full_norm() const {
  // [T, I - T] has the same norm as [M; I - M][T, I - T]; T is block diagonal.
  double m = 0.0;
  for (const auto& T : T_) {
    const Mat I = Mat::Identity(T.rows(), T.cols());
    const Mat G = T * T + (I - T) * (I - T);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.transpose()), Eigen::EigenvaluesOnly);
    m = std::max(m, es.eigenvalues().maxCoeff());
  }
  return std::sqrt(m);
}

double AdmmLtiModel::spectral_radius() const {
  // Nonzero eigenvalues of A = [M; I - M][T, I - T] are those of T M + (I - T)(I - M).
  Mat B(n_, n_);
  Vec e = Vec::Zero(n_);
  for (int j = 0; j < n_; ++j) {
    e[j] = 1.0;
    const Vec me = apply_M(e);
    B.col(j) = apply_T(me) + (e - me) - apply_T(e - me);
    e[j] = 0.0;
  }
  Eigen::EigenSolver<Mat> es(B, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double compute_d1(const SpMat& E, double rho) {
  require(rho > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  const Mat Ed = Mat(E);
  const int n = static_cast<int>(Ed.cols());
  if (Ed.rows() == 0) return std::sqrt(2.0);
  const bool null_nontrivial = Ed.rows() < n || numerical_rank(Ed) < n;
  Eigen::SelfAdjointEigenSolver<Mat> es(Ed * Ed.transpose(), Eigen::EigenvaluesOnly);
  const double smin = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
  require(smin > 0.0, ErrorCode::SingularEEt, "E lacks full row rank");
  double m = rho / smin;
  if (null_nontrivial) m = std::max(m, 1.0);
  return std::sqrt(2.0) * m;
}

double compute_c1(const SpMat& E, double rho) {
  require(rho > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  if (E.rows() == 0) return 1.0;
  const Mat Ed = Mat(E);
  Eigen::SelfAdjointEigenSolver<Mat> es(Ed * Ed.transpose(), Eigen::EigenvaluesOnly);
  return std::max(1.0, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())) / rho);
}

int lmax_bound(double a, double a_w, double c1, double c2) {
  require(a > 0.0 && a < 1.0, ErrorCode::InvalidInput, "a must lie in (0, 1)");
  require(c1 >= 1.0 && c2 > 0.0, ErrorCode::InvalidInput, "c1 >= 1 and c2 > 0 required");
  if (!(a_w > 0.0 && a_w < 1.0)) {
    throw Error(ErrorCode::Inconclusive, "contraction factor a_w = " + std::to_string(a_w) +
                                             " is not below 1");
  }
  const double x = std::log(a / (c1 * c2)) / std::log(a_w);
  return 1 + static_cast<int>(std::max(0.0, std::ceil(x)));
}

double accuracy_for_lmax(int l, double a_w, double c1, double c2) {
  require(l >= 2, ErrorCode::InvalidInput, "l must be >= 2");
  require(a_w > 0.0 && a_w < 1.0, ErrorCode::InvalidInput, "a_w must lie in (0, 1)");
  return c1 * c2 * std::pow(a_w, l - 1.5);
}

namespace {

Vec sample_ball(std::mt19937_64& rng, Eigen::Index dim, double radius) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vec d(dim);
  for (Eigen::Index j = 0; j < dim; ++j) d[j] = nd(rng);
  d.normalize();
  return d * radius * std::pow(ud(rng), 1.0 / static_cast<double>(dim));
}

PrimalDualPoint unstack(const PartitionedNlp& nlp, const Vec& s) {
  PrimalDualPoint p;
  Eigen::Index o = 0;
  p.z = s.segment(o, nlp.n());
  o += nlp.n();
  p.nu = s.segment(o, nlp.n_g());
  o += nlp.n_g();
  p.mu = s.segment(o, nlp.n_h());
  o += nlp.n_h();
  p.lambda = s.segment(o, nlp.n_c());
  return p;
}

}  // namespace

Certificate certify(const PartitionedNlp& nlp, const PrimalDualPoint& p_star,
                    const CertificateOptions& o) {
  require(o.samples >= 1 && o.radius > 0.0, ErrorCode::InvalidInput, "certificate sampling");
  Certificate c;
  c.samples = o.samples;
  c.radius = o.radius;
  c.seed = o.seed;
  c.target_accuracy = o.target_accuracy;
  c.d1 = compute_d1(nlp.E_stacked(), o.rho);
  c.c1 = compute_c1(nlp.E_stacked(), o.rho);
  const auto active = active_sets(nlp, p_star.z, o.activation_tol);

  const Vec s0 = p_star.stacked();
  std::mt19937_64 rng(o.seed);
  std::vector<Vec> points(o.samples);
  for (int k = 0; k < o.samples; ++k) {
    Vec d = sample_ball(rng, s0.size(), o.radius);
    points[k] = s0 + d.cwiseProduct((1.0 + s0.array().abs()).matrix());
  }

  c.per_sample.resize(o.samples);
  detail::for_each_index(o.samples, o.parallel, [&](int k) {
    SampleResult& r = c.per_sample[k];
    r.index = k;
    try {
      const PrimalDualPoint p = unstack(nlp, points[k]);
      const QpLinearization lin = build_qp(nlp, p, HessianMode::Exact);
      AdmmLtiModel model(certificate_inputs(nlp, lin, active, o.rho));
      r.d2 = model.d2();
      r.a_w = model.restricted_norm(o.lanczos_steps);
      r.norm_A = model.full_norm();
    } catch (const Error& e) {
      r.rejected = true;
      r.reason = e.what();
    }
  });
  for (const auto& r : c.per_sample) {
    if (r.rejected) {
      ++c.rejected;
      continue;
    }
    c.d2 = std::max(c.d2, r.d2);
    c.a_w = std::max(c.a_w, r.a_w);
    c.norm_A = std::max(c.norm_A, r.norm_A);
  }
  if (c.rejected == c.samples) {
    c.inconclusive = true;
    c.note = "every sample was rejected";
    return c;
  }
  c.c2 = compute_c2(c.d1, c.d2);
  if (o.spectral_radius) {
    const QpLinearization lin = build_qp(nlp, p_star, HessianMode::Exact);
    c.spectral_radius = AdmmLtiModel(certificate_inputs(nlp, lin, active, o.rho)).spectral_radius();
  }
  if (c.a_w >= 1.0) {
    c.inconclusive = true;
    c.note = "sampled a_w >= 1";
  } else {
    c.lmax = lmax_bound(o.target_accuracy, c.a_w, c.c1, c.c2);
  }
  return c;
}

nlohmann::json to_json(const Certificate& c) {
  nlohmann::json j;
  j["d1"] = c.d1;
  j["d2"] = c.d2;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["a_w"] = c.a_w;
  j["norm_A"] = c.norm_A;
  j["spectral_radius"] = std::isnan(c.spectral_radius) ? nlohmann::json(nullptr) : nlohmann::json(c.spectral_radius);
  j["target_accuracy"] = c.target_accuracy;
  j["lmax_bound"] = c.lmax ? nlohmann::json(*c.lmax) : nlohmann::json(nullptr);
  j["inconclusive"] = c.inconclusive;
  j["note"] = c.note;
  j["samples"] = c.samples;
  j["rejected"] = c.rejected;
  j["radius"] = c.radius;
  j["seed"] = c.seed;
  nlohmann::json s = nlohmann::json::array();
  for (const auto& r : c.per_sample) {
    nlohmann::json e = {{"index", r.index}, {"rejected", r.rejected}};
    if (r.rejected) e["reason"] = r.reason;
    else e.update({{"d2", r.d2}, {"a_w", r.a_w}, {"norm_A", r.norm_A}});
    s.push_back(e);
  }
  j["per_sample"] = s;
  return j;
}

}  // namespace dsqp

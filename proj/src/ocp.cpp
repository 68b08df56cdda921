#include "dsqp/ocp.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace dsqp {

void DiscreteDynamics::evaluate(const Vec& x, const Vec& u, const Vec& w, const Vec* c,
                                Vec& value, Mat& jac, Mat* hess) const {
  value = step(x, u, w);
  jac = jacobian(x, u, w);
  if (c != nullptr && hess != nullptr) *hess = weighted_hessian(x, u, w, *c);
}

LinearDynamics::LinearDynamics(Mat A, Mat B, Mat W)
    : A_(std::move(A)), B_(std::move(B)), W_(std::move(W)) {
  const auto n = A_.rows();
  require(A_.cols() == n && B_.rows() == n && W_.rows() == n, ErrorCode::DimensionMismatch,
          "linear dynamics shapes");
}

Vec LinearDynamics::step(const Vec& x, const Vec& u, const Vec& w) const {
  Vec r = A_ * x;
  if (nu() > 0) r += B_ * u;
  if (nw() > 0) r += W_ * w;
  return r;
}

Mat LinearDynamics::jacobian(const Vec&, const Vec&, const Vec&) const {
  Mat J(nx(), nx() + nu() + nw());
  J << A_, B_, W_;
  return J;
}

Mat LinearDynamics::weighted_hessian(const Vec&, const Vec&, const Vec&, const Vec&) const {
  const int m = nx() + nu() + nw();
  return Mat::Zero(m, m);
}

namespace {

bool is_spd(const Mat& m) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Mat> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void OcpSpec::validate() const {
  require(N >= 1, ErrorCode::InvalidInput, "horizon N must be >= 1");
  require(h > 0.0, ErrorCode::InvalidInput, "shooting interval must be positive");
  require(beta >= 1.0 && beta2 >= 1.0, ErrorCode::InvalidInput, "beta and beta2 must be >= 1");
  require(copy_penalty >= 0.0, ErrorCode::InvalidInput, "copy penalty must be >= 0");
  const int S = static_cast<int>(subsystems.size());
  for (int i = 0; i < S; ++i) {
    const auto& s = subsystems[i];
    const std::string tag = "subsystem " + std::to_string(i) + ": ";
    require(s.dynamics != nullptr, ErrorCode::InvalidInput, tag + "missing dynamics");
    const int nx = s.dynamics->nx(), nu = s.dynamics->nu();
    require(s.Q.rows() == nx && s.P.rows() == nx && s.R.rows() == nu, ErrorCode::DimensionMismatch,
            tag + "weight sizes");
    require(is_spd(s.Q) && is_spd(s.P) && (nu == 0 || is_spd(s.R)), ErrorCode::InvalidInput,
            tag + "weights must be symmetric positive definite");
    require(s.u_min.size() == nu && s.u_max.size() == nu, ErrorCode::DimensionMismatch,
            tag + "input bound sizes");
    require((s.x_min.size() == 0 && s.x_max.size() == 0) ||
                (s.x_min.size() == nx && s.x_max.size() == nx),
            ErrorCode::DimensionMismatch, tag + "state bound sizes");
    int nw = 0;
    int prev = -1;
    for (const auto& link : s.links) {
      require(link.source >= 0 && link.source < S && link.source != i, ErrorCode::InvalidInput,
              tag + "bad link source");
      require(link.source > prev, ErrorCode::InvalidInput, tag + "links must ascend by source");
      prev = link.source;
      for (int c : link.components) {
        require(c >= 0 && c < subsystems[link.source].dynamics->nx(), ErrorCode::InvalidInput,
                tag + "link component out of range");
      }
      nw += static_cast<int>(link.components.size());
    }
    require(nw == s.dynamics->nw(), ErrorCode::DimensionMismatch,
            tag + "dynamics neighbor arguments do not match the links");
  }
}

SubsystemLayout make_layout(const OcpSpec& spec, int i) {
  const auto& s = spec.subsystems.at(i);
  SubsystemLayout L;
  L.nx = s.dynamics->nx();
  L.nu = s.dynamics->nu();
  L.N = spec.N;
  L.Nu = spec.terminal_input ? spec.N + 1 : spec.N;
  L.Nc = s.links.empty() ? 0 : (spec.copy_terminal_state ? spec.N + 1 : spec.N);
  for (const auto& link : s.links) {
    L.link_offset.push_back(L.nw);
    L.nw += static_cast<int>(link.components.size());
  }
  L.n = (L.N + 1) * L.nx + L.Nu * L.nu + L.Nc * L.nw;
  L.n_g = L.N * L.nx + L.nx;
  int bounds = 0;
  for (int k = 0; k < L.nu; ++k) {
    bounds += std::isfinite(s.u_max[k]) + std::isfinite(s.u_min[k]);
  }
  int xbounds = 0;
  for (int k = 0; k < s.x_min.size(); ++k) {
    xbounds += std::isfinite(s.x_max[k]) + std::isfinite(s.x_min[k]);
  }
  L.n_h = L.Nu * bounds + L.N * xbounds;
  return L;
}

OcpSubsystem::OcpSubsystem(const OcpSpec& spec, int index, Vec x_now)
    : sub_(spec.subsystems.at(index)), layout_(make_layout(spec, index)), x_now_(std::move(x_now)) {
  const auto& L = layout_;
  require(x_now_.size() == L.nx, ErrorCode::DimensionMismatch, "initial state size");
  hess_f_ = Mat::Zero(L.n, L.n);
  for (int t = 0; t < L.N; ++t) hess_f_.block(L.x(t), L.x(t), L.nx, L.nx) = sub_.Q;
  hess_f_.block(L.x(L.N), L.x(L.N), L.nx, L.nx) = spec.beta * spec.beta2 * sub_.P;
  for (int t = 0; t < L.Nu; ++t) hess_f_.block(L.u(t), L.u(t), L.nu, L.nu) = sub_.R;
  for (int k = L.copies_begin(); k < L.n; ++k) hess_f_(k, k) = spec.copy_penalty;

  A_in_ = Mat::Zero(L.n_h, L.n);
  b_in_ = Vec::Zero(L.n_h);
  int r = 0;
  for (int t = 0; t < L.Nu; ++t) {
    for (int k = 0; k < L.nu; ++k) {
      if (std::isfinite(sub_.u_max[k])) {
        A_in_(r, L.u(t) + k) = 1.0;
        b_in_[r++] = sub_.u_max[k];
      }
      if (std::isfinite(sub_.u_min[k])) {
        A_in_(r, L.u(t) + k) = -1.0;
        b_in_[r++] = -sub_.u_min[k];
      }
    }
  }
  for (int t = 1; t <= L.N && sub_.x_min.size() > 0; ++t) {
    for (int k = 0; k < L.nx; ++k) {
      if (std::isfinite(sub_.x_max[k])) {
        A_in_(r, L.x(t) + k) = 1.0;
        b_in_[r++] = sub_.x_max[k];
      }
      if (std::isfinite(sub_.x_min[k])) {
        A_in_(r, L.x(t) + k) = -1.0;
        b_in_[r++] = -sub_.x_min[k];
      }
    }
  }
}

std::vector<int> OcpSubsystem::stage_columns(int tau) const {
  const auto& L = layout_;
  std::vector<int> cols;
  cols.reserve(L.nx + L.nu + L.nw);
  for (int k = 0; k < L.nx; ++k) cols.push_back(L.x(tau) + k);
  for (int k = 0; k < L.nu; ++k) cols.push_back(L.u(tau) + k);
  for (int k = 0; k < L.nw; ++k) cols.push_back(L.copies_begin() + tau * L.nw + k);
  return cols;
}

void OcpSubsystem::stage_args(const Vec& z, int tau, Vec& x, Vec& u, Vec& w) const {
  const auto& L = layout_;
  x = z.segment(L.x(tau), L.nx);
  u = z.segment(L.u(tau), L.nu);
  w = z.segment(L.copies_begin() + tau * L.nw, L.nw);
}

void OcpSubsystem::scatter_stage(const Mat& block, Mat& out, int tau, int row_offset,
                                 bool hessian) const {
  const auto cols = stage_columns(tau);
  const int m = static_cast<int>(cols.size());
  if (hessian) {
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) out(cols[a], cols[b]) += block(a, b);
  } else {
    for (int a = 0; a < block.rows(); ++a)
      for (int b = 0; b < m; ++b) out(row_offset + a, cols[b]) += block(a, b);
  }
}

double OcpSubsystem::objective(const Vec& z) const { return 0.5 * z.dot(hess_f_ * z); }

Vec OcpSubsystem::gradient(const Vec& z) const { return hess_f_ * z; }

Vec OcpSubsystem::eq(const Vec& z) const {
  const auto& L = layout_;
  Vec g(L.n_g);
  Vec x, u, w;
  for (int t = 0; t < L.N; ++t) {
    stage_args(z, t, x, u, w);
    g.segment(t * L.nx, L.nx) = sub_.dynamics->step(x, u, w) - z.segment(L.x(t + 1), L.nx);
  }
  g.tail(L.nx) = z.segment(L.x(0), L.nx) - x_now_;
  return g;
}

Mat OcpSubsystem::eq_jacobian(const Vec& z) const {
  const auto& L = layout_;
  Mat J = Mat::Zero(L.n_g, L.n);
  Vec x, u, w;
  for (int t = 0; t < L.N; ++t) {
    stage_args(z, t, x, u, w);
    scatter_stage(sub_.dynamics->jacobian(x, u, w), J, t, t * L.nx, false);
    J.block(t * L.nx, L.x(t + 1), L.nx, L.nx) -= Mat::Identity(L.nx, L.nx);
  }
  J.block(L.N * L.nx, L.x(0), L.nx, L.nx) = Mat::Identity(L.nx, L.nx);
  return J;
}

Vec OcpSubsystem::ineq(const Vec& z) const { return A_in_ * z - b_in_; }

Mat OcpSubsystem::ineq_jacobian(const Vec&) const { return A_in_; }

Mat OcpSubsystem::lagrangian_hessian(const Vec& z, const Vec& nu, const Vec&) const {
  const auto& L = layout_;
  Mat H = hess_f_;
  Vec x, u, w;
  for (int t = 0; t < L.N; ++t) {
    stage_args(z, t, x, u, w);
    const Vec c = nu.segment(t * L.nx, L.nx);
    scatter_stage(sub_.dynamics->weighted_hessian(x, u, w, c), H, t, 0, true);
  }
  return H;
}

SubsystemEval OcpSubsystem::evaluate(const Vec& z, const Vec* nu, const Vec* mu) const {
  const auto& L = layout_;
  SubsystemEval e;
  e.grad = hess_f_ * z;
  e.f = 0.5 * z.dot(e.grad);
  e.g.resize(L.n_g);
  e.Jg = Mat::Zero(L.n_g, L.n);
  const bool want_hess = nu != nullptr && mu != nullptr;
  if (want_hess) e.hess = hess_f_;
  Vec x, u, w, val, c;
  Mat jac, hs;
  for (int t = 0; t < L.N; ++t) {
    stage_args(z, t, x, u, w);
    if (want_hess) c = nu->segment(t * L.nx, L.nx);
    sub_.dynamics->evaluate(x, u, w, want_hess ? &c : nullptr, val, jac, want_hess ? &hs : nullptr);
    e.g.segment(t * L.nx, L.nx) = val - z.segment(L.x(t + 1), L.nx);
    scatter_stage(jac, e.Jg, t, t * L.nx, false);
    e.Jg.block(t * L.nx, L.x(t + 1), L.nx, L.nx) -= Mat::Identity(L.nx, L.nx);
    if (want_hess) scatter_stage(hs, e.hess, t, 0, true);
  }
  e.g.tail(L.nx) = z.segment(L.x(0), L.nx) - x_now_;
  e.Jg.block(L.N * L.nx, L.x(0), L.nx, L.nx) = Mat::Identity(L.nx, L.nx);
  e.h = A_in_ * z - b_in_;
  e.Jh = A_in_;
  return e;
}

PartitionedNlp assemble_nlp(const OcpSpec& spec, const std::vector<Vec>& x_now) {
  spec.validate();
  const int S = static_cast<int>(spec.subsystems.size());
  require(static_cast<int>(x_now.size()) == S, ErrorCode::DimensionMismatch,
          "one initial state per subsystem");
  std::vector<std::shared_ptr<const SubsystemProblem>> subs;
  std::vector<SubsystemLayout> layouts;
  for (int i = 0; i < S; ++i) {
    auto p = std::make_shared<OcpSubsystem>(spec, i, x_now[i]);
    layouts.push_back(p->layout());
    subs.push_back(std::move(p));
  }
  std::vector<std::vector<Triplet>> trips(S);
  int r = 0;
  for (int i = 0; i < S; ++i) {
    const auto& links = spec.subsystems[i].links;
    const auto& L = layouts[i];
    for (std::size_t l = 0; l < links.size(); ++l) {
      const auto& src = layouts[links[l].source];
      for (int t = 0; t < L.Nc; ++t) {
        for (std::size_t k = 0; k < links[l].components.size(); ++k) {
          trips[links[l].source].emplace_back(r, src.x(t) + links[l].components[k], 1.0);
          trips[i].emplace_back(r, L.copy(t, static_cast<int>(l), static_cast<int>(k)), -1.0);
          ++r;
        }
      }
    }
  }
  std::vector<SpMat> E(S);
  for (int i = 0; i < S; ++i) {
    E[i].resize(r, layouts[i].n);
    E[i].setFromTriplets(trips[i].begin(), trips[i].end());
    E[i].makeCompressed();
  }
  return PartitionedNlp(std::move(subs), std::move(E), Vec::Zero(r));
}

std::vector<int> input_offsets(const OcpSpec& spec) {
  std::vector<int> out;
  int off = 0;
  for (int i = 0; i < static_cast<int>(spec.subsystems.size()); ++i) {
    const auto L = make_layout(spec, i);
    out.push_back(off + L.u(0));
    off += L.n;
  }
  return out;
}

}  // namespace dsqp

#include "dsqp/admm.hpp"

#include "parallel.hpp"

namespace dsqp {

AveragingMode parse_averaging_mode(const std::string& name) {
  if (name == "centralized") return AveragingMode::Centralized;
  if (name == "decentralized") return AveragingMode::Decentralized;
  throw Error(ErrorCode::InvalidInput, "unknown averaging mode '" + name + "'");
}

DenseQp make_local_qp(const LocalQp& b, double rho, const Vec& z_i, const Vec& gamma_i) {
  const auto n = b.H.rows();
  DenseQp qp;
  qp.H = b.H;
  qp.H.diagonal().array() += rho;
  qp.q = b.grad - b.H * b.z_lin + gamma_i - rho * z_i;
  qp.A_eq = b.Jg;
  qp.b_eq = b.Jg * b.z_lin - b.g;
  qp.A_in = b.Jh;
  qp.b_in = b.Jh * b.z_lin - b.h;
  if (qp.A_eq.rows() == 0) qp.A_eq.resize(0, n);
  if (qp.A_in.rows() == 0) qp.A_in.resize(0, n);
  return qp;
}

AdmmEngine::AdmmEngine(const PartitionedNlp& structure, AdmmOptions options)
    : options_(options), S_(structure.num_subsystems()) {
  require(options_.rho > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  for (int i = 0; i <= S_; ++i) {
    var_off_.push_back(i < S_ ? structure.var_offset(i) : structure.n());
    eq_off_.push_back(i < S_ ? structure.eq_offset(i) : structure.n_g());
    ineq_off_.push_back(i < S_ ? structure.ineq_offset(i) : structure.n_h());
  }
  avg_ = std::make_shared<AveragingOperator>(structure);
  bool decentralizable = true;
  try {
    dec_ = std::make_unique<DecentralizedAveraging>(structure);
  } catch (const Error&) {
    decentralizable = false;
  }
  if (decentralizable) {
    bus_ = std::make_unique<MessageBus>(S_, dec_->edges());
  } else {
    require(options_.mode == AveragingMode::Centralized, ErrorCode::InvalidInput,
            "coupling structure does not admit neighbor averaging");
    bus_ = std::make_unique<MessageBus>(S_, std::vector<std::pair<int, int>>{});
  }
  for (int i = 0; i < S_; ++i) solvers_.emplace_back(options_.qp);
  warm_.resize(S_);
  has_warm_.assign(S_, 0);
}

void AdmmEngine::reset_warm_starts() { has_warm_.assign(S_, 0); }

AdmmState AdmmEngine::run(const std::vector<LocalQp>& blocks, AdmmState st, int l_max,
                          const std::function<void(const AdmmState&)>& observer) {
  require(static_cast<int>(blocks.size()) == S_, ErrorCode::DimensionMismatch,
          "one QP block per subsystem");
  require(l_max >= 1, ErrorCode::InvalidInput, "l_max must be >= 1");
  const int n = var_off_[S_];
  require(st.z.size() == n && st.gamma.size() == n, ErrorCode::DimensionMismatch,
          "ADMM state size");
  require(options_.mode == AveragingMode::Centralized || dec_ != nullptr, ErrorCode::InvalidInput,
          "decentralized averaging unavailable");
  const double rho = options_.rho;
  st.y = Vec::Zero(n);
  st.nu = Vec::Zero(eq_off_[S_]);
  st.mu = Vec::Zero(ineq_off_[S_]);

  std::vector<DenseQp> qps(S_);
  for (int i = 0; i < S_; ++i) {
    const int ni = var_off_[i + 1] - var_off_[i];
    require(blocks[i].H.rows() == ni, ErrorCode::DimensionMismatch, "QP block size");
    qps[i] = make_local_qp(blocks[i], rho, st.z.segment(var_off_[i], ni),
                           st.gamma.segment(var_off_[i], ni));
  }
  std::vector<long> iters(S_, 0);

  for (int l = 0; l < l_max; ++l) {
    // Local QPs.
    detail::for_each_index(S_, options_.parallel, [&](int i) {
      const int ni = var_off_[i + 1] - var_off_[i];
      const auto& b = blocks[i];
      qps[i].q = b.grad - b.H * b.z_lin + st.gamma.segment(var_off_[i], ni) -
                 rho * st.z.segment(var_off_[i], ni);
      QpSolution sol = solvers_[i].solve(qps[i], has_warm_[i] ? &warm_[i] : nullptr);
      iters[i] += sol.iterations;
      st.y.segment(var_off_[i], ni) = sol.y;
      st.nu.segment(eq_off_[i], eq_off_[i + 1] - eq_off_[i]) = sol.nu;
      st.mu.segment(ineq_off_[i], ineq_off_[i + 1] - ineq_off_[i]) = sol.mu;
      warm_[i] = std::move(sol);
      has_warm_[i] = 1;
    });

    // Averaging.
    if (options_.mode == AveragingMode::Centralized) {
      st.z = averaging_centralized(st.y, st.gamma, *avg_, rho).first;
    } else {
      std::vector<Vec> v(S_);
      for (int i = 0; i < S_; ++i) {
        const int ni = var_off_[i + 1] - var_off_[i];
        v[i] = st.y.segment(var_off_[i], ni) + st.gamma.segment(var_off_[i], ni) / rho;
      }
      std::vector<Vec> z = dec_->run(v, *bus_, options_.parallel);
      for (int i = 0; i < S_; ++i) st.z.segment(var_off_[i], z[i].size()) = z[i];
    }

    // Dual update, local to every subsystem.
    st.gamma = dual_update(st.y, st.z, st.gamma, rho);
    ++st.l;
    if (!st.z.allFinite() || !st.gamma.allFinite()) {
      throw Error(ErrorCode::Diverged, "ADMM iterate is not finite");
    }
    if (observer) observer(st);
  }
  for (long it : iters) qp_iterations_ += it;
  return st;
}

AdmmState admm_run(const PartitionedNlp& structure, const std::vector<LocalQp>& blocks,
                   const Vec& z0, const Vec& gamma0, int l_max, const AdmmOptions& options) {
  AdmmEngine engine(structure, options);
  AdmmState st;
  st.z = z0;
  st.gamma = gamma0;
  return engine.run(blocks, st, l_max);
}

}  // namespace dsqp

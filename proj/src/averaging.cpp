#include "dsqp/averaging.hpp"

#include "parallel.hpp"

#include <map>

namespace dsqp {

AveragingOperator::AveragingOperator(SpMat E, Vec c) : E_(std::move(E)), c_(std::move(c)) {
  require(c_.size() == E_.rows(), ErrorCode::DimensionMismatch, "c must have one entry per row of E");
  eet_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  if (E_.rows() == 0) return;
  SpMat EEt = E_ * SpMat(E_.transpose());
  eet_->compute(EEt);
  bool ok = eet_->info() == Eigen::Success;
  if (ok) {
    const Vec d = eet_->vectorD();
    ok = (d.array() > 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())).all();
  }
  if (!ok) throw Error(ErrorCode::SingularEEt, "EE' is singular; E lacks full row rank");
}

AveragingOperator::AveragingOperator(const PartitionedNlp& nlp)
    : AveragingOperator(nlp.E_stacked(), nlp.c()) {}

Vec AveragingOperator::eet_solve(const Vec& r) const {
  if (E_.rows() == 0) return Vec(0);
  return eet_->solve(r);
}

Vec AveragingOperator::project(const Vec& v) const {
  require(v.size() == n(), ErrorCode::DimensionMismatch, "projection input size");
  if (E_.rows() == 0) return v;
  return v - E_.transpose() * eet_solve(E_ * v - c_);
}

Vec AveragingOperator::lambda_from_gamma(const Vec& gamma) const {
  if (E_.rows() == 0) return Vec(0);
  return eet_solve(E_ * gamma);
}

Mat AveragingOperator::matrix() const {
  Mat M = Mat::Identity(n(), n());
  if (E_.rows() == 0) return M;
  const Mat Ed = Mat(E_);
  Mat X = eet_->solve(Ed);  // (EE')^-1 E
  return M - Ed.transpose() * X;
}

Vec AveragingOperator::offset() const {
  if (E_.rows() == 0) return Vec::Zero(n());
  return E_.transpose() * eet_solve(c_);
}

std::pair<Vec, Vec> averaging_centralized(const Vec& y, const Vec& gamma,
                                          const AveragingOperator& op, double rho) {
  require(y.size() == op.n() && gamma.size() == op.n(), ErrorCode::DimensionMismatch,
          "averaging input size");
  require(rho > 0.0, ErrorCode::InvalidInput, "rho must be positive");
  const Vec v = y + gamma / rho;
  if (op.n_c() == 0) return {v, Vec(0)};
  const Vec s = op.eet_solve(op.E() * v - op.c());
  return {v - op.E().transpose() * s, rho * s};
}

Vec dual_update(const Vec& y_next, const Vec& z_next, const Vec& gamma, double rho) {
  require(y_next.size() == z_next.size() && gamma.size() == y_next.size(),
          ErrorCode::DimensionMismatch, "dual update sizes");
  return gamma + rho * (y_next - z_next);
}

DecentralizedAveraging::DecentralizedAveraging(const PartitionedNlp& nlp) {
  const int S = nlp.num_subsystems();
  agents_.resize(S);
  require(nlp.c().size() == 0 || nlp.c().cwiseAbs().maxCoeff() == 0.0, ErrorCode::InvalidInput,
          "decentralized averaging needs c = 0");
  std::vector<std::vector<int>> minus_uses(S), plus_uses(S);
  for (int i = 0; i < S; ++i) {
    minus_uses[i].assign(nlp.num_vars(i), 0);
    plus_uses[i].assign(nlp.num_vars(i), 0);
  }
  std::map<std::pair<int, int>, std::pair<std::vector<int>, std::vector<int>>> by_pair;
  for (const auto& r : nlp.rows()) {
    require(r.plus_coef == 1.0 && r.minus_coef == -1.0, ErrorCode::InvalidInput,
            "decentralized averaging needs +1/-1 consensus rows");
    ++minus_uses[r.minus_sub][r.minus_index];
    ++plus_uses[r.plus_sub][r.plus_index];
    auto& entry = by_pair[{r.minus_sub, r.plus_sub}];
    entry.first.push_back(r.minus_index);
    entry.second.push_back(r.plus_index);
  }
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k < nlp.num_vars(i); ++k) {
      require(minus_uses[i][k] <= 1 && !(minus_uses[i][k] && plus_uses[i][k]),
              ErrorCode::InvalidInput, "copies must link to exactly one original");
    }
  }
  for (auto& [key, idx] : by_pair) {
    agents_[key.first].copies_of.push_back({key.second, idx.first});
    agents_[key.second].hub_for.push_back({key.first, idx.second});
  }
}

std::vector<std::pair<int, int>> DecentralizedAveraging::edges() const {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < num_agents(); ++i) {
    for (const auto& l : agents_[i].copies_of) {
      e.push_back({i, l.peer});
      e.push_back({l.peer, i});
    }
  }
  return e;
}

std::vector<Vec> DecentralizedAveraging::run(const std::vector<Vec>& v, MessageBus& bus,
                                             bool parallel) const {
  const int S = num_agents();
  require(static_cast<int>(v.size()) == S, ErrorCode::DimensionMismatch, "one vector per agent");
  std::vector<Vec> z = v;

  // Round 1: copies travel to the holder of the original.
  detail::for_each_index(S, parallel, [&](int i) {
    for (const auto& l : agents_[i].copies_of) {
      Vec msg(l.local.size());
      for (std::size_t k = 0; k < l.local.size(); ++k) msg[k] = v[i][l.local[k]];
      bus.send(i, l.peer, std::move(msg));
    }
  });
  std::vector<Vec> sums(S), counts(S);
  detail::for_each_index(S, parallel, [&](int i) {
    if (agents_[i].hub_for.empty()) return;
    sums[i] = v[i];
    counts[i] = Vec::Ones(v[i].size());
    for (const auto& l : agents_[i].hub_for) {
      const Vec& msg = bus.receive(i, l.peer);
      require(msg.size() == static_cast<Eigen::Index>(l.local.size()), ErrorCode::DimensionMismatch,
              "averaging message size");
      for (std::size_t k = 0; k < l.local.size(); ++k) {
        sums[i][l.local[k]] += msg[k];
        counts[i][l.local[k]] += 1.0;
      }
    }
    z[i] = sums[i].cwiseQuotient(counts[i]);
  });
  bus.end_round();

  // Round 2: the mean goes back to every copy holder.
  detail::for_each_index(S, parallel, [&](int i) {
    for (const auto& l : agents_[i].hub_for) {
      Vec msg(l.local.size());
      for (std::size_t k = 0; k < l.local.size(); ++k) msg[k] = z[i][l.local[k]];
      bus.send(i, l.peer, std::move(msg));
    }
  });
  detail::for_each_index(S, parallel, [&](int i) {
    for (const auto& l : agents_[i].copies_of) {
      const Vec& msg = bus.receive(i, l.peer);
      require(msg.size() == static_cast<Eigen::Index>(l.local.size()), ErrorCode::DimensionMismatch,
              "averaging message size");
      for (std::size_t k = 0; k < l.local.size(); ++k) z[i][l.local[k]] = msg[k];
    }
  });
  bus.end_round();
  return z;
}

}  // namespace dsqp

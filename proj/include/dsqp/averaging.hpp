#pragma once

#include "dsqp/message_bus.hpp"
#include "dsqp/nlp.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <utility>
#include <vector>

namespace dsqp {

/// z = M_avg v + E'(EE')^-1 c with M_avg = I - E'(EE')^-1 E.
class AveragingOperator {
 public:
  AveragingOperator(SpMat E, Vec c);
  explicit AveragingOperator(const PartitionedNlp& nlp);

  Eigen::Index n() const { return E_.cols(); }
  Eigen::Index n_c() const { return E_.rows(); }
  const SpMat& E() const { return E_; }
  const Vec& c() const { return c_; }

  /// Projection of v onto {z : Ez = c}.
  Vec project(const Vec& v) const;
  /// (EE')^-1 r
  Vec eet_solve(const Vec& r) const;
  /// lambda with gamma = E' lambda (least squares if gamma is off the row space).
  Vec lambda_from_gamma(const Vec& gamma) const;

  Mat matrix() const;  ///< dense M_avg
  Vec offset() const;  ///< E'(EE')^-1 c

 private:
  SpMat E_;
  Vec c_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> eet_;
};

/// z_next = M_avg (y + gamma/rho) + offset, lambda_next = rho (EE')^-1 (E(y + gamma/rho) - c).
std::pair<Vec, Vec> averaging_centralized(const Vec& y, const Vec& gamma,
                                          const AveragingOperator& op, double rho);

/// gamma + rho (y - z)
Vec dual_update(const Vec& y_next, const Vec& z_next, const Vec& gamma, double rho);

/// Two-round neighbor averaging. Round one: copy holders send their values to the
/// holder of the original. Round two: the original's holder sends back the mean
/// over the original and all of its copies. Requires c = 0 and +1/-1 rows in
/// which every copy is linked to exactly one original.
class DecentralizedAveraging {
 public:
  explicit DecentralizedAveraging(const PartitionedNlp& nlp);

  std::vector<std::pair<int, int>> edges() const;
  int num_agents() const { return static_cast<int>(agents_.size()); }

  /// v holds each agent's y_i + gamma_i/rho; returns each agent's z_i.
  std::vector<Vec> run(const std::vector<Vec>& v, MessageBus& bus, bool parallel = false) const;

 private:
  struct Link {
    int peer = -1;
    std::vector<int> local;  ///< local indices, in consensus-row order
  };
  struct Agent {
    std::vector<Link> copies_of;  ///< peers whose originals this agent copies
    std::vector<Link> hub_for;    ///< peers that copy this agent's originals
  };
  std::vector<Agent> agents_;
};

}  // namespace dsqp

#pragma once

#include "dsqp/dsqp.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dsqp {

/// Data of the subsystem QPs that fixes the ADMM error dynamics: Hessians,
/// equality Jacobians, Jacobians of the active inequalities, E and rho.
struct QpCertificateInputs {
  std::vector<Mat> H;
  std::vector<Mat> Jg;
  std::vector<Mat> Jh_active;
  SpMat E;
  double rho = 1.0;
};

/// Indices j with h_j >= -tol, per subsystem.
std::vector<std::vector<int>> active_sets(const PartitionedNlp& nlp, const Vec& z, double tol = 1e-6);

QpCertificateInputs certificate_inputs(const PartitionedNlp& nlp, const QpLinearization& lin,
                                       const std::vector<std::vector<int>>& active, double rho);

/// ADMM error dynamics w+ - w* = A (w - w*) for w = (z, gamma/rho), valid while the
/// active sets of the local QPs stay fixed. K_i is the local KKT matrix with H_i + rho I;
/// X_i = K_i^-1 restricted to the primal right-hand side.
class AdmmLtiModel {
 public:
  explicit AdmmLtiModel(const QpCertificateInputs& in);

  int n() const { return n_; }
  double rho() const { return rho_; }
  /// |D| = sqrt(2) rho max_i |X_i|.
  double d2() const { return d2_; }
  const std::vector<Mat>& T_blocks() const { return T_; }
  Mat T() const;

  Vec apply_T(const Vec& v) const;
  Vec apply_M(const Vec& v) const;
  /// One step of the error recursion on w = (z, u), u = gamma / rho.
  Vec apply_A(const Vec& w) const;
  Mat dense_A() const;

  /// Norm of A restricted to null(E) x range(E'), where all ADMM errors live.
  double restricted_norm(int lanczos_steps = 300) const;
  /// Plain spectral norm |A| = |[T, I - T]|.
  double full_norm() const;
  /// Spectral radius of A (dense eigenvalues of T M + (I - T)(I - M)).
  double spectral_radius() const;

 private:
  int n_ = 0;
  double rho_ = 1.0;
  double d2_ = 0.0;
  std::vector<int> off_;
  std::vector<Mat> T_;
  SpMat E_;
  Eigen::SimplicialLDLT<SpMat> eet_;
};

/// sqrt(2) * |[M; rho (EE')^-1 E]|.
double compute_d1(const SpMat& E, double rho);
/// max{1, |E'| / rho}.
double compute_c1(const SpMat& E, double rho);
inline double compute_c2(double d1, double d2) { return d1 + d1 * d2 + d2; }

/// 1 + max{0, ceil(log_{a_w}(a / (c1 c2)))}. Throws Inconclusive if a_w >= 1.
int lmax_bound(double a, double a_w, double c1, double c2);
/// The a for which lmax_bound returns exactly l (midpoint of its preimage).
double accuracy_for_lmax(int l, double a_w, double c1, double c2);

struct CertificateOptions {
  int samples = 64;
  double radius = 1e-2;
  std::uint64_t seed = 1;
  double rho = 1.0;
  double target_accuracy = 0.5;
  int lanczos_steps = 300;
  double activation_tol = 1e-6;
  bool spectral_radius = true;  ///< dense eigenvalues at the nominal point
  bool parallel = true;
};

struct SampleResult {
  int index = 0;
  bool rejected = false;
  std::string reason;
  double d2 = 0.0;
  double a_w = 0.0;
  double norm_A = 0.0;
};

struct Certificate {
  double d1 = 0.0;
  double d2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double a_w = 0.0;          ///< max over samples of the restricted norm
  double norm_A = 0.0;       ///< max over samples of |A|
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
  double target_accuracy = 0.5;
  std::optional<int> lmax;   ///< empty if inconclusive
  bool inconclusive = false;
  std::string note;
  int samples = 0;
  int rejected = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
  std::vector<SampleResult> per_sample;
};

/// Samples p uniformly in a ball of radius eps around p* (scaled per component
/// by 1 + |p*|), linearizes with the exact Hessian and keeps the active set of p*.
Certificate certify(const PartitionedNlp& nlp, const PrimalDualPoint& p_star,
                    const CertificateOptions& options);

/// Deterministic constants of the sampled-data stability argument.
struct RtiConstants {
  double a1 = 0, a2 = 0, a3 = 0;
  double L_fx_c = 0, L_fu_c = 0, L_px = 0, L_Vx = 0, L_Vp = 0;
  double V_bar = 1, r_p = 1, r_x = 1;
  double delta = 0.04, delta1 = 0.04, a_p = 0.5;
  double L_fx_d1 = 0, L_fu_d1 = 0;
  double eta = 0, r_Vbar = 0, delta3 = 0, kappa = 0, L_V = 0, a_bar = 0, L_e = 0;
  double beta_prime = 0, r_p_tilde = 0, delta4p = 0, delta5 = 0, delta_bar = 0;
  bool inconclusive = false;
  std::string note;
};

struct RtiBaseConstants {
  double a1 = 0, a2 = 0, a3 = 0;
  double L_fx_c = 0, L_fu_c = 0, L_px = 0, L_Vx = 0;
  /// If unset, L_Vp = L_fu_c exp(delta1 L_fx_c) L_Vx.
  std::optional<double> L_Vp;
  double V_bar = 1, r_p = 1, r_x = 1;
  double delta = 0.04, delta1 = 0.04, a_p = 0.5;
};

RtiConstants rti_chain(const RtiBaseConstants& base);
/// Largest a_p whose delta_5 still reaches delta (bisection on the monotone map).
double a_p_for_delta5(RtiBaseConstants base, double delta);

/// Closed-loop oracle used for the constant estimation.
struct OracleSample {
  double V = 0.0;
  Vec p;
  Vec u;
};

struct RtiModel {
  int nx = 0;
  int nu = 0;
  std::function<Vec(const Vec& x, const Vec& u)> field;             ///< continuous f^c
  std::function<Vec(const Vec& x, const Vec& u, double dt)> step;   ///< plant step
  std::function<OracleSample(const Vec& x)> oracle;                 ///< ideal NMPC
};

struct RtiEstimateOptions {
  int samples = 512;
  double radius = 1e-2;
  std::uint64_t seed = 1;
  double delta = 0.04;
};

struct RtiEstimate {
  RtiBaseConstants base;
  int samples = 0;
  double envelope_fit_error = 0.0;  ///< residual of the quadratic fit of V
};

/// a1, a2, a3 from quadratic envelopes of V near the origin; Lipschitz constants
/// from random difference quotients. Deterministic for a fixed seed.
RtiEstimate estimate_rti_constants(const RtiModel& model, const RtiEstimateOptions& options);

nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const RtiConstants& r);

}  // namespace dsqp

#include "dsqp/certificates.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace dsqp {

namespace {

Vec sample_ball(std::mt19937_64& rng, Eigen::Index dim, double radius) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vec d(dim);
  for (Eigen::Index j = 0; j < dim; ++j) d[j] = nd(rng);
  d.normalize();
  return d * radius * std::pow(ud(rng), 1.0 / static_cast<double>(dim));
}

}  // namespace

RtiConstants rti_chain(const RtiBaseConstants& b) {
  RtiConstants r;
  r.a1 = b.a1;
  r.a2 = b.a2;
  r.a3 = b.a3;
  r.L_fx_c = b.L_fx_c;
  r.L_fu_c = b.L_fu_c;
  r.L_px = b.L_px;
  r.L_Vx = b.L_Vx;
  r.V_bar = b.V_bar;
  r.r_p = b.r_p;
  r.r_x = b.r_x;
  r.delta = b.delta;
  r.delta1 = b.delta1;
  r.a_p = b.a_p;
  for (double v : {b.a1, b.a2, b.a3, b.L_fx_c, b.L_fu_c, b.L_px, b.L_Vx, b.V_bar, b.r_p, b.r_x,
                   b.delta, b.delta1}) {
    require(v > 0.0 && std::isfinite(v), ErrorCode::InvalidInput, "RTI inputs must be positive");
  }
  require(b.a_p > 0.0 && b.a_p < 1.0, ErrorCode::InvalidInput, "a_p must lie in (0, 1)");

  const double e = std::exp(b.L_fx_c * b.delta1);
  r.L_fx_d1 = e * b.L_fx_c;
  r.L_fu_d1 = e * b.L_fu_c;
  r.L_Vp = b.L_Vp ? *b.L_Vp : b.L_fu_c * e * b.L_Vx;
  r.eta = r.L_fx_d1 + r.L_fu_d1 * b.L_px;
  r.r_Vbar = std::sqrt(b.V_bar / b.a1);
  r.delta3 = std::min({b.delta, b.delta1, b.r_x / (r.eta * r.r_Vbar + r.L_fu_d1 * b.r_p),
                       b.r_p * (1.0 - b.a_p) /
                           (b.L_px * b.a_p * (r.L_fu_d1 * b.r_p + r.eta * r.r_Vbar))});
  r.kappa = b.a_p * (1.0 + r.delta3 * b.L_px * r.L_fu_d1);
  r.L_V = 2.0 * std::sqrt(b.V_bar) * b.L_Vx;
  r.a_bar = b.a3 / b.a2;
  r.L_e = r.L_V * r.L_fu_d1;
  r.beta_prime = r.a_bar * std::sqrt(b.a1) / (4.0 * b.L_px * b.a_p * r.eta);
  r.r_p_tilde = std::min(b.r_p, r.a_bar * b.V_bar / r.L_e);
  r.delta4p = (1.0 - r.kappa) * r.r_p_tilde * std::sqrt(b.a1) /
              (std::sqrt(b.V_bar) * b.L_px * b.a_p * r.eta);
  r.delta5 = r.beta_prime * (1.0 - r.kappa) / r.L_Vp;
  r.delta_bar = std::min({r.delta3, r.delta4p, r.delta5});
  if (r.kappa >= 1.0) {
    r.inconclusive = true;
    r.note = "kappa >= 1";
  } else if (!(r.delta_bar > 0.0) || !std::isfinite(r.delta_bar)) {
    r.inconclusive = true;
    r.note = "delta_bar is not positive";
  }
  return r;
}

double a_p_for_delta5(RtiBaseConstants base, double delta) {
  require(delta > 0.0, ErrorCode::InvalidInput, "delta must be positive");
  // delta_5 decreases in a_p: beta' ~ 1/a_p and kappa grows with a_p.
  double lo = 1e-300, hi = 1.0 - 1e-15;
  base.a_p = hi;
  if (rti_chain(base).delta5 >= delta) return hi;
  base.a_p = lo;
  if (rti_chain(base).delta5 < delta) {
    throw Error(ErrorCode::Inconclusive, "no a_p in (0, 1) reaches the requested delta_5");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    base.a_p = mid;
    (rti_chain(base).delta5 >= delta ? lo : hi) = mid;
    if (hi / lo - 1.0 < 1e-14) break;
  }
  return lo;
}

RtiEstimate estimate_rti_constants(const RtiModel& m, const RtiEstimateOptions& o) {
  require(m.nx > 0 && m.nu > 0 && m.field && m.step && m.oracle, ErrorCode::InvalidInput,
          "RTI model is incomplete");
  require(o.samples >= 1 && o.radius > 0.0 && o.delta > 0.0, ErrorCode::InvalidInput,
          "RTI estimation settings");
  std::mt19937_64 rng(o.seed);
  RtiEstimate est;
  auto& b = est.base;
  b.delta = o.delta;
  b.a1 = std::numeric_limits<double>::infinity();
  b.a3 = std::numeric_limits<double>::infinity();

  std::vector<Vec> xs;
  std::vector<double> Vs;
  auto envelope = [&](const Vec& x, const OracleSample& s) {
    const double r2 = x.squaredNorm();
    if (r2 <= 0.0) return;
    b.a1 = std::min(b.a1, s.V / r2);
    b.a2 = std::max(b.a2, s.V / r2);
    const Vec xp = m.step(x, s.u, o.delta);
    const OracleSample sp = m.oracle(xp);
    b.a3 = std::min(b.a3, (s.V - sp.V) / (o.delta * r2));
  };

  for (int k = 0; k < o.samples; ++k) {
    const Vec x1 = sample_ball(rng, m.nx, o.radius);
    const Vec x2 = x1 + sample_ball(rng, m.nx, 0.5 * o.radius);
    const Vec u1 = sample_ball(rng, m.nu, o.radius);
    const Vec u2 = u1 + sample_ball(rng, m.nu, 0.5 * o.radius);
    const OracleSample s1 = m.oracle(x1), s2 = m.oracle(x2);
    envelope(x1, s1);
    xs.push_back(x1);
    Vs.push_back(s1.V);
    const double dx = (x1 - x2).norm(), du = (u1 - u2).norm();
    if (dx > 0.0) {
      b.L_fx_c = std::max(b.L_fx_c, (m.field(x1, u1) - m.field(x2, u1)).norm() / dx);
      b.L_px = std::max(b.L_px, (s1.p - s2.p).norm() / dx);
      b.L_Vx = std::max(b.L_Vx,
                        std::abs(std::sqrt(std::max(0.0, s1.V)) - std::sqrt(std::max(0.0, s2.V))) / dx);
    }
    if (du > 0.0) b.L_fu_c = std::max(b.L_fu_c, (m.field(x1, u1) - m.field(x1, u2)).norm() / du);
  }

  // Quadratic fit V ~ x'Wx; its extreme eigenvectors sharpen the envelope.
  const int q = m.nx * (m.nx + 1) / 2;
  if (static_cast<int>(xs.size()) >= 2 * q) {
    Mat A(xs.size(), q);
    Vec y(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      int c = 0;
      for (int i = 0; i < m.nx; ++i)
        for (int j = i; j < m.nx; ++j) A(k, c++) = (i == j ? 1.0 : 2.0) * xs[k][i] * xs[k][j];
      y[k] = Vs[k];
    }
    const Vec coef = A.colPivHouseholderQr().solve(y);
    est.envelope_fit_error = (A * coef - y).cwiseAbs().maxCoeff();
    Mat W(m.nx, m.nx);
    int c = 0;
    for (int i = 0; i < m.nx; ++i)
      for (int j = i; j < m.nx; ++j) W(i, j) = W(j, i) = coef[c++];
    Eigen::SelfAdjointEigenSolver<Mat> es(W);
    for (int idx : {0, m.nx - 1}) {
      const Vec x = 0.5 * o.radius * es.eigenvectors().col(idx);
      envelope(x, m.oracle(x));
    }
  }
  b.L_Vp = b.L_fu_c * std::exp(b.delta1 * b.L_fx_c) * b.L_Vx;
  est.samples = o.samples;
  return est;
}

nlohmann::json to_json(const RtiConstants& r) {
  return {{"a1", r.a1},           {"a2", r.a2},         {"a3", r.a3},
          {"L_fx_c", r.L_fx_c},   {"L_fu_c", r.L_fu_c}, {"L_px", r.L_px},
          {"L_Vx", r.L_Vx},       {"L_Vp", r.L_Vp},     {"V_bar", r.V_bar},
          {"r_p", r.r_p},         {"r_x", r.r_x},       {"delta", r.delta},
          {"delta1", r.delta1},   {"a_p", r.a_p},       {"L_fx_delta1", r.L_fx_d1},
          {"L_fu_delta1", r.L_fu_d1}, {"eta", r.eta},   {"r_Vbar", r.r_Vbar},
          {"delta3", r.delta3},   {"kappa", r.kappa},   {"L_V", r.L_V},
          {"a_bar", r.a_bar},     {"L_e", r.L_e},       {"beta_prime", r.beta_prime},
          {"r_p_tilde", r.r_p_tilde}, {"delta4_prime", r.delta4p}, {"delta5", r.delta5},
          {"delta_bar", r.delta_bar}, {"inconclusive", r.inconclusive}, {"note", r.note}};
}

}  // namespace dsqp

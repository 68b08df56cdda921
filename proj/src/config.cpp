#include "dsqp/config.hpp"

#include <cmath>
#include <fstream>

namespace dsqp {

using nlohmann::json;

RunConfig::RunConfig() : Q(pendulum_Q()), R(pendulum_R()) {}

void RunConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, ErrorCode::InvalidInput,
          "unsupported schema_version " + std::to_string(schema_version));
  plant.validate();
  require(N >= 1, ErrorCode::InvalidInput, "N must be >= 1");
  require(h > 0.0 && delta > 0.0, ErrorCode::InvalidInput, "h and delta must be positive");
  require(T_f >= delta, ErrorCode::InvalidInput, "T_f must be >= delta");
  // Horizons are quoted to the millisecond, so 7 x 57 ms counts as 0.4 s.
  require(std::abs(N * h - horizon) <= 0.0015 + 1e-12, ErrorCode::InvalidInput,
          "N * h does not match the horizon");
  require(Q.rows() == 4 && Q.cols() == 4 && R.rows() == 1 && R.cols() == 1,
          ErrorCode::DimensionMismatch, "Q must be 4x4 and R 1x1");
  require(beta >= 1.0, ErrorCode::InvalidInput, "beta must be >= 1");
  require(!beta2 || *beta2 >= 1.0, ErrorCode::InvalidInput, "beta2 must be >= 1");
  require(mu > 1.0, ErrorCode::InvalidInput, "mu must be > 1");
  require(copy_penalty >= 0.0, ErrorCode::InvalidInput, "copy_penalty must be >= 0");
  require(init_tol > 0.0 && init_max_outer >= 1, ErrorCode::InvalidInput, "initializer settings");
  dsqp.validate();
  const auto& c = certificate;
  require(c.samples >= 1 && c.radius > 0.0, ErrorCode::InvalidInput, "certificate sampling");
  require(c.target_accuracy > 0.0 && c.target_accuracy < 1.0, ErrorCode::InvalidInput,
          "target accuracy must lie in (0, 1)");
  require(c.lipschitz_samples >= 1 && c.lipschitz_radius > 0.0, ErrorCode::InvalidInput,
          "Lipschitz sampling");
  if (initial.type == "explicit") {
    require(static_cast<int>(initial.q.size()) == plant.S, ErrorCode::DimensionMismatch,
            "explicit initial condition needs one q per cart");
  } else {
    require(initial.type == "alternating" || initial.type == "index" || initial.type == "zero",
            ErrorCode::InvalidInput, "unknown initial condition '" + initial.type + "'");
  }
}

Vec RunConfig::initial_state() const {
  Vec x = Vec::Zero(4 * plant.S);
  for (int i = 0; i < plant.S; ++i) {
    const int k = i + 1;
    double q = 0.0;
    if (initial.type == "alternating") q = (k % 2 == 0) ? 1.0 : -1.0;
    else if (initial.type == "index") q = k;
    else if (initial.type == "explicit") q = initial.q[i];
    x[4 * i] = q;
    if (initial.type != "zero") x[4 * i + 2] = M_PI;
  }
  return x;
}

int RunConfig::num_steps() const { return static_cast<int>(std::lround(T_f / delta)); }

namespace {

Mat diag_from(const json& j, int n, const char* what) {
  const auto v = j.get<std::vector<double>>();
  require(static_cast<int>(v.size()) == n, ErrorCode::DimensionMismatch,
          std::string(what) + " needs " + std::to_string(n) + " diagonal entries");
  Mat m = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = v[i];
  return m;
}

std::vector<double> diag_of(const Mat& m) {
  std::vector<double> v(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m(i, i);
  return v;
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_opt(const json& j, const char* key, std::optional<double>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<double>();
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    require(j.contains("schema_version"), ErrorCode::InvalidInput, "missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    require(c.schema_version == kConfigSchemaVersion, ErrorCode::InvalidInput,
            "unsupported schema_version " + std::to_string(c.schema_version));
    get_if(j, "case", c.case_id);
    if (j.contains("plant")) {
      const auto& p = j.at("plant");
      get_if(p, "S", c.plant.S);
      get_if(p, "cart_mass", c.plant.cart_mass);
      get_if(p, "pendulum_mass", c.plant.pendulum_mass);
      get_if(p, "length", c.plant.length);
      get_if(p, "spring", c.plant.spring);
      get_if(p, "gravity", c.plant.gravity);
      get_if(p, "u_max", c.plant.u_max);
    }
    if (j.contains("initial_condition")) {
      const auto& ic = j.at("initial_condition");
      get_if(ic, "type", c.initial.type);
      get_if(ic, "q", c.initial.q);
    }
    if (j.contains("ocp")) {
      const auto& o = j.at("ocp");
      get_if(o, "N", c.N);
      get_if(o, "h", c.h);
      c.horizon = c.N * c.h;
      get_if(o, "horizon", c.horizon);
      if (o.contains("Q")) c.Q = diag_from(o.at("Q"), 4, "Q");
      if (o.contains("R")) c.R = diag_from(o.at("R"), 1, "R");
      get_if(o, "beta", c.beta);
      if (o.contains("beta2") && o.at("beta2").is_number()) c.beta2 = o.at("beta2").get<double>();
      get_if(o, "mu", c.mu);
      get_if(o, "terminal_delta", c.terminal_delta);
      get_if(o, "copy_penalty", c.copy_penalty);
      get_if(o, "terminal_input", c.terminal_input);
      get_if(o, "copy_terminal_state", c.copy_terminal_state);
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      get_if(s, "delta", c.delta);
      get_if(s, "T_f", c.T_f);
    }
    if (j.contains("dsqp")) {
      const auto& d = j.at("dsqp");
      get_if(d, "k_max", c.dsqp.k_max);
      get_if(d, "l_max", c.dsqp.l_max);
      get_if(d, "rho", c.dsqp.rho);
      if (d.contains("hessian")) c.dsqp.hessian = parse_hessian_mode(d.at("hessian").get<std::string>());
      get_if(d, "qp_tol", c.dsqp.qp_tol);
      get_if(d, "reg_floor", c.dsqp.reg_floor);
      get_if(d, "parallel", c.dsqp.parallel);
    }
    if (j.contains("initialization")) {
      const auto& in = j.at("initialization");
      get_if(in, "kkt_tol", c.init_tol);
      get_if(in, "max_outer", c.init_max_outer);
    }
    get_if(j, "seed", c.seed);
    if (j.contains("certificate")) {
      const auto& ce = j.at("certificate");
      auto& cc = c.certificate;
      get_if(ce, "samples", cc.samples);
      get_if(ce, "radius", cc.radius);
      get_if(ce, "target_accuracy", cc.target_accuracy);
      get_if(ce, "lipschitz_samples", cc.lipschitz_samples);
      get_if(ce, "lipschitz_radius", cc.lipschitz_radius);
      get_if(ce, "lanczos_steps", cc.lanczos_steps);
      if (ce.contains("rti")) {
        const auto& r = ce.at("rti");
        auto& ri = cc.rti;
        get_opt(r, "a1", ri.a1);
        get_opt(r, "a2", ri.a2);
        get_opt(r, "a3", ri.a3);
        get_opt(r, "L_fx_c", ri.L_fx_c);
        get_opt(r, "L_fu_c", ri.L_fu_c);
        get_opt(r, "L_px", ri.L_px);
        get_opt(r, "L_Vx", ri.L_Vx);
        get_opt(r, "L_Vp", ri.L_Vp);
        get_if(r, "V_bar", ri.V_bar);
        get_if(r, "r_p", ri.r_p);
        get_if(r, "r_x", ri.r_x);
        get_if(r, "delta1", ri.delta1);
        get_if(r, "a_p", ri.a_p);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["case"] = c.case_id;
  j["plant"] = {{"S", c.plant.S},
                {"cart_mass", c.plant.cart_mass},
                {"pendulum_mass", c.plant.pendulum_mass},
                {"length", c.plant.length},
                {"spring", c.plant.spring},
                {"gravity", c.plant.gravity},
                {"u_max", c.plant.u_max}};
  j["initial_condition"] = {{"type", c.initial.type}};
  if (c.initial.type == "explicit") j["initial_condition"]["q"] = c.initial.q;
  j["ocp"] = {{"N", c.N},
              {"h", c.h},
              {"horizon", c.horizon},
              {"Q", diag_of(c.Q)},
              {"R", diag_of(c.R)},
              {"beta", c.beta},
              {"beta2", c.beta2 ? json(*c.beta2) : json("auto")},
              {"mu", c.mu},
              {"terminal_delta", c.terminal_delta},
              {"copy_penalty", c.copy_penalty},
              {"terminal_input", c.terminal_input},
              {"copy_terminal_state", c.copy_terminal_state}};
  j["simulation"] = {{"delta", c.delta}, {"T_f", c.T_f}};
  j["dsqp"] = {{"k_max", c.dsqp.k_max},
               {"l_max", c.dsqp.l_max},
               {"rho", c.dsqp.rho},
               {"hessian", to_string(c.dsqp.hessian)},
               {"qp_tol", c.dsqp.qp_tol},
               {"reg_floor", c.dsqp.reg_floor},
               {"parallel", c.dsqp.parallel}};
  j["initialization"] = {{"kkt_tol", c.init_tol}, {"max_outer", c.init_max_outer}};
  j["seed"] = c.seed;
  const auto& cc = c.certificate;
  json rti = {{"V_bar", cc.rti.V_bar}, {"r_p", cc.rti.r_p}, {"r_x", cc.rti.r_x},
              {"delta1", cc.rti.delta1}, {"a_p", cc.rti.a_p}};
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) rti[k] = *v;
  };
  put("a1", cc.rti.a1);
  put("a2", cc.rti.a2);
  put("a3", cc.rti.a3);
  put("L_fx_c", cc.rti.L_fx_c);
  put("L_fu_c", cc.rti.L_fu_c);
  put("L_px", cc.rti.L_px);
  put("L_Vx", cc.rti.L_Vx);
  put("L_Vp", cc.rti.L_Vp);
  j["certificate"] = {{"samples", cc.samples},
                      {"radius", cc.radius},
                      {"target_accuracy", cc.target_accuracy},
                      {"lipschitz_samples", cc.lipschitz_samples},
                      {"lipschitz_radius", cc.lipschitz_radius},
                      {"lanczos_steps", cc.lanczos_steps},
                      {"rti", rti}};
  return j;
}

RunConfig case_config(int which) {
  require(which >= 1 && which <= 3, ErrorCode::InvalidInput, "cases are 1, 2 and 3");
  RunConfig c;
  c.case_id = "case" + std::to_string(which);
  c.initial.type = which == 1 ? "alternating" : "index";
  if (which == 2) c.dsqp.k_max = 3;
  if (which == 3) {
    c.h = 0.057;
    c.N = 7;
    c.dsqp.hessian = HessianMode::GaussNewton;
    c.dsqp.k_max = 2;
    c.dsqp.l_max = 3;
  }
  c.horizon = 0.4;
  c.beta2 = 1.1;
  c.validate();
  return c;
}

}  // namespace dsqp

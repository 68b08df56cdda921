#pragma once

#include "dsqp/dsqp.hpp"
#include "dsqp/pendulum.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dsqp {

inline constexpr int kConfigSchemaVersion = 1;

struct InitialCondition {
  /// "alternating": q_i = (-1)^i, "index": q_i = i, "zero", or "explicit" (uses q).
  std::string type = "alternating";
  std::vector<double> q;
};

/// Published RTI constants; missing entries are estimated from simulation.
struct RtiInputs {
  std::optional<double> a1, a2, a3;
  std::optional<double> L_fx_c, L_fu_c, L_px, L_Vx, L_Vp;
  double V_bar = 1.0;
  double r_p = 1.0;
  double r_x = 1.0;
  double delta1 = 0.04;
  double a_p = 0.5;
};

struct CertificateConfig {
  int samples = 64;
  double radius = 1e-2;
  double target_accuracy = 0.5;  ///< a in the inner-iteration bound
  int lipschitz_samples = 512;
  double lipschitz_radius = 1e-2;
  int lanczos_steps = 300;
  RtiInputs rti;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::string case_id = "case1";
  PendulumChainParams plant;
  InitialCondition initial;

  int N = 10;
  double h = 0.04;
  double horizon = 0.4;
  Mat Q;
  Mat R;
  double beta = 1.0;
  std::optional<double> beta2;  ///< empty: taken from the terminal design
  double mu = 1.01;
  double terminal_delta = 0.04;
  double copy_penalty = 1e-5;
  bool terminal_input = true;
  bool copy_terminal_state = true;

  double delta = 0.04;
  double T_f = 10.0;

  DsqpSettings dsqp;
  double init_tol = 1e-8;
  int init_max_outer = 100;

  std::uint64_t seed = 1;
  CertificateConfig certificate;

  RunConfig();
  void validate() const;
  /// Stacked chain state at t = 0 with phi = pi (hanging) and zero velocities.
  Vec initial_state() const;
  /// t_n = T_f / delta.
  int num_steps() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

/// Built-in presets for the three benchmark cases (1, 2, 3).
RunConfig case_config(int which);

}  // namespace dsqp

#pragma once

#include "dsqp/config.hpp"
#include "dsqp/mpc.hpp"

#include <json.hpp>

#include <string>

namespace dsqp {

/// trajectories.csv columns: t, then per cart i = 1..S: q_i, dq_i, phi_i, dphi_i, u_i.
std::string trajectories_csv(const ClosedLoopLog& log, int S);
/// optimizer.csv columns: t, opt_error, kkt_residual, messages, scalars.
std::string optimizer_csv(const ClosedLoopLog& log);
/// Per-iteration trace: step, k, l, consensus, kkt_residual, dist_ref.
std::string trace_csv(const ClosedLoopLog& log);
nlohmann::json summary_json(const ClosedLoopLog& log, const RunConfig& config, const std::string& mode);

struct ReportPaths {
  std::string trajectories;
  std::string optimizer;
  std::string summary;
  std::string trace;       ///< empty if not written
  std::string transcript;  ///< empty if not written
};

/// Writes the report files into dir (created if missing).
ReportPaths emit_reports(const ClosedLoopLog& log, const RunConfig& config, const std::string& mode,
                         const std::string& dir);

void write_text(const std::string& path, const std::string& text);

}  // namespace dsqp

#include "dsqp/reports.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dsqp {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json num_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string trajectories_csv(const ClosedLoopLog& log, int S) {
  std::ostringstream os;
  os << "t";
  for (int i = 1; i <= S; ++i) os << ",q_" << i << ",dq_" << i << ",phi_" << i << ",dphi_" << i << ",u_" << i;
  os << "\n";
  for (const auto& st : log.steps) {
    os << num(st.t);
    for (int i = 0; i < S; ++i) {
      for (int k = 0; k < 4; ++k) os << "," << num(st.x[4 * i + k]);
      os << "," << num(st.u[i]);
    }
    os << "\n";
  }
  return os.str();
}

std::string optimizer_csv(const ClosedLoopLog& log) {
  std::ostringstream os;
  os << "t,opt_error,kkt_residual,messages,scalars\n";
  for (const auto& st : log.steps) {
    os << num(st.t) << "," << num(st.opt_error) << "," << num(st.kkt) << "," << st.messages << ","
       << st.scalars << "\n";
  }
  return os.str();
}

std::string trace_csv(const ClosedLoopLog& log) {
  std::ostringstream os;
  os << "step,k,l,consensus,kkt_residual,dist_ref\n";
  for (const auto& r : log.trace) {
    os << r.step << "," << r.row.k << "," << r.row.l << "," << num(r.row.consensus) << ","
       << num(r.row.kkt) << "," << (r.row.dist_ref < 0 ? std::string() : num(r.row.dist_ref)) << "\n";
  }
  return os.str();
}

nlohmann::json summary_json(const ClosedLoopLog& log, const RunConfig& config, const std::string& mode) {
  nlohmann::json j;
  j["J_cl"] = num_or_null(log.J_cl());
  j["mode"] = mode;
  j["steps_logged"] = log.steps.size();
  j["steps_planned"] = log.planned_steps;
  j["aborted"] = log.aborted;
  if (log.aborted) j["abort_reason"] = log.abort_reason;
  j["beta2"] = log.beta2;
  j["initial_solve"] = {{"iterations", log.init_iterations}, {"kkt_residual", log.init_residual}};
  const double umax = log.steps.empty() ? 0.0 : log.max_abs_input();
  j["constraints"] = {{"u_max", config.plant.u_max},
                      {"max_abs_input", umax},
                      {"input_margin", config.plant.u_max - umax}};
  j["final_state"] = {{"max_abs_angle", num_or_null(log.final_max_angle())},
                      {"max_abs_position", num_or_null(log.final_max_position())}};
  const long msgs = log.total_messages(), sc = log.total_scalars();
  j["messages"] = {{"total", msgs},
                   {"scalars", sc},
                   {"bytes", 8 * sc},
                   {"per_step", log.steps.empty() ? 0.0 : double(msgs) / double(log.steps.size())}};
  double max_err = 0.0;
  bool have_err = false;
  for (const auto& st : log.steps) {
    if (!std::isnan(st.opt_error)) {
      have_err = true;
      max_err = std::max(max_err, st.opt_error);
    }
  }
  if (have_err) {
    j["optimizer"] = {{"initial_error", num_or_null(log.steps.front().opt_error)},
                      {"final_error", num_or_null(log.steps.back().opt_error)},
                      {"max_error", max_err}};
  }
  j["config"] = to_json(config);
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

ReportPaths emit_reports(const ClosedLoopLog& log, const RunConfig& config, const std::string& mode,
                         const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir + "': " + ec.message());
  ReportPaths p;
  p.trajectories = (fs::path(dir) / "trajectories.csv").string();
  p.optimizer = (fs::path(dir) / "optimizer.csv").string();
  p.summary = (fs::path(dir) / "summary.json").string();
  write_text(p.trajectories, trajectories_csv(log, config.plant.S));
  write_text(p.optimizer, optimizer_csv(log));
  write_text(p.summary, summary_json(log, config, mode).dump(2) + "\n");
  if (!log.trace.empty()) {
    p.trace = (fs::path(dir) / "dsqp_trace.csv").string();
    write_text(p.trace, trace_csv(log));
  }
  if (!log.transcript.empty()) {
    p.transcript = (fs::path(dir) / "transcript.jsonl").string();
    std::string t;
    for (const auto& line : log.transcript) t += line + "\n";
    write_text(p.transcript, t);
  }
  return p;
}

}  // namespace dsqp

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridlin/exact_powerflow.hpp"
#include "gridlin/loads.hpp"
#include "gridlin/network.hpp"
#include "gridlin/simulation.hpp"
#include "gridlin/vvc.hpp"

namespace gridlin::io {

/// %.17g: shortest fixed-width form that round-trips every double.
std::string format_double(double x);

std::string read_file(const std::string& path);  // FileNotFound
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_file(const std::string& path, std::string_view contents);

// ---- network file -------------------------------------------------------

/// One entry of the `loads` array. Wye values are per bus phase (a < b < c);
/// delta values are per listed connection.
struct LoadDecl {
  int bus = 0;
  bool delta = false;
  std::vector<Connection> connections;
  std::vector<double> p;
  std::vector<double> q;
};

struct PolarVoltage {
  double mag = 1.0;
  double angle_deg = 0.0;
};

struct NetworkDocument {
  NetworkSpec spec;
  /// Slack voltage as written in the file; empty when the file has no slack
  /// section. spec.slack_voltage is kept in sync by parse_network.
  std::vector<PolarVoltage> slack;
  std::vector<LoadDecl> loads;
};

/// Loads with a nonzero wye part or any delta connection, in bus order.
std::vector<LoadDecl> load_decls(const Network& net, const LoadSet& loads);

/// Throws ParseError (with line/column for syntax errors).
NetworkDocument parse_network(std::string_view text);
/// Canonical form: fixed key order, two-space indent, 17 significant digits.
std::string write_network(const NetworkDocument& doc);

/// Wye declarations on the same bus add up; a second delta declaration on a
/// bus raises InvalidInput.
LoadSet make_load_set(const Network& net, const std::vector<LoadDecl>& decls);

// ---- operating point ----------------------------------------------------

/// Per-phase-node voltages, per-circuit flows and the loads behind them.
std::string write_operating_point(const Network& net, const OperatingPoint& op);
/// Rebuilds the snapshot from the file's voltages and loads; flows are
/// re-derived from the voltages.
OperatingPoint parse_operating_point(const Network& net, std::string_view text);

/// Query-load file: {"loads": [...]} in the network file's load syntax.
LoadSet parse_query_loads(const Network& net, std::string_view text);

/// CSV: bus,phase,v_mag,p_flow,q_flow.
std::string write_linear_solution(const Network& net, const LinearSolution& sol);

// ---- profiles and scenarios ---------------------------------------------

enum class ProfileKind { Wye, Delta, Pv };

struct ProfileRecord {
  int step = 0;
  int bus = 0;
  ProfileKind kind = ProfileKind::Wye;
  std::string phase_or_pair;  // "a" for wye/pv, "ab" for delta
  double p = 0.0;
  double q = 0.0;
};

/// Header: step,bus,kind,phase_or_pair,p,q.
std::vector<ProfileRecord> parse_profile(std::string_view text);
std::string write_profile(const std::vector<ProfileRecord>& records);

/// Steps run 0..max step. Entries a step does not list keep the base value.
/// Throws UnknownBus / MissingPhase / InvalidInput.
TimeSeries build_timeseries(const Network& net, const LoadSet& base, const std::vector<ProfileRecord>& records,
                            double dt_seconds);

struct FleetEntry {
  int bus = 0;
  std::optional<Phase> phase;  // every bus phase when absent
  double q_min = -1.0;
  double q_max = 1.0;
};

enum class ControllerMode { Online, Offline };

struct ControllerSpec {
  ControllerMode mode = ControllerMode::Online;
  VvcConfig config;
  int opf_period = 60;
};

struct Scenario {
  double dt_seconds = 60.0;
  int update_every = 1;
  MeasurementModel measurement{0.0, BusScope{true, {}}, {}, 0};
  FailureModel failure;
  std::vector<FleetEntry> fleet;
  std::optional<ControllerSpec> controller;
};

Scenario parse_scenario(std::string_view text);
std::string write_scenario(const Scenario& sc);

/// Resolves fleet entries to phase-nodes and pulls p_g from the time series.
PvFleet make_fleet(const Network& net, const std::vector<FleetEntry>& entries, const TimeSeries& ts);

// ---- reports ------------------------------------------------------------

/// Rows: step,model,v_mape,p_mape,q_mape, then a "# summary" block.
std::string write_simulation_report(const SimulationReport& report);

struct ReportRow {
  int step = 0;
  std::string model;
  double v_mape = 0.0;
  double p_mape = 0.0;
  double q_mape = 0.0;
};

/// Reads the per-step rows of a simulation report; the summary block is skipped.
std::vector<ReportRow> parse_simulation_report(std::string_view text);

struct Comparison {
  std::string summary_csv;   // report,model,v_mape_mean,p_mape_mean,q_mape_mean
  std::string per_step_csv;  // step,model,report,v_mape,p_mape,q_mape,dv_mape
};

/// Differences are relative to the first report. Throws EmptyInput and StepMismatch.
Comparison compare_reports(const std::vector<std::string>& labels, const std::vector<std::vector<ReportRow>>& reports);

/// Rows: step,objective,uncontrolled_objective,q_<node>...
std::string write_vvc_report(const Network& net, const PvFleet& fleet, const VvcReport& report,
                             const VvcReport* uncontrolled, std::string_view mode);

}  // namespace gridlin::io

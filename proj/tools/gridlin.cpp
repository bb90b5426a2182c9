// gridlin command-line front end.
//
// Exit codes:
//   0   success
//   1   numerical failure (non-convergence, singular system, degenerate voltages)
//   2   usage error
//   65  malformed or inconsistent input data
//   66  input file not found / output not writable

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridlin/error.hpp"
#include "gridlin/exact_powerflow.hpp"
#include "gridlin/fixtures.hpp"
#include "gridlin/io.hpp"
#include "gridlin/kernels.hpp"
#include "gridlin/linearizer.hpp"
#include "gridlin/network.hpp"
#include "gridlin/simulation.hpp"
#include "gridlin/vvc.hpp"

namespace {

using namespace gridlin;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return 2;
    case ErrorCode::FileNotFound: return 66;
    case ErrorCode::NonConvergence:
    case ErrorCode::SingularSystem:
    case ErrorCode::DegenerateVoltagePair:
    case ErrorCode::ZeroVoltage:
    case ErrorCode::ZeroTruthEntry:
    case ErrorCode::MissingSegmentParams: return 1;
    default: return 65;
  }
}

void emit(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    io::write_file(path, contents);
  }
}

struct Loaded {
  io::NetworkDocument doc;
  Network net;
  LoadSet loads;
};

Loaded load_network(const std::string& path) {
  io::NetworkDocument doc = io::parse_network(io::read_file(path));
  Network net = build_network(doc.spec);
  LoadSet loads = io::make_load_set(net, doc.loads);
  return {std::move(doc), std::move(net), std::move(loads)};
}

io::Scenario load_scenario(const std::string& text) {
  io::Scenario sc = io::parse_scenario(text);
  if (const char* env = std::getenv("GRIDLIN_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error(ErrorCode::UsageError, "GRIDLIN_SEED must be a non-negative integer");
    sc.measurement.seed = seed;
  }
  return sc;
}

// ---- subcommands ------------------------------------------------------------

struct ValidateArgs {
  std::string network;
};

int run_validate(const ValidateArgs& a) {
  const Loaded l = load_network(a.network);
  std::size_t wye = 0, delta = 0;
  for (const io::LoadDecl& d : l.doc.loads) (d.delta ? delta : wye)++;
  std::cout << "buses: " << l.net.bus_count() << "\n"
            << "segments: " << l.net.bus_count() - 1 << "\n"
            << "phase-nodes: " << l.net.m() << "\n"
            << "max depth: " << l.net.max_depth() << "\n"
            << "wye loads: " << wye << "\n"
            << "delta loads: " << delta << "\n"
            << "kernels: " << kernels::to_string(kernels::active_isa()) << "\n";
  return 0;
}

struct SolveExactArgs {
  std::string network;
  std::string loads;
  std::string output;
  double tol = 1e-9;
  int max_iter = 100;
};

int run_solve_exact(const SolveExactArgs& a) {
  const Loaded l = load_network(a.network);
  const LoadSet loads = a.loads.empty() ? l.loads : io::parse_query_loads(l.net, io::read_file(a.loads));
  SweepStats stats;
  const OperatingPoint op = solve_exact(l.net, loads, SweepOptions{a.tol, a.max_iter}, &stats);
  emit(a.output, io::write_operating_point(l.net, op));
  std::cerr << "converged in " << stats.iterations << " sweeps\n";
  return 0;
}

struct SolveLinearArgs {
  std::string network;
  std::string operating_point;
  std::string query;
  std::string output;
  std::string baseline;
};

int run_solve_linear(const SolveLinearArgs& a) {
  const Loaded l = load_network(a.network);
  const std::string op_text = io::read_file(a.operating_point);
  LoadSet query = io::parse_query_loads(l.net, io::read_file(a.query));
  LinearModelParams params;
  if (a.baseline.empty()) {
    const OperatingPoint op = io::parse_operating_point(l.net, op_text);
    // buses the query leaves out keep the measured delta layout at zero power
    for (std::size_t b = 1; b < query.bus.size(); ++b) {
      DeltaLoad& d = query.bus[b].delta;
      const DeltaLoad& base = op.loads.bus[b].delta;
      if (d.connections.empty() && !base.connections.empty()) {
        d.connections = base.connections;
        d.s = VectorXcd::Zero(base.s.size());
      }
    }
    params = update_parameters(l.net, op);
  } else if (a.baseline == "lossless") {
    params = lindistflow_params(l.net, query);
  } else {
    throw Error(ErrorCode::UsageError, "--baseline accepts only \"lossless\"");
  }
  const CompactModel cm = assemble_compact(params, incidence_blocks(l.net));
  emit(a.output, io::write_linear_solution(l.net, solve_linear(cm, l.net, query)));
  return 0;
}

struct SimulateArgs {
  std::string network;
  std::string profile;
  std::string scenario;
  std::string output;
};

int run_simulate(const SimulateArgs& a) {
  const Loaded l = load_network(a.network);
  const std::string profile_text = io::read_file(a.profile);
  const io::Scenario sc = load_scenario(io::read_file(a.scenario));
  const TimeSeries ts = io::build_timeseries(l.net, l.loads, io::parse_profile(profile_text), sc.dt_seconds);
  SimulationOptions opts;
  opts.update_every = sc.update_every;
  const SimulationReport rep = run_timeseries(l.net, ts, sc.measurement, sc.failure, opts);
  emit(a.output, io::write_simulation_report(rep));
  return 0;
}

struct VvcArgs {
  std::string network;
  std::string profile;
  std::string scenario;
  std::string output;
  std::string mode;
  bool no_baseline = false;
};

int run_vvc(const VvcArgs& a) {
  const Loaded l = load_network(a.network);
  const std::string profile_text = io::read_file(a.profile);
  const io::Scenario sc = load_scenario(io::read_file(a.scenario));
  if (sc.fleet.empty()) throw Error(ErrorCode::InvalidInput, "scenario has no fleet section");
  io::ControllerSpec ctl = sc.controller.value_or(io::ControllerSpec{});
  if (a.mode == "online") ctl.mode = io::ControllerMode::Online;
  else if (a.mode == "offline") ctl.mode = io::ControllerMode::Offline;
  else if (!a.mode.empty()) throw Error(ErrorCode::UsageError, "--mode accepts online or offline");

  const TimeSeries ts = io::build_timeseries(l.net, l.loads, io::parse_profile(profile_text), sc.dt_seconds);
  const PvFleet fleet = io::make_fleet(l.net, sc.fleet, ts);
  const bool online = ctl.mode == io::ControllerMode::Online;
  const VvcReport rep = online ? run_vvc_online(l.net, ts, fleet, ctl.config, sc.measurement, sc.failure)
                               : run_vvc_offline(l.net, ts, fleet, ctl.config, ctl.opf_period);
  std::optional<VvcReport> base;
  if (!a.no_baseline) base = run_uncontrolled(l.net, ts, fleet);
  emit(a.output, io::write_vvc_report(l.net, fleet, rep, base ? &*base : nullptr, online ? "online" : "offline"));
  return 0;
}

struct GenFixtureArgs {
  std::string kind;
  std::uint64_t seed = 7;
  std::string directory = ".";
  int buses = 3;
  std::string phases = "a";
};

int run_gen_fixture(const GenFixtureArgs& a) {
  const auto kind = fixtures::kind_from_string(a.kind);
  if (!kind) throw Error(ErrorCode::UsageError, "unknown fixture kind \"" + a.kind + "\"");
  fixtures::Fixture fx;
  if (*kind == fixtures::Kind::Chain) {
    const auto phases = PhaseSet::parse(a.phases);
    if (!phases || phases->empty()) throw Error(ErrorCode::UsageError, "--phases expects e.g. a, ab or abc");
    fx = fixtures::chain(a.seed, a.buses, *phases);
  } else {
    fx = fixtures::generate(*kind, a.seed);
  }
  std::error_code ec;
  std::filesystem::create_directories(a.directory, ec);
  if (ec) throw Error(ErrorCode::FileNotFound, "cannot create " + a.directory);
  for (const auto& [name, contents] : fixtures::render(fx)) {
    const std::string path = (std::filesystem::path(a.directory) / name).string();
    io::write_file(path, contents);
    std::cout << path << "\n";
  }
  return 0;
}

struct CompareArgs {
  std::vector<std::string> reports;
  std::string output;
};

int run_compare(const CompareArgs& a) {
  std::vector<std::vector<io::ReportRow>> rows;
  for (const std::string& path : a.reports) rows.push_back(io::parse_simulation_report(io::read_file(path)));
  const io::Comparison cmp = io::compare_reports(a.reports, rows);
  std::cout << cmp.summary_csv;
  if (!a.output.empty()) io::write_file(a.output, cmp.per_step_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-phase distribution power flow: exact sweep, online linearization, simulation and VVC"};
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a network file and print a summary");
  validate->add_option("network", va.network, "Network file (JSON)")->required();

  SolveExactArgs se;
  auto* solve_exact_cmd = app.add_subcommand("solve-exact", "Solve the exact branch flow equations");
  solve_exact_cmd->add_option("network", se.network, "Network file (JSON)")->required();
  solve_exact_cmd->add_option("--loads", se.loads, "Load override file ({\"loads\": [...]})");
  solve_exact_cmd->add_option("-o,--output", se.output, "Operating-point file (default: stdout)");
  solve_exact_cmd->add_option("--tol", se.tol, "Max voltage update between sweeps, p.u.")->capture_default_str();
  solve_exact_cmd->add_option("--max-iter", se.max_iter, "Sweep limit")->capture_default_str();

  SolveLinearArgs sl;
  auto* solve_linear_cmd = app.add_subcommand("solve-linear", "Evaluate the linear model for query loads");
  solve_linear_cmd->add_option("network", sl.network, "Network file (JSON)")->required();
  solve_linear_cmd->add_option("operating-point", sl.operating_point, "Measured operating point (solve-exact output)")
      ->required();
  solve_linear_cmd->add_option("query", sl.query, "Query loads ({\"loads\": [...]})")->required();
  solve_linear_cmd->add_option("-o,--output", sl.output, "Solution CSV (default: stdout)");
  solve_linear_cmd->add_option("--baseline", sl.baseline, "Use the offline model instead: lossless");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop time-series accuracy study");
  simulate->add_option("network", sim.network, "Network file (JSON)")->required();
  simulate->add_option("profile", sim.profile, "Profile CSV")->required();
  simulate->add_option("scenario", sim.scenario, "Scenario file (JSON)")->required();
  simulate->add_option("-o,--output", sim.output, "Report CSV (default: stdout)");

  VvcArgs vv;
  auto* vvc = app.add_subcommand("vvc", "Volt-VAr control run against the exact plant");
  vvc->add_option("network", vv.network, "Network file (JSON)")->required();
  vvc->add_option("profile", vv.profile, "Profile CSV with pv records")->required();
  vvc->add_option("scenario", vv.scenario, "Scenario file with fleet and controller sections")->required();
  vvc->add_option("-o,--output", vv.output, "Report CSV (default: stdout)");
  vvc->add_option("--mode", vv.mode, "online or offline (overrides the scenario)");
  vvc->add_flag("--no-baseline", vv.no_baseline, "Skip the uncontrolled reference run");

  GenFixtureArgs gf;
  auto* gen = app.add_subcommand("gen-fixture", "Write a bundled test network with profiles and scenarios");
  gen->add_option("kind", gf.kind, "appendix-b, chain or synthetic-123")->required();
  gen->add_option("--seed", gf.seed, "Generator seed")->capture_default_str();
  gen->add_option("-d,--dir", gf.directory, "Output directory")->capture_default_str();
  gen->add_option("--buses", gf.buses, "chain only: number of buses including the head")->capture_default_str();
  gen->add_option("--phases", gf.phases, "chain only: phases, e.g. a or abc")->capture_default_str();

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Tabulate simulation reports against the first one");
  compare->add_option("reports", cmp.reports, "Report CSVs from simulate")->required();
  compare->add_option("-o,--output", cmp.output, "Per-step comparison CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return run_validate(va);
    if (*solve_exact_cmd) return run_solve_exact(se);
    if (*solve_linear_cmd) return run_solve_linear(sl);
    if (*simulate) return run_simulate(sim);
    if (*vvc) return run_vvc(vv);
    if (*gen) return run_gen_fixture(gf);
    if (*compare) return run_compare(cmp);
  } catch (const Error& e) {
    std::cerr << "gridlin: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "gridlin: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

// Acceptance gate: one PASS/FAIL line per criterion with the measured values.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "branch_terms.hpp"
#include "gridlin/error.hpp"
#include "gridlin/fixtures.hpp"
#include "gridlin/io.hpp"
#include "gridlin/linearizer.hpp"
#include "gridlin/vvc.hpp"
#include "newton_bim.hpp"
#include "test_support.hpp"

using namespace gridlin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class D>
double max_abs(const Eigen::MatrixBase<D>& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

LoadSet jitter(std::mt19937_64& rng, LoadSet l, double lo, double hi) {
  for (auto& b : l.bus) {
    for (auto& s : b.wye.s) s *= testing::uniform(rng, lo, hi);
    for (auto& s : b.delta.s) s *= testing::uniform(rng, lo, hi);
  }
  return l;
}

Outcome oracle_agreement() {
  std::vector<testing::Case> cases;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) cases.push_back(testing::from_fixture(fixtures::appendix_b(seed)));
  const PhaseSet sets[] = {PhaseSet{Phase::A},           PhaseSet{Phase::B},           PhaseSet{Phase::C},
                           PhaseSet{Phase::A, Phase::B}, PhaseSet{Phase::B, Phase::C}, PhaseSet{Phase::A, Phase::C},
                           PhaseSet::abc()};
  for (int buses = 2; buses <= 10; ++buses)
    for (PhaseSet ph : sets) cases.push_back(testing::from_fixture(fixtures::chain(static_cast<std::uint64_t>(buses), buses, ph)));
  double worst_gap = 0.0, slowest = 0.0;
  for (const auto& c : cases) {
    const Network net = build_network(c.spec);
    const LoadSet loads = io::make_load_set(net, c.loads);
    const auto t0 = Clock::now();
    const auto op = solve_exact(net, loads, {1e-12, 200});
    slowest = std::max(slowest, seconds_since(t0));
    worst_gap = std::max(worst_gap, testing::max_voltage_gap(net, op, oracle::solve_bim(c.spec, c.loads)));
  }
  return {worst_gap < 1e-8 && slowest < 1.0,
          fmt("%zu fixtures, max |dV| %.2e p.u., slowest sweep %.4f s", cases.size(), worst_gap, slowest)};
}

Outcome base_point_exactness() {
  std::mt19937_64 rng(21);
  double worst = 0.0;
  int count = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& fx : {fixtures::appendix_b(seed), fixtures::chain(seed, 6, PhaseSet::abc())}) {
      const Network net = build_network(fx.network.spec);
      const LoadSet base = io::make_load_set(net, fx.network.loads);
      const auto inc = incidence_blocks(net);
      for (int k = 0; k < 10; ++k, ++count) {
        const LoadSet loads = jitter(rng, base, 0.2, 1.8);
        const auto op = solve_exact(net, loads, {1e-12, 200});
        const auto sol = solve_linear(assemble_compact(update_parameters(net, op), inc), net, loads);
        worst = std::max({worst, max_abs(sol.v_sq - op.v_sq), max_abs(sol.p_flow - op.p_flow),
                          max_abs(sol.q_flow - op.q_flow)});
      }
    }
  }
  return {worst < 1e-10, fmt("%d operating points, max residual %.2e", count, worst)};
}

Outcome quadratic_decay() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  bool ok = true;
  std::string detail;
  const std::pair<const char*, fixtures::Fixture> fxs[] = {
      {"appendix-b", fixtures::appendix_b(7)}, {"chain", fixtures::chain(7)}, {"synthetic-123", fixtures::synthetic_123(7)}};
  for (const auto& [name, fx] : fxs) {
    const Network net = build_network(fx.network.spec);
    const LoadSet base = io::make_load_set(net, fx.network.loads);
    const LoadSet dir = testing::random_direction(rng, base);
    const auto cm = assemble_compact(update_parameters(net, solve_exact(net, base, {1e-13, 200})), incidence_blocks(net));
    std::vector<double> err;
    for (double eps : {0.01, 0.02, 0.04}) {
      const LoadSet l = testing::perturbed(base, dir, eps);
      err.push_back(max_abs(solve_linear(cm, net, l).v_sq - solve_exact(net, l, {1e-13, 200}).v_sq));
    }
    const double r1 = err[1] / err[0], r2 = err[2] / err[1];
    ok &= r1 >= 3.0 && r1 <= 5.0 && r2 >= 3.0 && r2 <= 5.0;
    detail += fmt("%s ratios %.2f %.2f; ", name, r1, r2);
  }
  const double elapsed = seconds_since(t0);
  return {ok && elapsed < 5.0, detail + fmt("%.2f s", elapsed)};
}

Outcome jacobian_check() {
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 3;
    Eigen::MatrixXd r, x;
    testing::random_impedance(rng, n, r, x);
    MatrixXcd z(n, n);
    VectorXcd v(n);
    Eigen::VectorXd p(n), q(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) z(i, k) = cdouble(r(i, k), x(i, k));
      v(i) = std::polar(testing::uniform(rng, 0.9, 1.1), -2.0 * std::numbers::pi * i / 3 + testing::uniform(rng, -0.1, 0.1));
      p(i) = testing::uniform(rng, -3, 3);
      q(i) = testing::uniform(rng, -3, 3);
    }
    const auto got = sensitivity_blocks(modified_impedances(z, v), p, q);
    const auto fd = oracle::finite_difference_blocks(z, v, p, q);
    worst = std::max({worst, max_abs(got.f_p - fd.f_p), max_abs(got.f_q - fd.f_q), max_abs(got.g_p - fd.g_p),
                      max_abs(got.g_q - fd.g_q), max_abs(got.h_p - fd.h_p), max_abs(got.h_q - fd.h_q)});
  }
  return {worst < 1e-6, fmt("50 instances, max |J - FD| %.2e", worst)};
}

Outcome lossless_reduction() {
  double worst = 0.0;
  for (const auto& fx : {fixtures::appendix_b(7), fixtures::synthetic_123(7)}) {
    const Network net = build_network(fx.network.spec);
    const LoadSet layout = io::make_load_set(net, fx.network.loads).scaled(0.0);
    const auto online = update_parameters(net, solve_exact(net, layout));
    const auto lossless = lindistflow_params(net, layout);
    for (std::size_t j = 1; j < net.bus_count(); ++j) {
      const auto& a = *online.segments[j];
      const auto& l = *lossless.segments[j];
      worst = std::max({worst, max_abs(a.m_p - l.m_p), max_abs(a.m_q - l.m_q), max_abs(a.g_p), max_abs(a.g_q),
                        max_abs(a.h_p), max_abs(a.h_q), max_abs(a.u_v), max_abs(a.u_p), max_abs(a.u_q)});
      if (online.k[j].t.cols() != lossless.k[j].t.cols()) worst = INFINITY;
      else worst = std::max(worst, max_abs(online.k[j].t - lossless.k[j].t));
    }
  }
  const double k = std::sqrt(3.0) / 3.0;
  const cdouble m = std::polar(k, -std::numbers::pi / 6), p = std::polar(k, std::numbers::pi / 6);
  MatrixXcd want(3, 3);
  want << m, 0.0, p,
          p, m, 0.0,
          0.0, p, m;
  // closed delta on a three-phase bus of a flat unloaded feeder
  NetworkSpec spec;
  spec.units = ImpedanceUnits::PerUnit;
  spec.buses = {{0, PhaseSet::abc()}, {1, PhaseSet::abc()}};
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(3, 3, 0.004), x = Eigen::MatrixXd::Constant(3, 3, 0.008);
  r.diagonal().setConstant(0.01);
  x.diagonal().setConstant(0.02);
  spec.segments.push_back({0, 1, PhaseSet::abc(), r, x});
  const Network net = build_network(spec);
  const std::vector<io::LoadDecl> decls{{1, true, {Connection::AB, Connection::BC, Connection::CA}, {0, 0, 0}, {0, 0, 0}}};
  const LoadSet none = io::make_load_set(net, decls);
  const auto online = update_parameters(net, solve_exact(net, none));
  const double k_gap = max_abs(online.k[1].t - want);
  return {worst < 1e-12 && k_gap < 1e-12, fmt("max parameter gap %.2e, closed-delta K gap %.2e", worst, k_gap)};
}

Outcome incidence_properties() {
  std::mt19937_64 rng(61);
  double worst = 0.0;
  bool structure = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const Network net = build_network(testing::random_radial(rng, 200));
    const auto inc = incidence_blocks(net);
    const auto m = static_cast<Eigen::Index>(net.m());
    Eigen::MatrixXd bar(net.n0() + net.m(), m);
    bar << Eigen::MatrixXd(inc.a0), Eigen::MatrixXd(inc.a);
    for (Eigen::Index c = 0; c < m; ++c) {
      int plus = 0, minus = 0;
      for (Eigen::Index row = 0; row < bar.rows(); ++row) {
        const double v = bar(row, c);
        if (v == 1.0) ++plus;
        else if (v == -1.0) ++minus;
        else if (v != 0.0) structure = false;
      }
      structure &= plus == 1 && minus == 1;
    }
    Eigen::SparseLU<SparseMatrixd> lu;
    lu.compute(inc.a);
    if (lu.info() != Eigen::Success) {
      structure = false;
      continue;
    }
    const Eigen::VectorXd b = Eigen::VectorXd::Random(m);
    const Eigen::VectorXd x = lu.solve(b);
    worst = std::max(worst, max_abs(inc.a * x - b));
  }
  return {structure && worst < 1e-10,
          fmt("1000 feeders, column structure %s, max residual %.2e", structure ? "ok" : "broken", worst)};
}

Outcome delta_conservation() {
  std::mt19937_64 rng(71);
  const PhaseSet sets[] = {PhaseSet::abc(), PhaseSet{Phase::A, Phase::B}, PhaseSet{Phase::B, Phase::C},
                           PhaseSet{Phase::A, Phase::C}};
  double worst = 0.0;
  int transforms = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXcd full(3);
    for (int k = 0; k < 3; ++k)
      full(k) = std::polar(testing::uniform(rng, 0.5, 1.5), testing::uniform(rng, -std::numbers::pi, std::numbers::pi));
    for (PhaseSet ph : sets) {
      VectorXcd v(ph.size());
      for (Phase p : ph.phases()) v(ph.index_of(p)) = full(static_cast<int>(p));
      for (int mask = 1; mask < 8; ++mask) {
        std::vector<Connection> c;
        bool usable = true;
        for (int k = 0; k < 3; ++k) {
          if (!(mask & (1 << k))) continue;
          const auto conn = kAllConnections[static_cast<std::size_t>(k)];
          const auto [a, b] = endpoints(conn);
          if (!ph.contains(a) || !ph.contains(b) || std::abs(v(ph.index_of(a)) - v(ph.index_of(b))) < 1e-6)
            usable = false;
          c.push_back(conn);
        }
        if (!usable) continue;
        const auto t = delta_transform(v, ph, c).t;
        worst = std::max(worst, (t.colwise().sum().array() - 1.0).abs().maxCoeff());
        ++transforms;
      }
    }
  }
  return {worst < 1e-12, fmt("%d transforms, max |colsum - 1| %.2e", transforms, worst)};
}

Outcome dominance() {
  const auto t0 = Clock::now();
  const auto st = testing::study(fixtures::synthetic_123(7));
  const auto rep = run_timeseries(st.net, st.ts, {}, {}, {});
  int wins = 0;
  double worst_ratio = 0.0;
  for (const auto& r : rep.steps) {
    wins += r.online.v_mape < r.lossless.v_mape;
    worst_ratio = std::max(worst_ratio, r.online.v_mape / r.lossless.v_mape);
  }
  const double elapsed = seconds_since(t0);
  const bool all = wins == static_cast<int>(rep.steps.size()) && !rep.steps.empty();
  return {all && elapsed < 60.0, fmt("online better on %d/%zu steps, worst online/lossless %.3f, %.2f s", wins,
                                     rep.steps.size(), worst_ratio, elapsed)};
}

double post_window_gap(const SimulationReport& a, const SimulationReport& clean) {
  // window ends at step 16; the first update from clean data is applied to step 18
  double worst = 0.0;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    if (a.steps[k].step < 18) continue;
    const double c = clean.steps[k].online.v_mape;
    worst = std::max(worst, std::abs(a.steps[k].online.v_mape - c) / c);
  }
  return worst;
}

Outcome robustness() {
  const auto st = testing::study(fixtures::synthetic_123(7));
  const auto clean = run_timeseries(st.net, st.ts, {}, {}, {});
  MeasurementModel mm;
  mm.noise_sigma = 0.01;
  mm.windows = {{12, 16}};
  mm.seed = 3;
  const double noise_gap = post_window_gap(run_timeseries(st.net, st.ts, mm, {}, {}), clean);
  FailureModel fm;
  fm.failed_buses.all = true;
  fm.windows = {{12, 16}};
  const double freeze_gap = post_window_gap(run_timeseries(st.net, st.ts, {}, fm, {}), clean);
  SimulationOptions every10;
  every10.update_every = 10;
  const double slow = run_timeseries(st.net, st.ts, {}, {}, every10).online_mean.v_mape;
  const double fast = clean.online_mean.v_mape;
  return {noise_gap < 0.10 && freeze_gap < 0.10 && slow >= fast,
          fmt("post-window gap noise %.2e freeze %.2e; MAPE every10 %.4e vs every1 %.4e", noise_gap, freeze_gap, slow,
              fast)};
}

bool within(const VvcReport& r, const PvFleet& f) {
  for (const auto& q : r.q_g)
    if ((q - f.q_min).minCoeff() < 0.0 || (f.q_max - q).minCoeff() < 0.0) return false;
  return true;
}

Outcome vvc() {
  const auto t0 = Clock::now();
  const auto fx = fixtures::synthetic_123(7);
  const auto st = testing::study(fx, true);
  const PvFleet fleet = io::make_fleet(st.net, fx.vvc_scenario->fleet, st.ts);
  const auto& ctl = *fx.vvc_scenario->controller;
  const auto online = run_vvc_online(st.net, st.ts, fleet, ctl.config, {}, {});
  const auto offline = run_vvc_offline(st.net, st.ts, fleet, ctl.config, ctl.opf_period);
  const auto none = run_uncontrolled(st.net, st.ts, fleet);
  const double elapsed = seconds_since(t0);
  const bool bounds = within(online, fleet) && within(offline, fleet);
  const bool ok = online.mean_objective <= offline.mean_objective &&
                  online.mean_objective <= 0.8 * none.mean_objective &&
                  offline.mean_objective <= 0.8 * none.mean_objective && bounds && elapsed < 120.0;
  return {ok, fmt("mean objective online %.4e offline %.4e uncontrolled %.4e, bounds %s, %zu steps, %.2f s",
                  online.mean_objective, offline.mean_objective, none.mean_objective, bounds ? "held" : "violated",
                  st.ts.horizon(), elapsed)};
}

int run_in(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && " + GRIDLIN_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "gridlin_acceptance";
  fs::remove_all(root);
  struct Pipeline {
    std::string name, query;
    std::vector<std::string> steps;
  };
  const std::vector<Pipeline> pipelines = {
      {"appendix-b", R"({"loads": [{"bus": 1, "type": "wye", "p": [0.1, 0.1, 0.1], "q": [0.05, 0.05, 0.05]}]})",
       {"gen-fixture appendix-b --seed 3 -d .", "solve-exact network.json -o op.json",
        "solve-linear network.json op.json query.json -o lin.csv",
        "solve-linear network.json op.json query.json --baseline lossless -o base.csv",
        "simulate network.json profile.csv scenario.json -o report.csv",
        "compare report.csv report.csv -o cmp.csv"}},
      {"chain", R"({"loads": [{"bus": 3, "type": "wye", "p": [0.1], "q": [0.05]}]})",
       {"gen-fixture chain --seed 5 --buses 8 -d .", "solve-exact network.json -o op.json",
        "solve-linear network.json op.json query.json -o lin.csv",
        "simulate network.json profile.csv scenario.json -o report.csv"}},
      {"synthetic-123", "",
       {"gen-fixture synthetic-123 --seed 7 -d .", "solve-exact network.json -o op.json",
        "simulate network.json profile.csv scenario.json -o report.csv",
        "vvc network.json vvc_profile.csv vvc_scenario.json -o vvc.csv"}},
  };
  int files = 0, runs = 0;
  std::string problem;
  for (const auto& [name, query, steps] : pipelines) {
    const fs::path a = root / (name + "_a"), b = root / (name + "_b");
    for (const fs::path& d : {a, b}) {
      fs::create_directories(d);
      std::ofstream(d / "query.json") << query;
      for (const auto& s : steps) {
        ++runs;
        if (const int code = run_in(d, s); code != 0 && problem.empty())
          problem = fmt("%s: '%s' exited %d", name.c_str(), s.c_str(), code);
      }
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      if (slurp(entry.path()) != slurp(b / entry.path().filename()) && problem.empty())
        problem = name + ": " + entry.path().filename().string() + " differs";
    }
  }
  fs::remove_all(root);
  return {problem.empty(), problem.empty() ? fmt("%d CLI runs, %d output files byte-identical", runs, files) : problem};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 oracle agreement", oracle_agreement},
      {"2 exactness at base point", base_point_exactness},
      {"3 quadratic error decay", quadratic_decay},
      {"4 jacobian check", jacobian_check},
      {"5 lossless reduction and closed-delta K", lossless_reduction},
      {"6 incidence properties", incidence_properties},
      {"7 delta-transform conservation", delta_conservation},
      {"8 dominance over the lossless baseline", dominance},
      {"9 robustness recovery and update frequency", robustness},
      {"10 volt-var control", vvc},
      {"11 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

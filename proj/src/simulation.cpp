#include "gridlin/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridlin/error.hpp"
#include "gridlin/kernels.hpp"

namespace gridlin {
namespace {

bool in_windows(const std::vector<Window>& windows, int t) {
  return std::any_of(windows.begin(), windows.end(), [t](const Window& w) { return w.contains(t); });
}

void check_windows(const std::vector<Window>& windows) {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].start > windows[i].end || windows[i].start < 0)
      throw Error(ErrorCode::InvalidInput, "window must satisfy 0 <= start <= end");
    if (i > 0 && windows[i].start <= windows[i - 1].end)
      throw Error(ErrorCode::InvalidInput, "windows must be ascending and non-overlapping");
  }
}

std::span<const double> view(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

VectorXd magnitudes(const VectorXcd& v) {
  VectorXd sq(v.size());
  kernels::abs2({v.data(), static_cast<std::size_t>(v.size())}, {sq.data(), static_cast<std::size_t>(sq.size())});
  return sq.cwiseSqrt();
}

bool same_layout(const LoadSet& a, const LoadSet& b) {
  if (a.bus.size() != b.bus.size()) return false;
  for (std::size_t i = 0; i < a.bus.size(); ++i)
    if (a.bus[i].delta.connections != b.bus[i].delta.connections) return false;
  return true;
}

ModelErrors errors_of(const LinearSolution& sol, const VectorXd& bench_mag, const OperatingPoint& bench) {
  ModelErrors e;
  e.v_mape = mape(sol.v_mag(), bench_mag);
  e.p_mape = mape_nonzero(sol.p_flow, bench.p_flow);
  e.q_mape = mape_nonzero(sol.q_flow, bench.q_flow);
  return e;
}

OperatingPoint benchmark(const Network& net, const LoadSet& loads, const SweepOptions& opts, int step) {
  try {
    return solve_exact(net, loads, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonConvergence) throw;
    throw Error(ErrorCode::NonConvergence, "step " + std::to_string(step) + ": " + e.what());
  }
}

}  // namespace

bool BusScope::contains(int bus) const {
  return all || std::find(buses.begin(), buses.end(), bus) != buses.end();
}

bool MeasurementModel::noisy_at(int bus, int t) const {
  if (noise_sigma == 0.0 || !noisy_buses.contains(bus)) return false;
  return windows.empty() || in_windows(windows, t);
}

bool FailureModel::failed_at(int bus, int t) const {
  return failed_buses.contains(bus) && in_windows(windows, t);
}

void validate(const MeasurementModel& mm) {
  if (!(mm.noise_sigma >= 0.0) || !std::isfinite(mm.noise_sigma))
    throw Error(ErrorCode::InvalidInput, "noise sigma must be finite and >= 0");
  check_windows(mm.windows);
}

void validate(const FailureModel& fm) { check_windows(fm.windows); }

MeasurementStore MeasurementStore::create(const Network& net, std::uint64_t seed) {
  MeasurementStore s;
  s.voltage.resize(net.bus_count());
  s.load.resize(net.bus_count());
  s.rng.seed(seed);
  return s;
}

VectorXcd apply_measurement(const Network& net, const VectorXcd& true_v, const MeasurementModel& mm,
                            const FailureModel& fm, MeasurementStore& store, int t) {
  if (true_v.size() != static_cast<Eigen::Index>(net.m()))
    throw Error(ErrorCode::DimensionMismatch, "voltage snapshot does not match the network");
  if (store.voltage.size() != net.bus_count()) store.voltage.resize(net.bus_count());
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXcd out = true_v;
  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    const int j = static_cast<int>(jj);
    const auto off = static_cast<Eigen::Index>(net.node_offset(j));
    const auto n = static_cast<Eigen::Index>(net.phases(j).size());
    if (fm.failed_at(j, t) && store.voltage[jj]) {
      out.segment(off, n) = *store.voltage[jj];
      continue;
    }
    if (mm.noisy_at(j, t)) {
      for (Eigen::Index k = off; k < off + n; ++k) {
        const double mag = std::abs(true_v(k)) + mm.noise_sigma * gauss(store.rng);
        out(k) = std::polar(mag, std::arg(true_v(k)));
      }
    }
    store.voltage[jj] = out.segment(off, n);
  }
  return out;
}

LoadSet apply_load_measurement(const Network& net, const LoadSet& true_loads, const FailureModel& fm,
                               MeasurementStore& store, int t) {
  if (true_loads.bus.size() != net.bus_count())
    throw Error(ErrorCode::DimensionMismatch, "load set does not match the network");
  if (store.load.size() != net.bus_count()) store.load.resize(net.bus_count());
  LoadSet out = true_loads;
  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    if (fm.failed_at(static_cast<int>(jj), t) && store.load[jj]) {
      out.bus[jj] = *store.load[jj];
      continue;
    }
    store.load[jj] = out.bus[jj];
  }
  return out;
}

double mape(const VectorXd& estimate, const VectorXd& truth) {
  if (estimate.size() != truth.size())
    throw Error(ErrorCode::DimensionMismatch, "estimate and truth differ in length");
  if (truth.size() == 0) throw Error(ErrorCode::EmptyInput, "MAPE of an empty vector");
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (truth(i) == 0.0) throw Error(ErrorCode::ZeroTruthEntry, "truth entry " + std::to_string(i) + " is zero");
  return 100.0 / static_cast<double>(truth.size()) * kernels::abs_rel_error_sum(view(estimate), view(truth));
}

double mape_nonzero(const VectorXd& estimate, const VectorXd& truth, double threshold) {
  if (estimate.size() != truth.size())
    throw Error(ErrorCode::DimensionMismatch, "estimate and truth differ in length");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (std::abs(truth(i)) > threshold) keep.push_back(i);
  if (keep.empty()) return 0.0;
  VectorXd e(static_cast<Eigen::Index>(keep.size())), tr(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    e(static_cast<Eigen::Index>(k)) = estimate(keep[k]);
    tr(static_cast<Eigen::Index>(k)) = truth(keep[k]);
  }
  return mape(e, tr);
}

LoadSet with_pv(const Network& net, const LoadSet& loads, const VectorXd& pv_p, const VectorXd& pv_q) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if ((pv_p.size() != 0 && pv_p.size() != m) || (pv_q.size() != 0 && pv_q.size() != m))
    throw Error(ErrorCode::DimensionMismatch, "PV vectors must cover every phase-node");
  LoadSet out = loads;
  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    const auto off = static_cast<Eigen::Index>(net.node_offset(static_cast<int>(jj)));
    VectorXcd& s = out.bus[jj].wye.s;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      const double p = pv_p.size() ? pv_p(off + k) : 0.0;
      const double q = pv_q.size() ? pv_q(off + k) : 0.0;
      s(k) -= cdouble(p, q);
    }
  }
  return out;
}

SimulationReport run_timeseries(const Network& net, const TimeSeries& ts, const MeasurementModel& mm,
                                const FailureModel& fm, const SimulationOptions& opts) {
  if (opts.update_every < 1) throw Error(ErrorCode::InvalidInput, "update_every must be >= 1");
  if (ts.horizon() == 0) throw Error(ErrorCode::EmptyInput, "time series has no steps");
  validate(mm);
  validate(fm);

  const IncidenceBlocks inc = incidence_blocks(net);
  const VectorXd v0_sq = net.v0().cwiseAbs2();
  const int horizon = static_cast<int>(ts.horizon());

  auto loads_at = [&](int t) {
    const auto idx = static_cast<std::size_t>(t);
    if (ts.pv_p.empty()) return ts.loads[idx];
    return with_pv(net, ts.loads[idx], ts.pv_p[idx], VectorXd());
  };

  MeasurementStore store = MeasurementStore::create(net, mm.seed);
  std::optional<CompactModel> online;
  std::optional<CompactModel> lossless;
  LoadSet lossless_layout;

  SimulationReport report;
  LoadSet loads = loads_at(0);
  OperatingPoint bench = benchmark(net, loads, opts.sweep, 0);
  for (int t = 0; t < horizon; ++t) {
    const VectorXcd v_meas = apply_measurement(net, bench.v_complex, mm, fm, store, t);
    const LoadSet l_meas = apply_load_measurement(net, loads, fm, store, t);
    if (t % opts.update_every == 0) {
      const OperatingPoint op = operating_point_from_voltages(net, v_meas, l_meas);
      online = assemble_compact(update_parameters(net, op, t * ts.dt_seconds), inc);
    }
    if (t + 1 == horizon) break;

    LoadSet next = loads_at(t + 1);
    OperatingPoint next_bench = benchmark(net, next, opts.sweep, t + 1);
    if (!lossless || !same_layout(lossless_layout, next)) {
      lossless = assemble_compact(lindistflow_params(net, next), inc);
      lossless_layout = next;
    }
    const VectorXcd s_wye = next.stacked_wye(net);
    const VectorXcd s_delta = next.stacked_delta();

    StepRecord rec;
    rec.step = t + 1;
    rec.benchmark_v_mag = magnitudes(next_bench.v_complex);
    const LinearSolution on = solve_linear(*online, s_wye, s_delta, v0_sq);
    const LinearSolution base = solve_linear(*lossless, s_wye, s_delta, v0_sq);
    rec.online_v_mag = on.v_mag();
    rec.lossless_v_mag = base.v_mag();
    rec.online = errors_of(on, rec.benchmark_v_mag, next_bench);
    rec.lossless = errors_of(base, rec.benchmark_v_mag, next_bench);
    report.steps.push_back(std::move(rec));

    loads = std::move(next);
    bench = std::move(next_bench);
  }

  if (!report.steps.empty()) {
    const double n = static_cast<double>(report.steps.size());
    for (const StepRecord& r : report.steps) {
      report.online_mean.v_mape += r.online.v_mape / n;
      report.online_mean.p_mape += r.online.p_mape / n;
      report.online_mean.q_mape += r.online.q_mape / n;
      report.lossless_mean.v_mape += r.lossless.v_mape / n;
      report.lossless_mean.p_mape += r.lossless.p_mape / n;
      report.lossless_mean.q_mape += r.lossless.q_mape / n;
      report.online_v_mape_max = std::max(report.online_v_mape_max, r.online.v_mape);
      report.lossless_v_mape_max = std::max(report.lossless_v_mape_max, r.lossless.v_mape);
    }
  }
  return report;
}

}  // namespace gridlin

#include "gridlin/vvc.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>
#include <string>

#include "gridlin/error.hpp"
#include "gridlin/kernels.hpp"
#include "gridlin/linearizer.hpp"

namespace gridlin {
namespace {

std::span<const double> view(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

LoadSet plant_loads(const Network& net, const TimeSeries& ts, const PvFleet& fleet, int t, const VectorXd& q) {
  const auto idx = static_cast<std::size_t>(t);
  const VectorXd p = expand_to_nodes(net, fleet, fleet.p_g[idx]);
  return with_pv(net, ts.loads[idx], p, expand_to_nodes(net, fleet, q));
}

OperatingPoint plant(const Network& net, const LoadSet& loads, const SweepOptions& sweep, int t) {
  try {
    return solve_exact(net, loads, sweep);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonConvergence) throw;
    throw Error(ErrorCode::NonConvergence, "step " + std::to_string(t) + ": " + e.what());
  }
}

void finish(VvcReport& r) {
  double sum = 0.0;
  for (double f : r.objective) sum += f;
  r.mean_objective = r.objective.empty() ? 0.0 : sum / static_cast<double>(r.objective.size());
}

void check_inputs(const Network& net, const TimeSeries& ts, const PvFleet& fleet, const VvcConfig& cfg) {
  if (ts.horizon() == 0) throw Error(ErrorCode::EmptyInput, "time series has no steps");
  validate(fleet, net, ts.horizon());
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) throw Error(ErrorCode::InvalidInput, "alpha must be > 0");
  if (cfg.iters_per_step < 1) throw Error(ErrorCode::InvalidInput, "iters_per_step must be >= 1");
}

/// Projected-gradient iterations with Nesterov extrapolation and adaptive
/// restart, step 1/L from the Gram matrix of the sensitivities.
VectorXd solve_offline_dispatch(VectorXd q, const VectorXd& v_at_q, const RowMatrixXd& sens, const PvFleet& fleet) {
  const MatrixXd gram = sens * sens.transpose();
  const double lipschitz = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) return q;
  const VvcConfig step{1.0 / lipschitz, 1};
  const VectorXd q_base = q;
  auto voltages = [&](const VectorXd& at) -> VectorXd { return v_at_q + sens.transpose() * (at - q_base); };

  VectorXd y = q;
  double momentum = 1.0;
  for (int it = 0; it < kOfflineMaxIter; ++it) {
    const VectorXd q_next = vvc_step(y, voltages(y), sens, fleet, step);
    const double change = (q_next - q).cwiseAbs().maxCoeff();
    if (change < kOfflineTol) return q_next;
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if ((y - q_next).dot(q_next - q) > 0.0) {
      // Restart when the extrapolation points uphill.
      y = q_next;
      momentum = 1.0;
    } else {
      y = q_next + ((momentum - 1.0) / next_momentum) * (q_next - q);
      momentum = next_momentum;
    }
    q = q_next;
  }
  throw Error(ErrorCode::NonConvergence,
              "offline dispatch did not converge in " + std::to_string(kOfflineMaxIter) + " iterations");
}

}  // namespace

void validate(const PvFleet& fleet, const Network& net, std::size_t horizon) {
  const auto n = static_cast<Eigen::Index>(fleet.size());
  if (fleet.q_min.size() != n || fleet.q_max.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "q bounds must have one entry per inverter");
  std::set<std::size_t> seen;
  for (std::size_t node : fleet.nodes) {
    if (node >= net.m()) throw Error(ErrorCode::InvalidInput, "inverter node index out of range");
    if (!seen.insert(node).second) throw Error(ErrorCode::InvalidInput, "duplicate inverter node");
  }
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(fleet.q_min(k) <= fleet.q_max(k))) throw Error(ErrorCode::InvalidInput, "q_min must not exceed q_max");
  if (fleet.p_g.size() < horizon) throw Error(ErrorCode::DimensionMismatch, "PV profile shorter than the horizon");
  for (const VectorXd& p : fleet.p_g)
    if (p.size() != n) throw Error(ErrorCode::DimensionMismatch, "PV profile entry has the wrong length");
}

double objective(const VectorXd& v_sq) { return 0.5 * kernels::squared_deviation_sum(view(v_sq), 1.0); }

VectorXd vvc_step(const VectorXd& q_g, const VectorXd& v_meas_sq, const RowMatrixXd& sens, const PvFleet& fleet,
                  const VvcConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(fleet.size());
  if (q_g.size() != n || sens.rows() != n || sens.cols() != v_meas_sq.size() || fleet.q_min.size() != n ||
      fleet.q_max.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "controller dimensions disagree");
  const VectorXd resid = v_meas_sq.array() - 1.0;
  VectorXd grad(n);
  for (Eigen::Index k = 0; k < n; ++k)
    grad(k) = kernels::dot({sens.row(k).data(), static_cast<std::size_t>(sens.cols())}, view(resid));
  VectorXd out(n);
  kernels::projected_step(view(q_g), view(grad), cfg.alpha, view(fleet.q_min), view(fleet.q_max),
                          {out.data(), static_cast<std::size_t>(n)});
  return out;
}

VectorXd expand_to_nodes(const Network& net, const PvFleet& fleet, const VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(fleet.size()))
    throw Error(ErrorCode::DimensionMismatch, "fleet vector has the wrong length");
  VectorXd out = VectorXd::Zero(static_cast<Eigen::Index>(net.m()));
  for (std::size_t k = 0; k < fleet.size(); ++k)
    out(static_cast<Eigen::Index>(fleet.nodes[k])) = values(static_cast<Eigen::Index>(k));
  return out;
}

VvcReport run_vvc_online(const Network& net, const TimeSeries& ts, const PvFleet& fleet, const VvcConfig& cfg,
                         const MeasurementModel& mm, const FailureModel& fm, const SweepOptions& sweep) {
  check_inputs(net, ts, fleet, cfg);
  validate(mm);
  validate(fm);
  const IncidenceBlocks inc = incidence_blocks(net);
  MeasurementStore store = MeasurementStore::create(net, mm.seed);

  VvcReport report;
  VectorXd q = VectorXd::Zero(static_cast<Eigen::Index>(fleet.size()));
  for (int t = 0; t < static_cast<int>(ts.horizon()); ++t) {
    const LoadSet loads = plant_loads(net, ts, fleet, t, q);
    const OperatingPoint op = plant(net, loads, sweep, t);
    report.objective.push_back(objective(op.v_sq));
    report.q_g.push_back(q);
    if (fleet.size() == 0) continue;

    const VectorXcd v_meas = apply_measurement(net, op.v_complex, mm, fm, store, t);
    const LoadSet l_meas = apply_load_measurement(net, loads, fm, store, t);
    const CompactModel cm =
        assemble_compact(update_parameters(net, operating_point_from_voltages(net, v_meas, l_meas)), inc);
    const RowMatrixXd sens = voltage_sensitivity(cm, fleet.nodes);

    VectorXd v_hat = v_meas.cwiseAbs2();
    for (int it = 0; it < cfg.iters_per_step; ++it) {
      const VectorXd q_next = vvc_step(q, v_hat, sens, fleet, cfg);
      // Further inner iterations rely on the model's prediction of the new setpoint.
      v_hat += sens.transpose() * (q_next - q);
      q = q_next;
    }
  }
  finish(report);
  return report;
}

VvcReport run_vvc_offline(const Network& net, const TimeSeries& ts, const PvFleet& fleet, const VvcConfig& cfg,
                          int opf_period, const SweepOptions& sweep) {
  check_inputs(net, ts, fleet, cfg);
  if (opf_period < 1) throw Error(ErrorCode::InvalidInput, "opf_period must be >= 1");
  const IncidenceBlocks inc = incidence_blocks(net);
  const VectorXd v0_sq = net.v0().cwiseAbs2();

  VvcReport report;
  VectorXd q = VectorXd::Zero(static_cast<Eigen::Index>(fleet.size()));
  for (int t = 0; t < static_cast<int>(ts.horizon()); ++t) {
    if (t % opf_period == 0 && fleet.size() > 0) {
      const LoadSet forecast = plant_loads(net, ts, fleet, t, q);
      const CompactModel cm = assemble_compact(lindistflow_params(net, forecast), inc);
      const RowMatrixXd sens = voltage_sensitivity(cm, fleet.nodes);
      // The model is affine in q: v(q') = v(q) + S^T (q' - q).
      const VectorXd v_at_q = solve_linear(cm, forecast.stacked_wye(net), forecast.stacked_delta(), v0_sq).v_sq;
      q = solve_offline_dispatch(q, v_at_q, sens, fleet);
    }
    const OperatingPoint op = plant(net, plant_loads(net, ts, fleet, t, q), sweep, t);
    report.objective.push_back(objective(op.v_sq));
    report.q_g.push_back(q);
  }
  finish(report);
  return report;
}

VvcReport run_uncontrolled(const Network& net, const TimeSeries& ts, const PvFleet& fleet,
                           const SweepOptions& sweep) {
  if (ts.horizon() == 0) throw Error(ErrorCode::EmptyInput, "time series has no steps");
  validate(fleet, net, ts.horizon());
  VvcReport report;
  const VectorXd q = VectorXd::Zero(static_cast<Eigen::Index>(fleet.size()));
  for (int t = 0; t < static_cast<int>(ts.horizon()); ++t) {
    const OperatingPoint op = plant(net, plant_loads(net, ts, fleet, t, q), sweep, t);
    report.objective.push_back(objective(op.v_sq));
    report.q_g.push_back(q);
  }
  finish(report);
  return report;
}

}  // namespace gridlin

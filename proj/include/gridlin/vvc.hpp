#pragma once

#include <cstddef>
#include <vector>

#include "gridlin/exact_powerflow.hpp"
#include "gridlin/linalg.hpp"
#include "gridlin/network.hpp"
#include "gridlin/simulation.hpp"

namespace gridlin {

/// Inverters with controllable reactive output at fixed phase-nodes.
struct PvFleet {
  std::vector<std::size_t> nodes;  // global phase-node indices
  std::vector<VectorXd> p_g;       // per step, one entry per node
  VectorXd q_min;
  VectorXd q_max;

  std::size_t size() const { return nodes.size(); }
};

/// Throws DimensionMismatch / InvalidInput.
void validate(const PvFleet& fleet, const Network& net, std::size_t horizon);

struct VvcConfig {
  double alpha = 2.0;
  int iters_per_step = 1;
};

/// f(v) = 0.5 * ||v - 1||^2 over squared magnitudes.
double objective(const VectorXd& v_sq);

/// q+ = clip(q - alpha * S (v - 1), q_min, q_max), with S(k, i) = dv_i / dq_k
/// as returned by voltage_sensitivity. Throws DimensionMismatch.
VectorXd vvc_step(const VectorXd& q_g, const VectorXd& v_meas_sq, const RowMatrixXd& sens, const PvFleet& fleet,
                  const VvcConfig& cfg);

struct VvcReport {
  std::vector<double> objective;  // plant objective per step
  std::vector<VectorXd> q_g;      // setpoint applied at each step
  double mean_objective = 0.0;
};

/// Spreads fleet values onto a length-m phase-node vector.
VectorXd expand_to_nodes(const Network& net, const PvFleet& fleet, const VectorXd& values);

/// Feedback controller: each step the plant runs at the current setpoint, the
/// measured snapshot refreshes the linear model, and one projected-gradient
/// step produces the next setpoint.
VvcReport run_vvc_online(const Network& net, const TimeSeries& ts, const PvFleet& fleet, const VvcConfig& cfg,
                         const MeasurementModel& mm, const FailureModel& fm, const SweepOptions& sweep = {});

/// Every opf_period steps, solves the dispatch on the lossless model to
/// ||dq||_inf < 1e-8 (at most 10000 accelerated projected-gradient
/// iterations with step 1/L, so cfg.alpha is not used), then holds the
/// setpoint. Throws NonConvergence.
VvcReport run_vvc_offline(const Network& net, const TimeSeries& ts, const PvFleet& fleet, const VvcConfig& cfg,
                          int opf_period, const SweepOptions& sweep = {});

/// Plant objective with every reactive setpoint held at zero.
VvcReport run_uncontrolled(const Network& net, const TimeSeries& ts, const PvFleet& fleet,
                           const SweepOptions& sweep = {});

inline constexpr double kOfflineTol = 1e-8;
inline constexpr int kOfflineMaxIter = 10000;

}  // namespace gridlin

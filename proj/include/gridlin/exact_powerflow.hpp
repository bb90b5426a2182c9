#pragma once

#include <vector>

#include "gridlin/linalg.hpp"
#include "gridlin/loads.hpp"
#include "gridlin/network.hpp"

namespace gridlin {

struct SweepOptions {
  double tol = 1e-9;  // max |dV| between sweeps, per-unit
  int max_iter = 100;
};

/// Voltage/flow snapshot over the phase-nodes and phase-circuits below the head.
/// Vectors are in global node order; circuit l_j^phi shares node j^phi's index.
struct OperatingPoint {
  VectorXcd v_complex;
  VectorXd v_sq;
  VectorXcd s_hat;  // net injections s_Y + T(V) s_delta per node
  VectorXd p_flow;
  VectorXd q_flow;
  VectorXcd currents;
  LoadSet loads;  // wye and phase-to-phase values that produced s_hat
};

struct SweepStats {
  int iterations = 0;
  double final_update = 0.0;
  std::vector<double> update_norms;  // max |dV| per sweep
};

/// Backward/forward sweep on the branch flow equations. Delta transforms are
/// re-evaluated at the current iterate every sweep. Throws NonConvergence.
OperatingPoint solve_exact(const Network& net, const LoadSet& loads, const SweepOptions& opts = {},
                           SweepStats* stats = nullptr);

struct BranchFlows {
  VectorXd p;
  VectorXd q;
  VectorXcd currents;
};

/// S_ij = (z^-1 (V_i - V_j))^* . V_i for every segment, head voltage from the network.
BranchFlows branch_flows_from_voltages(const Network& net, const VectorXcd& v_complex);

/// Builds a snapshot from (possibly measured) voltages and loads: flows come
/// from the voltages, injections from the loads at those voltages.
OperatingPoint operating_point_from_voltages(const Network& net, const VectorXcd& v_complex,
                                             const LoadSet& loads);

/// Largest mismatch over the voltage-drop, current and power-balance equations.
double residual(const Network& net, const OperatingPoint& op);

/// V_i restricted to the phases of segment l_j (head voltage when i = 0).
VectorXcd sending_voltage(const Network& net, const VectorXcd& v_complex, int j);

/// Per-node net injections s_Y + T(V) s_delta at the given voltages.
VectorXcd net_injections(const Network& net, const VectorXcd& v_complex, const LoadSet& loads);

}  // namespace gridlin

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gridlin/exact_powerflow.hpp"
#include "gridlin/linalg.hpp"
#include "gridlin/loads.hpp"
#include "gridlin/network.hpp"

namespace gridlin {

/// Voltage-scaled copies of a segment impedance:
///   z_tilde(i,k) = conj(V_i / V_k) z(i,k)
///   z_bar(i,k)   = z(i,k) conj(1 / V_k)
///   z_check(i,k) = (1 / V_i) conj(1 / V_k) z(i,k)
struct ModifiedImpedances {
  MatrixXcd z_tilde;
  MatrixXcd z_bar;
  MatrixXcd z_check;
};

/// Throws ZeroVoltage / DimensionMismatch.
ModifiedImpedances modified_impedances(const MatrixXcd& z, const VectorXcd& v);

/// Quadratic terms of the reformulated branch equations: the voltage-drop
/// remainder d_v and the real/reactive loss terms d_p, d_q.
struct NonlinearTerms {
  VectorXd d_v;
  VectorXd d_p;
  VectorXd d_q;
};

NonlinearTerms nonlinear_terms(const ModifiedImpedances& mi, const VectorXd& p, const VectorXd& q);

/// Jacobians of the nonlinear terms: f = d(d_v), g = d(d_p), h = d(d_q), each
/// with respect to P and Q. Row i is the derivative of output i.
struct SensitivityBlocks {
  MatrixXd f_p, f_q;
  MatrixXd g_p, g_q;
  MatrixXd h_p, h_q;
};

SensitivityBlocks sensitivity_blocks(const ModifiedImpedances& mi, const VectorXd& p, const VectorXd& q);

/// Time-varying parameters of the linear branch model for one segment.
struct SegmentParams {
  MatrixXd m_p, m_q;
  MatrixXd g_p, g_q;
  MatrixXd h_p, h_q;
  VectorXd u_v, u_p, u_q;
};

struct LinearModelParams {
  /// Indexed by child bus id; entry 0 is always empty.
  std::vector<std::optional<SegmentParams>> segments;
  /// Delta transform per bus (n_i x connections); empty matrices for wye-only buses.
  std::vector<DeltaTransform> k;
  double timestamp = 0.0;
};

/// Linearizes the branch model around a measured operating point.
/// Throws DegenerateVoltagePair, ZeroVoltage.
LinearModelParams update_parameters(const Network& net, const OperatingPoint& op, double timestamp = 0.0);

/// Offline lossless model: balanced-voltage z_tilde, no loss terms, constant
/// balanced delta transforms for the connection layout in `layout`.
LinearModelParams lindistflow_params(const Network& net, const LoadSet& layout);

struct Factorization;

/// Block-diagonal stacking of the segment parameters in circuit order plus the
/// factorized flow system [[A + G_p, G_q], [H_p, A + H_q]] and A^T.
struct CompactModel {
  SparseMatrixd m_p, m_q;
  SparseMatrixd g_p, g_q;
  SparseMatrixd h_p, h_q;
  SparseMatrixcd k;
  VectorXd u_v, u_p, u_q;
  IncidenceBlocks incidence;
  /// 1-norm condition estimate of the flow system.
  double condition_estimate = 0.0;
  std::shared_ptr<const Factorization> factors;

  Eigen::Index m() const { return incidence.a.rows(); }
};

/// Condition estimates above this raise SingularSystem.
inline constexpr double kMaxCondition = 1e12;

/// Throws MissingSegmentParams, DimensionMismatch, SingularSystem.
CompactModel assemble_compact(const LinearModelParams& params, const IncidenceBlocks& inc);

struct LinearSolution {
  VectorXd v_sq;
  VectorXd p_flow;
  VectorXd q_flow;

  VectorXd v_mag() const { return v_sq.cwiseMax(0.0).cwiseSqrt(); }
};

/// Solves the compact model for stacked wye loads (length m), stacked
/// phase-to-phase loads and the squared head voltages.
LinearSolution solve_linear(const CompactModel& cm, const VectorXcd& s_wye, const VectorXcd& s_delta,
                            const VectorXd& v0_sq);

/// Convenience overload taking a LoadSet and the network head voltage.
LinearSolution solve_linear(const CompactModel& cm, const Network& net, const LoadSet& loads);

/// d v / d q_g for reactive injections at the selected phase-nodes
/// (q = ... - q_g). Row k holds the response of all m squared voltages to the
/// k-th selected injection, so the result is (selected x m).
RowMatrixXd voltage_sensitivity(const CompactModel& cm, const std::vector<std::size_t>& nodes);

}  // namespace gridlin

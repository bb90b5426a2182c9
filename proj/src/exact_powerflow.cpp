#include "gridlin/exact_powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gridlin/error.hpp"
#include "gridlin/kernels.hpp"

namespace gridlin {
namespace {

Eigen::Index offset_of(const Network& net, int j) { return static_cast<Eigen::Index>(net.node_offset(j)); }

Eigen::Index width_of(const Network& net, int j) { return net.phases(j).size(); }

/// Adds a child-circuit vector (over the child's phases) into a parent-circuit
/// accumulator (over the parent's phases).
template <typename Vec, typename Acc>
void embed_add(PhaseSet child, PhaseSet parent, const Vec& src, Acc&& dst) {
  Eigen::Index k = 0;
  for (Phase p : child.phases()) dst(parent.index_of(p)) += src(k++);
}

VectorXd squared_magnitudes(const VectorXcd& v) {
  VectorXd out(v.size());
  kernels::abs2({v.data(), static_cast<std::size_t>(v.size())},
                {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

}  // namespace

VectorXcd sending_voltage(const Network& net, const VectorXcd& v_complex, int j) {
  const LineSegment& seg = net.segment(j);
  VectorXcd out(seg.phases.size());
  Eigen::Index k = 0;
  if (seg.from == 0) {
    const PhaseSet head = net.phases(0);
    for (Phase p : seg.phases.phases()) out(k++) = net.v0()(head.index_of(p));
  } else {
    for (Phase p : seg.phases.phases())
      out(k++) = v_complex(static_cast<Eigen::Index>(net.node_index(seg.from, p)));
  }
  return out;
}

VectorXcd net_injections(const Network& net, const VectorXcd& v_complex, const LoadSet& loads) {
  VectorXcd s(static_cast<Eigen::Index>(net.m()));
  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    const int j = static_cast<int>(jj);
    const BusLoad& load = loads.bus[jj];
    const auto off = offset_of(net, j);
    const auto n = width_of(net, j);
    if (load.delta.connections.empty()) {
      s.segment(off, n) = load.wye.s;
    } else {
      const DeltaTransform t = delta_transform(v_complex.segment(off, n), net.phases(j), load.delta.connections);
      s.segment(off, n) = bus_injection(load.wye, load.delta, t);
    }
  }
  return s;
}

OperatingPoint solve_exact(const Network& net, const LoadSet& loads, const SweepOptions& opts,
                           SweepStats* stats) {
  if (!(opts.tol > 0.0) || opts.max_iter < 1)
    throw Error(ErrorCode::InvalidInput, "sweep options need tol > 0 and max_iter >= 1");
  loads.validate(net);

  const auto m = static_cast<Eigen::Index>(net.m());
  const auto order = net.topological_order();

  // Flat start: head voltage copied down the tree.
  VectorXcd v(m);
  for (int j : order) v.segment(offset_of(net, j), width_of(net, j)) = sending_voltage(net, v, j);

  VectorXcd flow = VectorXcd::Zero(m);
  VectorXcd current = VectorXcd::Zero(m);
  VectorXcd s = net_injections(net, v, loads);
  SweepStats local;
  double update = 0.0;

  OperatingPoint op;
  op.loads = loads;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    // Backward: accumulate downstream power plus the loss of the latest current.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int j = *it;
      const LineSegment& seg = net.segment(j);
      const auto off = offset_of(net, j);
      const auto n = width_of(net, j);
      VectorXcd total = s.segment(off, n);
      for (int k : net.children(j))
        embed_add(net.phases(k), seg.phases, flow.segment(offset_of(net, k), width_of(net, k)), total);
      const VectorXcd i_ij = current.segment(off, n);
      total += (i_ij.conjugate().array() * (seg.z * i_ij).array()).matrix();
      flow.segment(off, n) = total;
    }
    // Forward: new currents from the freshest sending voltage, then the drop.
    update = 0.0;
    for (int j : order) {
      const LineSegment& seg = net.segment(j);
      const auto off = offset_of(net, j);
      const auto n = width_of(net, j);
      const VectorXcd vi = sending_voltage(net, v, j);
      const VectorXcd i_ij = (flow.segment(off, n).array() / vi.array()).conjugate().matrix();
      current.segment(off, n) = i_ij;
      const VectorXcd vj = vi - seg.z * i_ij;
      update = std::max(update, (vj - v.segment(off, n)).cwiseAbs().maxCoeff());
      v.segment(off, n) = vj;
    }
    local.update_norms.push_back(update);
    local.iterations = iter;
    if (!v.allFinite() || !flow.allFinite()) {  // std::max above would silently skip NaN
      local.final_update = std::numeric_limits<double>::infinity();
      if (stats) *stats = std::move(local);
      throw Error(ErrorCode::NonConvergence, "sweep diverged at iteration " + std::to_string(iter));
    }
    s = net_injections(net, v, loads);

    if (m == 0 || update < opts.tol) {
      op.v_complex = v;
      op.v_sq = squared_magnitudes(v);
      op.s_hat = s;
      op.p_flow = flow.real();
      op.q_flow = flow.imag();
      op.currents = current;
      if (m == 0 || residual(net, op) < opts.tol) {
        local.final_update = update;
        if (stats) *stats = std::move(local);
        return op;
      }
    }
  }
  local.final_update = update;
  if (stats) *stats = std::move(local);
  throw Error(ErrorCode::NonConvergence, "sweep did not converge in " + std::to_string(opts.max_iter) +
                                             " iterations; last max |dV| = " + std::to_string(update));
}

BranchFlows branch_flows_from_voltages(const Network& net, const VectorXcd& v_complex) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if (v_complex.size() != m) throw Error(ErrorCode::DimensionMismatch, "voltage vector must cover every phase-node");
  BranchFlows out{VectorXd(m), VectorXd(m), VectorXcd(m)};
  for (int j : net.topological_order()) {
    const LineSegment& seg = net.segment(j);
    const auto off = offset_of(net, j);
    const auto n = width_of(net, j);
    const VectorXcd vi = sending_voltage(net, v_complex, j);
    const VectorXcd i_ij = seg.z_inv * (vi - v_complex.segment(off, n));
    const VectorXcd s_ij = (i_ij.conjugate().array() * vi.array()).matrix();
    out.p.segment(off, n) = s_ij.real();
    out.q.segment(off, n) = s_ij.imag();
    out.currents.segment(off, n) = i_ij;
  }
  return out;
}

OperatingPoint operating_point_from_voltages(const Network& net, const VectorXcd& v_complex,
                                             const LoadSet& loads) {
  loads.validate(net);
  BranchFlows flows = branch_flows_from_voltages(net, v_complex);
  OperatingPoint op;
  op.v_complex = v_complex;
  op.v_sq = squared_magnitudes(v_complex);
  op.s_hat = net_injections(net, v_complex, loads);
  op.p_flow = std::move(flows.p);
  op.q_flow = std::move(flows.q);
  op.currents = std::move(flows.currents);
  op.loads = loads;
  return op;
}

double residual(const Network& net, const OperatingPoint& op) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if (op.v_complex.size() != m || op.p_flow.size() != m || op.q_flow.size() != m ||
      op.currents.size() != m || op.s_hat.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "operating point does not match the network");
  const VectorXcd flow = op.p_flow.cast<cdouble>() + cdouble(0.0, 1.0) * op.q_flow.cast<cdouble>();
  double worst = 0.0;
  for (int j : net.topological_order()) {
    const LineSegment& seg = net.segment(j);
    const auto off = offset_of(net, j);
    const auto n = width_of(net, j);
    const VectorXcd vi = sending_voltage(net, op.v_complex, j);
    const VectorXcd i_ij = op.currents.segment(off, n);
    const VectorXcd s_ij = flow.segment(off, n);

    const VectorXcd drop = op.v_complex.segment(off, n) - (vi - seg.z * i_ij);
    const VectorXcd cur = i_ij - (s_ij.array() / vi.array()).conjugate().matrix();
    VectorXcd balance = s_ij - op.s_hat.segment(off, n) -
                        (i_ij.conjugate().array() * (seg.z * i_ij).array()).matrix();
    for (int k : net.children(j)) {
      VectorXcd neg = -flow.segment(offset_of(net, k), width_of(net, k));
      embed_add(net.phases(k), seg.phases, neg, balance);
    }
    if (!drop.allFinite() || !cur.allFinite() || !balance.allFinite())
      return std::numeric_limits<double>::infinity();
    worst = std::max({worst, drop.cwiseAbs().maxCoeff(), cur.cwiseAbs().maxCoeff(),
                      balance.cwiseAbs().maxCoeff()});
  }
  return worst;
}

}  // namespace gridlin

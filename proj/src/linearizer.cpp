#include "gridlin/linearizer.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/SparseLU>

#include "gridlin/error.hpp"

namespace gridlin {

struct Factorization {
  Eigen::SparseLU<SparseMatrixd, Eigen::COLAMDOrdering<int>> flow;
  Eigen::SparseLU<SparseMatrixd, Eigen::COLAMDOrdering<int>> incidence_t;
};

namespace {

constexpr double kZeroVoltage = 1e-12;

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_block(Triplets& out, Eigen::Index row0, Eigen::Index col0, const MatrixXd& block) {
  for (Eigen::Index c = 0; c < block.cols(); ++c)
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      if (block(r, c) != 0.0) out.emplace_back(row0 + r, col0 + c, block(r, c));
}

SparseMatrixd from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
  SparseMatrixd out(rows, cols);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

double one_norm(const SparseMatrixd& a) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    double col = 0.0;
    for (SparseMatrixd::InnerIterator it(a, c); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

/// Hager's estimate of ||B^-1||_1 from solves with B and B^T.
template <typename Lu>
double inverse_one_norm_estimate(Lu& lu, Eigen::Index n) {
  VectorXd x = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  Eigen::Index last = -1;
  for (int iter = 0; iter < 5; ++iter) {
    const VectorXd y = lu.solve(x);
    if (!y.allFinite()) return std::numeric_limits<double>::infinity();
    estimate = y.lpNorm<1>();
    const VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    const VectorXd z = lu.transpose().solve(xi);
    Eigen::Index j = 0;
    const double zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x) || j == last) break;
    x.setZero();
    x(j) = 1.0;
    last = j;
  }
  // Higham's alternating-sign probe guards against the estimator's blind spots.
  VectorXd probe(n);
  for (Eigen::Index i = 0; i < n; ++i)
    probe(i) = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + static_cast<double>(i) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
  const VectorXd w = lu.solve(probe);
  if (!w.allFinite()) return std::numeric_limits<double>::infinity();
  return std::max(estimate, 2.0 * w.lpNorm<1>() / (3.0 * static_cast<double>(n)));
}

void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " + std::to_string(got) +
                                                  ", expected " + std::to_string(want));
}

}  // namespace

ModifiedImpedances modified_impedances(const MatrixXcd& z, const VectorXcd& v) {
  const Eigen::Index n = v.size();
  if (z.rows() != n || z.cols() != n) throw Error(ErrorCode::DimensionMismatch, "impedance and voltage sizes differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(v(i)) < kZeroVoltage) throw Error(ErrorCode::ZeroVoltage, "zero sending-end voltage");

  const VectorXcd inv = v.cwiseInverse();
  ModifiedImpedances mi;
  mi.z_tilde = (v.conjugate() * inv.adjoint()).cwiseProduct(z);
  mi.z_bar = z * inv.conjugate().asDiagonal();
  mi.z_check = (inv * inv.adjoint()).cwiseProduct(z);
  return mi;
}

NonlinearTerms nonlinear_terms(const ModifiedImpedances& mi, const VectorXd& p, const VectorXd& q) {
  const Eigen::Index n = mi.z_bar.rows();
  require_size(p.size(), n, "P");
  require_size(q.size(), n, "Q");
  const MatrixXd rb = mi.z_bar.real(), xb = mi.z_bar.imag();
  const MatrixXd rc = mi.z_check.real(), xc = mi.z_check.imag();

  // z I = z_bar S^*: a + jb.   S^* . (z_check S^*): P c1 - Q c2 + j(P c2 + Q c1).
  const VectorXd a = rb * p + xb * q;
  const VectorXd b = xb * p - rb * q;
  const VectorXd c1 = rc * p + xc * q;
  const VectorXd c2 = xc * p - rc * q;

  NonlinearTerms out;
  out.d_v = a.cwiseProduct(a) + b.cwiseProduct(b);
  out.d_p = p.cwiseProduct(c1) - q.cwiseProduct(c2);
  out.d_q = p.cwiseProduct(c2) + q.cwiseProduct(c1);
  return out;
}

SensitivityBlocks sensitivity_blocks(const ModifiedImpedances& mi, const VectorXd& p, const VectorXd& q) {
  const Eigen::Index n = mi.z_bar.rows();
  require_size(p.size(), n, "P");
  require_size(q.size(), n, "Q");
  const MatrixXd rb = mi.z_bar.real(), xb = mi.z_bar.imag();
  const MatrixXd rc = mi.z_check.real(), xc = mi.z_check.imag();

  const VectorXd a = rb * p + xb * q;
  const VectorXd b = xb * p - rb * q;
  const VectorXd c1 = rc * p + xc * q;
  const VectorXd c2 = xc * p - rc * q;
  const auto dp = p.asDiagonal();
  const auto dq = q.asDiagonal();

  SensitivityBlocks s;
  s.f_p = 2.0 * (a.asDiagonal() * rb + b.asDiagonal() * xb);
  s.f_q = 2.0 * (a.asDiagonal() * xb - b.asDiagonal() * rb);
  s.g_p = MatrixXd(c1.asDiagonal()) + dp * rc - dq * xc;
  s.g_q = MatrixXd(dp * xc) - MatrixXd(c2.asDiagonal()) + dq * rc;
  s.h_p = MatrixXd(c2.asDiagonal()) + dp * xc + dq * rc;
  s.h_q = MatrixXd(c1.asDiagonal()) - dp * rc + dq * xc;
  return s;
}

LinearModelParams update_parameters(const Network& net, const OperatingPoint& op, double timestamp) {
  const auto m = static_cast<Eigen::Index>(net.m());
  if (op.v_complex.size() != m || op.p_flow.size() != m || op.q_flow.size() != m || op.s_hat.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "operating point does not match the network");

  LinearModelParams params;
  params.timestamp = timestamp;
  params.segments.resize(net.bus_count());
  params.k.resize(net.bus_count());

  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    const int j = static_cast<int>(jj);
    const LineSegment& seg = net.segment(j);
    const auto off = static_cast<Eigen::Index>(net.node_offset(j));
    const Eigen::Index n = seg.phases.size();

    const VectorXcd vi = sending_voltage(net, op.v_complex, j);
    const VectorXd p = op.p_flow.segment(off, n);
    const VectorXd q = op.q_flow.segment(off, n);
    const ModifiedImpedances mi = modified_impedances(seg.z, vi);
    const SensitivityBlocks blocks = sensitivity_blocks(mi, p, q);

    SegmentParams sp;
    sp.m_p = -2.0 * mi.z_tilde.real() + blocks.f_p;
    sp.m_q = -2.0 * mi.z_tilde.imag() + blocks.f_q;
    sp.u_v = op.v_sq.segment(off, n) - vi.cwiseAbs2() - sp.m_p * p - sp.m_q * q;
    sp.g_p = blocks.g_p;
    sp.g_q = blocks.g_q;
    sp.h_p = blocks.h_p;
    sp.h_q = blocks.h_q;

    VectorXd downstream_p = VectorXd::Zero(n);
    VectorXd downstream_q = VectorXd::Zero(n);
    for (int k : net.children(j)) {
      const auto koff = static_cast<Eigen::Index>(net.node_offset(k));
      Eigen::Index idx = 0;
      for (Phase ph : net.phases(k).phases()) {
        downstream_p(seg.phases.index_of(ph)) += op.p_flow(koff + idx);
        downstream_q(seg.phases.index_of(ph)) += op.q_flow(koff + idx);
        ++idx;
      }
    }
    const VectorXcd s_j = op.s_hat.segment(off, n);
    sp.u_p = p - downstream_p - s_j.real() - sp.g_p * p - sp.g_q * q;
    sp.u_q = q - downstream_q - s_j.imag() - sp.h_p * p - sp.h_q * q;
    params.segments[jj] = std::move(sp);

    const BusLoad& load = op.loads.bus.at(jj);
    if (load.delta.connections.empty())
      params.k[jj].t = MatrixXcd::Zero(n, 0);
    else
      params.k[jj] = delta_transform(op.v_complex.segment(off, n), net.phases(j), load.delta.connections);
  }
  return params;
}

LinearModelParams lindistflow_params(const Network& net, const LoadSet& layout) {
  layout.validate(net);
  LinearModelParams params;
  params.segments.resize(net.bus_count());
  params.k.resize(net.bus_count());
  for (std::size_t jj = 1; jj < net.bus_count(); ++jj) {
    const int j = static_cast<int>(jj);
    const LineSegment& seg = net.segment(j);
    const Eigen::Index n = seg.phases.size();
    const ModifiedImpedances mi = modified_impedances(seg.z, balanced_voltages(seg.phases));

    SegmentParams sp;
    sp.m_p = -2.0 * mi.z_tilde.real();
    sp.m_q = -2.0 * mi.z_tilde.imag();
    sp.g_p = sp.g_q = sp.h_p = sp.h_q = MatrixXd::Zero(n, n);
    sp.u_v = sp.u_p = sp.u_q = VectorXd::Zero(n);
    params.segments[jj] = std::move(sp);

    const auto& conns = layout.bus[jj].delta.connections;
    params.k[jj] = conns.empty() ? DeltaTransform{MatrixXcd::Zero(n, 0)}
                                 : balanced_delta_transform(net.phases(j), conns);
  }
  return params;
}

CompactModel assemble_compact(const LinearModelParams& params, const IncidenceBlocks& inc) {
  const Eigen::Index m = inc.a.rows();
  if (inc.a.cols() != m || inc.a0.cols() != m)
    throw Error(ErrorCode::DimensionMismatch, "incidence blocks are not m x m / n0 x m");
  if (params.k.size() != params.segments.size())
    throw Error(ErrorCode::DimensionMismatch, "delta transforms and segments cover different bus counts");

  Triplets mp, mq, gp, gq, hp, hq;
  std::vector<Eigen::Triplet<cdouble>> kt;
  CompactModel cm;
  cm.u_v.resize(m);
  cm.u_p.resize(m);
  cm.u_q.resize(m);
  Eigen::Index off = 0;
  Eigen::Index koff = 0;
  for (std::size_t j = 1; j < params.segments.size(); ++j) {
    if (!params.segments[j])
      throw Error(ErrorCode::MissingSegmentParams, "no parameters for the segment into bus " + std::to_string(j));
    const SegmentParams& sp = *params.segments[j];
    const Eigen::Index n = sp.m_p.rows();
    if (off + n > m) throw Error(ErrorCode::DimensionMismatch, "segment parameters exceed the incidence size");
    add_block(mp, off, off, sp.m_p);
    add_block(mq, off, off, sp.m_q);
    add_block(gp, off, off, sp.g_p);
    add_block(gq, off, off, sp.g_q);
    add_block(hp, off, off, sp.h_p);
    add_block(hq, off, off, sp.h_q);
    cm.u_v.segment(off, n) = sp.u_v;
    cm.u_p.segment(off, n) = sp.u_p;
    cm.u_q.segment(off, n) = sp.u_q;

    const MatrixXcd& k = params.k[j].t;
    if (k.cols() > 0 && k.rows() != n)
      throw Error(ErrorCode::DimensionMismatch, "delta transform rows differ from bus phase count");
    for (Eigen::Index c = 0; c < k.cols(); ++c)
      for (Eigen::Index r = 0; r < k.rows(); ++r)
        if (k(r, c) != cdouble(0.0)) kt.emplace_back(off + r, koff + c, k(r, c));
    off += n;
    koff += k.cols();
  }
  if (off != m) throw Error(ErrorCode::DimensionMismatch, "segment parameters do not cover every phase-circuit");

  cm.m_p = from_triplets(m, m, mp);
  cm.m_q = from_triplets(m, m, mq);
  cm.g_p = from_triplets(m, m, gp);
  cm.g_q = from_triplets(m, m, gq);
  cm.h_p = from_triplets(m, m, hp);
  cm.h_q = from_triplets(m, m, hq);
  cm.k.resize(m, koff);
  cm.k.setFromTriplets(kt.begin(), kt.end());
  cm.incidence = inc;

  auto factors = std::make_shared<Factorization>();
  if (m > 0) {
    Triplets sys;
    const SparseMatrixd top_left = inc.a + cm.g_p;
    const SparseMatrixd bottom_right = inc.a + cm.h_q;
    auto append = [&sys](const SparseMatrixd& blk, Eigen::Index r0, Eigen::Index c0) {
      for (Eigen::Index c = 0; c < blk.outerSize(); ++c)
        for (SparseMatrixd::InnerIterator it(blk, c); it; ++it) sys.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    };
    append(top_left, 0, 0);
    append(cm.g_q, 0, m);
    append(cm.h_p, m, 0);
    append(bottom_right, m, m);
    const SparseMatrixd flow = from_triplets(2 * m, 2 * m, sys);

    factors->flow.compute(flow);
    if (factors->flow.info() != Eigen::Success)
      throw Error(ErrorCode::SingularSystem, "flow system factorization failed (structurally singular)");
    cm.condition_estimate = one_norm(flow) * inverse_one_norm_estimate(factors->flow, 2 * m);
    if (!(cm.condition_estimate <= kMaxCondition)) {
      std::ostringstream msg;
      msg << "flow system is near-singular (condition estimate " << cm.condition_estimate << ")";
      throw Error(ErrorCode::SingularSystem, msg.str());
    }

    const SparseMatrixd at = SparseMatrixd(inc.a.transpose());
    factors->incidence_t.compute(at);
    if (factors->incidence_t.info() != Eigen::Success)
      throw Error(ErrorCode::SingularSystem, "incidence block A is singular");
  }
  cm.factors = std::move(factors);
  return cm;
}

LinearSolution solve_linear(const CompactModel& cm, const VectorXcd& s_wye, const VectorXcd& s_delta,
                            const VectorXd& v0_sq) {
  const Eigen::Index m = cm.m();
  require_size(s_wye.size(), m, "wye load vector");
  require_size(s_delta.size(), cm.k.cols(), "delta load vector");
  require_size(v0_sq.size(), cm.incidence.a0.rows(), "head voltage vector");

  LinearSolution sol;
  if (m == 0) {
    sol.v_sq = sol.p_flow = sol.q_flow = VectorXd(0);
    return sol;
  }
  const VectorXcd s = s_wye + cm.k * s_delta;
  VectorXd rhs(2 * m);
  rhs.head(m) = -s.real() - cm.u_p;
  rhs.tail(m) = -s.imag() - cm.u_q;
  const VectorXd flows = cm.factors->flow.solve(rhs);
  sol.p_flow = flows.head(m);
  sol.q_flow = flows.tail(m);

  const VectorXd v_rhs = -(cm.incidence.a0.transpose() * v0_sq) - cm.m_p * sol.p_flow - cm.m_q * sol.q_flow - cm.u_v;
  sol.v_sq = cm.factors->incidence_t.solve(v_rhs);
  if (!sol.v_sq.allFinite() || !flows.allFinite())
    throw Error(ErrorCode::SingularSystem, "non-finite linear solution");
  return sol;
}

LinearSolution solve_linear(const CompactModel& cm, const Network& net, const LoadSet& loads) {
  loads.validate(net);
  return solve_linear(cm, loads.stacked_wye(net), loads.stacked_delta(), net.v0().cwiseAbs2());
}

RowMatrixXd voltage_sensitivity(const CompactModel& cm, const std::vector<std::size_t>& nodes) {
  const Eigen::Index m = cm.m();
  const auto count = static_cast<Eigen::Index>(nodes.size());
  RowMatrixXd out(count, m);
  if (count == 0 || m == 0) return out;

  MatrixXd rhs = MatrixXd::Zero(2 * m, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    if (nodes[static_cast<std::size_t>(k)] >= static_cast<std::size_t>(m))
      throw Error(ErrorCode::DimensionMismatch, "selected node index out of range");
    // q = ... - q_g, and the flow rows read (...) = -q, so dq_g enters as +1.
    rhs(m + static_cast<Eigen::Index>(nodes[static_cast<std::size_t>(k)]), k) = 1.0;
  }
  const MatrixXd dflow = cm.factors->flow.solve(rhs);
  const MatrixXd v_rhs = -(cm.m_p * dflow.topRows(m)) - cm.m_q * dflow.bottomRows(m);
  const MatrixXd dv = cm.factors->incidence_t.solve(v_rhs);
  out = dv.transpose();
  return out;
}

}  // namespace gridlin

#include "gridlin/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <string>

#include "gridlin/error.hpp"

namespace gridlin {
namespace {

std::string bus_str(int id) { return "bus " + std::to_string(id); }

std::string seg_str(const SegmentSpec& s) {
  return "segment (" + std::to_string(s.from) + "," + std::to_string(s.to) + ")";
}

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<std::size_t> parent;
};

MatrixXcd checked_impedance(const SegmentSpec& seg, double scale) {
  const auto n = static_cast<Eigen::Index>(seg.phases.size());
  if (seg.r.rows() != n || seg.r.cols() != n || seg.x.rows() != n || seg.x.cols() != n)
    throw Error(ErrorCode::DimensionMismatch,
                seg_str(seg) + ": impedance must be " + std::to_string(n) + "x" + std::to_string(n));
  MatrixXcd z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) z(i, k) = cdouble(seg.r(i, k), seg.x(i, k)) * scale;
  const double norm = z.cwiseAbs().maxCoeff();
  if ((z - z.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(norm, 1e-300))
    throw Error(ErrorCode::InvalidInput, seg_str(seg) + ": impedance matrix is not symmetric");
  return z;
}

}  // namespace

VectorXcd balanced_voltages(PhaseSet phases) {
  using std::numbers::pi;
  VectorXcd v(phases.size());
  Eigen::Index k = 0;
  for (Phase p : phases.phases()) {
    const double angle = -2.0 * pi / 3.0 * static_cast<int>(p);
    v(k++) = std::polar(1.0, angle);
  }
  return v;
}

std::size_t Network::node_index(int j, Phase phi) const {
  const int local = phases(j).index_of(phi);
  if (j <= 0 || local < 0)
    throw Error(ErrorCode::MissingPhase,
                bus_str(j) + " has no phase-node " + std::string(1, to_char(phi)));
  return node_offset(j) + static_cast<std::size_t>(local);
}

Network build_network(const NetworkSpec& spec) {
  const std::size_t n_bus = spec.buses.size();
  if (n_bus == 0) throw Error(ErrorCode::InvalidInput, "network has no buses");

  Network net;
  net.buses_.assign(n_bus, Bus{});
  std::vector<bool> seen(n_bus, false);
  for (const BusSpec& b : spec.buses) {
    if (b.id < 0 || static_cast<std::size_t>(b.id) >= n_bus)
      throw Error(ErrorCode::InvalidInput, "bus ids must be 0..N; got " + std::to_string(b.id));
    if (seen[static_cast<std::size_t>(b.id)])
      throw Error(ErrorCode::InvalidInput, "duplicate " + bus_str(b.id));
    if (b.phases.empty()) throw Error(ErrorCode::InvalidInput, bus_str(b.id) + " has no phases");
    seen[static_cast<std::size_t>(b.id)] = true;
    net.buses_[static_cast<std::size_t>(b.id)] = Bus{b.id, b.phases};
  }

  auto known = [&](int id) { return id >= 0 && static_cast<std::size_t>(id) < n_bus; };

  // Loops first: any segment closing an undirected cycle is rejected before
  // orientation or duplicate checks can mask it.
  DisjointSets components(n_bus);
  for (const SegmentSpec& s : spec.segments) {
    if (!known(s.from)) throw Error(ErrorCode::UnknownBus, seg_str(s) + " references unknown " + bus_str(s.from));
    if (!known(s.to)) throw Error(ErrorCode::UnknownBus, seg_str(s) + " references unknown " + bus_str(s.to));
    if (!components.unite(static_cast<std::size_t>(s.from), static_cast<std::size_t>(s.to)))
      throw Error(ErrorCode::CycleDetected, seg_str(s) + " closes a loop");
  }

  net.parent_.assign(n_bus, -1);
  net.children_.assign(n_bus, {});
  net.segments_.assign(n_bus, std::nullopt);
  const double scale = spec.units == ImpedanceUnits::Ohm ? 1.0 / spec.bases.z_base() : 1.0;

  for (const SegmentSpec& s : spec.segments) {
    if (s.to == 0) throw Error(ErrorCode::InvalidInput, seg_str(s) + ": the head bus cannot be a child");
    const auto to = static_cast<std::size_t>(s.to);
    if (net.segments_[to])
      throw Error(ErrorCode::DuplicateSegmentForChild, bus_str(s.to) + " is the child of more than one segment");
    if (!s.phases.subset_of(net.buses_[static_cast<std::size_t>(s.from)].phases))
      throw Error(ErrorCode::PhaseMismatch, seg_str(s) + " phases " + s.phases.to_string() +
                                                " not present at " + bus_str(s.from));
    if (s.phases != net.buses_[to].phases)
      throw Error(ErrorCode::PhaseMismatch, seg_str(s) + " phases " + s.phases.to_string() +
                                                " must equal the phases of " + bus_str(s.to));

    LineSegment seg{s.from, s.to, s.phases, checked_impedance(s, scale), {}};
    Eigen::FullPivLU<MatrixXcd> lu(seg.z);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
      throw Error(ErrorCode::SingularImpedance, seg_str(s) + " impedance is singular");
    seg.z_inv = lu.inverse();
    net.segments_[to] = std::move(seg);
    net.parent_[to] = s.from;
    net.children_[static_cast<std::size_t>(s.from)].push_back(s.to);
  }
  for (auto& c : net.children_) std::sort(c.begin(), c.end());

  // Breadth-first from the head; anything not reached has no path to bus 0.
  std::vector<int> depth(n_bus, -1);
  depth[0] = 0;
  std::queue<int> frontier;
  frontier.push(0);
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int j : net.children_[static_cast<std::size_t>(i)]) {
      depth[static_cast<std::size_t>(j)] = depth[static_cast<std::size_t>(i)] + 1;
      net.order_.push_back(j);
      net.max_depth_ = std::max(net.max_depth_, depth[static_cast<std::size_t>(j)]);
      frontier.push(j);
    }
  }
  for (std::size_t j = 1; j < n_bus; ++j)
    if (depth[j] < 0) throw Error(ErrorCode::DisconnectedBus, bus_str(static_cast<int>(j)) + " is not fed from bus 0");

  net.offset_.assign(n_bus, 0);
  std::size_t offset = 0;
  for (std::size_t j = 1; j < n_bus; ++j) {
    net.offset_[j] = offset;
    for (Phase p : net.buses_[j].phases.phases()) net.node_owner_.emplace_back(static_cast<int>(j), p);
    offset += static_cast<std::size_t>(net.buses_[j].phases.size());
  }
  net.m_ = offset;

  const PhaseSet head = net.buses_[0].phases;
  if (spec.slack_voltage) {
    if (spec.slack_voltage->size() != head.size())
      throw Error(ErrorCode::DimensionMismatch, "slack voltage must have one entry per head phase");
    net.v0_ = *spec.slack_voltage;
  } else {
    net.v0_ = balanced_voltages(head);
  }
  net.bases_ = spec.bases;
  return net;
}

IncidenceBlocks incidence_blocks(const Network& net) {
  const auto m = static_cast<Eigen::Index>(net.m());
  const auto n0 = static_cast<Eigen::Index>(net.n0());
  std::vector<Eigen::Triplet<double>> head, body;
  for (std::size_t j = 1; j < net.bus_count(); ++j) {
    const LineSegment& seg = net.segment(static_cast<int>(j));
    const PhaseSet from_phases = net.phases(seg.from);
    for (Phase p : seg.phases.phases()) {
      const auto col = static_cast<Eigen::Index>(net.node_index(seg.to, p));
      body.emplace_back(col, col, -1.0);
      if (seg.from == 0)
        head.emplace_back(from_phases.index_of(p), col, 1.0);
      else
        body.emplace_back(static_cast<Eigen::Index>(net.node_index(seg.from, p)), col, 1.0);
    }
  }
  IncidenceBlocks inc;
  inc.a0.resize(n0, m);
  inc.a0.setFromTriplets(head.begin(), head.end());
  inc.a.resize(m, m);
  inc.a.setFromTriplets(body.begin(), body.end());
  return inc;
}

std::vector<int> descendants(const Network& net, int j) {
  if (j < 0 || static_cast<std::size_t>(j) >= net.bus_count())
    throw Error(ErrorCode::UnknownBus, bus_str(j) + " does not exist");
  std::vector<int> out;
  std::vector<int> stack(net.children(j).begin(), net.children(j).end());
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    out.push_back(k);
    for (int c : net.children(k)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gridlin

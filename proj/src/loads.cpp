#include "gridlin/loads.hpp"

#include <string>

#include "gridlin/error.hpp"

namespace gridlin {

namespace {
constexpr double kDegenerateGap = 1e-9;
}

LoadSet LoadSet::zeros(const Network& net) {
  LoadSet set;
  set.bus.resize(net.bus_count());
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    set.bus[i].wye.s = VectorXcd::Zero(net.phases(static_cast<int>(i)).size());
    set.bus[i].delta.s.resize(0);
  }
  return set;
}

void LoadSet::validate(const Network& net) const {
  if (bus.size() != net.bus_count())
    throw Error(ErrorCode::DimensionMismatch, "load set covers " + std::to_string(bus.size()) +
                                                  " buses, network has " + std::to_string(net.bus_count()));
  for (std::size_t i = 0; i < bus.size(); ++i) {
    const PhaseSet phases = net.phases(static_cast<int>(i));
    if (bus[i].wye.s.size() != phases.size())
      throw Error(ErrorCode::DimensionMismatch, "wye load at bus " + std::to_string(i) + " has wrong length");
    if (bus[i].delta.s.size() != static_cast<Eigen::Index>(bus[i].delta.connections.size()))
      throw Error(ErrorCode::DimensionMismatch, "delta load at bus " + std::to_string(i) + " has wrong length");
    check_connections(phases, bus[i].delta.connections);
  }
}

LoadSet LoadSet::scaled(double factor) const {
  LoadSet out = *this;
  for (auto& b : out.bus) {
    b.wye.s *= factor;
    b.delta.s *= factor;
  }
  return out;
}

VectorXcd LoadSet::stacked_wye(const Network& net) const {
  VectorXcd out(static_cast<Eigen::Index>(net.m()));
  for (std::size_t j = 1; j < bus.size(); ++j)
    out.segment(static_cast<Eigen::Index>(net.node_offset(static_cast<int>(j))), bus[j].wye.s.size()) = bus[j].wye.s;
  return out;
}

VectorXcd LoadSet::stacked_delta() const {
  VectorXcd out(static_cast<Eigen::Index>(delta_count()));
  Eigen::Index k = 0;
  for (std::size_t j = 1; j < bus.size(); ++j) {
    out.segment(k, bus[j].delta.s.size()) = bus[j].delta.s;
    k += bus[j].delta.s.size();
  }
  return out;
}

std::size_t LoadSet::delta_count() const {
  std::size_t n = 0;
  for (std::size_t j = 1; j < bus.size(); ++j) n += bus[j].delta.connections.size();
  return n;
}

void check_connections(PhaseSet phases, std::span<const Connection> connections) {
  for (std::size_t k = 0; k < connections.size(); ++k) {
    if (k > 0 && connections[k] <= connections[k - 1])
      throw Error(ErrorCode::InvalidInput, "delta connections must be unique and ordered ab < bc < ca");
    auto [p, q] = endpoints(connections[k]);
    if (!phases.contains(p) || !phases.contains(q))
      throw Error(ErrorCode::MissingPhase, "connection " + std::string(to_string(connections[k])) +
                                               " needs phases absent from bus set " + phases.to_string());
  }
}

DeltaTransform delta_transform(const VectorXcd& v, PhaseSet phases,
                               std::span<const Connection> connections) {
  if (v.size() != phases.size())
    throw Error(ErrorCode::DimensionMismatch, "voltage vector does not match the bus phases");
  check_connections(phases, connections);

  DeltaTransform out{MatrixXcd::Zero(phases.size(), static_cast<Eigen::Index>(connections.size()))};
  for (std::size_t k = 0; k < connections.size(); ++k) {
    auto [p, q] = endpoints(connections[k]);
    const int row_p = phases.index_of(p);
    const int row_q = phases.index_of(q);
    const cdouble vp = v(row_p);
    const cdouble vq = v(row_q);
    const cdouble gap = vp - vq;
    if (std::abs(gap) < kDegenerateGap)
      throw Error(ErrorCode::DegenerateVoltagePair,
                  "V^" + std::string(1, to_char(p)) + " equals V^" + std::string(1, to_char(q)));
    const auto col = static_cast<Eigen::Index>(k);
    out.t(row_p, col) = vp / gap;
    out.t(row_q, col) = -vq / gap;
  }
  return out;
}

DeltaTransform balanced_delta_transform(PhaseSet phases, std::span<const Connection> connections) {
  return delta_transform(balanced_voltages(phases), phases, connections);
}

VectorXcd bus_injection(const WyeLoad& wye, const DeltaLoad& delta, const DeltaTransform& t) {
  if (t.t.cols() != delta.s.size() || (t.t.rows() != wye.s.size() && delta.s.size() > 0))
    throw Error(ErrorCode::DimensionMismatch, "transform does not match load dimensions");
  if (delta.s.size() == 0) return wye.s;
  return wye.s + t.t * delta.s;
}

}  // namespace gridlin

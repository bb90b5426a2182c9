#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gridlin/linalg.hpp"
#include "gridlin/phase.hpp"

namespace gridlin {

enum class ImpedanceUnits { Ohm, PerUnit };

struct Bases {
  double kv = 4.16;
  double kva = 100.0;

  /// Z_base = kV^2 * 1000 / kVA, in ohms.
  double z_base() const { return kv * kv * 1000.0 / kva; }
};

struct BusSpec {
  int id = 0;
  PhaseSet phases;
};

struct SegmentSpec {
  int from = 0;
  int to = 0;
  PhaseSet phases;
  MatrixXd r;  // row-major in files, n x n here
  MatrixXd x;
};

/// Unvalidated network description, as read from a network file.
struct NetworkSpec {
  std::vector<BusSpec> buses;
  std::vector<SegmentSpec> segments;
  ImpedanceUnits units = ImpedanceUnits::PerUnit;
  /// Slack voltage over the head bus phases; balanced 1 p.u. when absent.
  std::optional<VectorXcd> slack_voltage;
  Bases bases;
};

struct Bus {
  int id = 0;
  PhaseSet phases;
};

struct LineSegment {
  int from = 0;
  int to = 0;
  PhaseSet phases;
  MatrixXcd z;      // per-unit
  MatrixXcd z_inv;  // cached inverse
};

/// Validated radial network. Immutable after build_network().
///
/// Phase-nodes below the head are numbered bus-major (ascending bus id), then
/// a < b < c. Phase-circuit l_j^phi shares the index of node j^phi because
/// every segment carries exactly the phases of its child bus.
class Network {
 public:
  std::size_t bus_count() const { return buses_.size(); }
  const Bus& bus(int id) const { return buses_.at(static_cast<std::size_t>(id)); }
  PhaseSet phases(int id) const { return bus(id).phases; }
  int parent(int j) const { return parent_.at(static_cast<std::size_t>(j)); }
  std::span<const int> children(int j) const { return children_.at(static_cast<std::size_t>(j)); }
  /// Segment whose child is bus j (j >= 1).
  const LineSegment& segment(int j) const { return *segments_.at(static_cast<std::size_t>(j)); }

  /// Non-head buses, parents before children (breadth-first from bus 0).
  std::span<const int> topological_order() const { return order_; }

  /// Number of phase-nodes below the head (= number of phase-circuits).
  std::size_t m() const { return m_; }
  /// Number of head phases.
  std::size_t n0() const { return static_cast<std::size_t>(buses_.front().phases.size()); }

  /// First global phase-node index of bus j (j >= 1).
  std::size_t node_offset(int j) const { return offset_.at(static_cast<std::size_t>(j)); }
  /// Global index of node j^phi; j >= 1 and phi in phases(j).
  std::size_t node_index(int j, Phase phi) const;
  /// Inverse of node_index.
  std::pair<int, Phase> node_at(std::size_t index) const { return node_owner_.at(index); }

  const VectorXcd& v0() const { return v0_; }
  const Bases& bases() const { return bases_; }
  int max_depth() const { return max_depth_; }

 private:
  friend Network build_network(const NetworkSpec& spec);

  std::vector<Bus> buses_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<std::optional<LineSegment>> segments_;
  std::vector<int> order_;
  std::vector<std::size_t> offset_;
  std::vector<std::pair<int, Phase>> node_owner_;
  std::size_t m_ = 0;
  VectorXcd v0_;
  Bases bases_;
  int max_depth_ = 0;
};

/// Balanced unit voltages (1<0, 1<-120, 1<120 deg) restricted to `phases`.
VectorXcd balanced_voltages(PhaseSet phases);

/// Validates the spec and builds the network. Throws gridlin::Error with
/// CycleDetected, DisconnectedBus, PhaseMismatch, DuplicateSegmentForChild,
/// SingularImpedance, UnknownBus or InvalidInput.
Network build_network(const NetworkSpec& spec);

/// Signed incidence blocks of the phase-node x phase-circuit graph:
/// `a0` holds the head rows (n0 x m), `a` the remaining rows (m x m).
struct IncidenceBlocks {
  SparseMatrixd a0;
  SparseMatrixd a;
};

IncidenceBlocks incidence_blocks(const Network& net);

/// All buses strictly below j, ascending. Throws UnknownBus.
std::vector<int> descendants(const Network& net, int j);

}  // namespace gridlin

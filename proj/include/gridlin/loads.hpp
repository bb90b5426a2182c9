#pragma once

#include <span>
#include <vector>

#include "gridlin/linalg.hpp"
#include "gridlin/network.hpp"
#include "gridlin/phase.hpp"

namespace gridlin {

/// Phase-to-neutral consumption over the bus phases (p + jq, per-unit).
struct WyeLoad {
  VectorXcd s;
};

/// Phase-to-phase consumption, one entry per connection (ab < bc < ca).
struct DeltaLoad {
  std::vector<Connection> connections;
  VectorXcd s;
};

/// n_i x (number of connections). Maps phase-to-phase power onto the bus phases.
struct DeltaTransform {
  MatrixXcd t;
};

struct BusLoad {
  WyeLoad wye;
  DeltaLoad delta;
};

/// Per-bus load declarations, indexed by bus id. Entry 0 (the head) is unused.
struct LoadSet {
  std::vector<BusLoad> bus;

  /// Zero wye loads sized to each bus and no delta connections.
  static LoadSet zeros(const Network& net);

  /// Throws DimensionMismatch / MissingPhase when inconsistent with `net`.
  void validate(const Network& net) const;

  /// Same structure, every value multiplied by `factor`.
  LoadSet scaled(double factor) const;

  /// Stacked wye vector over all phase-nodes (length m).
  VectorXcd stacked_wye(const Network& net) const;
  /// Stacked delta vector, bus-major then connection order.
  VectorXcd stacked_delta() const;
  std::size_t delta_count() const;
};

/// Connections touched by a delta load must be strictly increasing, unique,
/// and reference phases present at the bus.
void check_connections(PhaseSet phases, std::span<const Connection> connections);

/// Voltage-dependent transform: column phi-phi' carries V^phi/(V^phi - V^phi')
/// in row phi and -V^phi'/(V^phi - V^phi') in row phi'. Rows of phases the
/// connections do not touch are zero. Throws DegenerateVoltagePair when
/// |V^phi - V^phi'| < 1e-9 and MissingPhase for connections the bus lacks.
DeltaTransform delta_transform(const VectorXcd& v, PhaseSet phases,
                               std::span<const Connection> connections);

/// delta_transform evaluated at exactly balanced unit voltages.
DeltaTransform balanced_delta_transform(PhaseSet phases, std::span<const Connection> connections);

/// s_i = s_Y + T s_delta. Throws DimensionMismatch.
VectorXcd bus_injection(const WyeLoad& wye, const DeltaLoad& delta, const DeltaTransform& t);

}  // namespace gridlin

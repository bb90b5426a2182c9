#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridlin/io.hpp"

namespace gridlin::fixtures {

enum class Kind { AppendixB, Chain, Synthetic123 };

std::optional<Kind> kind_from_string(std::string_view text);
std::string_view to_string(Kind kind);

struct Fixture {
  io::NetworkDocument network;
  std::vector<io::ProfileRecord> profile;
  io::Scenario scenario;
  /// Fast-varying 5 s load and PV profile with its controller scenario;
  /// synthetic-123 only.
  std::vector<io::ProfileRecord> vvc_profile;
  std::optional<io::Scenario> vvc_scenario;
};

/// Three buses: 0 and 1 three-phase, 2 on phases a and b. Carries wye, closed
/// delta and open delta loads.
Fixture appendix_b(std::uint64_t seed);

/// Straight feeder of `buses` buses (head included) on the given phases.
Fixture chain(std::uint64_t seed, int buses = 3, PhaseSet phases = PhaseSet{Phase::A});

/// 123-bus unbalanced radial feeder with single-, two- and three-phase
/// laterals, phase-a-heavy loading and closed delta loads at buses 65 and 76.
Fixture synthetic_123(std::uint64_t seed);

Fixture generate(Kind kind, std::uint64_t seed);

/// Buses carrying inverters in the synthetic feeder's VVC scenario.
inline constexpr int kPvBuses[] = {13, 29, 48, 50, 56, 60, 66, 79, 83, 95};
/// Buses with noisy meters in the partial-noise experiments.
inline constexpr int kNoisyBuses[] = {1, 25, 47, 54, 67, 86, 117, 121};

/// File name and contents for every file of the fixture.
std::vector<std::pair<std::string, std::string>> render(const Fixture& fx);

}  // namespace gridlin::fixtures

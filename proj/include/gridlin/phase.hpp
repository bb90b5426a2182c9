#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridlin {

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

char to_char(Phase p);
std::optional<Phase> phase_from_char(char c);

/// Ordered subset of {a, b, c}. Iteration and indexing always follow a < b < c.
class PhaseSet {
 public:
  constexpr PhaseSet() = default;
  constexpr PhaseSet(std::initializer_list<Phase> phases) {
    for (Phase p : phases) bits_ |= bit(p);
  }

  static constexpr PhaseSet abc() { return PhaseSet{Phase::A, Phase::B, Phase::C}; }
  /// Parses "abc", "ab", "c", ... (any order, no repeats).
  static std::optional<PhaseSet> parse(std::string_view text);

  constexpr bool contains(Phase p) const { return (bits_ & bit(p)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const {
    return ((bits_ >> 0) & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1);
  }
  constexpr bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr PhaseSet intersect(PhaseSet other) const { return from_bits(bits_ & other.bits_); }

  /// Position of `p` within this set, or -1 if absent.
  constexpr int index_of(Phase p) const {
    if (!contains(p)) return -1;
    int idx = 0;
    for (int k = 0; k < static_cast<int>(p); ++k) idx += (bits_ >> k) & 1;
    return idx;
  }

  std::vector<Phase> phases() const;
  std::string to_string() const;

  constexpr std::uint8_t bits() const { return bits_; }
  static constexpr PhaseSet from_bits(std::uint8_t b) {
    PhaseSet s;
    s.bits_ = static_cast<std::uint8_t>(b & 0x7);
    return s;
  }

  friend constexpr bool operator==(PhaseSet, PhaseSet) = default;

 private:
  static constexpr std::uint8_t bit(Phase p) { return static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
  std::uint8_t bits_ = 0;
};

/// Phase-to-phase connection of a delta load; ordered ab < bc < ca.
enum class Connection : std::uint8_t { AB = 0, BC = 1, CA = 2 };

inline constexpr std::array<Connection, 3> kAllConnections{Connection::AB, Connection::BC,
                                                           Connection::CA};

/// The connection's two phases (phi, phi'), e.g. CA -> (c, a).
std::pair<Phase, Phase> endpoints(Connection c);
std::string_view to_string(Connection c);
std::optional<Connection> connection_from_string(std::string_view text);

}  // namespace gridlin

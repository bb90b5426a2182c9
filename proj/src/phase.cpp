#include "gridlin/phase.hpp"

#include "gridlin/error.hpp"

namespace gridlin {

char to_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

std::optional<Phase> phase_from_char(char c) {
  switch (c) {
    case 'a': case 'A': return Phase::A;
    case 'b': case 'B': return Phase::B;
    case 'c': case 'C': return Phase::C;
    default: return std::nullopt;
  }
}

std::optional<PhaseSet> PhaseSet::parse(std::string_view text) {
  PhaseSet set;
  for (char ch : text) {
    auto p = phase_from_char(ch);
    if (!p || set.contains(*p)) return std::nullopt;
    set.bits_ |= bit(*p);
  }
  return set;
}

std::vector<Phase> PhaseSet::phases() const {
  std::vector<Phase> out;
  for (Phase p : kAllPhases)
    if (contains(p)) out.push_back(p);
  return out;
}

std::string PhaseSet::to_string() const {
  std::string s;
  for (Phase p : kAllPhases)
    if (contains(p)) s.push_back(to_char(p));
  return s;
}

std::pair<Phase, Phase> endpoints(Connection c) {
  switch (c) {
    case Connection::AB: return {Phase::A, Phase::B};
    case Connection::BC: return {Phase::B, Phase::C};
    case Connection::CA: return {Phase::C, Phase::A};
  }
  return {Phase::A, Phase::B};
}

std::string_view to_string(Connection c) {
  switch (c) {
    case Connection::AB: return "ab";
    case Connection::BC: return "bc";
    case Connection::CA: return "ca";
  }
  return "??";
}

std::optional<Connection> connection_from_string(std::string_view text) {
  if (text == "ab" || text == "AB") return Connection::AB;
  if (text == "bc" || text == "BC") return Connection::BC;
  if (text == "ca" || text == "CA") return Connection::CA;
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownBus: return "UnknownBus";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DisconnectedBus: return "DisconnectedBus";
    case ErrorCode::PhaseMismatch: return "PhaseMismatch";
    case ErrorCode::DuplicateSegmentForChild: return "DuplicateSegmentForChild";
    case ErrorCode::SingularImpedance: return "SingularImpedance";
    case ErrorCode::DegenerateVoltagePair: return "DegenerateVoltagePair";
    case ErrorCode::MissingPhase: return "MissingPhase";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ZeroVoltage: return "ZeroVoltage";
    case ErrorCode::MissingSegmentParams: return "MissingSegmentParams";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ZeroTruthEntry: return "ZeroTruthEntry";
    case ErrorCode::StepMismatch: return "StepMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

}  // namespace gridlin

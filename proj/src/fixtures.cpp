#include "gridlin/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gridlin/error.hpp"

namespace gridlin::fixtures {
namespace {

/// Uniform draws built from raw engine bits so the fixtures do not depend on
/// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int pick(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo + 1));
  }

 private:
  std::mt19937_64 eng_;
};

// Ohms per mile for a four-wire overhead three-phase line; sub-blocks serve
// the two-phase laterals.
const double kR3[3][3] = {{0.4576, 0.1560, 0.1535}, {0.1560, 0.4666, 0.1580}, {0.1535, 0.1580, 0.4615}};
const double kX3[3][3] = {{1.0780, 0.5017, 0.3849}, {0.5017, 1.0482, 0.4236}, {0.3849, 0.4236, 1.0651}};
// Single-phase lateral.
constexpr double kR1 = 1.3292;
constexpr double kX1 = 1.3475;

SegmentSpec overhead(int from, int to, PhaseSet phases, double miles) {
  SegmentSpec s{from, to, phases, MatrixXd(phases.size(), phases.size()), MatrixXd(phases.size(), phases.size())};
  const auto ph = phases.phases();
  if (ph.size() == 1) {
    s.r(0, 0) = kR1 * miles;
    s.x(0, 0) = kX1 * miles;
    return s;
  }
  for (std::size_t i = 0; i < ph.size(); ++i)
    for (std::size_t k = 0; k < ph.size(); ++k) {
      const auto a = static_cast<int>(ph[i]);
      const auto b = static_cast<int>(ph[k]);
      s.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = kR3[a][b] * miles;
      s.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = kX3[a][b] * miles;
    }
  return s;
}

io::LoadDecl wye(int bus, std::vector<double> p, std::vector<double> q) {
  return io::LoadDecl{bus, false, {}, std::move(p), std::move(q)};
}

io::LoadDecl delta(int bus, std::vector<Connection> conns, std::vector<double> p, std::vector<double> q) {
  return io::LoadDecl{bus, true, std::move(conns), std::move(p), std::move(q)};
}

/// One record per declared load entry and step, each scaled by a smooth daily
/// shape with a per-bus phase shift plus a small jitter.
std::vector<io::ProfileRecord> load_profile(const io::NetworkDocument& doc, int steps, double period, double swing,
                                            double jitter, Rng& rng, int first_step = 0) {
  std::vector<io::ProfileRecord> out;
  std::vector<double> shift(doc.spec.buses.size());
  for (double& s : shift) s = rng.uniform(0.0, period);
  for (int t = 0; t < steps; ++t) {
    for (const io::LoadDecl& d : doc.loads) {
      const double shape = 1.0 + swing * std::sin(2.0 * std::numbers::pi * (t + shift[static_cast<std::size_t>(d.bus)]) / period);
      const auto phases = doc.spec.buses[static_cast<std::size_t>(d.bus)].phases.phases();
      for (std::size_t k = 0; k < d.p.size(); ++k) {
        const double f = shape * (1.0 + jitter * rng.uniform(-1.0, 1.0));
        io::ProfileRecord r;
        r.step = first_step + t;
        r.bus = d.bus;
        r.kind = d.delta ? io::ProfileKind::Delta : io::ProfileKind::Wye;
        r.phase_or_pair = d.delta ? std::string(to_string(d.connections[k])) : std::string(1, to_char(phases[k]));
        r.p = d.p[k] * f;
        r.q = d.q[k] * f;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

io::Scenario clean_scenario(double dt) {
  io::Scenario sc;
  sc.dt_seconds = dt;
  sc.update_every = 1;
  sc.measurement.seed = 7;
  return sc;
}

}  // namespace

std::optional<Kind> kind_from_string(std::string_view text) {
  if (text == "appendix-b") return Kind::AppendixB;
  if (text == "chain") return Kind::Chain;
  if (text == "synthetic-123") return Kind::Synthetic123;
  return std::nullopt;
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::AppendixB: return "appendix-b";
    case Kind::Chain: return "chain";
    case Kind::Synthetic123: return "synthetic-123";
  }
  return "chain";
}

Fixture appendix_b(std::uint64_t seed) {
  Rng rng(seed);
  Fixture fx;
  NetworkSpec& spec = fx.network.spec;
  spec.units = ImpedanceUnits::Ohm;
  spec.buses = {{0, PhaseSet::abc()}, {1, PhaseSet::abc()}, {2, PhaseSet{Phase::A, Phase::B}}};
  spec.segments = {overhead(0, 1, PhaseSet::abc(), 1.5), overhead(1, 2, PhaseSet{Phase::A, Phase::B}, 1.0)};
  fx.network.loads = {
      wye(1, {4.0, 2.5, 3.0}, {1.8, 1.1, 1.4}),
      delta(1, {Connection::AB, Connection::BC, Connection::CA}, {1.0, 0.8, 0.9}, {0.45, 0.35, 0.4}),
      wye(2, {2.0, 1.2}, {0.9, 0.5}),
      delta(2, {Connection::AB}, {0.6}, {0.3}),
  };
  fx.profile = load_profile(fx.network, 24, 24.0, 0.15, 0.03, rng);
  fx.scenario = clean_scenario(60.0);
  return fx;
}

Fixture chain(std::uint64_t seed, int buses, PhaseSet phases) {
  if (buses < 2) throw Error(ErrorCode::InvalidInput, "a chain needs at least two buses");
  if (phases.empty()) throw Error(ErrorCode::InvalidInput, "a chain needs at least one phase");
  Rng rng(seed);
  Fixture fx;
  NetworkSpec& spec = fx.network.spec;
  spec.units = ImpedanceUnits::PerUnit;
  const auto n = static_cast<Eigen::Index>(phases.size());
  // keeps the end-of-line drop roughly independent of length
  const double scale = std::min(1.0, 6.0 / ((buses - 1) * buses));
  for (int j = 0; j < buses; ++j) spec.buses.push_back({j, phases});
  for (int j = 1; j < buses; ++j) {
    MatrixXd r = MatrixXd::Constant(n, n, 0.004);
    MatrixXd x = MatrixXd::Constant(n, n, 0.008);
    r.diagonal().setConstant(0.01);
    x.diagonal().setConstant(0.02);
    spec.segments.push_back({j - 1, j, phases, r, x});
    std::vector<double> p, q;
    for (Eigen::Index k = 0; k < n; ++k) {
      p.push_back(scale * rng.uniform(0.4, 0.9));
      q.push_back(scale * rng.uniform(0.15, 0.35));
    }
    fx.network.loads.push_back(wye(j, p, q));
  }
  fx.profile = load_profile(fx.network, 24, 24.0, 0.15, 0.03, rng);
  fx.scenario = clean_scenario(60.0);
  return fx;
}

Fixture synthetic_123(std::uint64_t seed) {
  Rng rng(seed);
  Fixture fx;
  NetworkSpec& spec = fx.network.spec;
  spec.units = ImpedanceUnits::Ohm;
  constexpr int kBuses = 123;
  constexpr int kTrunkEnd = 45;
  const PhaseSet abc = PhaseSet::abc();
  const PhaseSet two_phase[] = {PhaseSet{Phase::A, Phase::B}, PhaseSet{Phase::B, Phase::C},
                                PhaseSet{Phase::A, Phase::C}};

  auto single_phase = [&rng]() {
    const double u = rng.uniform();
    return PhaseSet{u < 0.45 ? Phase::A : (u < 0.75 ? Phase::B : Phase::C)};
  };

  std::vector<PhaseSet> phases(kBuses);
  phases[0] = abc;
  spec.buses.push_back({0, abc});
  for (int j = 1; j < kBuses; ++j) {
    int parent = 0;
    double miles = 0.0;
    if (j <= kTrunkEnd) {
      parent = j == 1 ? 0 : rng.pick(std::max(1, j - 3), j - 1);
      phases[j] = abc;
      miles = rng.uniform(0.1, 0.3);
    } else {
      if (j == 65 || j == 76) {
        parent = rng.pick(20, kTrunkEnd);
      } else if (rng.uniform() < 0.35) {
        parent = rng.pick(2, kTrunkEnd);
      } else {
        parent = j - 1;
      }
      const PhaseSet up = phases[static_cast<std::size_t>(parent)];
      if (j == 65 || j == 76) {
        phases[j] = abc;
      } else if (up == abc) {
        const double u = rng.uniform();
        phases[j] = u < 0.15 ? abc : (u < 0.3 ? two_phase[rng.pick(0, 2)] : single_phase());
      } else if (rng.uniform() < 0.7) {
        phases[j] = up;
      } else {
        const auto ph = up.phases();
        phases[j] = PhaseSet{ph[static_cast<std::size_t>(rng.pick(0, static_cast<int>(ph.size()) - 1))]};
      }
      miles = rng.uniform(0.05, 0.25);
    }
    spec.buses.push_back({j, phases[j]});
    spec.segments.push_back(overhead(parent, j, phases[j], miles));
  }

  // Base loads in per-unit of 100 kVA; phase a carries nearly twice the
  // nominal spot load.
  constexpr double kScale = 0.25;
  for (int j = 2; j < kBuses; ++j) {
    if (j == 65 || j == 76) {
      std::vector<double> p, q;
      for (int k = 0; k < 3; ++k) {
        p.push_back(kScale * rng.uniform(0.3, 0.5));
        q.push_back(p.back() * rng.uniform(0.4, 0.55));
      }
      fx.network.loads.push_back(delta(j, {Connection::AB, Connection::BC, Connection::CA}, p, q));
      continue;
    }
    if (rng.uniform() > 0.75) continue;
    std::vector<double> p, q;
    for (Phase ph : phases[j].phases()) {
      const double heavy = ph == Phase::A ? 1.8 : 1.0;
      p.push_back(kScale * heavy * (rng.uniform() < 0.5 ? 0.2 : 0.4));
      q.push_back(p.back() * rng.uniform(0.4, 0.55));
    }
    fx.network.loads.push_back(wye(j, p, q));
  }

  fx.profile = load_profile(fx.network, 24, 24.0, 0.12, 0.03, rng);
  fx.scenario = clean_scenario(60.0);

  // Fast-varying profile: load and PV data at 5 s resolution, held over
  // 1 s control steps. Loads swing over a few minutes, irradiance moves with
  // passing clouds.
  constexpr int kBlocks = 120;
  constexpr int kHold = 5;
  const std::vector<io::ProfileRecord> blocks = load_profile(fx.network, kBlocks, 36.0, 0.2, 0.05, rng);
  std::vector<double> irradiance(kBlocks);
  double cloud = 0.0;
  for (int b = 0; b < kBlocks; ++b) {
    if (b % 10 == 0) cloud = rng.uniform(0.0, 0.35);
    irradiance[static_cast<std::size_t>(b)] =
        std::clamp(0.75 + 0.2 * std::sin(2.0 * std::numbers::pi * b / 48.0) - cloud, 0.05, 1.0);
  }
  std::vector<io::ProfileRecord> pv;
  io::Scenario vvc = clean_scenario(1.0);
  for (int bus : kPvBuses) {
    const double rating = rng.uniform(1.0, 1.6);
    for (Phase ph : phases[static_cast<std::size_t>(bus)].phases()) {
      for (int b = 0; b < kBlocks; ++b) {
        io::ProfileRecord r;
        r.step = b;
        r.bus = bus;
        r.kind = io::ProfileKind::Pv;
        r.phase_or_pair = std::string(1, to_char(ph));
        r.p = rating * irradiance[static_cast<std::size_t>(b)];
        pv.push_back(std::move(r));
      }
    }
    vvc.fleet.push_back({bus, std::nullopt, -1.0, 1.0});
  }
  for (int t = 0; t < kBlocks * kHold; ++t) {
    auto emit = [&](const std::vector<io::ProfileRecord>& src) {
      for (const io::ProfileRecord& r : src) {
        if (r.step != t / kHold) continue;
        fx.vvc_profile.push_back(r);
        fx.vvc_profile.back().step = t;
      }
    };
    emit(blocks);
    emit(pv);
  }
  // The offline dispatch is refreshed once a minute.
  vvc.controller = io::ControllerSpec{io::ControllerMode::Online, VvcConfig{2.0, 1}, 60};
  fx.vvc_scenario = vvc;
  return fx;
}

Fixture generate(Kind kind, std::uint64_t seed) {
  switch (kind) {
    case Kind::AppendixB: return appendix_b(seed);
    case Kind::Chain: return chain(seed);
    case Kind::Synthetic123: return synthetic_123(seed);
  }
  return chain(seed);
}

std::vector<std::pair<std::string, std::string>> render(const Fixture& fx) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("network.json", io::write_network(fx.network));
  out.emplace_back("profile.csv", io::write_profile(fx.profile));
  out.emplace_back("scenario.json", io::write_scenario(fx.scenario));
  if (!fx.vvc_profile.empty()) out.emplace_back("vvc_profile.csv", io::write_profile(fx.vvc_profile));
  if (fx.vvc_scenario) out.emplace_back("vvc_scenario.json", io::write_scenario(*fx.vvc_scenario));
  return out;
}

}  // namespace gridlin::fixtures

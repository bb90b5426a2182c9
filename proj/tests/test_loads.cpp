#include "doctest.h"

#include <cmath>
#include <random>

#include "gridlin/error.hpp"
#include "gridlin/loads.hpp"
#include "test_support.hpp"

using namespace gridlin;

namespace {

constexpr double kPi = 3.14159265358979323846;

VectorXcd polar3(double ma, double da, double mb, double db, double mc, double dc) {
  const double deg = kPi / 180.0;
  VectorXcd v(3);
  v << std::polar(ma, da * deg), std::polar(mb, db * deg), std::polar(mc, dc * deg);
  return v;
}

MatrixXcd closed_delta_matrix() {
  const double k = std::sqrt(3.0) / 3.0;
  const cdouble m = std::polar(k, -kPi / 6), p = std::polar(k, kPi / 6);
  MatrixXcd t(3, 3);
  t << m, 0.0, p,
       p, m, 0.0,
       0.0, p, m;
  return t;
}

std::vector<std::vector<Connection>> all_subsets(PhaseSet ph) {
  std::vector<std::vector<Connection>> out;
  for (int mask = 1; mask < 8; ++mask) {
    std::vector<Connection> c;
    bool ok = true;
    for (int k = 0; k < 3; ++k)
      if (mask & (1 << k)) {
        const auto conn = kAllConnections[static_cast<std::size_t>(k)];
        const auto [a, b] = endpoints(conn);
        if (!ph.contains(a) || !ph.contains(b)) ok = false;
        c.push_back(conn);
      }
    if (ok) out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_CASE("balanced closed delta gives the sqrt(3)/3 matrix") {
  const std::vector<Connection> all(kAllConnections.begin(), kAllConnections.end());
  const auto t = balanced_delta_transform(PhaseSet::abc(), all).t;
  CHECK((t - closed_delta_matrix()).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 3; ++c)
      if (std::abs(t(r, c)) > 0) {
        CHECK(std::abs(t(r, c)) == doctest::Approx(std::sqrt(3.0) / 3.0).epsilon(1e-14));
        CHECK(std::abs(std::abs(std::arg(t(r, c))) - kPi / 6) < 1e-14);
      }
}

TEST_CASE("open deltas at balanced voltages") {
  const double k = std::sqrt(3.0) / 3.0;
  SUBCASE("ab only on a two-phase bus") {
    const std::vector<Connection> c{Connection::AB};
    const auto t = balanced_delta_transform(PhaseSet{Phase::A, Phase::B}, c).t;
    REQUIRE(t.rows() == 2);
    CHECK(std::abs(t(0, 0) - std::polar(k, -kPi / 6)) < 1e-12);
    CHECK(std::abs(t(1, 0) - std::polar(k, kPi / 6)) < 1e-12);
    CHECK(std::abs(t.colwise().sum()(0) - 1.0) < 1e-12);
  }
  SUBCASE("ab and bc on a three-phase bus match the closed matrix without ca") {
    const std::vector<Connection> c{Connection::AB, Connection::BC};
    const auto t = balanced_delta_transform(PhaseSet::abc(), c).t;
    CHECK((t - closed_delta_matrix().leftCols(2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("untouched phase gets a zero row") {
    const std::vector<Connection> c{Connection::BC};
    const auto t = balanced_delta_transform(PhaseSet::abc(), c).t;
    CHECK(t(0, 0) == cdouble(0.0));
  }
}

TEST_CASE("unbalanced closed delta matches an entry-by-entry evaluation") {
  const VectorXcd v = polar3(1.02, 1, 0.97, -122, 1.01, 119);
  const std::vector<Connection> all(kAllConnections.begin(), kAllConnections.end());
  const auto t = delta_transform(v, PhaseSet::abc(), all).t;
  const cdouble va = v(0), vb = v(1), vc = v(2);
  MatrixXcd want = MatrixXcd::Zero(3, 3);
  want(0, 0) = va / (va - vb);
  want(1, 0) = -vb / (va - vb);
  want(1, 1) = vb / (vb - vc);
  want(2, 1) = -vc / (vb - vc);
  want(2, 2) = vc / (vc - va);
  want(0, 2) = -va / (vc - va);
  CHECK((t - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("open delta equals closed delta with omitted columns dropped") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXcd v = polar3(testing::uniform(rng, 0.9, 1.1), testing::uniform(rng, -5, 5),
                               testing::uniform(rng, 0.9, 1.1), -120 + testing::uniform(rng, -5, 5),
                               testing::uniform(rng, 0.9, 1.1), 120 + testing::uniform(rng, -5, 5));
    const std::vector<Connection> all(kAllConnections.begin(), kAllConnections.end());
    const auto closed = delta_transform(v, PhaseSet::abc(), all).t;
    for (const auto& subset : all_subsets(PhaseSet::abc())) {
      const auto open = delta_transform(v, PhaseSet::abc(), subset).t;
      for (std::size_t k = 0; k < subset.size(); ++k)
        REQUIRE((open.col(static_cast<Eigen::Index>(k)) - closed.col(static_cast<int>(subset[k]))).cwiseAbs().maxCoeff() <
                1e-15);
    }
  }
}

TEST_CASE("column sums equal one and total power is conserved") {
  std::mt19937_64 rng(17);
  const PhaseSet sets[] = {PhaseSet::abc(), PhaseSet{Phase::A, Phase::B}, PhaseSet{Phase::B, Phase::C},
                           PhaseSet{Phase::A, Phase::C}};
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXcd full(3);
    for (int k = 0; k < 3; ++k)
      full(k) = std::polar(testing::uniform(rng, 0.5, 1.5), testing::uniform(rng, -kPi, kPi));
    for (PhaseSet ph : sets) {
      VectorXcd v(ph.size());
      for (Phase p : ph.phases()) v(ph.index_of(p)) = full(static_cast<int>(p));
      for (const auto& subset : all_subsets(ph)) {
        bool degenerate = false;
        for (Connection c : subset) {
          const auto [a, b] = endpoints(c);
          degenerate |= std::abs(v(ph.index_of(a)) - v(ph.index_of(b))) < 1e-6;
        }
        if (degenerate) continue;
        const auto t = delta_transform(v, ph, subset).t;
        REQUIRE((t.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        VectorXcd s(static_cast<Eigen::Index>(subset.size()));
        for (auto& x : s) x = cdouble(testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1));
        REQUIRE(std::abs((t * s).sum() - s.sum()) < 1e-12);
      }
    }
  }
}

TEST_CASE("delta transform errors") {
  VectorXcd v = polar3(1, 0, 1, -120, 1, 120);
  const std::vector<Connection> ab{Connection::AB};
  v(1) = v(0);
  try {
    delta_transform(v, PhaseSet::abc(), ab);
    FAIL("expected DegenerateVoltagePair");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateVoltagePair);
  }
  VectorXcd two(2);
  two << 1.0, std::polar(1.0, -2 * kPi / 3);
  const std::vector<Connection> bc{Connection::BC};
  try {
    delta_transform(two, PhaseSet{Phase::A, Phase::B}, bc);
    FAIL("expected MissingPhase");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingPhase);
  }
}

TEST_CASE("bus injection") {
  const std::vector<Connection> all(kAllConnections.begin(), kAllConnections.end());
  const auto t = balanced_delta_transform(PhaseSet::abc(), all);
  WyeLoad wye{VectorXcd::Zero(3)};
  DeltaLoad none{{}, VectorXcd::Zero(0)};
  const auto t_none = balanced_delta_transform(PhaseSet::abc(), {});
  CHECK(bus_injection(wye, none, t_none).cwiseAbs().maxCoeff() == 0.0);

  wye.s << cdouble(0.1, 0.05), cdouble(0.2, 0.01), cdouble(0.0, -0.03);
  CHECK((bus_injection(wye, none, t_none) - wye.s).cwiseAbs().maxCoeff() == 0.0);

  DeltaLoad d{all, VectorXcd::Constant(3, 0.03)};
  const VectorXcd s = bus_injection(WyeLoad{VectorXcd::Zero(3)}, d, t);
  CHECK(s.sum().real() == doctest::Approx(0.09).epsilon(1e-14));
  CHECK(std::abs(s.sum().imag()) < 1e-15);

  DeltaLoad wrong{all, VectorXcd::Constant(2, 0.03)};
  CHECK_THROWS_AS(bus_injection(wye, wrong, t), Error);
}

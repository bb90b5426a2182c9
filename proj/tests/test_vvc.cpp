#include "doctest.h"

#include <cmath>

#include "gridlin/error.hpp"
#include "gridlin/fixtures.hpp"
#include "gridlin/io.hpp"
#include "gridlin/vvc.hpp"
#include "test_support.hpp"

using namespace gridlin;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

PvFleet two_units() {
  PvFleet f;
  f.nodes = {0, 1};
  f.q_min = vec({-0.5, -0.5});
  f.q_max = vec({0.5, 0.5});
  return f;
}

bool within_bounds(const VvcReport& r, const PvFleet& f) {
  for (const auto& q : r.q_g)
    if ((q - f.q_min).minCoeff() < 0.0 || (f.q_max - q).minCoeff() < 0.0) return false;
  return true;
}

struct VvcStudy {
  testing::Study st;
  PvFleet fleet;
};

VvcStudy vvc_study() {
  const auto fx = fixtures::synthetic_123(7);
  auto st = testing::study(fx, true);
  PvFleet fleet = io::make_fleet(st.net, fx.vvc_scenario->fleet, st.ts);
  return {std::move(st), std::move(fleet)};
}

}  // namespace

TEST_CASE("objective") {
  CHECK(objective(VectorXd::Ones(7)) == 0.0);
  CHECK(objective(vec({1.1, 0.9})) == doctest::Approx(0.01).epsilon(1e-12));
  const auto st = testing::study(fixtures::appendix_b(7));
  const VectorXd v = solve_exact(st.net, st.base).v_sq;
  double ref = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) ref += 0.5 * (v(i) - 1.0) * (v(i) - 1.0);
  CHECK(objective(v) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("projected gradient step") {
  const PvFleet f = two_units();
  RowMatrixXd s(2, 3);
  s << 0.2, 0.1, 0.05,
       0.1, 0.3, 0.02;
  const VectorXd q = vec({0.1, -0.2});
  const VvcConfig cfg{1.0, 1};
  CHECK(vvc_step(q, VectorXd::Ones(3), s, f, cfg) == q);

  const VectorXd high = vec({1.05, 1.04, 1.06});
  const VectorXd down = vvc_step(q, high, s, f, cfg);
  CHECK(down(0) < q(0));
  CHECK(down(1) < q(1));
  CHECK(down(0) == doctest::Approx(q(0) - (0.2 * 0.05 + 0.1 * 0.04 + 0.05 * 0.06)).epsilon(1e-14));

  const VectorXd clipped = vvc_step(q, high, s, f, VvcConfig{1e6, 1});
  CHECK(clipped == f.q_min);
  CHECK(vvc_step(q, vec({0.9, 0.9, 0.9}), s, f, VvcConfig{1e6, 1}) == f.q_max);

  try {
    vvc_step(q, vec({1.0, 1.0}), s, f, cfg);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("steps below 1/L descend on the linear model") {
  const auto fx = fixtures::synthetic_123(7);
  const auto st = testing::study(fx);
  const auto op = solve_exact(st.net, st.base);
  const auto cm = assemble_compact(update_parameters(st.net, op), incidence_blocks(st.net));
  PvFleet fleet;
  for (std::size_t i = 0; i < st.net.m(); i += 9) fleet.nodes.push_back(i);
  const auto n = static_cast<Eigen::Index>(fleet.nodes.size());
  fleet.q_min = VectorXd::Constant(n, -0.3);
  fleet.q_max = VectorXd::Constant(n, 0.3);
  const RowMatrixXd s = voltage_sensitivity(cm, fleet.nodes);
  const double l = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s * s.transpose()).eigenvalues().maxCoeff();
  const VvcConfig cfg{0.9 / l, 1};
  VectorXd q = VectorXd::Zero(n);
  double prev = objective(op.v_sq);
  for (int it = 0; it < 50; ++it) {
    const VectorXd v = op.v_sq + s.transpose() * q;
    const VectorXd next = vvc_step(q, v, s, fleet, cfg);
    const double f = objective(op.v_sq + s.transpose() * next);
    CHECK(f <= prev + 1e-15);
    prev = f;
    q = next;
  }
  CHECK(prev < objective(op.v_sq));
}

TEST_CASE("fleet validation") {
  const auto st = testing::study(fixtures::appendix_b(7));
  PvFleet f = two_units();
  f.p_g.assign(st.ts.horizon(), VectorXd::Zero(2));
  CHECK_NOTHROW(validate(f, st.net, st.ts.horizon()));
  PvFleet bad = f;
  bad.q_min(0) = 1.0;
  CHECK_THROWS_AS(validate(bad, st.net, st.ts.horizon()), Error);
  bad = f;
  bad.nodes[1] = 99;
  CHECK_THROWS_AS(validate(bad, st.net, st.ts.horizon()), Error);
  bad = f;
  bad.p_g.pop_back();
  CHECK_THROWS_AS(validate(bad, st.net, st.ts.horizon()), Error);
}

TEST_CASE("a fleet pinned at zero reproduces the uncontrolled run") {
  auto [st, fleet] = vvc_study();
  TimeSeries short_ts = st.ts;
  short_ts.loads.resize(30);
  fleet.p_g.resize(30);
  fleet.q_min.setZero();
  fleet.q_max.setZero();
  const auto online = run_vvc_online(st.net, short_ts, fleet, {}, {}, {});
  const auto none = run_uncontrolled(st.net, short_ts, fleet);
  REQUIRE(online.objective.size() == none.objective.size());
  for (std::size_t t = 0; t < none.objective.size(); ++t) CHECK(online.objective[t] == none.objective[t]);
}

TEST_CASE("with steady conditions the online controller settles at the offline optimum") {
  auto [st, fleet] = vvc_study();
  const int horizon = 1000;
  TimeSeries steady;
  steady.dt_seconds = st.ts.dt_seconds;
  steady.loads.assign(horizon, st.ts.loads.front());
  steady.pv_p.assign(horizon, st.ts.pv_p.front());
  fleet.p_g.assign(horizon, fleet.p_g.front());
  const auto online = run_vvc_online(st.net, steady, fleet, {}, {}, {});
  const auto offline = run_vvc_offline(st.net, steady, fleet, {}, horizon);
  CHECK(within_bounds(online, fleet));
  CHECK(within_bounds(offline, fleet));
  const double settled = online.objective.back();
  const double optimum = offline.objective.back();
  CHECK(std::abs(settled - optimum) <= 0.05 * optimum);
}

TEST_CASE("online control on the fast-varying profile") {
  const auto [st, fleet] = vvc_study();
  const auto fx = fixtures::synthetic_123(7);
  const auto& ctl = *fx.vvc_scenario->controller;
  const auto online = run_vvc_online(st.net, st.ts, fleet, ctl.config, {}, {});
  const auto offline = run_vvc_offline(st.net, st.ts, fleet, ctl.config, ctl.opf_period);
  const auto none = run_uncontrolled(st.net, st.ts, fleet);
  CHECK(online.mean_objective <= offline.mean_objective);
  CHECK(online.mean_objective <= 0.8 * none.mean_objective);
  CHECK(offline.mean_objective <= 0.8 * none.mean_objective);
  CHECK(within_bounds(online, fleet));
  CHECK(within_bounds(offline, fleet));
  CHECK(online.objective.size() == st.ts.horizon());
}

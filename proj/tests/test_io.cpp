#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "gridlin/error.hpp"
#include "gridlin/fixtures.hpp"
#include "gridlin/io.hpp"
#include "test_support.hpp"

using namespace gridlin;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

std::vector<io::ReportRow> rows(std::initializer_list<io::ReportRow> r) { return r; }

}  // namespace

TEST_CASE("doubles survive a text round trip") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, std::numeric_limits<double>::denorm_min()})
    CHECK(std::strtod(io::format_double(x).c_str(), nullptr) == x);
}

TEST_CASE("fixture files round-trip byte for byte") {
  for (auto kind : {fixtures::Kind::AppendixB, fixtures::Kind::Chain, fixtures::Kind::Synthetic123}) {
    const auto fx = fixtures::generate(kind, 7);
    const std::string net = io::write_network(fx.network);
    CHECK(io::write_network(io::parse_network(net)) == net);
    const std::string prof = io::write_profile(fx.profile);
    CHECK(io::write_profile(io::parse_profile(prof)) == prof);
    const std::string sc = io::write_scenario(fx.scenario);
    CHECK(io::write_scenario(io::parse_scenario(sc)) == sc);
    if (fx.vvc_scenario) {
      const std::string vs = io::write_scenario(*fx.vvc_scenario);
      CHECK(io::write_scenario(io::parse_scenario(vs)) == vs);
    }
    for (const auto& [name, text] : fixtures::render(fx)) CHECK(!text.empty());
  }
}

TEST_CASE("parsed network matches the generated one") {
  const auto fx = fixtures::appendix_b(7);
  const auto doc = io::parse_network(io::write_network(fx.network));
  const Network a = build_network(fx.network.spec);
  const Network b = build_network(doc.spec);
  REQUIRE(a.m() == b.m());
  for (int j = 1; j < 3; ++j) CHECK((a.segment(j).z - b.segment(j).z).cwiseAbs().maxCoeff() == 0.0);
  CHECK(io::make_load_set(a, fx.network.loads).stacked_delta() == io::make_load_set(b, doc.loads).stacked_delta());
}

TEST_CASE("operating point files carry everything the linearizer needs") {
  const auto st = testing::study(fixtures::appendix_b(7));
  const auto op = solve_exact(st.net, st.base);
  const std::string text = io::write_operating_point(st.net, op);
  const auto back = io::parse_operating_point(st.net, text);
  CHECK((back.v_complex - op.v_complex).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((back.p_flow - op.p_flow).cwiseAbs().maxCoeff() < 1e-12);
  const auto again = io::parse_operating_point(st.net, io::write_operating_point(st.net, back));
  CHECK((again.v_complex - back.v_complex).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("network parse errors") {
  SUBCASE("syntax error reports a position") {
    try {
      io::parse_network("{\n  \"buses\": [\n    {\"id\": 0,,}\n");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("bad phases") {
    CHECK(code_of([] { io::parse_network(R"({"buses":[{"id":0,"phases":"abd"}],"segments":[]})"); }) ==
          ErrorCode::ParseError);
  }
  SUBCASE("two delta declarations on one bus") {
    const auto fx = fixtures::appendix_b(7);
    const Network net = build_network(fx.network.spec);
    auto decls = fx.network.loads;
    for (const auto& d : fx.network.loads)
      if (d.delta) decls.push_back(d);
    CHECK(code_of([&] { io::make_load_set(net, decls); }) == ErrorCode::InvalidInput);
  }
  SUBCASE("wye declarations on one bus add up") {
    const auto fx = fixtures::appendix_b(7);
    const Network net = build_network(fx.network.spec);
    const LoadSet once = io::make_load_set(net, fx.network.loads);
    auto decls = fx.network.loads;
    for (const auto& d : fx.network.loads)
      if (!d.delta) decls.push_back(d);
    const LoadSet twice = io::make_load_set(net, decls);
    CHECK((twice.bus[1].wye.s - 2.0 * once.bus[1].wye.s).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { io::read_file("/nonexistent/network.json"); }) == ErrorCode::FileNotFound);
  }
}

TEST_CASE("profiles") {
  const auto st = testing::study(fixtures::appendix_b(7));
  SUBCASE("unlisted entries keep the base value") {
    const auto recs = io::parse_profile("step,bus,kind,phase_or_pair,p,q\n1,2,wye,a,0.5,0.1\n");
    const auto ts = io::build_timeseries(st.net, st.base, recs, 60);
    REQUIRE(ts.horizon() == 2);
    CHECK(ts.loads[0].bus[2].wye.s == st.base.bus[2].wye.s);
    CHECK(ts.loads[1].bus[2].wye.s(0) == cdouble(0.5, 0.1));
    CHECK(ts.loads[1].bus[2].wye.s(1) == st.base.bus[2].wye.s(1));
  }
  SUBCASE("duplicates and unknown references") {
    const auto dup = io::parse_profile("step,bus,kind,phase_or_pair,p,q\n0,1,wye,a,1,0\n0,1,wye,a,2,0\n");
    CHECK(code_of([&] { io::build_timeseries(st.net, st.base, dup, 60); }) == ErrorCode::InvalidInput);
    const auto phase = io::parse_profile("step,bus,kind,phase_or_pair,p,q\n0,2,wye,c,1,0\n");
    CHECK(code_of([&] { io::build_timeseries(st.net, st.base, phase, 60); }) == ErrorCode::MissingPhase);
    const auto bus = io::parse_profile("step,bus,kind,phase_or_pair,p,q\n0,9,wye,a,1,0\n");
    CHECK(code_of([&] { io::build_timeseries(st.net, st.base, bus, 60); }) == ErrorCode::UnknownBus);
  }
  SUBCASE("malformed rows") {
    CHECK(code_of([] { io::parse_profile("step,bus,kind,phase_or_pair,p,q\n0,1,star,a,1,0\n"); }) ==
          ErrorCode::ParseError);
    CHECK(code_of([] { io::parse_profile("step,bus\n"); }) == ErrorCode::ParseError);
  }
}

TEST_CASE("scenario defaults and errors") {
  const auto sc = io::parse_scenario("{}");
  CHECK(sc.update_every == 1);
  CHECK(sc.measurement.noise_sigma == 0.0);
  CHECK(!sc.controller);
  CHECK(code_of([] { io::parse_scenario(R"({"update_every": 0})"); }) != ErrorCode::FileNotFound);
  CHECK(code_of([] { io::parse_scenario(R"({"measurement": {"windows": [[5, 2]]}})"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("report comparison") {
  const auto a = rows({{1, "online", 0.1, 0.2, 0.3}, {1, "lossless", 1.0, 2.0, 3.0}});
  const auto b = rows({{1, "online", 0.2, 0.2, 0.3}, {1, "lossless", 1.0, 2.0, 3.0}});
  const auto same = io::compare_reports({"a", "a2"}, {a, a});
  CHECK(same.per_step_csv.find("online,a2,0.10000000000000001,0.20000000000000001,0.29999999999999999,0\n") !=
        std::string::npos);
  const auto diff = io::compare_reports({"a", "b"}, {a, b});
  CHECK(diff.per_step_csv.find("online,b,0.20000000000000001") != std::string::npos);
  CHECK(code_of([] { io::compare_reports({}, {}); }) == ErrorCode::EmptyInput);
  const auto shorter = rows({{2, "online", 0.1, 0.2, 0.3}, {2, "lossless", 1.0, 2.0, 3.0}});
  CHECK(code_of([&] { io::compare_reports({"a", "c"}, {a, shorter}); }) == ErrorCode::StepMismatch);
}

TEST_CASE("simulation report round trip") {
  const auto st = testing::study(fixtures::appendix_b(7));
  const auto rep = run_timeseries(st.net, st.ts, {}, {}, {});
  const std::string text = io::write_simulation_report(rep);
  const auto parsed = io::parse_simulation_report(text);
  REQUIRE(parsed.size() == 2 * rep.steps.size());
  CHECK(parsed[0].v_mape == rep.steps[0].online.v_mape);
  CHECK(parsed[1].model == "lossless");
  CHECK(text.find("# summary") != std::string::npos);
}

TEST_CASE("atomic writes") {
  const auto dir = std::filesystem::temp_directory_path() / "gridlin_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "x.txt").string();
  io::write_file(path, "one");
  io::write_file(path, "two");
  CHECK(io::read_file(path) == "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  std::filesystem::remove_all(dir);
}

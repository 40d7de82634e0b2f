#include <doctest.h>

#include "dip/opf.hpp"
#include "support/oracles.hpp"

using namespace dip;
using namespace dip::opf;

namespace {

const char* kTwoBusCase = R"(function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0  0 0 1 1 0 138 1 1.1 0.9;
  2 1 50 20  0 0 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 80 -80 1 100 1 150 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1;
];
mpc.gencost = [
  2 0 0 3 0.02 30 0;
];
)";

}  // namespace

TEST_CASE("two-bus inline case parses with per-unit conversion") {
  const OpfCase c = parse_matpower_case(kTwoBusCase);
  CHECK(c.buses.size() == 2);
  CHECK(c.branches.size() == 1);
  CHECK(c.generators.size() == 1);
  CHECK(c.base_mva == doctest::Approx(100.0));
  CHECK(c.buses[0].type == BusType::Slack);
  CHECK(c.buses[1].type == BusType::PQ);
  CHECK(c.buses[1].p_demand == doctest::Approx(0.5));
  CHECK(c.buses[1].q_demand == doctest::Approx(0.2));
  CHECK(c.buses[1].v_max == doctest::Approx(1.1));
  CHECK(c.generators[0].p_max == doctest::Approx(1.5));
  CHECK(c.generators[0].q_min == doctest::Approx(-0.8));
  CHECK(c.generators[0].c1 == doctest::Approx(30.0));
  CHECK(c.branches[0].x == doctest::Approx(0.1));
  CHECK(c.branches[0].tap == doctest::Approx(1.0));
}

TEST_CASE("the 118-bus fixture has the expected dimensions") {
  const OpfCase c = load_matpower_file(test::fixture_path("case118.m"));
  CHECK(c.buses.size() == 118);
  CHECK(c.branches.size() == 186);
  CHECK(c.generators.size() == 54);
  CHECK(c.buses[c.slack_position()].id == 69);
}

TEST_CASE("parser rejects what the subset excludes") {
  SUBCASE("piecewise-linear cost model") {
    std::string text = kTwoBusCase;
    const auto pos = text.find("2 0 0 3 0.02 30 0;");
    text.replace(pos, 1, "1");
    CHECK_THROWS_AS(parse_matpower_case(text), ParseError);
  }
  SUBCASE("phase shifter") {
    std::string text = kTwoBusCase;
    const auto pos = text.find("1 2 0 0.1 0 0 0 0 0 0 1;");
    text.replace(pos, 24, "1 2 0 0.1 0 0 0 0 0 30 1;");
    CHECK_THROWS_AS(parse_matpower_case(text), ParseError);
  }
  SUBCASE("unknown bus reference") {
    std::string text = kTwoBusCase;
    const auto pos = text.find("1 2 0 0.1");
    text.replace(pos, 3, "1 7");
    CHECK_THROWS_AS(parse_matpower_case(text), ParseError);
  }
  SUBCASE("cubic cost polynomial") {
    std::string text = kTwoBusCase;
    const auto pos = text.find("2 0 0 3 0.02 30 0;");
    text.replace(pos, 18, "2 0 0 4 0 0.02 30 0;");
    CHECK_THROWS_AS(parse_matpower_case(text), ParseError);
  }
  SUBCASE("parse errors carry line numbers") {
    try {
      parse_matpower_case(
          "function mpc = x\nmpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0 0 0 0 1 1 0 138 1 1.1 $;\n];\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 4);
    }
  }
}

TEST_CASE("admittance of a single reactive branch") {
  const OpfCase c = parse_matpower_case(kTwoBusCase);
  const ComplexSparse y = build_admittance(c);
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(y);
  CHECK(dense(0, 0).imag() == doctest::Approx(-10.0));
  CHECK(dense(0, 1).imag() == doctest::Approx(10.0));
  CHECK(dense(1, 0).imag() == doctest::Approx(10.0));
  CHECK(dense(1, 1).imag() == doctest::Approx(-10.0));
  CHECK(dense.cwiseAbs().maxCoeff() == doctest::Approx(10.0));
}

TEST_CASE("admittance of an empty branch list is zero") {
  OpfCase c = parse_matpower_case(kTwoBusCase);
  c.branches.clear();
  const ComplexSparse y = build_admittance(c);
  CHECK(Eigen::MatrixXcd(y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("admittance row sums vanish on a shunt-free unity-tap copy") {
  OpfCase c = load_matpower_file(test::fixture_path("case118.m"));
  for (auto& b : c.buses) {
    b.g_shunt = 0.0;
    b.b_shunt = 0.0;
  }
  for (auto& br : c.branches) {
    br.b_charge = 0.0;
    br.tap = 1.0;
  }
  const ComplexSparse y = build_admittance(c);
  const Eigen::VectorXcd row_sums = Eigen::MatrixXcd(y).rowwise().sum();
  CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero-impedance branches are rejected") {
  OpfCase c = parse_matpower_case(kTwoBusCase);
  c.branches[0].r = 0.0;
  c.branches[0].x = 0.0;
  CHECK_THROWS_AS(build_admittance(c), InstanceError);
}

TEST_CASE("tie specs parse from json") {
  const auto ties = parse_tie_specs_json(
      R"({"ties": [{"copy_a": 1, "bus_a": 5, "copy_b": 2, "bus_b": 9, "r": 0.01, "x": 0.1}]})");
  REQUIRE(ties.size() == 1);
  CHECK(ties[0].bus_b == 9);
  CHECK(ties[0].x == doctest::Approx(0.1));
  CHECK(ties[0].b == 0.0);
  CHECK_THROWS_AS(parse_tie_specs_json("not json"), ParseError);
}

TEST_CASE("interconnect_copies renumbers, demotes and ties") {
  const OpfCase base = parse_matpower_case(kTwoBusCase);
  std::vector<TieSpec> ties = {{1, 2, 2, 1, 0.01, 0.08, 0.0}};
  const InterconnectedCase joined = interconnect_copies(base, 2, ties);
  CHECK(joined.combined.buses.size() == 4);
  CHECK(joined.combined.branches.size() == 3);
  CHECK(joined.combined.generators.size() == 2);
  CHECK(joined.regions == 2);
  CHECK(joined.region_of_bus == std::vector<int>{0, 0, 1, 1});

  // Copy 2's slack is demoted; ids are offset by the bus-id stride.
  int slack_count = 0;
  for (const auto& b : joined.combined.buses) {
    if (b.type == BusType::Slack) ++slack_count;
  }
  CHECK(slack_count == 1);
  CHECK(joined.combined.buses[2].id == 3);
  const auto& tie = joined.combined.branches.back();
  CHECK(tie.from == 2);
  CHECK(tie.to == 3);

  CHECK_THROWS_AS(interconnect_copies(base, 1, ties), InstanceError);
  std::vector<TieSpec> bad = {{1, 2, 3, 1, 0.01, 0.08, 0.0}};
  CHECK_THROWS_AS(interconnect_copies(base, 2, bad), InstanceError);
}

TEST_CASE("write_matpower_case round-trips through the parser") {
  const OpfCase base = parse_matpower_case(kTwoBusCase);
  const std::string text = write_matpower_case(base, "roundtrip");
  const OpfCase again = parse_matpower_case(text);
  CHECK(again.buses.size() == base.buses.size());
  CHECK(again.branches.size() == base.branches.size());
  CHECK(again.generators[0].p_max == doctest::Approx(base.generators[0].p_max));
  CHECK(again.buses[1].p_demand == doctest::Approx(base.buses[1].p_demand));
  CHECK(again.generators[0].c2 == doctest::Approx(base.generators[0].c2));
}

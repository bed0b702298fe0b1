#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gridshed/netmodel.hpp"
#include "support/test_util.hpp"

using namespace gridshed;
using gridshed::testing::data_path;

namespace {

const char* kTwoBusJson = R"({
  "base_mva": 100,
  "buses": [
    {"id": 1, "kind": "generator", "p0": 1.0, "pmin": -0.5, "pmax": 2.0},
    {"id": 2, "kind": "load", "p0": -1.0, "pmin": -1.0, "pmax": 0.0}
  ],
  "branches": [
    {"id": 1, "from": 1, "to": 2, "y": 1.0, "c": 2.0}
  ]
})";

PowerNetwork two_bus_from_json() {
  std::istringstream in(kTwoBusJson);
  return load_case(in, CaseFormat::Json);
}

}  // namespace

TEST_CASE("smallest legal network parses") {
  PowerNetwork net = two_bus_from_json();
  CHECK(net.bus_count() == 2);
  CHECK(net.branch_count() == 1);
  CHECK(net.incidence()(0, 0) == 1.0);
  CHECK(net.incidence()(0, 1) == -1.0);
  CHECK(net.bus(0).kind == BusKind::Generator);
  CHECK(net.branch(0).flow_threshold == 2.0);
}

TEST_CASE("load_case is deterministic") {
  PowerNetwork a = two_bus_from_json();
  PowerNetwork b = two_bus_from_json();
  CHECK(a.base_injections() == b.base_injections());
  CHECK(a.base_admittance() == b.base_admittance());
  CHECK(a.incidence() == b.incidence());
}

TEST_CASE("ieee57 json case") {
  PowerNetwork net = load_case_file(data_path("ieee57.json"));
  CHECK(net.bus_count() == 57);
  CHECK(net.branch_count() == 80);
  CHECK(std::abs(net.base_injections().sum()) <= 1e-6);
  // every incidence row sums to zero with exactly one +1 and one -1
  const Mat& A = net.incidence();
  for (int l = 0; l < net.branch_count(); ++l) {
    CHECK(A.row(l).sum() == 0.0);
    CHECK(A.row(l).cwiseAbs().sum() == 2.0);
  }
  CHECK((A * Vec::Ones(57)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ieee57 matpower case matches the json twin") {
  PowerNetwork m = load_case_file(data_path("case57.m"));
  PowerNetwork j = load_case_file(data_path("ieee57.json"));
  REQUIRE(m.bus_count() == j.bus_count());
  REQUIRE(m.branch_count() == j.branch_count());
  CHECK(std::abs(m.base_injections().sum()) <= 1e-6);
  CHECK((m.base_injections() - j.base_injections()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((m.base_admittance() - j.base_admittance()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((m.injection_upper() - j.injection_upper()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((m.injection_lower() - j.injection_lower()).cwiseAbs().maxCoeff() < 1e-9);
  for (int i = 0; i < m.bus_count(); ++i)
    CHECK(m.bus(i).kind == j.bus(i).kind);
}

TEST_CASE("matpower netting and bound rules") {
  PowerNetwork net = load_case_file(data_path("case57.m"));
  // load bus: pmax = 0, pmin = -load, base = -load
  const Bus& b12 = net.bus(11);  // generator bus 12
  CHECK(b12.kind == BusKind::Generator);
  CHECK(b12.base_injection == doctest::Approx((283.91 - 377.0) / 100.0));
  CHECK(b12.injection_max == doctest::Approx(4.10));
  CHECK(b12.injection_min == doctest::Approx(-3.77));
  const Bus& b30 = net.bus(29);  // load bus 30, Pd = 3.6
  CHECK(b30.kind == BusKind::Load);
  CHECK(b30.injection_max == 0.0);
  CHECK(b30.injection_min == doctest::Approx(-0.036));
  CHECK(b30.base_injection == doctest::Approx(-0.036));
  for (const Bus& b : net.buses()) {
    CHECK(b.injection_min <= b.base_injection + 1e-12);
    CHECK(b.base_injection <= b.injection_max + 1e-12);
  }
}

TEST_CASE("dangling branch endpoint is a named validation error") {
  std::string body = kTwoBusJson;
  body.replace(body.find("\"to\": 2"), 7, "\"to\": 99");
  std::istringstream in(body);
  CHECK_THROWS_WITH_AS(load_case(in, CaseFormat::Json),
                       doctest::Contains("branch 1"), ValidationError);
}

TEST_CASE("unbalanced case is rejected") {
  std::string body = kTwoBusJson;
  body.replace(body.find("\"p0\": -1.0"), 10, "\"p0\": -0.9");
  body.replace(body.find("\"pmin\": -1.0"), 12, "\"pmin\": -0.9");
  std::istringstream in(body);
  CHECK_THROWS_AS(load_case(in, CaseFormat::Json), ValidationError);
}

TEST_CASE("nonpositive admittance is rejected") {
  std::string body = kTwoBusJson;
  body.replace(body.find("\"y\": 1.0"), 8, "\"y\": 0.0");
  std::istringstream in(body);
  CHECK_THROWS_WITH_AS(load_case(in, CaseFormat::Json),
                       doctest::Contains("admittance"), ValidationError);
}

TEST_CASE("malformed matpower table reports the row") {
  std::string text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 bogus;\n];\n"
                     "mpc.gen = [\n];\nmpc.branch = [\n];\n";
  std::istringstream in(text);
  CHECK_THROWS_AS(load_case(in, CaseFormat::Matpower), ParseError);
}

TEST_CASE("incidence of the triangle") {
  PowerNetwork net = gridshed::testing::triangle_network();
  const Mat A = incidence_matrix(net);
  for (int l = 0; l < 3; ++l) CHECK(A.row(l).sum() == 0.0);
  CHECK(A(0, 0) == 1.0);
  CHECK(A(2, 2) == 1.0);
  CHECK(A(2, 1) == -1.0);
}

TEST_CASE("apply_disturbance") {
  PowerNetwork net = load_case_file(data_path("ieee57.json"));
  const Vec y0 = net.base_admittance();

  SUBCASE("zero delta is the identity") {
    CHECK(apply_disturbance(net, Vec::Zero(80)) == y0);
  }
  SUBCASE("severing branch 10 zeroes exactly one entry") {
    Vec delta = Vec::Zero(80);
    delta[9] = -y0[9];
    const Vec y1 = apply_disturbance(net, delta);
    int zeros = 0;
    for (int l = 0; l < 80; ++l) zeros += y1[l] == 0.0;
    CHECK(zeros == 1);
    CHECK(y1[9] == 0.0);
  }
  SUBCASE("negative resulting admittance is an error") {
    Vec delta = Vec::Zero(80);
    delta[3] = -y0[3] - 0.5;
    CHECK_THROWS_AS(apply_disturbance(net, delta), ValidationError);
  }
  SUBCASE("additive in the disturbance") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    Vec d1(80), d2(80);
    for (int l = 0; l < 80; ++l) {
      d1[l] = -u(rng) * y0[l];
      d2[l] = -u(rng) * y0[l];
    }
    const Vec combined = apply_disturbance(net, d1 + d2);
    const Vec staged = apply_disturbance(net, d1) + d2;
    CHECK((combined - staged).cwiseAbs().maxCoeff() < 1e-15);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridmesh/casefile.hpp"
#include "gridmesh/centralized.hpp"
#include "gridmesh/topology.hpp"
#include "test_util.hpp"

using namespace gridmesh;

namespace {

CaseData two_bus_loaded(double pd_mw) {
  CaseData c = parse_matpower_case(kTwoBusCase);
  c.buses[1].pd = pd_mw;
  return c;
}

}  // namespace

TEST_CASE("two-bus case has a closed-form solution") {
  // loss-free line (G = 0, B = 10): q2 = 0 forces v2 = cos(th2) and then
  // p2 = 5 sin(2 th2) = -pd
  const CaseData c = two_bus_loaded(10.0);  // pd = 0.1 p.u.
  const PFSolution sol = solve_newton_raphson(c);
  const double th2 = 0.5 * std::asin(-0.02);
  CHECK(sol.va[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sol.vm[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.va[1] == doctest::Approx(th2).epsilon(1e-10));
  CHECK(sol.vm[1] == doctest::Approx(std::cos(th2)).epsilon(1e-10));
  // the slack picks up exactly the load (no line losses)
  CHECK(sol.p[0] == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(sol.p[1] == doctest::Approx(-0.1).epsilon(1e-10));
  CHECK(sol.mismatch <= 1e-10);
}

TEST_CASE("nine-bus fixture matches the reference solution") {
  const PFSolution sol = solve_newton_raphson(parse_matpower_case(read_fixture("case9.m")));
  const double vm[9] = {1.0, 1.0, 1.0,
                        0.987006852392, 0.975472177085, 1.003375436453,
                        0.985644881725, 0.996185245809, 0.957621040430};
  const double va[9] = {0.0, 0.168751367183, 0.083270936843,
                        -0.042003860319, -0.070114489424, 0.033608089517,
                        0.010847998939, 0.066307156041, -0.075920663154};
  REQUIRE(sol.vm.size() == 9);
  for (int j = 0; j < 9; ++j) {
    CHECK(sol.vm[j] == doctest::Approx(vm[j]).epsilon(1e-6));
    CHECK(sol.va[j] == doctest::Approx(va[j]).epsilon(1e-6));
  }
  CHECK(sol.mismatch <= 1e-10);
  CHECK(sol.iterations <= 6);
}

TEST_CASE("flat profile converges in quadratic time on every fixture") {
  for (const char* name : {"case9.m", "case14.m", "case30.m"}) {
    const PFSolution sol = solve_newton_raphson(parse_matpower_case(read_fixture(name)));
    CHECK(sol.mismatch <= 1e-10);
    CHECK(sol.iterations <= 8);
  }
}

TEST_CASE("merged 53-bus case solves and balances power") {
  const MergeResult mr =
      merge_cases({parse_matpower_case(read_fixture("case9.m")),
                   parse_matpower_case(read_fixture("case14.m")),
                   parse_matpower_case(read_fixture("case30.m"))},
                  load_connection_spec(fixture_path("conn53.json")));
  const PFSolution sol = solve_newton_raphson(mr.merged);
  CHECK(sol.mismatch <= 1e-10);
  // net injections sum to the (small, lossy) total line loss
  CHECK(sol.p.sum() >= 0.0);
  CHECK(sol.p.sum() <= 1.0);
}

TEST_CASE("infeasible loading raises a solve error") {
  // far beyond the ~5 p.u. transfer limit of the two-bus line
  CHECK_THROWS_AS(solve_newton_raphson(two_bus_loaded(2000.0)), SolveError);
}

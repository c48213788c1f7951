#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "parcalm/corpus.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/problem.hpp"
#include "support.hpp"

using namespace parcalm;
using testing::v;

namespace {

const char* kSmall = R"(# comment line
[problem]
n = 1
m = 2
p = 1
[upper]
F = "x + y1 + y2"
[lower]
f = "-y1"
g1 = "y1^2 + y2^2 - x"
[box]
x = -1, 1
y1 = -1.5, 1.5
y2 = -1.5, 1.5
[tolerances]
rank = 1e-9
)";

}  // namespace

TEST_SUITE("problem") {
  TEST_CASE("loader reads every section") {
    BilevelProblem P = load_problem(kSmall);
    CHECK(P.m == 2);
    CHECK(P.p() == 1);
    CHECK(P.q() == 0);
    CHECK(P.tol.rank == 1e-9);
    CHECK(P.tol.active == 1e-8);
    CHECK(P.box.y_hi[1] == 1.5);
    CHECK(P.F.value(1, v({2, 3})) == doctest::Approx(6));
    CHECK(P.g[0].gradient(0.5, v({1, 2})).isApprox(v({-1, 2, 4})));
  }

  TEST_CASE("serialize round trip") {
    for (const auto& name : builtin_names()) {
      BilevelProblem P = builtin_problem(name);
      BilevelProblem Q = load_problem(serialize(P));
      CHECK(Q.m == P.m);
      CHECK(Q.p() == P.p());
      CHECK(Q.box.x_lo == P.box.x_lo);
      CHECK(Q.box.y_hi == P.box.y_hi);
      CHECK(serialize(Q) == serialize(P));
      std::mt19937_64 rng(1);
      for (int k = 0; k < 10; ++k) {
        double x;
        Vec y;
        testing::random_point(P, rng, x, y);
        CHECK(Q.F.value(x, y) == P.F.value(x, y));
        CHECK(Q.f.value(x, y) == P.f.value(x, y));
      }
    }
  }

  TEST_CASE("default box") {
    BilevelProblem P = load_problem("[problem]\nn = 1\nm = 1\np = 0\n[upper]\nF = \"y1\"\n[lower]\nf = \"y1^2\"\n");
    CHECK(P.box.x_lo == -1.0);
    CHECK(P.box.x_hi == 1.0);
    CHECK(P.box.y_lo[0] == -2.0);
    CHECK(P.box.y_hi[0] == 2.0);
  }

  TEST_CASE("loader errors") {
    CHECK_THROWS_AS(load_problem("[problem]\nn = 2\nm = 1\np = 0\n[upper]\nF = \"y1\"\n[lower]\nf = \"y1\"\n"),
                    ProblemError);
    CHECK_THROWS_AS(load_problem("[problem]\nn = 1\nm = 1\np = 1\n[upper]\nF = \"y1\"\n[lower]\nf = \"y1\"\n"),
                    ProblemError);  // g1 missing
    CHECK_THROWS_AS(load_problem("[problem]\nn = 1\nm = 1\np = 0\n[upper]\nF = \"y2\"\n[lower]\nf = \"y1\"\n"),
                    ProblemError);  // y2 beyond m
    CHECK_THROWS_AS(load_problem("[problem]\nn = 1\nm = 1\np = 0\n[upper]\nF = y1\n[lower]\nf = \"y1\"\n"),
                    ProblemError);  // unquoted
    CHECK_THROWS_AS(load_problem("[nonsense]\n"), ProblemError);
    CHECK_THROWS_AS(load_problem(std::string(kSmall) + "bogus = 1\n"), ProblemError);
    CHECK_THROWS_AS(load_problem(std::string(kSmall) + "grid = 2\n"), ProblemError);
    CHECK_THROWS_AS(load_problem_file("/nonexistent/problem.blp"), ProblemError);
    CHECK_THROWS_AS(resolve_problem("builtin:nope"), ProblemError);
  }

  TEST_CASE("file loading") {
    const std::string path = "parcalm_test_problem.blp";
    {
      std::ofstream f(path);
      f << kSmall;
    }
    BilevelProblem P = resolve_problem(path);
    CHECK(P.m == 2);
    std::remove(path.c_str());
  }

  TEST_CASE("feasibility and active sets") {
    BilevelProblem P = builtin_problem("example-js");
    CHECK(P.lower_feasible(0, v({0, 0})));
    CHECK_FALSE(P.lower_feasible(-0.1, v({0, 0})));
    CHECK(P.active_set(0, v({0, 0})) == std::vector<int>{0});
    CHECK(P.active_set(1, v({0, 0})).empty());
    CHECK_THROWS_AS(P.active_set(-1, v({0, 0})), InfeasiblePointError);
    CHECK_THROWS_AS(P.check_dimension(v({0})), PreconditionError);
  }

  TEST_CASE("transformations") {
    BilevelProblem P = builtin_problem("type51-corner");
    BilevelProblem S = rescale_constraints(P, {2.0, 3.0});
    CHECK(S.g[1].value(0.2, v({0.1})) == doctest::Approx(3 * P.g[1].value(0.2, v({0.1}))));
    BilevelProblem R = permute_constraints(P, {1, 0});
    CHECK(R.g[0].value(0.2, v({0.1})) == P.g[1].value(0.2, v({0.1})));
    BilevelProblem C = rescale_objective(P, 5.0);
    CHECK(C.F.value(0.2, v({0.1})) == doctest::Approx(5 * P.F.value(0.2, v({0.1}))));
    BilevelProblem W = with_upper_objective(P, "x*y1");
    CHECK(W.F.value(2, v({3})) == doctest::Approx(6));
    CHECK(parse_vector("1, -2.5,3").isApprox(v({1, -2.5, 3})));
    CHECK_THROWS(parse_vector("1,,2"));
  }

  TEST_CASE("affine detection") {
    BilevelProblem P = builtin_problem("type52-corner");
    CHECK(P.f.affine_in_y());
    for (const auto& g : P.g) CHECK(g.affine_in_y());
    CHECK_FALSE(builtin_problem("double-well").f.affine_in_y());
  }
}

#include <doctest.h>

#include <cmath>

#include "parcalm/continuation.hpp"
#include "parcalm/errors.hpp"
#include "support.hpp"

using namespace parcalm;
using testing::v;

TEST_SUITE("continuation") {
  TEST_CASE("active system residual and implicit derivatives") {
    BilevelProblem P = builtin_problem("example-js");
    BranchPoint b = branch_point_at(P, 0.25, v({0.5, 0}));
    CHECK(active_residual(P, b) < 1e-12);
    BranchDerivatives d = implicit_derivatives(P, b);
    // y1 = sqrt(x): dy1/dx = 1/(2 sqrt(x)) = 1; u = 1/(2 y1): du/dx = -1/(4 x^1.5) = -2.
    CHECK(d.dy[0] == doctest::Approx(1));
    CHECK(d.dy[1] == doctest::Approx(0).epsilon(1e-12));
    CHECK(d.du[0] == doctest::Approx(-2));
  }

  TEST_CASE("singular branch raises NumericalError") {
    BilevelProblem P = builtin_problem("example-js");
    BranchPoint b;
    b.x = 0;
    b.y = v({0, 0});
    b.u = v({0});
    b.J = {0};
    CHECK_THROWS_AS(implicit_derivatives(P, b), NumericalError);
  }

  TEST_CASE("corrector returns to the branch") {
    BilevelProblem P = builtin_problem("double-well");
    BranchPoint g;
    g.x = 0.1;
    g.y = v({-0.9});
    g.u = Vec::Zero(0);
    auto c = correct(P, g);
    REQUIRE(c);
    CHECK(std::abs(std::pow(c->y[0], 3) - c->y[0] + 0.1) < 1e-12);
  }

  TEST_CASE("multiplier-zero event on the kink") {
    BilevelProblem P = builtin_problem("type2-kink");
    CurveSegment c = trace_branch(P, branch_point_at(P, 1, v({1})), -1, 0.05);
    REQUIRE(c.events.size() == 1);
    CHECK(c.events[0].kind == EventKind::MultiplierZero);
    CHECK(c.events[0].index == 0);
    CHECK(std::abs(c.events[0].x) <= 1e-6);
    CHECK(c.samples.back().event);
    for (const Sample& s : c.samples) CHECK(s.x >= c.events[0].x - 1e-12);
  }

  TEST_CASE("licq loss approaching the example's origin") {
    BilevelProblem P = builtin_problem("example-js");
    CurveSegment c = trace_branch(P, branch_point_at(P, 0.5, v({std::sqrt(0.5), 0})), -1, 0.05);
    REQUIRE_FALSE(c.events.empty());
    CHECK(c.events[0].kind == EventKind::LicqLoss);
    CHECK(c.events[0].x >= 0);
    CHECK(c.events[0].x < 1e-3);
    // Along the way every sample is Type 1 with y = (sqrt(x), 0).
    for (const Sample& s : c.samples) {
      if (s.event) continue;
      CHECK(s.type == PointType::T1);
      CHECK(s.y[0] == doctest::Approx(std::sqrt(s.x)).epsilon(1e-9));
    }
  }

  TEST_CASE("constraint activation event") {
    // Interior branch y = x hits g1 = y1 - 0.5 <= 0 at x = 0.5.
    BilevelProblem P = make_problem("activation", 1, "y1", "(y1 - x)^2", {"y1 - 0.5"});
    CurveSegment c = trace_branch(P, branch_point_at(P, 0, v({0})), 1, 0.1);
    REQUIRE_FALSE(c.events.empty());
    CHECK(c.events[0].kind == EventKind::ConstraintActivation);
    CHECK(c.events[0].x == doctest::Approx(0.5).epsilon(1e-7));
  }

  TEST_CASE("eigenvalue event at a fold of the double well") {
    BilevelProblem P = builtin_problem("double-well");
    CurveSegment c = trace_branch(P, branch_point_at(P, 0, v({-1})), -1, 0.05);
    REQUIRE_FALSE(c.events.empty());
    CHECK(c.events[0].kind == EventKind::EigenvalueZero);
    CHECK(c.events[0].x == doctest::Approx(-2 / (3 * std::sqrt(3.0))).epsilon(1e-6));
  }

  TEST_CASE("range end without events") {
    BilevelProblem P = builtin_problem("quadratic");
    CurveSegment c = trace_branch(P, branch_point_at(P, 0, v({0})), 1, 0.1);
    CHECK(c.events.empty());
    CHECK(c.stop_reason == "range end");
    CHECK(c.samples.back().x == doctest::Approx(1));
  }

  TEST_CASE("global lower-level solve") {
    LowerSolution s = solve_lower_global(builtin_problem("example-js"), 0.25);
    REQUIRE(s.points.size() == 1);
    CHECK((s.points[0] - v({0.5, 0})).norm() <= 1e-6);
    CHECK(s.value == doctest::Approx(-0.5));
    CHECK_FALSE(s.inconclusive);
    LowerSolution e = solve_lower_global(builtin_problem("example-js"), -0.5);
    CHECK(e.points.empty());
    CHECK(std::isinf(e.value));
    LowerSolution w = solve_lower_global(builtin_problem("double-well"), 0);
    CHECK(w.points.size() == 2);
    // Tiny feasible interval of the one-dimensional example.
    LowerSolution t = solve_lower_global(builtin_problem("example-js-m1"), 0.0010227014469331584);
    REQUIRE(t.points.size() == 1);
    CHECK(t.points[0][0] == doctest::Approx(std::sqrt(0.0010227014469331584)).epsilon(1e-12));
    CHECK_FALSE(t.inconclusive);
  }

  TEST_CASE("minimizer on the box boundary is inconclusive") {
    BilevelProblem P = make_problem("edge", 1, "y1", "-y1", {});
    LowerSolution s = solve_lower_global(P, 0);
    CHECK(s.inconclusive);
    CHECK_THROWS_AS(value_function(P, 0), InconclusiveError);
  }

  TEST_CASE("value function against the closed form") {
    BilevelProblem P = builtin_problem("example-js");
    for (double x : {0.01, 0.1, 0.5, 0.9}) CHECK(value_function(P, x) == doctest::Approx(-std::sqrt(x)));
    BilevelProblem Q = builtin_problem("type2-kink");
    for (double x : {-0.5, 0.0, 0.5}) CHECK(value_function(Q, x) == doctest::Approx(std::pow(std::max(x, 0.0), 2)));
  }

  TEST_CASE("distance to a set") {
    CHECK(distance_to_set(v({0, 0}), {v({3, 4}), v({1, 0})}) == doctest::Approx(1));
    CHECK(std::isinf(distance_to_set(v({0}), {})));
  }

  TEST_CASE("cache returns the same solution") {
    BilevelProblem P = builtin_problem("double-well");
    LowerCache cache(P);
    const LowerSolution& a = cache.get(0.3);
    const LowerSolution& b = cache.get(0.3);
    CHECK(&a == &b);
  }

  TEST_CASE("CSV round trips") {
    BilevelProblem P = builtin_problem("type2-kink");
    CurveSegment c = trace_branch(P, branch_point_at(P, 1, v({1})), -1, 0.1);
    std::string text = to_csv(c, P.m, P.p());
    CHECK(text.rfind("x,y1,u1,", 0) == 0);
    CurveSegment back = curve_from_csv(text, P.m, P.p());
    REQUIRE(back.samples.size() == c.samples.size());
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      CHECK(back.samples[i].x == c.samples[i].x);
      CHECK(back.samples[i].y == c.samples[i].y);
      CHECK(back.samples[i].u == c.samples[i].u);
      CHECK(back.samples[i].type == c.samples[i].type);
      CHECK(back.samples[i].event == c.samples[i].event);
    }
    CHECK(to_csv(back, P.m, P.p()) == text);

    BilevelProblem W = builtin_problem("double-well");
    SolutionMap m = value_function_map(W, -0.2, 0.2, 5);
    std::string mt = to_csv(m, W.m);
    SolutionMap mb = solution_map_from_csv(mt, W.m);
    REQUIRE(mb.rows.size() == m.rows.size());
    CHECK(mb.rows[2].points.size() == 2);
    CHECK(to_csv(mb, W.m) == mt);
    SolutionMap empty = value_function_map(builtin_problem("example-js"), -0.5, -0.4, 2);
    CHECK(to_csv(solution_map_from_csv(to_csv(empty, 2), 2), 2) == to_csv(empty, 2));
  }
}

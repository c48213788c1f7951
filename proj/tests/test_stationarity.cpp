#include <doctest.h>

#include <cmath>

#include "parcalm/errors.hpp"
#include "parcalm/stationarity.hpp"
#include "support.hpp"

using namespace parcalm;
using testing::v;

TEST_SUITE("stationarity") {
  TEST_CASE("published certificate for the example") {
    BilevelProblem P = builtin_problem("example-js");
    StationarityReport r;
    r.case_id = 3;
    r.ubar = v({1});
    r.u0 = 0;
    r.xi = v({1});
    r.w = v({0.5, 0.5});
    CHECK(certificate_residual(P, 0, v({0, 0}), r) <= 1e-10);
    r.w = v({0.5, 0.4});
    CHECK(certificate_residual(P, 0, v({0, 0}), r) > 0.1);
  }

  TEST_CASE("computed certificate for the example re-substitutes") {
    BilevelProblem P = builtin_problem("example-js");
    StationarityReport r = cross_validate(P, 0, v({0, 0}));
    CHECK(r.case_id == 3);
    CHECK(r.direct == Verdict::Satisfied);
    CHECK(r.implicit == Verdict::Satisfied);
    CHECK(r.agreement);
    CHECK(r.xi[0] == doctest::Approx(1));
    CHECK(r.w.isApprox(v({0.5, 0.5})));
    CHECK(certificate_residual(P, 0, v({0, 0}), r) <= 1e-10);
  }

  TEST_CASE("case numbering") {
    struct Row {
      const char* problem;
      double x;
      Vec y;
      int id;
    };
    const Row rows[] = {{"quadratic", 0.5, v({0.5}), 1}, {"type2-kink", 0, v({0}), 2},
                        {"example-js", 0, v({0, 0}), 3}, {"type51-corner", 0, v({0}), 4},
                        {"type52-corner", 0, v({0, 0}), 5}, {"double-well", 0, v({-1}), 6}};
    for (const Row& row : rows) {
      CAPTURE(row.problem);
      StationarityReport r = cross_validate(builtin_problem(row.problem), row.x, row.y);
      CHECK(r.case_id == row.id);
      CHECK(r.agreement);
      CHECK(certificate_residual(builtin_problem(row.problem), row.x, row.y, r) <= 1e-8);
    }
  }

  TEST_CASE("verdicts invariant under positive rescaling of F") {
    struct Row {
      const char* problem;
      double x;
      Vec y;
    };
    const Row rows[] = {{"quadratic", 0.5, v({0.5})},   {"quadratic", 0, v({0})},
                        {"type2-kink", 0, v({0})},      {"type2-kink", 0.5, v({0.5})},
                        {"example-js", 0, v({0, 0})},  {"type52-corner", 0, v({0, 0})},
                        {"double-well", 0, v({-1})}};
    for (const Row& row : rows) {
      CAPTURE(row.problem);
      CAPTURE(row.x);
      BilevelProblem P = builtin_problem(row.problem);
      StationarityReport a = cross_validate(P, row.x, row.y);
      for (double c : {1e-3, 7.0, 1e3}) {
        StationarityReport b = cross_validate(rescale_objective(P, c), row.x, row.y);
        CHECK(b.direct == a.direct);
        CHECK(b.implicit == a.implicit);
      }
    }
  }

  TEST_CASE("verdicts invariant under constraint scaling and order") {
    BilevelProblem P = builtin_problem("type52-corner");
    for (const Vec& y : {v({0, 0})}) {
      StationarityReport a = cross_validate(P, 0, y);
      StationarityReport s = cross_validate(rescale_constraints(P, {2, 5, 0.1}), 0, y);
      StationarityReport p = cross_validate(permute_constraints(P, {1, 2, 0}), 0, y);
      CHECK(s.direct == a.direct);
      CHECK(p.direct == a.direct);
      CHECK(p.implicit == a.implicit);
    }
    StationarityReport bad = cross_validate(rescale_constraints(P, {2, 5, 0.1}), 0.5, v({0.5, 0}));
    CHECK(bad.direct == Verdict::Violated);
  }

  TEST_CASE("violated cases") {
    CHECK(cross_validate(builtin_problem("quadratic"), 0, v({0})).direct == Verdict::Violated);
    StationarityReport r = cross_validate(builtin_problem("example-js"), 0.25, v({0.5, 0}));
    CHECK(r.direct == Verdict::Violated);
    CHECK(r.implicit == Verdict::Violated);
    CHECK(r.residual > r.residual_tol);
  }

  TEST_CASE("merge flags disagreement") {
    StationarityReport d, i;
    d.case_id = i.case_id = 1;
    d.direct = Verdict::Satisfied;
    i.implicit = Verdict::Violated;
    StationarityReport m = merge_reports(d, i);
    CHECK(m.direct == Verdict::Satisfied);
    CHECK(m.implicit == Verdict::Violated);
    CHECK_FALSE(m.agreement);
    i.implicit = Verdict::Satisfied;
    CHECK(merge_reports(d, i).agreement);
  }

  TEST_CASE("preconditions") {
    BilevelProblem P = builtin_problem("double-well");
    CHECK_THROWS_AS(cross_validate(P, 0.2, v({1})), PreconditionError);  // local, not global, minimizer
    CHECK_THROWS_AS(cross_validate(P, 0, v({0})), PreconditionError);
  }

  TEST_CASE("MPCC-LICQ") {
    BilevelProblem P = builtin_problem("example-js");
    MpccLicqReport fj = mpcc_licq(P, 0, v({0, 0}), v({0, 1}));
    CHECK(fj.fritz_john);
    CHECK(fj.full_column_rank);
    MpccLicqReport reg = mpcc_licq(P, 0.25, v({0.5, 0}), v({1}));
    CHECK(reg.full_column_rank);
    CHECK(reg.reduces_to_licq);
    MpccLicqReport dup = mpcc_licq(builtin_problem("duplicate-constraint"), 0.5, v({0.5}), v({0.5, 0.5}));
    CHECK_FALSE(dup.full_column_rank);
    CHECK(dup.rank < dup.matrix.cols());
    CHECK_THROWS_AS(mpcc_licq(P, 0.25, v({0.5, 0}), v({3})), PreconditionError);  // wrong multiplier
    CHECK_THROWS_AS(mpcc_licq(P, 0.25, v({0.5, 0}), v({1, 2, 3})), PreconditionError);
  }

  TEST_CASE("near-degenerate point depends on the rank tolerance") {
    BilevelProblem P = builtin_problem("example-js");
    CHECK(mpcc_licq(P, 1e-6, v({1e-3, 0}), v({500})).full_column_rank);
    P.tol.rank = 1e-2;
    CHECK_FALSE(mpcc_licq(P, 1e-6, v({1e-3, 0}), v({500})).full_column_rank);
  }
}

#include "parcalm/corpus.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "parcalm/calmness.hpp"
#include "parcalm/classifier.hpp"
#include "parcalm/continuation.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/multipliers.hpp"
#include "parcalm/stationarity.hpp"

namespace parcalm {

namespace {

struct Builtin {
  const char* name;
  const char* text;
};

// Each builtin is stored as problem-file text so it goes through the loader.
const Builtin builtins[] = {
    {"example-js", R"([problem]
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
)"},
    {"example-js-m1", R"([problem]
n = 1
m = 1
p = 1
[upper]
F = "x + y1"
[lower]
f = "-y1"
g1 = "y1^2 - x"
[box]
x = -1, 1
y1 = -1.5, 1.5
)"},
    {"quadratic", R"([problem]
n = 1
m = 1
p = 0
[upper]
F = "(x - 1)^2 + y1^2"
[lower]
f = "(y1 - x)^2"
[box]
x = -1, 2
y1 = -2, 3
)"},
    {"type2-kink", R"([problem]
n = 1
m = 1
p = 1
[upper]
F = "2*y1 - x"
[lower]
f = "y1^2"
g1 = "x - y1"
[box]
x = -1, 1
y1 = -2, 2
)"},
    {"type51-corner", R"([problem]
n = 1
m = 1
p = 2
[upper]
F = "2*x + y1"
[lower]
f = "y1"
g1 = "y1 - x"
g2 = "-y1 - x"
[box]
x = -1, 1
y1 = -2, 2
)"},
    {"type52-corner", R"([problem]
n = 1
m = 2
p = 3
[upper]
F = "2*y1 + y2 - x"
[lower]
f = "y1 + 2*y2"
g1 = "-y1"
g2 = "-y2"
g3 = "x - y1 - y2"
[box]
x = -1, 1
y1 = -1, 2
y2 = -1, 2
)"},
    {"double-well", R"([problem]
n = 1
m = 1
p = 0
[upper]
F = "-y1"
[lower]
f = "y1^4/4 - y1^2/2 + x*y1"
[box]
x = -1, 1
y1 = -2, 2
)"},
    {"principal-agent-binary", R"(# binary outcome, effort y in [0, 1], outcome probability y,
# cost y^2/2, reservation utility 1, revenues 2 and 0
[problem]
n = 1
m = 1
p = 2
[upper]
F = "y1*((1 + y1^2/2 + (1 - y1)*x)^2 - 2) + (1 - y1)*(1 + y1^2/2 - y1*x)^2"
[lower]
f = "-x*y1 + y1^2/2"
g1 = "-y1"
g2 = "y1 - 1"
[box]
x = -0.5, 1.5
y1 = -0.5, 1.5
)"},
    {"duplicate-constraint", R"([problem]
n = 1
m = 1
p = 2
[upper]
F = "(x + 0.5)^2 + y1^2"
[lower]
f = "(y1 - 2*x)^2"
g1 = "y1 - x"
g2 = "y1 - x"
[box]
x = -1, 1
y1 = -2, 2
)"},
};

}  // namespace

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& b : builtins) out.push_back(b.name);
  return out;
}

std::string builtin_text(const std::string& name) {
  for (const auto& b : builtins)
    if (name == b.name) return b.text;
  throw ProblemError("unknown builtin problem '" + name + "'");
}

BilevelProblem builtin_problem(const std::string& name) {
  BilevelProblem P = load_problem(builtin_text(name));
  P.name = name;
  return P;
}

BilevelProblem resolve_problem(const std::string& source) {
  const std::string prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) return builtin_problem(source.substr(prefix.size()));
  return load_problem_file(source);
}

std::string to_string(Basis b) {
  switch (b) {
    case Basis::Published: return "published";
    case Basis::Derived: return "derived";
    case Basis::Trivial: return "trivial";
  }
  return "?";
}

// ---------------------------------------------------------------- expectations

namespace {

std::string vec_text(const Vec& v) {
  std::ostringstream o;
  o.precision(10);
  o << "(";
  for (int i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i];
  return o.str() + ")";
}

std::string num_text(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

std::string point_text(double x, const Vec& y) { return "x=" + num_text(x) + ", y=" + vec_text(y); }

Expectation expect_type(double x, Vec y, PointType t, SimplicityCase sc, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "classify " + point_text(x, y) + " -> Type " + to_string(t) +
           ", Case " + to_string(sc);
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t, std::string& detail) {
    ClassificationReport c = classify_simplicity(P, x, y);
    detail = "type " + to_string(c.type) + ", case " + to_string(c.simple) + " (" + c.reason + ")";
    return c.type == t && c.simple == sc;
  };
  return e;
}

Expectation expect_verdict(double x, Vec y, Verdict v, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "optimality at " + point_text(x, y) + " " + to_string(v) +
           " in both forms";
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t, std::string& detail) {
    StationarityReport r = cross_validate(P, x, y);
    detail = r.case_name + ": direct " + to_string(r.direct) + ", implicit " + to_string(r.implicit);
    return r.direct == v && r.implicit == v && r.agreement;
  };
  return e;
}

Expectation expect_multipliers(double x, Vec y, bool fj, SetKind kind, std::vector<Vec> vertices,
                               Basis basis, std::string oracle) {
  Expectation e;
  e.what = std::string(fj ? "M_FJ" : "M_KKT") + " at " + point_text(x, y) + " is " +
           (kind == SetKind::Empty ? "empty" : "a " + to_string(kind));
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t, std::string& detail) {
    MultiplierSet s = fj ? fj_multipliers(P, x, y) : kkt_multipliers(P, x, y);
    detail = to_string(s.kind) + " with " + std::to_string(s.vertices.size()) + " vertices";
    if (s.kind != kind || s.vertices.size() != vertices.size()) return false;
    for (const Vec& v : vertices) {
      bool found = false;
      for (const Vec& w : s.vertices) found = found || (v - w).cwiseAbs().maxCoeff() <= 1e-8;
      if (!found) {
        detail += "; missing vertex " + vec_text(v);
        return false;
      }
    }
    return true;
  };
  return e;
}

Expectation expect_mpcc(double x, Vec y, Vec u, bool full, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "MPCC-LICQ at " + point_text(x, y) + " with multiplier " + vec_text(u) +
           (full ? " has full column rank" : " is rank deficient");
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t, std::string& detail) {
    MpccLicqReport r = mpcc_licq(P, x, y, u);
    detail = "rank " + std::to_string(r.rank) + " of " + std::to_string(r.matrix.cols()) + " columns";
    return r.full_column_rank == full;
  };
  return e;
}

Expectation expect_solution_set(double x, std::vector<Vec> S, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "S(" + num_text(x) + ") has " + std::to_string(S.size()) + (S.size() == 1 ? " member" : " members");
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t, std::string& detail) {
    LowerSolution s = solve_lower_global(P, x);
    detail = std::to_string(s.points.size()) + " members found";
    if (s.points.size() != S.size()) return false;
    for (const Vec& y : S) {
      double d = distance_to_set(y, s.points);
      if (d > 1e-6) {
        detail += "; " + vec_text(y) + " missed by " + std::to_string(d);
        return false;
      }
    }
    return true;
  };
  return e;
}

Expectation expect_fj_min(double x, Vec y, double radius, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "FJ points within " + num_text(radius) + " of " + point_text(x, y) + " are global minimizers";
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t seed, std::string& detail) {
    FjMinReport r = verify_fj_equals_min(P, x, y, radius, 100, seed);
    detail = std::to_string(r.samples) + " samples, max distance " + num_text(r.max_distance);
    return r.samples >= 100 && r.max_distance <= 1e-6;
  };
  return e;
}

// Modulus estimate of the given kind must land in [lo, hi] with the given verdict.
Expectation expect_modulus(double x, Vec y, double radius, SigmaKind kind, bool uwsm, ModulusVerdict verdict,
                           double lo, double hi, Basis basis, std::string oracle) {
  Expectation e;
  e.what = std::string(uwsm ? "UWSM" : "PEB") + " modulus over " + to_string(kind) + " near " + point_text(x, y) +
           " is " + to_string(verdict);
  if (verdict == ModulusVerdict::HoldsWithL) e.what += " with L in [" + num_text(lo) + ", " + num_text(hi) + "]";
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t seed, std::string& detail) {
    PEBReport r = uwsm ? estimate_uwsm_modulus(P, x, y, radius, 100, kind, seed)
                       : estimate_peb_modulus(P, x, y, radius, 1.0, 200, kind, seed);
    detail = to_string(r.verdict) + ", L " + num_text(r.L) + " from " + std::to_string(r.used) + " ratios";
    if (r.verdict != verdict) return false;
    return verdict != ModulusVerdict::HoldsWithL || (r.L >= lo && r.L <= hi);
  };
  return e;
}

Expectation expect_calmness(double x, Vec y, double radius, double mu, bool holds, Basis basis, std::string oracle) {
  Expectation e;
  e.what = "partial calmness over FJ near " + point_text(x, y) + " at mu = " + num_text(mu) +
           (holds ? " holds" : " fails");
  e.basis = basis;
  e.oracle = std::move(oracle);
  e.check = [=](const BilevelProblem& P, std::uint64_t seed, std::string& detail) {
    CalmnessReport r = verify_partial_calmness(P, x, y, mu, radius, 200, SigmaKind::FJ, seed);
    detail = "min " + num_text(r.min_value) + " over " + std::to_string(r.samples) + " samples";
    return r.holds == holds;
  };
  return e;
}

Vec v1(double a) { return (Vec(1) << a).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// Root of y^3 - y + x near -1 by Newton in long double.
double double_well_root(double x) {
  long double y = -1.0L;
  for (int i = 0; i < 60; ++i) y -= (y * y * y - y + x) / (3 * y * y - 1);
  return static_cast<double>(y);
}

}  // namespace

std::vector<CorpusEntry> corpus_entries() {
  const Basis P = Basis::Published, D = Basis::Derived, T = Basis::Trivial;
  std::vector<CorpusEntry> out;
  {
    CorpusEntry e{"example-js", "example-js", {}};
    e.expectations.push_back(expect_type(0, v2(0, 0), PointType::T4, SimplicityCase::I, P, ""));
    e.expectations.push_back(expect_multipliers(0, v2(0, 0), true, SetKind::Singleton, {v2(0, 1)}, P, ""));
    e.expectations.push_back(expect_multipliers(0, v2(0, 0), false, SetKind::Empty, {}, P, ""));
    e.expectations.push_back(expect_mpcc(0, v2(0, 0), v2(0, 1), true, P, ""));
    e.expectations.push_back(expect_verdict(0, v2(0, 0), Verdict::Satisfied, P, ""));
    e.expectations.push_back(
        expect_verdict(0.25, v2(0.5, 0), Verdict::Violated, D, "hand substitution: D_x y = (1, 0), value 2"));
    e.expectations.push_back(expect_solution_set(0.25, {v2(0.5, 0)}, P, ""));
    e.expectations.push_back(expect_solution_set(-0.5, {}, P, ""));
    // Near-degenerate point: u = 1/(2 y1) = 500. Fails on purpose at coarse rank tolerances.
    e.expectations.push_back(expect_mpcc(1e-6, v2(1e-3, 0), v1(500), true, D,
                                         "singular values of the assembled matrix by hand"));
    e.expectations.push_back(expect_fj_min(0, v2(0, 0), 0.2, P, "FJ points are (x, sqrt(x), 0) and the origin"));
    e.expectations.push_back(expect_modulus(0, v2(0, 0), 0.5, SigmaKind::F, true, ModulusVerdict::UnboundedSuspect, 0,
                                            0, P, "ratio ~ sqrt(2 sqrt(x) / eps) along y1 = sqrt(x) - eps"));
    e.expectations.push_back(expect_modulus(0, v2(0, 0), 0.5, SigmaKind::FJ, true, ModulusVerdict::NumeratorZero, 0, 0,
                                            P, ""));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"example-js-m1", "example-js-m1", {}};
    e.expectations.push_back(expect_type(0, v1(0), PointType::T4, SimplicityCase::I, P, ""));
    e.expectations.push_back(expect_verdict(0, v1(0), Verdict::Satisfied, P, ""));
    e.expectations.push_back(expect_modulus(0, v1(0), 0.5, SigmaKind::F, true, ModulusVerdict::HoldsWithL,
                                            1 - 1e-6, 1 + 1e-6, D, "dist(y, S(x)) = sqrt(x) - y = f - V"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"quadratic", "quadratic", {}};
    e.expectations.push_back(expect_type(0.5, v1(0.5), PointType::T1, SimplicityCase::I, D, "S(x) = {x}"));
    e.expectations.push_back(
        expect_verdict(0.5, v1(0.5), Verdict::Satisfied, D, "minimize (x-1)^2 + x^2 on a grid"));
    e.expectations.push_back(expect_verdict(0, v1(0), Verdict::Violated, D, "hand substitution, residual 2"));
    e.expectations.push_back(expect_fj_min(0.5, v1(0.5), 0.2, T, "f strictly convex in y"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"type2-kink", "type2-kink", {}};
    e.expectations.push_back(expect_type(0, v1(0), PointType::T2, SimplicityCase::I, D, "u = 2y = 0 at y = 0"));
    e.expectations.push_back(expect_multipliers(0, v1(0), true, SetKind::Singleton, {v2(1, 0)}, D, "hand solve"));
    e.expectations.push_back(
        expect_verdict(0, v1(0), Verdict::Satisfied, D, "F on M = 2 max(x, 0) - x has its minimum at 0"));
    e.expectations.push_back(expect_verdict(0.5, v1(0.5), Verdict::Violated, D, "F on M = x for x > 0"));
    e.expectations.push_back(expect_fj_min(0, v1(0), 0.2, D, "FJ points solve u0 2y = u, u (x - y) = 0: y = max(x, 0)"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"type51-corner", "type51-corner", {}};
    e.expectations.push_back(
        expect_type(0, v1(0), PointType::T5_1, SimplicityCase::I, D, "two active, MFCQ fails, KKT holds"));
    e.expectations.push_back(expect_multipliers(0, v1(0), false, SetKind::Ray, {v2(0, 1)}, D, "1 + u1 - u2 = 0"));
    e.expectations.push_back(expect_multipliers(0, v1(0), true, SetKind::Segment,
                                                {v3(0.5, 0, 0.5), v3(0, 0.5, 0.5)}, D, "hand solve"));
    e.expectations.push_back(expect_verdict(0, v1(0), Verdict::Satisfied, D, "F on M = x is minimal at 0"));
    e.expectations.push_back(expect_verdict(0.5, v1(-0.5), Verdict::Violated, D, "F on M = x for x > 0"));
    e.expectations.push_back(expect_fj_min(0, v1(0), 0.2, D, "u0 + u1 = 0 excludes the upper edge y = x > -x"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"type52-corner", "type52-corner", {}};
    e.expectations.push_back(
        expect_type(0, v2(0, 0), PointType::T5_2, SimplicityCase::I, D, "three active, MFCQ holds"));
    e.expectations.push_back(expect_multipliers(0, v2(0, 0), false, SetKind::Segment,
                                                {v3(1, 2, 0), v3(0, 1, 1)}, D, "u1 + u3 = 1, u2 + u3 = 2"));
    e.expectations.push_back(expect_verdict(0, v2(0, 0), Verdict::Satisfied, D, "F on M = x for x >= 0"));
    e.expectations.push_back(expect_verdict(0.5, v2(0.5, 0), Verdict::Violated, D, "F on M = x for x > 0"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"double-well", "double-well", {}};
    e.expectations.push_back(expect_solution_set(0, {v1(-1), v1(1)}, D, "roots of y^3 - y"));
    e.expectations.push_back(
        expect_type(0, v1(-1), PointType::T1, SimplicityCase::II, D, "two Type 1 minimizers, alpha = 2"));
    e.expectations.push_back(expect_verdict(0, v1(-1), Verdict::Satisfied, D,
                                            "one-sided grid search along the feasible branch x >= 0"));
    const double y01 = double_well_root(0.1);
    e.expectations.push_back(expect_verdict(0.1, v1(y01), Verdict::Violated, D, "F along S(x) is not stationary"));
    e.expectations.push_back(expect_modulus(0, v1(-1), 0.5, SigmaKind::FJ, false, ModulusVerdict::HoldsWithL, 0.66,
                                            0.6896, D, "sup 0.68954 on the ball boundary, x = -0.37099 (scipy)"));
    e.expectations.push_back(expect_calmness(0, v1(-1), 0.5, 0.42, false, D, "threshold 0.4623 by dense x-grid"));
    e.expectations.push_back(expect_calmness(0, v1(-1), 0.5, 0.5, true, D, "threshold 0.4623 by dense x-grid"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"principal-agent-binary", "principal-agent-binary", {}};
    const double xs = std::sqrt(2.0 / 3.0);
    e.expectations.push_back(expect_type(xs, v1(xs), PointType::T1, SimplicityCase::I, D, "S(x) = clamp(x, 0, 1)"));
    e.expectations.push_back(
        expect_verdict(xs, v1(xs), Verdict::Satisfied, D, "fine grid over x of F(x, clamp(x, 0, 1))"));
    e.expectations.push_back(expect_type(1, v1(1), PointType::T2, SimplicityCase::I, D, "u2 = x - 1 = 0 at x = 1"));
    e.expectations.push_back(expect_verdict(1, v1(1), Verdict::Satisfied, D,
                                            "one-sided difference quotients of F(x, clamp(x, 0, 1)) vanish"));
    e.expectations.push_back(expect_type(0, v1(0), PointType::T2, SimplicityCase::I, D, "u1 = -x = 0 at x = 0"));
    e.expectations.push_back(expect_verdict(0, v1(0), Verdict::Violated, D,
                                            "right difference quotient of F(x, clamp(x, 0, 1)) is -2"));
    out.push_back(std::move(e));
  }
  {
    CorpusEntry e{"duplicate-constraint", "duplicate-constraint", {}};
    e.expectations.push_back(
        expect_mpcc(0.5, v1(0.5), v2(0.5, 0.5), false, D, "identical columns; direct singular values"));
    e.expectations.push_back(
        expect_verdict(-0.1, v1(-0.2), Verdict::Satisfied, D, "F(x, 2x) minimized at x = -0.1"));
    e.expectations.push_back(expect_verdict(-0.5, v1(-1), Verdict::Violated, D, "derivative of F(x, 2x) is -4"));
    out.push_back(std::move(e));
  }
  return out;
}

CorpusSummary corpus_check(const std::vector<CorpusEntry>& entries, const Tolerances* tol, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  CorpusSummary summary;
  auto t0 = clock::now();
  for (const CorpusEntry& entry : entries) {
    BilevelProblem P = builtin_problem(entry.problem);
    if (tol) P.tol = *tol;
    for (const Expectation& e : entry.expectations) {
      CorpusOutcome o;
      o.entry = entry.name;
      o.what = e.what;
      auto t1 = clock::now();
      try {
        o.passed = e.check(P, seed, o.detail);
      } catch (const std::exception& ex) {
        o.passed = false;
        o.detail = std::string("error: ") + ex.what();
      }
      o.seconds = std::chrono::duration<double>(clock::now() - t1).count();
      if (!o.passed) ++summary.failures;
      summary.outcomes.push_back(o);
    }
  }
  summary.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return summary;
}

// ---------------------------------------------------------------- bilevel solve

BilevelSolution solve_bilevel(const BilevelProblem& P, int grid) {
  if (grid < 3) throw PreconditionError("bilevel grid needs at least 3 points");
  LowerCache cache(P);
  BilevelSolution best;
  best.F = std::numeric_limits<double>::infinity();
  best.grid_points = grid;
  auto phi = [&](double x, Vec* arg, bool* inconclusive) {
    const LowerSolution& s = cache.get(x);
    if (inconclusive && s.inconclusive) *inconclusive = true;
    double v = std::numeric_limits<double>::infinity();
    for (const Vec& y : s.points) {
      if (!P.upper_feasible(x, y)) continue;
      double Fv = P.F.value_or_nan(x, y);
      if (std::isfinite(Fv) && Fv < v) {
        v = Fv;
        if (arg) *arg = y;
      }
    }
    return v;
  };
  int best_i = -1;
  std::vector<double> xs(grid);
  for (int i = 0; i < grid; ++i) {
    xs[i] = P.box.x_lo + (P.box.x_hi - P.box.x_lo) * i / (grid - 1);
    Vec y;
    bool inc = false;
    double v = phi(xs[i], &y, &inc);
    if (v < best.F) {
      best.F = v;
      best.x = xs[i];
      best.y = y;
      best.inconclusive = inc;
      best_i = i;
    }
  }
  if (best_i < 0) throw InconclusiveError("no feasible point of the bilevel problem in the box");
  // Golden-section polish on the neighbouring grid cells.
  double a = xs[std::max(0, best_i - 1)], b = xs[std::min(grid - 1, best_i + 1)];
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = phi(c, nullptr, nullptr), fd = phi(d, nullptr, nullptr);
  while (b - a > 1e-7) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = phi(c, nullptr, nullptr);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = phi(d, nullptr, nullptr);
    }
  }
  for (double x : {a, 0.5 * (a + b), b}) {
    Vec y;
    double v = phi(x, &y, nullptr);
    if (v < best.F) {
      best.F = v;
      best.x = x;
      best.y = y;
      best.note = "polished by golden-section search";
    }
  }
  return best;
}

}  // namespace parcalm

// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parcalm/calmness.hpp"
#include "parcalm/classifier.hpp"
#include "parcalm/continuation.hpp"
#include "parcalm/corpus.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/multipliers.hpp"
#include "parcalm/stationarity.hpp"
#include "support.hpp"

using namespace parcalm;
using testing::v;

namespace {

struct Check {
  std::ostringstream notes;
  bool ok = true;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void run(int id, const std::string& title, double budget, const std::function<void(Check&)>& body) {
  Check c;
  auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.notes << " [exception: " << e.what() << "]";
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget > 0 && secs >= budget) {
    c.ok = false;
    c.notes << " [over time budget " << budget << " s]";
  }
  if (!c.ok) ++failures;
  std::printf("%s %d %s (%.2f s)%s\n", c.ok ? "PASS" : "FAIL", id, title.c_str(), secs, c.notes.str().c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double set_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (const Vec& p : a) worst = std::max(worst, distance_to_set(p, b));
  for (const Vec& q : b) worst = std::max(worst, distance_to_set(q, a));
  return worst;
}

void example_reproduction(Check& c) {
  BilevelProblem P = builtin_problem("example-js");
  const Vec y0 = v({0, 0});
  ClassificationReport pt = classify_point(P, 0, y0);
  ClassificationReport cs = classify_simplicity(P, 0, y0);
  c.require(pt.type == PointType::T4, "Type 4");
  c.require(cs.simple == SimplicityCase::I, "Case I");
  MultiplierSet fj = fj_multipliers(P, 0, y0);
  c.require(fj.vertices.size() == 1 && fj.rays.empty(), "M_FJ is a single point");
  if (fj.vertices.size() == 1) c.require((fj.vertices[0] - v({0, 1})).cwiseAbs().maxCoeff() <= 1e-8, "M_FJ = {(0,1)}");
  c.require(kkt_multipliers(P, 0, y0).empty(), "M_KKT empty");
  c.require(mpcc_licq(P, 0, y0, v({0, 1})).full_column_rank, "MPCC-LICQ full column rank");
  StationarityReport r = cross_validate(P, 0, y0);
  c.require(r.direct == Verdict::Satisfied, "direct check satisfied");
  StationarityReport cert = r;
  cert.xi = v({1});
  cert.w = v({0.5, 0.5});
  double res = certificate_residual(P, 0, y0, cert);
  c.notes << " certificate residual " << fmt(res);
  c.require(res <= 1e-10, "certificate residual");
  LowerSolution s = solve_lower_global(P, 0.25);
  c.require(set_distance(s.points, {v({0.5, 0})}) <= 1e-6, "S(0.25) = {(0.5, 0)}");
}

void case_two_pipeline(Check& c) {
  BilevelProblem P = builtin_problem("double-well");
  ClassificationReport cs = classify_simplicity(P, 0, v({-1}));
  c.require(cs.simple == SimplicityCase::II, "Case II");
  c.require(set_distance(cs.minimizers, {v({-1}), v({1})}) <= 1e-6, "S(0) = {-1, 1}");
  c.require(std::abs(cs.alpha - 2) <= 1e-6 * 2, "alpha = 2");
  c.require(std::abs(cs.alpha - cs.alpha_fd) <= 1e-6 * std::abs(cs.alpha), "alpha agrees with differences");
  PEBReport a = estimate_peb_modulus(P, 0, v({-1}), 0.5, 1.0, 200);
  PEBReport b = estimate_peb_modulus(P, 0, v({-1}), 0.5, 1.0, 400);
  double change = std::abs(b.L - a.L) / a.L;
  c.notes << " L(200)=" << fmt(a.L) << " L(400)=" << fmt(b.L);
  c.require(std::isfinite(a.L) && a.verdict == ModulusVerdict::HoldsWithL, "PEB finite");
  c.require(change <= 0.2, "PEB stable");
  double lip = lipschitz_bound(P, 0, v({-1}), 0.5);
  double mu = a.L * lip;
  CalmnessReport hold = verify_partial_calmness(P, 0, v({-1}), mu, 0.5, 200);
  CalmnessReport fail = verify_partial_calmness(P, 0, v({-1}), 0.0, 0.5, 200);
  c.notes << " mu=" << fmt(mu) << " witness at mu=0: x=" << fmt(fail.witness.x) << " y=" << fmt(fail.witness.y[0])
          << " value=" << fmt(fail.witness.value);
  c.require(hold.holds, "calm at mu = L * Lip");
  c.require(!fail.holds && fail.witness.value < 0, "not calm at mu = 0");
}

void case_one_completeness(Check& c) {
  struct Row {
    const char* problem;
    double x;
    Vec y;
  };
  const Row rows[] = {{"example-js", 0, v({0, 0})},
                      {"type2-kink", 0, v({0})},
                      {"type51-corner", 0, v({0})},
                      {"quadratic", 0.5, v({0.5})}};
  for (const Row& r : rows) {
    FjMinReport rep = verify_fj_equals_min(builtin_problem(r.problem), r.x, r.y, 0.2, 100);
    c.notes << " " << r.problem << ":" << rep.samples << "/" << fmt(rep.max_distance);
    c.require(rep.samples >= 100, std::string(r.problem) + " sample count");
    c.require(rep.max_distance <= 1e-6, std::string(r.problem) + " distance");
  }
}

void inclusion_chain(Check& c) {
  int violations = 0, kkt = 0, fj = 0, gc = 0;
  for (const auto& name : builtin_names()) {
    BilevelProblem P = builtin_problem(name);
    std::mt19937_64 rng(17);
    int drawn = 0;
    double x;
    Vec y;
    auto test = [&](double x, const Vec& y) {
      StationarityFlags f = stationarity_status(P, x, y);
      kkt += f.is_kkt;
      fj += f.is_fj;
      gc += f.is_gc;
      if ((f.is_kkt && !f.is_fj) || (f.is_fj && !f.is_gc)) ++violations;
    };
    for (int tries = 0; drawn < 1000 && tries < 1000000; ++tries) {
      testing::random_point(P, rng, x, y);
      if (!P.lower_feasible(x, y)) continue;
      ++drawn;
      test(x, y);
    }
    c.require(drawn == 1000, name + " feasible draws");
    // Uniform draws almost never hit a stationary point, so add points from the g.c. set too.
    for (const auto& s : sample_sigma(P, 0.5 * (P.box.x_lo + P.box.x_hi), 0.5 * (P.box.y_lo + P.box.y_hi), 10.0,
                                      200, SigmaKind::GC, 3))
      test(s.x, s.y);
  }
  c.notes << " violations " << violations << ", counts kkt/fj/gc " << kkt << "/" << fj << "/" << gc;
  c.require(violations == 0, "no violations");
}

void derivative_oracle(Check& c) {
  double worst1 = 0, worst2 = 0;
  int points = 0;
  for (const auto& name : builtin_names()) {
    BilevelProblem P = builtin_problem(name);
    std::vector<const SmoothFunction*> fns = {&P.F, &P.f};
    for (const auto& g : P.g) fns.push_back(&g);
    for (const auto& g : P.G) fns.push_back(&g);
    for (const SmoothFunction* fn : fns) {
      std::mt19937_64 rng(5);
      const int n = P.m + 1;
      auto at = [&](const Vec& z) { return fn->value_or_nan(z[0], z.tail(P.m)); };
      for (int k = 0, tries = 0; k < 100 && tries < 10000; ++tries) {
        double x;
        Vec y;
        testing::random_point(P, rng, x, y);
        Vec z(n);
        z << x, y;
        if (!std::isfinite(at(z))) continue;
        Vec grad = fn->gradient(x, y);
        Mat H = fn->hessian(x, y);
        bool finite = true;
        Vec gfd(n);
        Mat hfd(n, n);
        const double h1 = 1e-6, h2 = 1e-4;
        for (int i = 0; i < n && finite; ++i) {
          Vec e = Vec::Unit(n, i);
          gfd[i] = (at(z + h1 * e) - at(z - h1 * e)) / (2 * h1);
          for (int j = 0; j < n; ++j) {
            Vec d = Vec::Unit(n, j);
            hfd(i, j) = (at(z + h2 * (e + d)) - at(z + h2 * (e - d)) - at(z - h2 * (e - d)) + at(z - h2 * (e + d))) /
                        (4 * h2 * h2);
          }
          finite = gfd.head(i + 1).allFinite() && hfd.row(i).allFinite();
        }
        if (!finite) continue;
        ++k;
        ++points;
        for (int i = 0; i < n; ++i) {
          worst1 = std::max(worst1, std::abs(grad[i] - gfd[i]) / std::max(1.0, std::abs(grad[i])));
          for (int j = 0; j < n; ++j)
            worst2 = std::max(worst2, std::abs(H(i, j) - hfd(i, j)) / std::max(1.0, std::abs(H(i, j))));
        }
      }
    }
  }
  c.notes << " " << points << " points, worst relative error " << fmt(worst1) << " / " << fmt(worst2);
  c.require(worst1 <= 1e-6, "first order");
  c.require(worst2 <= 1e-4, "second order");
}

void equivalence(Check& c) {
  struct Row {
    const char* problem;
    double x;
    Vec y;
  };
  const double xs = std::sqrt(2.0 / 3.0);
  const Row rows[] = {{"example-js", 0, v({0, 0})},          {"example-js", 0.25, v({0.5, 0})},
                      {"example-js-m1", 0, v({0})},          {"example-js-m1", 0.25, v({0.5})},
                      {"quadratic", 0.5, v({0.5})},          {"quadratic", 0, v({0})},
                      {"type2-kink", 0, v({0})},             {"type2-kink", 0.5, v({0.5})},
                      {"type51-corner", 0, v({0})},          {"type51-corner", 0.5, v({-0.5})},
                      {"type52-corner", 0, v({0, 0})},       {"type52-corner", 0.5, v({0.5, 0})},
                      {"double-well", 0, v({-1})},           {"double-well", 0.5, v({-1.19148788395})},
                      {"principal-agent-binary", xs, v({xs})}, {"principal-agent-binary", 0, v({0})}};
  int sat = 0, vio = 0, disagree = 0, problems = 0;
  std::string last;
  for (const Row& r : rows) {
    if (last != r.problem) ++problems;
    last = r.problem;
    StationarityReport rep = cross_validate(builtin_problem(r.problem), r.x, r.y);
    if (!rep.agreement || rep.direct == Verdict::Inconclusive) {
      ++disagree;
      c.notes << " " << r.problem << "@" << fmt(r.x) << ":" << to_string(rep.direct) << "/" << to_string(rep.implicit);
    }
    sat += rep.direct == Verdict::Satisfied;
    vio += rep.direct == Verdict::Violated;
  }
  c.notes << " " << problems << " instances, " << sat << " satisfied, " << vio << " violated";
  c.require(problems == 8, "eight instances");
  c.require(disagree == 0, "agreement");
  c.require(sat >= 3 && vio >= 3, "coverage");
}

void event_detection(Check& c) {
  BilevelProblem K = builtin_problem("type2-kink");
  CurveSegment a = trace_branch(K, branch_point_at(K, 1, v({1})), -1, 0.05);
  bool zero = !a.events.empty() && a.events[0].kind == EventKind::MultiplierZero && std::abs(a.events[0].x) <= 1e-6;
  if (!a.events.empty()) c.notes << " kink event at " << fmt(a.events[0].x);
  c.require(zero, "multiplier-zero at 0");
  BilevelProblem E = builtin_problem("example-js");
  CurveSegment b = trace_branch(E, branch_point_at(E, 0.5, v({std::sqrt(0.5), 0})), -1, 0.05);
  bool licq = !b.events.empty() && b.events[0].kind == EventKind::LicqLoss && b.events[0].x >= 0 &&
              b.events[0].x < 1e-3;
  if (!b.events.empty()) c.notes << ", example event at " << fmt(b.events[0].x);
  c.require(licq, "LICQ loss approaching 0");
}

void negative_control(Check& c) {
  MpccLicqReport dup = mpcc_licq(builtin_problem("duplicate-constraint"), 0.5, v({0.5}), v({0.5, 0.5}));
  c.notes << " duplicate rank " << dup.rank << "/" << dup.matrix.cols();
  c.require(!dup.full_column_rank, "rank deficient");
  BilevelProblem P = builtin_problem("example-js");
  PEBReport f = estimate_uwsm_modulus(P, 0, v({0, 0}), 0.5, 100, SigmaKind::F);
  PEBReport fj = estimate_uwsm_modulus(P, 0, v({0, 0}), 0.5, 100, SigmaKind::FJ);
  c.notes << ", UWSM over f " << to_string(f.verdict) << ", over FJ L=" << fmt(fj.L);
  c.require(f.verdict == ModulusVerdict::UnboundedSuspect, "unbounded over f");
  c.require(fj.L == 0.0, "zero over FJ");
}

void full_corpus(Check& c) {
  CorpusSummary a = corpus_check(corpus_entries(), nullptr, 0);
  CorpusSummary b = corpus_check(corpus_entries(), nullptr, 0);
  c.notes << " " << a.outcomes.size() << " expectations, " << a.failures << " failed";
  for (const auto& o : a.outcomes)
    if (!o.passed) c.notes << " {" << o.entry << ": " << o.what << "}";
  c.require(a.failures == 0, "all pass");
  bool same = a.outcomes.size() == b.outcomes.size();
  for (std::size_t i = 0; same && i < a.outcomes.size(); ++i)
    same = a.outcomes[i].passed == b.outcomes[i].passed && a.outcomes[i].detail == b.outcomes[i].detail;
  c.require(same, "deterministic");
  c.require(a.seconds < 60, "under 60 s");
}

}  // namespace

int main() {
  run(1, "example reproduction", 1, example_reproduction);
  run(2, "Case II pipeline on double-well", 10, case_two_pipeline);
  run(3, "FJ points are global minimizers near Case I points", 10, case_one_completeness);
  run(4, "inclusion chain kkt => fj => gc", 0, inclusion_chain);
  run(5, "symbolic derivatives match finite differences", 0, derivative_oracle);
  run(6, "direct and implicit optimality checks agree", 0, equivalence);
  run(7, "event detection", 0, event_detection);
  run(8, "negative controls", 0, negative_control);
  run(9, "full corpus with seed 0", 0, full_corpus);
  return failures;
}

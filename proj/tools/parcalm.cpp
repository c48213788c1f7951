// parcalm: command-line front end. Every verb prints one JSON document.
// Exit codes: 0 verdict computed, 1 verdict with inconclusive elements
// (or a corpus mismatch), 2 usage or input error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "parcalm/errors.hpp"
#include "parcalm/report.hpp"

using namespace parcalm;

namespace {

constexpr int kOk = 0;
constexpr int kInconclusive = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

struct TolFlags {
  std::optional<double> active, rank, multiplier, eigenvalue, residual;
  std::optional<int> grid, multistart;

  bool any() const { return active || rank || multiplier || eigenvalue || residual || grid || multistart; }
  void apply(Tolerances& t) const {
    if (active) t.active = *active;
    if (rank) t.rank = *rank;
    if (multiplier) t.multiplier = *multiplier;
    if (eigenvalue) t.eigenvalue = *eigenvalue;
    if (residual) t.residual = *residual;
    if (grid) t.grid = *grid;
    if (multistart) t.multistart = *multistart;
    t.validate();
  }
};

struct Options {
  std::string problem;
  double x = 0.0;
  std::vector<double> y;
  std::vector<double> u;
  std::uint64_t seed = 0;
  std::string out;
  TolFlags tol;
  // verb specific
  double to = 0.0;
  double step = 0.01;
  double from = 0.0;
  int count = 101;
  double radius = 0.2;
  double v_max = 1.0;
  int samples = 200;
  std::string condition = "FJ";
  bool uwsm = false;
  bool fj_min = false;
  std::optional<double> mu;
  int grid = 201;
  bool no_simplicity = false;
  bool corrupt = false;
};

void add_tolerances(CLI::App* cmd, Options& o) {
  cmd->add_option("--tol-active", o.tol.active, "active-constraint threshold");
  cmd->add_option("--tol-rank", o.tol.rank, "relative singular value cutoff");
  cmd->add_option("--tol-multiplier", o.tol.multiplier, "vanishing multiplier threshold");
  cmd->add_option("--tol-eigenvalue", o.tol.eigenvalue, "vanishing eigenvalue threshold");
  cmd->add_option("--tol-residual", o.tol.residual, "accepted linear-system residual");
  cmd->add_option("--tol-grid", o.tol.grid, "grid points per axis in the global lower search");
  cmd->add_option("--tol-multistart", o.tol.multistart, "Newton starts per global lower search");
}

void add_problem(CLI::App* cmd, Options& o) {
  cmd->add_option("--problem", o.problem, "problem file or builtin:<name>")->required();
  add_tolerances(cmd, o);
}

void add_point(CLI::App* cmd, Options& o) {
  cmd->add_option("--x", o.x, "upper-level variable")->required()->allow_extra_args(false);
  cmd->add_option("--y", o.y, "lower-level point, comma separated")->required()->delimiter(',')->allow_extra_args(false);
}

void add_sampling(CLI::App* cmd, Options& o) {
  cmd->add_option("--radius", o.radius, "sampling radius around (x, y)");
  cmd->add_option("--samples", o.samples, "base sample count");
  cmd->add_option("--condition", o.condition, "sample set: FJ, KKT, gc, f or B-surrogate");
  cmd->add_option("--seed", o.seed, "random seed");
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ProblemError("cannot write '" + path + "'");
  f << text;
}

BilevelProblem load(const Options& o) {
  BilevelProblem P = resolve_problem(o.problem);
  o.tol.apply(P.tol);
  return P;
}

Vec point_y(const BilevelProblem& P, const Options& o) {
  Vec y = to_vec(o.y);
  P.check_dimension(y);
  return y;
}

int emit(const std::string& verb, const std::string& problem, Json result, bool inconclusive) {
  Json doc = {{"command", verb}, {"problem", problem}, {"status", inconclusive ? "inconclusive" : "ok"},
              {"result", std::move(result)}};
  std::cout << doc.dump(2) << "\n";
  return inconclusive ? kInconclusive : kOk;
}

int emit_error(const std::string& verb, const std::string& kind, const std::string& message, int code) {
  Json doc = {{"command", verb}, {"status", "error"}, {"error", kind}, {"message", message}};
  std::cout << doc.dump(2) << "\n";
  std::cerr << "parcalm: " << message << "\n";
  return code;
}

int run_classify(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  if (o.no_simplicity) {
    ClassificationReport c = classify_point(P, o.x, y);
    return emit("classify", P.name, to_json(c), c.type == PointType::NotClassifiable);
  }
  try {
    ClassificationReport c = classify_simplicity(P, o.x, y);
    // The point itself is classified, not merely the closest minimizer.
    ClassificationReport here = classify_point(P, o.x, y);
    here.simple = c.simple;
    here.simple_reason = c.simple_reason;
    here.minimizers = c.minimizers;
    here.value = c.value;
    here.alpha = c.alpha;
    here.alpha_fd = c.alpha_fd;
    here.member_types = c.member_types;
    return emit("classify", P.name, to_json(here), here.type == PointType::NotClassifiable);
  } catch (const InconclusiveError& e) {
    ClassificationReport c = classify_point(P, o.x, y);
    Json j = to_json(c);
    j["case_reason"] = e.what();
    return emit("classify", P.name, j, true);
  }
}

int run_trace(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  BranchPoint b = branch_point_at(P, o.x, y);
  CurveSegment c = trace_branch(P, b, o.to, o.step);
  if (!o.out.empty()) write_file(o.out, to_csv(c, P.m, P.p()));
  return emit("trace", P.name, to_json(c), c.stop_reason == "corrector failure");
}

int run_solve_lower(const Options& o) {
  BilevelProblem P = load(o);
  LowerSolution s = solve_lower_global(P, o.x);
  return emit("solve-lower", P.name, to_json(s), s.inconclusive);
}

int run_value_function(const Options& o) {
  BilevelProblem P = load(o);
  SolutionMap s = value_function_map(P, o.from, o.to, o.count);
  if (!o.out.empty()) write_file(o.out, to_csv(s, P.m));
  bool inconclusive = false;
  for (const auto& r : s.rows) inconclusive = inconclusive || r.inconclusive;
  return emit("value-function", P.name, to_json(s), inconclusive);
}

int run_verify_peb(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  if (o.fj_min) {
    FjMinReport r = verify_fj_equals_min(P, o.x, y, o.radius, o.samples, o.seed);
    return emit("verify-peb", P.name, to_json(r), false);
  }
  SigmaKind kind = sigma_from_string(o.condition);
  PEBReport r = o.uwsm ? estimate_uwsm_modulus(P, o.x, y, o.radius, o.samples, kind, o.seed, o.v_max)
                       : estimate_peb_modulus(P, o.x, y, o.radius, o.v_max, o.samples, kind, o.seed);
  if (!o.out.empty()) write_file(o.out, to_csv(r.log, P.m));
  return emit("verify-peb", P.name, to_json(r), r.dropped > 0);
}

int run_verify_calmness(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  SigmaKind kind = sigma_from_string(o.condition);
  Json extra;
  double mu = 0.0;
  if (o.mu) {
    mu = *o.mu;
  } else {
    // Default penalty: error-bound modulus times the local Lipschitz bound of F.
    PEBReport peb = estimate_peb_modulus(P, o.x, y, o.radius, o.v_max, o.samples, kind, o.seed);
    double lip = lipschitz_bound(P, o.x, y, o.radius, 400, o.seed);
    mu = peb.L * lip;
    extra = {{"modulus", to_json(peb)}, {"lipschitz", lip}};
  }
  CalmnessReport r = verify_partial_calmness(P, o.x, y, mu, o.radius, o.samples, kind, o.seed);
  if (!o.out.empty()) write_file(o.out, to_csv(r.log, P.m));
  Json j = to_json(r);
  if (!extra.is_null()) j["mu_source"] = extra;
  return emit("verify-calmness", P.name, j, r.dropped > 0);
}

int run_check_stationarity(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  StationarityReport r = cross_validate(P, o.x, y);
  Json j = to_json(r);
  j["certificate_residual"] = certificate_residual(P, o.x, y, r);
  bool inconclusive = r.direct == Verdict::Inconclusive || r.implicit == Verdict::Inconclusive || !r.agreement;
  return emit("check-stationarity", P.name, j, inconclusive);
}

int run_mpcc_licq(const Options& o) {
  BilevelProblem P = load(o);
  Vec y = point_y(P, o);
  MpccLicqReport r = mpcc_licq(P, o.x, y, to_vec(o.u));
  return emit("mpcc-licq", P.name, to_json(r), false);
}

int run_solve(const Options& o) {
  BilevelProblem P = load(o);
  BilevelSolution s = solve_bilevel(P, o.grid);
  return emit("solve", P.name, to_json(s), s.inconclusive);
}

int run_corpus(const Options& o) {
  std::vector<CorpusEntry> entries = corpus_entries();
  if (o.corrupt && !entries.empty() && !entries.front().expectations.empty()) {
    // Fixture for the mismatch path: negate the first expectation.
    Expectation& e = entries.front().expectations.front();
    auto check = e.check;
    e.what = "corrupted: " + e.what;
    e.check = [check](const BilevelProblem& P, std::uint64_t seed, std::string& detail) {
      return !check(P, seed, detail);
    };
  }
  CorpusSummary s;
  if (o.tol.any()) {
    Tolerances t;
    o.tol.apply(t);
    s = corpus_check(entries, &t, o.seed);
  } else {
    s = corpus_check(entries, nullptr, o.seed);
  }
  Json j = to_json(s);
  j["seed"] = o.seed;
  Json doc = {{"command", "corpus"}, {"status", s.failures ? "mismatch" : "ok"}, {"result", j}};
  std::cout << doc.dump(2) << "\n";
  for (const auto& out : s.outcomes)
    if (!out.passed) std::cerr << "parcalm: corpus mismatch in " << out.entry << ": " << out.what << "\n";
  return s.failures ? kInconclusive : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis of one-parameter bilevel programs"};
  app.require_subcommand(1);
  app.allow_extras(false);
  Options o;

  auto* classify = app.add_subcommand("classify", "type and simplicity case of a lower-level point");
  add_problem(classify, o);
  add_point(classify, o);
  classify->add_flag("--no-simplicity", o.no_simplicity, "skip the global lower-level solve");

  auto* trace = app.add_subcommand("trace", "continue the stationary branch through (x, y)");
  add_problem(trace, o);
  add_point(trace, o);
  trace->add_option("--to", o.to, "end of the x-range")->required();
  trace->add_option("--step", o.step, "initial step");
  trace->add_option("--out", o.out, "CSV file for the samples");

  auto* lower = app.add_subcommand("solve-lower", "global solution set S(x) and V(x)");
  add_problem(lower, o);
  lower->add_option("--x", o.x, "upper-level variable")->required();

  auto* vf = app.add_subcommand("value-function", "V and S on an x-grid");
  add_problem(vf, o);
  vf->add_option("--from", o.from, "first x")->required();
  vf->add_option("--to", o.to, "last x")->required();
  vf->add_option("--count", o.count, "number of grid points");
  vf->add_option("--out", o.out, "CSV file for the table");

  auto* peb = app.add_subcommand("verify-peb", "partial error bound (or UWSM) modulus estimate");
  add_problem(peb, o);
  add_point(peb, o);
  add_sampling(peb, o);
  peb->add_option("--v-max", o.v_max, "largest f - V used");
  peb->add_flag("--uwsm", o.uwsm, "numerator dist to S(x) instead of dist to M");
  peb->add_flag("--fj-min", o.fj_min, "report max dist to S(x) over FJ points instead");
  peb->add_option("--out", o.out, "CSV file for the ratio log");

  auto* calm = app.add_subcommand("verify-calmness", "partial calmness test at a penalty mu");
  add_problem(calm, o);
  add_point(calm, o);
  add_sampling(calm, o);
  calm->add_option("--mu", o.mu, "penalty; default modulus times Lipschitz bound of F");
  calm->add_option("--v-max", o.v_max, "largest f - V used by the default modulus");
  calm->add_option("--out", o.out, "CSV file for the sample log");

  auto* stat = app.add_subcommand("check-stationarity", "optimality conditions in direct and implicit form");
  add_problem(stat, o);
  add_point(stat, o);

  auto* mpcc = app.add_subcommand("mpcc-licq", "MPCC-LICQ rank test");
  add_problem(mpcc, o);
  add_point(mpcc, o);
  mpcc->add_option("--u", o.u, "multiplier u (length p) or (u0, u) (length p+1)")->required()->delimiter(',');

  auto* solve = app.add_subcommand("solve", "desk-scale global bilevel solve");
  add_problem(solve, o);
  solve->add_option("--grid", o.grid, "x-grid size");

  auto* corpus = app.add_subcommand("corpus", "run the built-in verified corpus");
  add_tolerances(corpus, o);
  corpus->add_option("--seed", o.seed, "random seed");
  corpus->add_flag("--corrupt-first", o.corrupt, "negate the first expectation (mismatch fixture)");

  for (auto* cmd : app.get_subcommands({})) cmd->allow_extras(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "usage",
                      e.what(), kUsage);
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string verb = cmd->get_name();
  try {
    if (verb == "classify") return run_classify(o);
    if (verb == "trace") return run_trace(o);
    if (verb == "solve-lower") return run_solve_lower(o);
    if (verb == "value-function") return run_value_function(o);
    if (verb == "verify-peb") return run_verify_peb(o);
    if (verb == "verify-calmness") return run_verify_calmness(o);
    if (verb == "check-stationarity") return run_check_stationarity(o);
    if (verb == "mpcc-licq") return run_mpcc_licq(o);
    if (verb == "solve") return run_solve(o);
    if (verb == "corpus") return run_corpus(o);
  } catch (const InconclusiveError& e) {
    return emit_error(verb, "inconclusive", e.what(), kInconclusive);
  } catch (const NumericalError& e) {
    return emit_error(verb, "numerical", e.what(), kNumerical);
  } catch (const DomainError& e) {
    return emit_error(verb, "domain", e.what(), kNumerical);
  } catch (const Error& e) {
    return emit_error(verb, "input", e.what(), kUsage);
  } catch (const std::exception& e) {
    return emit_error(verb, "numerical", e.what(), kNumerical);
  }
  return emit_error(verb, "usage", "unknown command", kUsage);
}

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "parcalm/problem.hpp"

namespace parcalm {

/// Names accepted by builtin_problem, in corpus order.
std::vector<std::string> builtin_names();
/// Problem-file text of a builtin; ProblemError for unknown names.
std::string builtin_text(const std::string& name);
BilevelProblem builtin_problem(const std::string& name);
/// "builtin:<name>" or a path to a problem file.
BilevelProblem resolve_problem(const std::string& source);

/// Where an expectation's value comes from.
enum class Basis { Published, Derived, Trivial };
std::string to_string(Basis b);

struct Expectation {
  std::string what;
  Basis basis = Basis::Derived;
  std::string oracle;  ///< how a derived value was checked independently
  /// Returns true when the expectation holds; `detail` explains a failure.
  /// Sampling checks draw from `seed`.
  std::function<bool(const BilevelProblem& P, std::uint64_t seed, std::string& detail)> check;
};

struct CorpusEntry {
  std::string name;
  std::string problem;  ///< builtin name
  std::vector<Expectation> expectations;
};

std::vector<CorpusEntry> corpus_entries();

struct CorpusOutcome {
  std::string entry;
  std::string what;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CorpusSummary {
  std::vector<CorpusOutcome> outcomes;
  int failures = 0;
  double seconds = 0.0;
};

/// Runs every expectation; `tol` overrides each problem's tolerances when given.
CorpusSummary corpus_check(const std::vector<CorpusEntry>& entries, const Tolerances* tol = nullptr,
                           std::uint64_t seed = 0);

/// Desk-scale bilevel solve: x-grid, global lower solve, golden-section polish.
struct BilevelSolution {
  double x = 0.0;
  Vec y;
  double F = 0.0;
  int grid_points = 0;
  bool inconclusive = false;
  std::string note;
};
BilevelSolution solve_bilevel(const BilevelProblem& P, int grid = 201);

}  // namespace parcalm

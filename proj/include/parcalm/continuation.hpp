#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "parcalm/classifier.hpp"
#include "parcalm/problem.hpp"

namespace parcalm {

/// A point of the active-set system: y and u (length p, zero off J).
struct BranchPoint {
  double x = 0.0;
  Vec y;
  Vec u;
  std::vector<int> J;
};

/**
 * Residual of the active-set stationarity system
 *   grad_y f + sum_{j in J} u_j grad_y g_j = 0,  g_j = 0 (j in J)
 * and its Jacobians with respect to (y, u_J) and x.
 */
struct ActiveSystem {
  Vec residual;
  Mat jac_yu;
  Vec jac_x;
};
ActiveSystem active_system(const BilevelProblem& P, const BranchPoint& b);
double active_residual(const BilevelProblem& P, const BranchPoint& b);

struct BranchDerivatives {
  Vec dy;
  Vec du;  ///< length p
  double condition = 0.0;
};

/// Total derivative of (y, u) in x along the branch; NumericalError if singular.
BranchDerivatives implicit_derivatives(const BilevelProblem& P, const BranchPoint& b);

/// Damped Newton on (y, u_J) at fixed x starting from `guess`.
std::optional<BranchPoint> correct(const BilevelProblem& P, const BranchPoint& guess,
                                   int max_iter = 50);

enum class EventKind { MultiplierZero, EigenvalueZero, ConstraintActivation, LicqLoss, BoxExit };
std::string to_string(EventKind kind);

struct Event {
  double x = 0.0;
  EventKind kind = EventKind::BoxExit;
  int index = -1;  ///< constraint index when relevant
  std::string detail;
};

struct Sample {
  double x = 0.0;
  Vec y;
  Vec u;
  std::vector<int> J;
  PointType type = PointType::NotClassifiable;
  bool event = false;
};

struct CurveSegment {
  std::vector<Sample> samples;
  std::vector<Event> events;
  std::string stop_reason;
};

struct TraceOptions {
  bool label = true;           ///< classify every sample
  double min_step = 1e-12;     ///< step-halving floor
  double event_tol = 1e-8;     ///< bisection width for events
};

/**
 * Predictor-corrector continuation of the active-set system from `seed`
 * toward `x_end` with the given step. Stops at the first event.
 */
CurveSegment trace_branch(const BilevelProblem& P, const BranchPoint& seed, double x_end,
                          double step, const TraceOptions& opt = {});

/// Global minimizers of L(x) found by grid scan plus Newton refinement.
struct LowerSolution {
  double x = 0.0;
  std::vector<Vec> points;  ///< S(x); empty when no feasible point was found
  std::vector<Vec> multipliers;  ///< sign-free Lagrange vectors (length p), same order
  double value = 0.0;       ///< V(x), +inf when infeasible
  bool inconclusive = false;
  std::string note;
};

LowerSolution solve_lower_global(const BilevelProblem& P, double x);
/// V(x); +inf if no feasible point. Throws InconclusiveError if flagged.
double value_function(const BilevelProblem& P, double x);

/// Nearest distance from y to a member of S.
double distance_to_set(const Vec& y, const std::vector<Vec>& S);

/// Memo of solve_lower_global keyed by x (thread-safe).
class LowerCache {
 public:
  explicit LowerCache(const BilevelProblem& P) : P_(P) {}
  const LowerSolution& get(double x);

 private:
  const BilevelProblem& P_;
  std::mutex mutex_;
  std::map<double, LowerSolution> memo_;
};

struct SolutionMap {
  std::vector<LowerSolution> rows;
};
SolutionMap value_function_map(const BilevelProblem& P, double x_lo, double x_hi, int count);

/// CSV export and import; numbers use %.17g.
std::string to_csv(const CurveSegment& c, int m, int p);
std::string to_csv(const SolutionMap& s, int m);
CurveSegment curve_from_csv(const std::string& text, int m, int p);
SolutionMap solution_map_from_csv(const std::string& text, int m);

}  // namespace parcalm

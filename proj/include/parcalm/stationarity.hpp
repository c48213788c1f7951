#pragma once

#include <string>
#include <vector>

#include "parcalm/classifier.hpp"
#include "parcalm/problem.hpp"

namespace parcalm {

/**
 * Rank test of the tightened-problem Jacobian at (x, y, u).
 *
 * Rows are the variables (x, y, u_j for j outside K), columns the
 * constraints (y-stationarity, g_J). The FJ variant adds a u0 row, a
 * normalization column and, when u0 = 0, a column fixing u0.
 */
struct MpccLicqReport {
  bool fritz_john = false;
  std::vector<int> J;   ///< active constraints
  std::vector<int> K;   ///< vanishing multipliers (all of them, active or not)
  Mat matrix;
  Vec singular_values;
  int rank = 0;
  bool full_column_rank = false;
  bool reduces_to_licq = false;  ///< J equals the complement of K
};

/// `u` has length p (KKT) or p + 1 with u0 in front (FJ).
MpccLicqReport mpcc_licq(const BilevelProblem& P, double x, const Vec& y, const Vec& u);

enum class Verdict { Satisfied, Violated, Inconclusive };
std::string to_string(Verdict v);

/// One equality or inequality evaluated at the certificate.
struct Condition {
  std::string name;
  double value = 0.0;
  bool ok = false;
};

struct StationarityReport {
  int case_id = 0;  ///< 1..6
  std::string case_name;
  PointType type = PointType::NotClassifiable;
  std::vector<int> active;
  Vec ubar;          ///< multiplier (length p) whose Hessian enters the system
  double u0 = 1.0;   ///< 0 in the Type 4 case
  std::vector<int> special;  ///< q (and r) for Types 2, 5-1, 5-2
  Vec ubar2;         ///< second KKT vertex (Type 5-2) or multiplier of y2 (Case II)
  Vec y2;            ///< second global minimizer (Case II)

  // direct form
  Vec w;
  Vec xi;            ///< length p, zero off the active set
  double mu = 0.0;
  Vec lambda;        ///< convex weights (Case II)
  Mat matrix;        ///< assembled linear system
  Vec rhs;
  double residual = 0.0;
  double residual_tol = 0.0;
  std::vector<Condition> signs;
  Verdict direct = Verdict::Inconclusive;
  std::string direct_note;

  // implicit form
  std::vector<Condition> implicit_conditions;
  std::vector<double> gamma;       ///< constraint drifts (or alpha in Case II)
  std::vector<double> gamma_fd;    ///< finite-difference cross-checks
  Verdict implicit = Verdict::Inconclusive;
  std::string implicit_note;

  bool agreement = false;
};

/// Maps a simplicity report to the optimality case 1..6; PreconditionError otherwise.
int optimality_case(const ClassificationReport& c);

StationarityReport check_optimality_direct(const BilevelProblem& P, double x, const Vec& y,
                                           const ClassificationReport& c);
StationarityReport check_optimality_implicit(const BilevelProblem& P, double x, const Vec& y,
                                             const ClassificationReport& c);

/// Combines the two forms; agreement is direct == implicit.
StationarityReport merge_reports(const StationarityReport& direct, const StationarityReport& implicit);

/// Classifies (x, y), runs both forms and merges them.
StationarityReport cross_validate(const BilevelProblem& P, double x, const Vec& y);

/**
 * Re-evaluates the case's displayed equations at the report's
 * certificate from scratch and returns the worst equality residual.
 */
double certificate_residual(const BilevelProblem& P, double x, const Vec& y,
                            const StationarityReport& r);

}  // namespace parcalm

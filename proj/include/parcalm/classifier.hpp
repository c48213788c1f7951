#pragma once

#include <optional>
#include <string>
#include <vector>

#include "parcalm/multipliers.hpp"
#include "parcalm/problem.hpp"

namespace parcalm {

struct BranchPoint;

struct LicqEvidence {
  bool holds = true;
  int rank = 0;
  int active_count = 0;
  Vec singular_values;
};

/**
 * MFCQ is decided through the min-norm point p of the convex hull of the
 * active gradients: MFCQ holds iff p != 0, and then d = -p/|p| satisfies
 * <grad g_j, d> <= -|p| for all active j. When it fails, `weights` is a
 * Gordan certificate (convex weights with sum_j w_j grad g_j = 0).
 */
struct MfcqEvidence {
  bool holds = true;
  Vec direction;
  Vec weights;
  double margin = 0.0;
};

struct SocEvidence {
  bool defined = true;  ///< false when the active gradients are dependent
  bool holds = true;
  Vec eigenvalues;      ///< of V^T H V, ascending
  Mat V;                ///< orthonormal tangent space basis
};

LicqEvidence check_licq(const BilevelProblem& P, double x, const Vec& y);
MfcqEvidence check_mfcq(const BilevelProblem& P, double x, const Vec& y);
/// u has length p; H is the y-Hessian of f + u^T g.
SocEvidence check_soc(const BilevelProblem& P, double x, const Vec& y, const Vec& u);

struct NDReport {
  LicqEvidence licq;
  MfcqEvidence mfcq;
  bool sc = false;
  std::vector<int> vanishing;  ///< active indices with |u_j| <= tol.multiplier
  Vec lagrange;                ///< sign-free multiplier (length p) when LICQ holds
  SocEvidence soc;
  int full_rank = 0;           ///< rank of the (x,y)-gradients of active constraints
};

enum class PointType { T1, T2, T3, T4, T5_1, T5_2, NotClassifiable };
std::string to_string(PointType t);

enum class SimplicityCase { Unchecked, I, II, NotSimple };
std::string to_string(SimplicityCase c);

struct ClassificationReport {
  double x = 0.0;
  Vec y;
  PointType type = PointType::NotClassifiable;
  std::string reason;
  std::vector<int> active;
  StationarityFlags flags;
  NDReport nd;
  MultiplierSet fj;
  MultiplierSet kkt;

  SimplicityCase simple = SimplicityCase::Unchecked;
  std::string simple_reason;
  std::vector<Vec> minimizers;  ///< S(x), with the reference member first
  double value = 0.0;           ///< V(x)
  double alpha = 0.0;           ///< Case II only
  double alpha_fd = 0.0;        ///< finite-difference cross-check of alpha
  std::vector<PointType> member_types;
};

/// Classifies a lower-level feasible point per the five generic types.
ClassificationReport classify_point(const BilevelProblem& P, double x, const Vec& y);

/**
 * Solves L(x) globally and decides Case I / Case II. The reference member
 * is the one closest to `query`, or the lexicographically smallest.
 * Throws InconclusiveError when the global search is inconclusive.
 */
ClassificationReport classify_simplicity(const BilevelProblem& P, double x,
                                         const std::optional<Vec>& query = std::nullopt);

struct AlphaReport {
  double alpha = 0.0;
  double alpha_fd = 0.0;
  Vec dy1;
  Vec dy2;
};

/// d/dx [f(x, y2(x)) - f(x, y1(x))] at x by the chain rule, with a
/// central finite difference of the corrected branches as cross-check.
AlphaReport compute_alpha(const BilevelProblem& P, const BranchPoint& b1, const BranchPoint& b2);

/// Sign-free multiplier on the active set of a Type-1 style point.
BranchPoint branch_point_at(const BilevelProblem& P, double x, const Vec& y);

}  // namespace parcalm

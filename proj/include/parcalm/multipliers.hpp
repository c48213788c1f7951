#pragma once

#include <string>
#include <vector>

#include "parcalm/problem.hpp"

namespace parcalm {

enum class SetKind { Empty, Singleton, Ray, Segment, Polytope };
std::string to_string(SetKind kind);

/**
 * Fritz John or KKT multiplier set at a point.
 *
 * FJ vectors are (u0, u1..up), normalized to sum 1; KKT vectors are
 * (u1..up). Entries outside the active set are zero. A KKT set may be
 * unbounded; it is then the convex hull of `vertices` plus the cone of
 * `rays` (each scaled to max-norm 1).
 */
struct MultiplierSet {
  SetKind kind = SetKind::Empty;
  bool fritz_john = false;
  std::vector<Vec> vertices;
  std::vector<Vec> rays;
  std::vector<int> active;
  double residual = 0.0;  ///< worst re-substitution residual over vertices

  bool empty() const { return vertices.empty(); }
};

MultiplierSet fj_multipliers(const BilevelProblem& P, double x, const Vec& y);
MultiplierSet kkt_multipliers(const BilevelProblem& P, double x, const Vec& y);

/**
 * Re-substitution residual of a multiplier vector: stationarity,
 * sign, complementarity and (for FJ) normalization violations.
 */
double fj_residual(const BilevelProblem& P, double x, const Vec& y, const Vec& u0u);
double kkt_residual(const BilevelProblem& P, double x, const Vec& y, const Vec& u);

enum class BStatus { KktCertified, Undetermined };
std::string to_string(BStatus status);

struct StationarityFlags {
  bool feasible = false;
  bool is_gc = false;
  bool is_fj = false;
  bool is_kkt = false;
  BStatus b_status = BStatus::Undetermined;
};

StationarityFlags stationarity_status(const BilevelProblem& P, double x, const Vec& y);

}  // namespace parcalm

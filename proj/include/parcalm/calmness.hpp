#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parcalm/continuation.hpp"
#include "parcalm/problem.hpp"

namespace parcalm {

/// Which stationarity set the samples are drawn from.
enum class SigmaKind { BSurrogate, KKT, FJ, GC, F };
std::string to_string(SigmaKind k);
SigmaKind sigma_from_string(const std::string& s);

struct SigmaSample {
  double x = 0.0;
  Vec y;
};

/**
 * Points of the chosen stationarity set in the ball of given radius
 * around (xbar, ybar). Stationary sets are sampled by Newton solves of
 * the multiplier system on an x-grid, seeded from the reference point,
 * from neighbouring grid solutions and from random perturbations. The
 * F set is sampled uniformly (rejecting lower-infeasible points) on a
 * fixed x-grid of 65 values. Duplicates within 1e-7 are merged.
 */
std::vector<SigmaSample> sample_sigma(const BilevelProblem& P, double xbar, const Vec& ybar, double radius,
                                      int count, SigmaKind kind, std::uint64_t seed);

/// Polyline sample of the graph M = {(x, y) : y in S(x)} near a point.
struct MSample {
  std::vector<double> x;
  std::vector<Vec> y;
  std::vector<std::pair<int, int>> segments;  ///< indices of joined consecutive members
};
double distance_to_m(const MSample& M, double x, const Vec& y);

struct RatioSample {
  double x = 0.0;
  Vec y;
  double v = 0.0;          ///< f(x,y) - V(x)
  double numerator = 0.0;  ///< distance
  double ratio = 0.0;
};

enum class ModulusVerdict { HoldsWithL, NumeratorZero, UnboundedSuspect };
std::string to_string(ModulusVerdict v);

struct PEBReport {
  SigmaKind condition = SigmaKind::FJ;
  bool uwsm = false;          ///< numerator is dist to S(x) instead of dist to M
  double radius = 0.0;
  double v_max = 0.0;
  int samples = 0;            ///< points drawn at the base level
  int used = 0;               ///< points with 0 < v <= v_max
  int dropped = 0;            ///< inconclusive value function
  double L = 0.0;
  RatioSample worst;
  ModulusVerdict verdict = ModulusVerdict::HoldsWithL;
  std::vector<double> level_L;     ///< L at sample counts N, 4N, 16N
  std::vector<int> level_samples;
  std::vector<RatioSample> log;    ///< base level
  MSample m;                       ///< M sample used for PEB numerators
};

PEBReport estimate_peb_modulus(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, double v_max,
                               int samples, SigmaKind condition = SigmaKind::FJ, std::uint64_t seed = 0);
PEBReport estimate_uwsm_modulus(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, int samples,
                                SigmaKind condition, std::uint64_t seed = 0, double v_max = 1.0);

/// Modulus on a given sample set (no refinement); used for dominance checks.
PEBReport modulus_on_samples(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, double v_max,
                             const std::vector<SigmaSample>& pts, bool uwsm);

/// Max over sampled FJ points near a Case I point of dist_{S(x)}(y).
struct FjMinReport {
  double max_distance = 0.0;
  int samples = 0;
  SigmaSample worst;
};
FjMinReport verify_fj_equals_min(const BilevelProblem& P, double xbar, const Vec& ybar, double radius,
                                 int samples, std::uint64_t seed = 0);

struct CalmnessSample {
  double x = 0.0;
  Vec y;
  double value = 0.0;  ///< F + mu (f - V) - F(xbar, ybar)
};

struct CalmnessReport {
  SigmaKind condition = SigmaKind::FJ;
  double mu = 0.0;
  double radius = 0.0;
  int samples = 0;
  int dropped = 0;
  double min_value = 0.0;
  CalmnessSample witness;
  bool holds = false;
  std::vector<CalmnessSample> log;
};

CalmnessReport verify_partial_calmness(const BilevelProblem& P, double xbar, const Vec& ybar, double mu,
                                       double radius, int samples, SigmaKind condition = SigmaKind::FJ,
                                       std::uint64_t seed = 0);

/// max |grad F| over random points of the ball (plus the center).
double lipschitz_bound(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, int samples = 400,
                       std::uint64_t seed = 0);

/// Per-sample CSV logs: x,y1..ym,v,numerator,ratio and x,y1..ym,value.
std::string to_csv(const std::vector<RatioSample>& log, int m);
std::string to_csv(const std::vector<CalmnessSample>& log, int m);

}  // namespace parcalm

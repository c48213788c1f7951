#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "parcalm/problem.hpp"

namespace parcalm {

/// Singular values with a rank decision against a relative cutoff.
struct RankInfo {
  Vec singular_values;  ///< descending
  int rank = 0;
  double condition = 0.0;  ///< sigma_max / sigma_min over all columns, inf when singular
};

/**
 * Rank with cutoff rel_tol * max(sigma_max, floor). The floor keeps
 * matrices whose entries are all rounding noise from looking full rank.
 */
RankInfo rank_info(const Mat& A, double rel_tol, double floor = 1.0);

/// Orthonormal basis of {v : A v = 0}; A has n columns, result is n x k.
Mat null_space(const Mat& A, double rel_tol, double floor = 1.0);

/// Minimum-norm least-squares solution of A z = b.
Vec lstsq(const Mat& A, const Vec& b);

/**
 * Finds z with A z = b (least squares) and C z <= 0 componentwise.
 *
 * When A is rank deficient the inequalities are satisfied, if possible,
 * by moving within the null space of A; the search enumerates minimal
 * faces of the induced polyhedron, so it is exact for the handful of
 * rows used here.
 */
struct SignedSolve {
  Vec z;
  double residual = 0.0;  ///< max |A z - b|
  double worst_sign = 0.0;  ///< max (C z)_i, <= 0 when all signs hold
};
SignedSolve solve_with_signs(const Mat& A, const Vec& b, const Mat& C, double tol);

/**
 * Vertices of {z >= 0 : A z = b} by enumeration of independent column
 * subsets. Duplicates (max-norm distance <= 1e-9 * scale) are merged.
 */
std::vector<Vec> polyhedron_vertices(const Mat& A, const Vec& b, double rank_tol, double feas_tol);

/// Min-norm point of the convex hull of the columns of A, with the weights.
struct HullPoint {
  Vec point;
  Vec weights;
};
HullPoint min_norm_hull_point(const Mat& A);

/**
 * Damped Gauss-Newton for r(z) = 0 with square, over- or underdetermined
 * Jacobians (minimum-norm steps). `eval` fills r and its Jacobian and
 * returns false outside the domain. Converged when max|r| <= tol.
 */
struct NewtonResult {
  Vec z;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};
using ResidualFn = std::function<bool(const Vec& z, Vec& r, Mat& J)>;
NewtonResult gauss_newton(const ResidualFn& eval, Vec z0, double tol, int max_iter = 50);

/// Calls visit(subset) for each subset of {0..n-1} with size <= kmax.
template <class F>
void for_each_subset(int n, int kmax, F&& visit) {
  std::vector<int> s;
  auto rec = [&](auto&& self, int start) -> void {
    visit(static_cast<const std::vector<int>&>(s));
    if (static_cast<int>(s.size()) == kmax) return;
    for (int i = start; i < n; ++i) {
      s.push_back(i);
      self(self, i + 1);
      s.pop_back();
    }
  };
  rec(rec, 0);
}

}  // namespace parcalm

#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "parcalm/expr.hpp"

namespace parcalm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Numerical thresholds used by every decision in the library.
struct Tolerances {
  double active = 1e-8;      ///< |g_j| below this counts as active
  double rank = 1e-8;        ///< relative singular value cutoff
  double multiplier = 1e-8;  ///< |u_j| below this counts as vanishing
  double eigenvalue = 1e-8;  ///< |lambda| below this counts as vanishing
  double residual = 1e-8;    ///< residual accepted for linear systems
  int grid = 400;            ///< grid points per axis in the global search
  int multistart = 16;       ///< Newton starts per global search

  /// Throws ProblemError unless all values are positive and grid >= 8.
  void validate() const;
};

/// Search box for the global lower-level search.
struct Box {
  double x_lo = -1.0;
  double x_hi = 1.0;
  Vec y_lo;
  Vec y_hi;
};

/**
 * A C^2 function of (x, y1..ym) with compiled value, gradient and Hessian.
 * Gradients are ordered (d/dx, d/dy1, ..., d/dym).
 */
class SmoothFunction {
 public:
  SmoothFunction() = default;
  SmoothFunction(Expr e, int m);

  const Expr& expr() const { return expr_; }
  int nvars() const { return nvars_; }

  double value(double x, const Vec& y) const;
  double value_or_nan(double x, const Vec& y) const noexcept;
  Vec gradient(double x, const Vec& y) const;
  Mat hessian(double x, const Vec& y) const;

  /// True when every second derivative in y folds to the constant zero.
  bool affine_in_y() const { return affine_in_y_; }
  const Expr& partial(int i) const { return grad_expr_[i]; }

 private:
  Expr expr_;
  int nvars_ = 0;
  Tape value_;
  std::vector<Expr> grad_expr_;
  std::vector<Tape> grad_;
  std::vector<Tape> hess_;  // upper triangle, row major
  bool affine_in_y_ = true;
};

/**
 * Bilevel program with scalar upper variable x:
 *   min F(x,y)  s.t. G(x,y) <= 0, y in S(x),
 * where S(x) solves L(x): min_y f(x,y) s.t. g(x,y) <= 0.
 *
 * Constraint indices are 0-based in the API and 1-based in text.
 */
class BilevelProblem {
 public:
  std::string name;
  int n = 1;
  int m = 0;
  SmoothFunction F;
  SmoothFunction f;
  std::vector<SmoothFunction> g;
  std::vector<SmoothFunction> G;
  Box box;
  Tolerances tol;

  int p() const { return static_cast<int>(g.size()); }
  int q() const { return static_cast<int>(G.size()); }

  /// Indices with |g_j| <= tol.active; throws InfeasiblePointError if some g_j > tol.active.
  std::vector<int> active_set(double x, const Vec& y) const;
  bool lower_feasible(double x, const Vec& y) const;
  bool upper_feasible(double x, const Vec& y) const;

  Vec g_values(double x, const Vec& y) const;
  /// Columns are grad_y g_j for j in J.
  Mat g_jacobian_y(double x, const Vec& y, const std::vector<int>& J) const;
  Vec g_jacobian_x(double x, const Vec& y, const std::vector<int>& J) const;
  /// Full (m+1)x(m+1) Hessian of u0*f + sum_j u_j g_j; u has length p.
  Mat lagrangian_hessian(double x, const Vec& y, double u0, const Vec& u) const;

  bool in_box(double x, const Vec& y) const;
  /// Throws PreconditionError unless the problem has n = 1 and no upper constraints.
  void require_unconstrained_upper() const;
  /// Throws PreconditionError if y has the wrong length.
  void check_dimension(const Vec& y) const;
};

/// Builds a problem from expression text (all errors as ProblemError).
BilevelProblem make_problem(std::string name, int m, std::string_view F, std::string_view f,
                            const std::vector<std::string>& g,
                            const std::vector<std::string>& G = {}, Box box = {},
                            Tolerances tol = {});

/// Parses the problem-file format documented in docs/format.md.
BilevelProblem load_problem(std::string_view contents);
BilevelProblem load_problem_file(const std::string& path);
std::string serialize(const BilevelProblem& P);

/// Returns a copy with g_j replaced by scale[j] * g_j.
BilevelProblem rescale_constraints(const BilevelProblem& P, const std::vector<double>& scale);
/// Returns a copy with constraints reordered: new g_k = old g_{perm[k]}.
BilevelProblem permute_constraints(const BilevelProblem& P, const std::vector<int>& perm);
/// Returns a copy with F replaced by c * F.
BilevelProblem rescale_objective(const BilevelProblem& P, double c);
/// Returns a copy with F replaced by the given expression text.
BilevelProblem with_upper_objective(const BilevelProblem& P, std::string_view F);

/// Parses "a,b,c" into a vector.
Vec parse_vector(std::string_view text);

}  // namespace parcalm

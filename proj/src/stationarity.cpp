#include "parcalm/stationarity.hpp"

#include <algorithm>
#include <cmath>

#include "parcalm/continuation.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/linalg.hpp"
#include "parcalm/multipliers.hpp"

namespace parcalm {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Satisfied: return "satisfied";
    case Verdict::Violated: return "violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

std::string gname(int j) { return "g" + std::to_string(j + 1); }

double max_abs(const Mat& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

std::vector<int> without(const std::vector<int>& J, int j) {
  std::vector<int> out;
  for (int i : J)
    if (i != j) out.push_back(i);
  return out;
}

}  // namespace

MpccLicqReport mpcc_licq(const BilevelProblem& P, double x, const Vec& y, const Vec& u) {
  P.check_dimension(y);
  P.f.value(x, y);  // throws outside the domain of f
  const int m = P.m;
  const int p = P.p();
  MpccLicqReport r;
  if (u.size() == p + 1) {
    r.fritz_john = true;
  } else if (u.size() != p) {
    throw PreconditionError("multiplier has length " + std::to_string(u.size()) + ", expected " +
                            std::to_string(p) + " or " + std::to_string(p + 1));
  }
  double res = r.fritz_john ? fj_residual(P, x, y, u) : kkt_residual(P, x, y, u);
  if (res > P.tol.residual)
    throw PreconditionError("multiplier does not satisfy its system (residual " + std::to_string(res) + ")");
  const double u0 = r.fritz_john ? u[0] : 1.0;
  const Vec uu = r.fritz_john ? Vec(u.tail(p)) : u;
  r.J = P.active_set(x, y);
  std::vector<int> Kc;
  for (int j = 0; j < p; ++j) {
    if (std::abs(uu[j]) <= P.tol.multiplier) r.K.push_back(j);
    else Kc.push_back(j);
  }
  r.reduces_to_licq = Kc == r.J;
  const int k = static_cast<int>(r.J.size());
  const int kc = static_cast<int>(Kc.size());
  const bool fix_u0 = r.fritz_john && std::abs(u0) <= P.tol.multiplier;
  const int rows = 1 + m + kc + (r.fritz_john ? 1 : 0);
  const int cols = m + k + (r.fritz_john ? 1 : 0) + (fix_u0 ? 1 : 0);
  Mat M = Mat::Zero(rows, cols);
  Mat H = P.lagrangian_hessian(x, y, u0, uu);
  M.topLeftCorner(1 + m, m) = H.rightCols(m);
  for (int i = 0; i < k; ++i) M.block(0, m + i, 1 + m, 1) = P.g[r.J[i]].gradient(x, y);
  for (int i = 0; i < kc; ++i) M.block(1 + m + i, 0, 1, m) = P.g[Kc[i]].gradient(x, y).tail(m).transpose();
  if (r.fritz_john) {
    const int u0row = 1 + m + kc;
    M.block(u0row, 0, 1, m) = P.f.gradient(x, y).tail(m).transpose();
    for (int i = 0; i < kc; ++i) M(1 + m + i, m + k) = 1.0;
    M(u0row, m + k) = 1.0;
    if (fix_u0) M(u0row, m + k + 1) = 1.0;
  }
  RankInfo ri = rank_info(M, P.tol.rank);
  r.matrix = M;
  r.singular_values = ri.singular_values;
  r.rank = ri.rank;
  r.full_column_rank = ri.rank == cols;
  return r;
}

int optimality_case(const ClassificationReport& c) {
  if (c.simple == SimplicityCase::II) return 6;
  if (c.simple != SimplicityCase::I)
    throw PreconditionError("optimality case not identified: point is not simple (" + c.simple_reason + ")");
  switch (c.type) {
    case PointType::T1: return 1;
    case PointType::T2: return 2;
    case PointType::T4: return 3;
    case PointType::T5_1: return 4;
    case PointType::T5_2: return 5;
    default: break;
  }
  throw PreconditionError("optimality case not identified for type " + to_string(c.type));
}

namespace {

const char* case_names[] = {"",
                            "Case I, Type 1",
                            "Case I, Type 2",
                            "Case I, Type 4",
                            "Case I, Type 5-1",
                            "Case I, Type 5-2",
                            "Case II"};

// Shared preparation: case, multipliers and the special indices.
StationarityReport prepare(const BilevelProblem& P, double x, const Vec& y, const ClassificationReport& c) {
  P.require_unconstrained_upper();
  P.check_dimension(y);
  StationarityReport r;
  r.case_id = optimality_case(c);
  r.case_name = case_names[r.case_id];
  r.type = c.type;
  r.active = P.active_set(x, y);
  if (c.minimizers.empty() || distance_to_set(y, {c.minimizers[0]}) > 1e-6 * (1.0 + y.norm()))
    throw PreconditionError("point is not a global minimizer of the lower-level problem");
  const int p = P.p();
  auto zero_in = [&](const Vec& u) {
    for (int j : r.active)
      if (std::abs(u[j]) <= P.tol.multiplier) return j;
    return -1;
  };
  switch (r.case_id) {
    case 1:
      r.ubar = c.nd.lagrange;
      break;
    case 2:
      r.ubar = c.nd.lagrange;
      r.special = {c.nd.vanishing.at(0)};
      break;
    case 3:
      if (c.fj.vertices.empty()) throw PreconditionError("no Fritz John multiplier");
      r.u0 = c.fj.vertices[0][0];
      r.ubar = c.fj.vertices[0].tail(p);
      break;
    case 4: {
      if (c.kkt.vertices.size() != 1) throw PreconditionError("Type 5-1 needs a single KKT vertex");
      r.ubar = c.kkt.vertices[0];
      int q = zero_in(r.ubar);
      if (q < 0) throw PreconditionError("Type 5-1 vertex has no vanishing multiplier");
      r.special = {q};
      break;
    }
    case 5: {
      if (c.kkt.vertices.size() != 2) throw PreconditionError("Type 5-2 needs a segment of KKT multipliers");
      r.ubar = c.kkt.vertices[0];
      r.ubar2 = c.kkt.vertices[1];
      int q = zero_in(r.ubar), rr = zero_in(r.ubar2);
      if (q < 0 || rr < 0 || q == rr) throw PreconditionError("Type 5-2 vertices do not identify q and r");
      if (rr < q) {
        std::swap(r.ubar, r.ubar2);
        std::swap(q, rr);
      }
      r.special = {q, rr};
      break;
    }
    case 6: {
      r.ubar = c.nd.lagrange;
      r.y2 = c.minimizers.at(1);
      r.ubar2 = branch_point_at(P, x, r.y2).u;
      break;
    }
  }
  return r;
}

// c_k of the Case II x-row.
double case2_coefficient(const BilevelProblem& P, double x, const Vec& y, const Vec& yk, const Vec& uk) {
  double v = P.f.gradient(x, y)[0] - P.f.gradient(x, yk)[0];
  for (int j = 0; j < P.p(); ++j) v -= uk[j] * P.g[j].gradient(x, yk)[0];
  return v;
}

struct System {
  Mat A;
  Vec b;
  Mat C;
  std::vector<std::string> sign_names;
  bool has_w = true;
  bool has_lambda = false;
};

System assemble(const BilevelProblem& P, double x, const Vec& y, const StationarityReport& r, double mu) {
  const int m = P.m;
  const auto& J0 = r.active;
  const int k = static_cast<int>(J0.size());
  System s;
  s.has_w = r.case_id != 4 && r.case_id != 5;
  s.has_lambda = r.case_id == 6;
  const int nw = s.has_w ? m : 0;
  const int nl = s.has_lambda ? 2 : 0;
  const int n = nw + k + nl;
  Vec gF = P.F.gradient(x, y);
  std::vector<int> tangent = J0;
  if (r.case_id == 2) tangent = without(J0, r.special[0]);
  const int nt = s.has_w ? static_cast<int>(tangent.size()) : 0;
  const int rows = 1 + m + nt + (s.has_lambda ? 1 : 0);
  s.A = Mat::Zero(rows, n);
  s.b = Vec::Zero(rows);
  s.b.head(1 + m) = -gF;
  for (int i = 0; i < k; ++i) s.A.block(0, nw + i, 1 + m, 1) = P.g[J0[i]].gradient(x, y);
  if (s.has_w) {
    Mat H = P.lagrangian_hessian(x, y, r.u0, r.ubar);
    s.A.topLeftCorner(1 + m, m) = -H.rightCols(m);
    for (int i = 0; i < nt; ++i) s.A.block(1 + m + i, 0, 1, m) = P.g[tangent[i]].gradient(x, y).tail(m).transpose();
  }
  if (s.has_lambda) {
    s.A(0, nw + k) = mu * case2_coefficient(P, x, y, y, r.ubar);
    s.A(0, nw + k + 1) = mu * case2_coefficient(P, x, y, r.y2, r.ubar2);
    s.b.segment(1, m) -= mu * P.f.gradient(x, y).tail(m);
    s.A.block(rows - 1, nw + k, 1, 2).setOnes();
    s.b[rows - 1] = 1.0;
  }
  std::vector<Vec> crows;
  auto xi_col = [&](int j) {
    return nw + static_cast<int>(std::find(J0.begin(), J0.end(), j) - J0.begin());
  };
  if (r.case_id == 2) {
    int q = r.special[0];
    Vec row = Vec::Zero(n);
    row.head(m) = P.g[q].gradient(x, y).tail(m);
    crows.push_back(row);
    s.sign_names.push_back("grad_y " + gname(q) + "^T w <= 0");
  }
  if (r.case_id == 2 || r.case_id == 4 || r.case_id == 5) {
    for (int q : r.special) {
      Vec row = Vec::Zero(n);
      row[xi_col(q)] = -1.0;
      crows.push_back(row);
      s.sign_names.push_back("xi_" + std::to_string(q + 1) + " >= 0");
    }
  }
  if (r.case_id == 3) {
    Vec row = Vec::Zero(n);
    row.head(m) = P.f.gradient(x, y).tail(m);
    crows.push_back(row);
    s.sign_names.push_back("grad_y f^T w <= 0");
  }
  if (s.has_lambda) {
    for (int i = 0; i < 2; ++i) {
      Vec row = Vec::Zero(n);
      row[nw + k + i] = -1.0;
      crows.push_back(row);
      s.sign_names.push_back("lambda_" + std::to_string(i + 1) + " >= 0");
    }
  }
  s.C = Mat::Zero(static_cast<int>(crows.size()), n);
  for (std::size_t i = 0; i < crows.size(); ++i) s.C.row(i) = crows[i].transpose();
  return s;
}

// Solves one system and writes the certificate into r; returns the combined violation.
double solve_into(const BilevelProblem& P, const System& s, StationarityReport& r) {
  const int m = P.m;
  const int k = static_cast<int>(r.active.size());
  SignedSolve sol = solve_with_signs(s.A, s.b, s.C, P.tol.residual);
  const int nw = s.has_w ? m : 0;
  r.matrix = s.A;
  r.rhs = s.b;
  r.w = s.has_w ? Vec(sol.z.head(m)) : Vec::Zero(m);
  r.xi = Vec::Zero(P.p());
  for (int i = 0; i < k; ++i) r.xi[r.active[i]] = sol.z[nw + i];
  if (s.has_lambda) r.lambda = sol.z.tail(2);
  r.residual = sol.residual;
  r.residual_tol = P.tol.residual * std::max({1.0, max_abs(s.A), max_abs(s.b)});
  r.signs.clear();
  Vec cz = s.C.rows() ? Vec(s.C * sol.z) : Vec(0);
  bool signs_ok = true;
  for (int i = 0; i < cz.size(); ++i) {
    bool ok = cz[i] <= P.tol.residual;
    signs_ok = signs_ok && ok;
    r.signs.push_back({s.sign_names[i], -cz[i], ok});
  }
  bool res_ok = r.residual <= r.residual_tol;
  r.direct = (res_ok && signs_ok) ? Verdict::Satisfied : Verdict::Violated;
  return std::max(r.residual / r.residual_tol, cz.size() ? cz.maxCoeff() / P.tol.residual : 0.0);
}

}  // namespace

StationarityReport check_optimality_direct(const BilevelProblem& P, double x, const Vec& y,
                                           const ClassificationReport& c) {
  StationarityReport r = prepare(P, x, y, c);
  if (r.case_id != 6) {
    solve_into(P, assemble(P, x, y, r, 0.0), r);
    if (r.case_id == 4 || r.case_id == 5) r.direct_note = "w = 0 by the reduction for Type 5";
    return r;
  }
  // Case II: scan mu on a log grid; the first mu with a certificate wins.
  StationarityReport best = r;
  double best_err = std::numeric_limits<double>::infinity();
  const int count = 81;
  for (int i = 0; i < count; ++i) {
    double mu = std::pow(10.0, -4.0 + 8.0 * i / (count - 1));
    StationarityReport trial = r;
    trial.mu = mu;
    double err = solve_into(P, assemble(P, x, y, trial, mu), trial);
    if (trial.direct == Verdict::Satisfied) {
      trial.direct_note = "smallest mu on the log grid [1e-4, 1e4] with a certificate";
      return trial;
    }
    if (err < best_err) {
      best_err = err;
      best = trial;
    }
  }
  best.direct_note = "no mu on the log grid [1e-4, 1e4] admits a certificate";
  return best;
}

// ------------------------------------------------------------ implicit form

namespace {

struct Branch {
  BranchPoint b;
  BranchDerivatives d;
};

Branch branch(const BilevelProblem& P, double x, const Vec& y, const std::vector<int>& J, const Vec& u) {
  Branch br;
  br.b.x = x;
  br.b.y = y;
  br.b.J = J;
  br.b.u = Vec::Zero(P.p());
  for (int j : J) br.b.u[j] = u[j];
  br.d = implicit_derivatives(P, br.b);
  return br;
}

double total(const BilevelProblem& P, double x, const Vec& y, const Vec& dy) {
  Vec gF = P.F.gradient(x, y);
  return gF[0] + gF.tail(P.m).dot(dy);
}

double drift(const BilevelProblem& P, const Branch& br, int j) {
  Vec gg = P.g[j].gradient(br.b.x, br.b.y);
  return gg[0] + gg.tail(P.m).dot(br.d.dy);
}

// Central difference of g_j along the corrected branch.
double drift_fd(const BilevelProblem& P, const Branch& br, int j) {
  const double h = 1e-5 * std::max(1.0, std::abs(br.b.x));
  double v[2];
  for (int s = 0; s < 2; ++s) {
    double sign = s == 0 ? 1.0 : -1.0;
    BranchPoint guess = br.b;
    guess.x += sign * h;
    guess.y += sign * h * br.d.dy;
    guess.u += sign * h * br.d.du;
    auto c = correct(P, guess);
    if (!c) return std::numeric_limits<double>::quiet_NaN();
    v[s] = P.g[j].value(c->x, c->y);
  }
  return (v[0] - v[1]) / (2.0 * h);
}

Condition leq(const std::string& name, double v, double tol) { return {name, v, v <= tol}; }
Condition geq(const std::string& name, double v, double tol) { return {name, v, v >= -tol}; }

Verdict all_ok(const std::vector<Condition>& cs) {
  for (const auto& c : cs)
    if (!c.ok) return Verdict::Violated;
  return Verdict::Satisfied;
}

// Sign of a drift with its finite-difference cross-check; 0 means inconclusive.
int drift_sign(const BilevelProblem& P, double g, double g_fd) {
  if (std::abs(g) <= P.tol.residual) return 0;
  if (std::isfinite(g_fd) && std::abs(g_fd) > P.tol.residual && (g_fd > 0) != (g > 0)) return 0;
  return g > 0 ? 1 : -1;
}

}  // namespace

StationarityReport check_optimality_implicit(const BilevelProblem& P, double x, const Vec& y,
                                             const ClassificationReport& c) {
  StationarityReport r = prepare(P, x, y, c);
  const auto& J0 = r.active;
  const int m = P.m;
  const double tol = P.tol.residual * std::max(1.0, P.F.gradient(x, y).cwiseAbs().maxCoeff());
  auto& conds = r.implicit_conditions;
  auto one_sided = [&](const std::string& name, double v, int sign_needed) {
    // sign_needed < 0: v <= 0, > 0: v >= 0
    return sign_needed < 0 ? leq(name + " <= 0", v, tol) : geq(name + " >= 0", v, tol);
  };
  switch (r.case_id) {
    case 1: {
      Branch br = branch(P, x, y, J0, r.ubar);
      double v = total(P, x, y, br.d.dy);
      conds.push_back({"grad_x F + grad_y F . D_x y = 0", v, std::abs(v) <= tol});
      break;
    }
    case 2: {
      int q = r.special[0];
      Branch tilde = branch(P, x, y, without(J0, q), r.ubar);
      Branch hat = branch(P, x, y, J0, r.ubar);
      double g = drift(P, tilde, q), gfd = drift_fd(P, tilde, q);
      r.gamma = {g};
      r.gamma_fd = {gfd};
      int s = drift_sign(P, g, gfd);
      if (s == 0) {
        r.implicit = Verdict::Inconclusive;
        r.implicit_note = "non-generic drift of " + gname(q);
        return r;
      }
      conds.push_back(one_sided("value on branch without " + gname(q), total(P, x, y, tilde.d.dy), -s));
      conds.push_back(one_sided("value on branch with " + gname(q), total(P, x, y, hat.d.dy), s));
      break;
    }
    case 3: {
      const int k = static_cast<int>(J0.size());
      const int n = 1 + m + k;
      Mat H = P.lagrangian_hessian(x, y, r.u0, r.ubar);
      Mat Jac = Mat::Zero(n, n);
      Jac.topLeftCorner(m, 1 + m) = H.bottomRows(m);
      for (int i = 0; i < k; ++i) {
        Vec gg = P.g[J0[i]].gradient(x, y);
        Jac.block(0, 1 + m + i, m, 1) = gg.tail(m);
        Jac.block(m + i, 0, 1, 1 + m) = gg.transpose();
        Jac(m + k, 1 + m + i) = 1.0;
      }
      Vec rhs = Vec::Zero(n);
      rhs.head(m) = -P.f.gradient(x, y).tail(m);
      rhs[m + k] = -1.0;
      if (rank_info(Jac, P.tol.rank).rank < n)
        throw NumericalError("singular Jacobian of the Fritz John system in (x, y, u)");
      Vec d = Jac.fullPivLu().solve(rhs);
      Vec gF = P.F.gradient(x, y);
      double v = gF[0] * d[0] + gF.tail(m).dot(d.segment(1, m));
      conds.push_back(geq("grad_x F D x(0) + grad_y F . D y(0) >= 0", v, tol));
      break;
    }
    case 4: {
      int q = r.special[0];
      Branch bq = branch(P, x, y, without(J0, q), r.ubar);
      double g = drift(P, bq, q), gfd = drift_fd(P, bq, q);
      r.gamma = {g};
      r.gamma_fd = {gfd};
      int s = drift_sign(P, g, gfd);
      if (s == 0) {
        r.implicit = Verdict::Inconclusive;
        r.implicit_note = "non-generic drift of " + gname(q);
        return r;
      }
      conds.push_back(one_sided("value on branch without " + gname(q), total(P, x, y, bq.d.dy), -s));
      break;
    }
    case 5: {
      int q = r.special[0], rr = r.special[1];
      Branch bq = branch(P, x, y, without(J0, q), r.ubar);
      Branch br = branch(P, x, y, without(J0, rr), r.ubar2);
      double gq = drift(P, bq, q), gr = drift(P, br, rr);
      double gqfd = drift_fd(P, bq, q), grfd = drift_fd(P, br, rr);
      r.gamma = {gq, gr};
      r.gamma_fd = {gqfd, grfd};
      int s = drift_sign(P, gq, gqfd);
      if (s == 0) {
        r.implicit = Verdict::Inconclusive;
        r.implicit_note = "non-generic drift of " + gname(q);
        return r;
      }
      conds.push_back(one_sided("value on branch without " + gname(q), total(P, x, y, bq.d.dy), -s));
      conds.push_back(one_sided("value on branch without " + gname(rr), total(P, x, y, br.d.dy), s));
      break;
    }
    case 6: {
      Branch b1 = branch(P, x, y, J0, r.ubar);
      BranchPoint b2 = branch_point_at(P, x, r.y2);
      AlphaReport a = compute_alpha(P, b1.b, b2);
      r.gamma = {a.alpha};
      r.gamma_fd = {a.alpha_fd};
      int s = drift_sign(P, a.alpha, a.alpha_fd);
      if (s == 0) {
        r.implicit = Verdict::Inconclusive;
        r.implicit_note = "alpha vanishes or disagrees with its finite difference";
        return r;
      }
      conds.push_back(one_sided("grad_x F + grad_y F . D_x y1", total(P, x, y, b1.d.dy), s));
      break;
    }
  }
  r.implicit = all_ok(conds);
  return r;
}

StationarityReport merge_reports(const StationarityReport& direct, const StationarityReport& implicit) {
  StationarityReport r = direct;
  r.implicit_conditions = implicit.implicit_conditions;
  r.gamma = implicit.gamma;
  r.gamma_fd = implicit.gamma_fd;
  r.implicit = implicit.implicit;
  r.implicit_note = implicit.implicit_note;
  r.agreement = r.direct == r.implicit;
  return r;
}

StationarityReport cross_validate(const BilevelProblem& P, double x, const Vec& y) {
  ClassificationReport c = classify_simplicity(P, x, y);
  return merge_reports(check_optimality_direct(P, x, y, c), check_optimality_implicit(P, x, y, c));
}

double certificate_residual(const BilevelProblem& P, double x, const Vec& y, const StationarityReport& r) {
  const int m = P.m;
  const int p = P.p();
  std::vector<int> J0 = P.active_set(x, y);
  Vec gF = P.F.gradient(x, y);
  Vec e = gF;  // (x-row, y-rows)
  for (int j = 0; j < p; ++j) e += r.xi[j] * P.g[j].gradient(x, y);
  double worst = 0.0;
  for (int j = 0; j < p; ++j)
    if (std::find(J0.begin(), J0.end(), j) == J0.end()) worst = std::max(worst, std::abs(r.xi[j]));
  if (r.case_id != 4 && r.case_id != 5) {
    Mat H = P.lagrangian_hessian(x, y, r.case_id == 3 ? 0.0 : 1.0, r.ubar);
    e -= H.rightCols(m) * r.w;
    std::vector<int> tangent = r.case_id == 2 ? without(J0, r.special[0]) : J0;
    for (int j : tangent) worst = std::max(worst, std::abs(P.g[j].gradient(x, y).tail(m).dot(r.w)));
  } else {
    worst = std::max(worst, r.w.size() ? r.w.cwiseAbs().maxCoeff() : 0.0);
  }
  if (r.case_id == 6) {
    e[0] += r.mu * (r.lambda[0] * case2_coefficient(P, x, y, y, r.ubar) +
                    r.lambda[1] * case2_coefficient(P, x, y, r.y2, r.ubar2));
    e.tail(m) += r.mu * P.f.gradient(x, y).tail(m);
    worst = std::max(worst, std::abs(r.lambda.sum() - 1.0));
  }
  return std::max(worst, e.cwiseAbs().maxCoeff());
}

}  // namespace parcalm

#include "parcalm/classifier.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "parcalm/continuation.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/linalg.hpp"

namespace parcalm {

std::string to_string(PointType t) {
  switch (t) {
    case PointType::T1: return "1";
    case PointType::T2: return "2";
    case PointType::T3: return "3";
    case PointType::T4: return "4";
    case PointType::T5_1: return "5-1";
    case PointType::T5_2: return "5-2";
    case PointType::NotClassifiable: return "not-classifiable";
  }
  return "?";
}

std::string to_string(SimplicityCase c) {
  switch (c) {
    case SimplicityCase::Unchecked: return "unchecked";
    case SimplicityCase::I: return "I";
    case SimplicityCase::II: return "II";
    case SimplicityCase::NotSimple: return "not-simple";
  }
  return "?";
}

namespace {

std::string index_list(const std::vector<int>& idx) {
  std::string s = "{";
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? ", g" : "g") + std::to_string(idx[i] + 1);
  return s + "}";
}

std::string num(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

}  // namespace

LicqEvidence check_licq(const BilevelProblem& P, double x, const Vec& y) {
  LicqEvidence ev;
  std::vector<int> J = P.active_set(x, y);
  ev.active_count = static_cast<int>(J.size());
  RankInfo ri = rank_info(P.g_jacobian_y(x, y, J), P.tol.rank);
  ev.rank = ri.rank;
  ev.singular_values = ri.singular_values;
  ev.holds = ev.rank == ev.active_count;
  return ev;
}

MfcqEvidence check_mfcq(const BilevelProblem& P, double x, const Vec& y) {
  MfcqEvidence ev;
  std::vector<int> J = P.active_set(x, y);
  if (J.empty()) {
    ev.direction = Vec::Zero(P.m);
    ev.weights = Vec::Zero(P.p());
    ev.margin = std::numeric_limits<double>::infinity();
    return ev;
  }
  Mat G = P.g_jacobian_y(x, y, J);
  HullPoint hp = min_norm_hull_point(G);
  double scale = std::max(1.0, G.colwise().norm().maxCoeff());
  double nrm = hp.point.norm();
  ev.weights = Vec::Zero(P.p());
  for (std::size_t k = 0; k < J.size(); ++k) ev.weights[J[k]] = hp.weights[k];
  ev.holds = nrm > P.tol.rank * scale;
  if (ev.holds) {
    ev.direction = -hp.point / nrm;
    ev.margin = -(G.transpose() * ev.direction).maxCoeff();
  } else {
    ev.direction = Vec::Zero(P.m);
    ev.margin = 0.0;
  }
  return ev;
}

SocEvidence check_soc(const BilevelProblem& P, double x, const Vec& y, const Vec& u) {
  SocEvidence ev;
  std::vector<int> J = P.active_set(x, y);
  Mat G = P.g_jacobian_y(x, y, J);
  if (rank_info(G, P.tol.rank).rank < static_cast<int>(J.size())) {
    ev.defined = false;
    ev.holds = false;
    return ev;
  }
  Vec uJ = Vec::Zero(P.p());
  for (int j : J) uJ[j] = u[j];
  Mat H = P.lagrangian_hessian(x, y, 1.0, uJ).bottomRightCorner(P.m, P.m);
  ev.V = J.empty() ? Mat(Mat::Identity(P.m, P.m)) : null_space(G.transpose(), P.tol.rank);
  if (ev.V.cols() == 0) {
    ev.eigenvalues = Vec(0);
    return ev;
  }
  Mat R = ev.V.transpose() * H * ev.V;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (R + R.transpose()));
  ev.eigenvalues = es.eigenvalues();
  for (int i = 0; i < ev.eigenvalues.size(); ++i)
    if (std::abs(ev.eigenvalues[i]) <= P.tol.eigenvalue) ev.holds = false;
  return ev;
}

BranchPoint branch_point_at(const BilevelProblem& P, double x, const Vec& y) {
  BranchPoint b;
  b.x = x;
  b.y = y;
  b.J = P.active_set(x, y);
  b.u = Vec::Zero(P.p());
  Vec uJ = lstsq(P.g_jacobian_y(x, y, b.J), -P.f.gradient(x, y).tail(P.m));
  for (std::size_t k = 0; k < b.J.size(); ++k) b.u[b.J[k]] = uJ[k];
  return b;
}

ClassificationReport classify_point(const BilevelProblem& P, double x, const Vec& y) {
  P.check_dimension(y);
  ClassificationReport r;
  r.x = x;
  r.y = y;
  r.active = P.active_set(x, y);  // throws when infeasible
  P.f.value(x, y);                // throws outside the domain of f
  r.flags = stationarity_status(P, x, y);
  r.fj = fj_multipliers(P, x, y);
  r.kkt = kkt_multipliers(P, x, y);
  r.nd.licq = check_licq(P, x, y);
  r.nd.mfcq = check_mfcq(P, x, y);
  const auto& J = r.active;
  const int k = static_cast<int>(J.size());
  if (k > 0) {
    Mat full(P.m + 1, k);
    for (int i = 0; i < k; ++i) full.col(i) = P.g[J[i]].gradient(x, y);
    r.nd.full_rank = rank_info(full, P.tol.rank).rank;
  }
  if (!r.flags.is_gc) {
    r.reason = "not stationary";
    return r;
  }
  const auto& licq = r.nd.licq;
  if (licq.holds) {
    BranchPoint b = branch_point_at(P, x, y);
    r.nd.lagrange = b.u;
    for (int j : J)
      if (std::abs(b.u[j]) <= P.tol.multiplier) r.nd.vanishing.push_back(j);
    r.nd.sc = r.nd.vanishing.empty();
    r.nd.soc = check_soc(P, x, y, b.u);
    int zero_eigs = 0;
    double min_abs = std::numeric_limits<double>::infinity();
    for (int i = 0; i < r.nd.soc.eigenvalues.size(); ++i) {
      min_abs = std::min(min_abs, std::abs(r.nd.soc.eigenvalues[i]));
      if (std::abs(r.nd.soc.eigenvalues[i]) <= P.tol.eigenvalue) ++zero_eigs;
    }
    std::string licq_text = "LICQ (rank " + std::to_string(licq.rank) + " = |J0|)";
    std::string soc_text = r.nd.soc.eigenvalues.size()
                               ? "min |eigenvalue| of reduced Hessian " + num(min_abs)
                               : "trivial tangent space";
    if (r.nd.sc && r.nd.soc.holds) {
      r.type = PointType::T1;
      r.reason = "Type 1: " + licq_text + ", SC, SOC (" + soc_text + ")";
    } else if (r.nd.soc.holds && r.nd.vanishing.size() == 1) {
      r.type = PointType::T2;
      r.reason = "Type 2: " + licq_text + ", SOC (" + soc_text + "), exactly one vanishing multiplier " +
                 index_list(r.nd.vanishing);
    } else if (r.nd.sc && zero_eigs == 1) {
      r.type = PointType::T3;
      r.reason = "Type 3: " + licq_text + ", SC, exactly one zero eigenvalue of the reduced Hessian";
    } else {
      r.reason = "LICQ holds but vanishing multipliers " + index_list(r.nd.vanishing) + " and " +
                 std::to_string(zero_eigs) + " zero eigenvalues";
    }
    return r;
  }
  if (licq.rank == k - 1 && licq.rank < P.m) {
    if (!r.flags.is_kkt) {
      r.type = PointType::T4;
      r.reason = "Type 4: LICQ fails, rank " + std::to_string(licq.rank) + " = |J0| - 1 < m, KKT fails";
    } else {
      r.reason = "rank deficit 1 but KKT holds";
    }
    return r;
  }
  if (r.nd.full_rank == k && k == P.m + 1) {
    std::string base = "LICQ fails, rank of (x,y)-gradients " + std::to_string(k) + " = |J0| = m + 1";
    if (r.nd.mfcq.holds) {
      r.type = PointType::T5_2;
      r.reason = "Type 5-2: " + base + ", MFCQ holds";
    } else if (r.flags.is_kkt) {
      r.type = PointType::T5_1;
      r.reason = "Type 5-1: " + base + ", MFCQ fails, KKT holds";
    } else {
      r.reason = base + " but MFCQ and KKT both fail";
    }
    return r;
  }
  r.reason = "LICQ fails with rank deficit " + std::to_string(k - licq.rank) +
             " and no Type 4/5 pattern";
  return r;
}

namespace {

bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

ClassificationReport classify_simplicity(const BilevelProblem& P, double x,
                                         const std::optional<Vec>& query) {
  LowerSolution sol = solve_lower_global(P, x);
  if (sol.inconclusive) throw InconclusiveError("global search inconclusive: " + sol.note);
  if (sol.points.empty()) {
    ClassificationReport r;
    r.x = x;
    r.simple = SimplicityCase::NotSimple;
    r.simple_reason = "S(x) is empty";
    r.value = sol.value;
    return r;
  }
  std::vector<Vec> members = sol.points;
  std::size_t ref = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    if (query) {
      if ((members[i] - *query).norm() < (members[ref] - *query).norm()) ref = i;
    } else if (lex_less(members[i], members[ref])) {
      ref = i;
    }
  }
  std::swap(members[0], members[ref]);

  ClassificationReport r = classify_point(P, x, members[0]);
  r.minimizers = members;
  r.value = sol.value;
  for (const Vec& y : members) r.member_types.push_back(classify_point(P, x, y).type);

  if (members.size() == 1) {
    switch (r.type) {
      case PointType::T1:
      case PointType::T2:
      case PointType::T4:
      case PointType::T5_1:
      case PointType::T5_2:
        r.simple = SimplicityCase::I;
        r.simple_reason = "unique global minimizer of Type " + to_string(r.type);
        break;
      default:
        r.simple = SimplicityCase::NotSimple;
        r.simple_reason = "unique global minimizer has type " + to_string(r.type);
    }
    return r;
  }
  if (members.size() > 2) {
    r.simple = SimplicityCase::NotSimple;
    r.simple_reason = std::to_string(members.size()) + " global minimizers";
    return r;
  }
  if (r.member_types[0] != PointType::T1 || r.member_types[1] != PointType::T1) {
    r.simple = SimplicityCase::NotSimple;
    r.simple_reason = "two global minimizers, not both of Type 1";
    return r;
  }
  AlphaReport a = compute_alpha(P, branch_point_at(P, x, members[0]), branch_point_at(P, x, members[1]));
  r.alpha = a.alpha;
  r.alpha_fd = a.alpha_fd;
  if (std::abs(a.alpha) > P.tol.residual) {
    r.simple = SimplicityCase::II;
    r.simple_reason = "two Type 1 global minimizers with alpha = " + num(a.alpha);
  } else {
    r.simple = SimplicityCase::NotSimple;
    r.simple_reason = "two Type 1 global minimizers but alpha vanishes";
  }
  return r;
}

AlphaReport compute_alpha(const BilevelProblem& P, const BranchPoint& b1, const BranchPoint& b2) {
  AlphaReport a;
  BranchDerivatives d1 = implicit_derivatives(P, b1);
  BranchDerivatives d2 = implicit_derivatives(P, b2);
  a.dy1 = d1.dy;
  a.dy2 = d2.dy;
  auto slope = [&](const BranchPoint& b, const BranchDerivatives& d) {
    Vec gf = P.f.gradient(b.x, b.y);
    return gf[0] + gf.tail(P.m).dot(d.dy);
  };
  a.alpha = slope(b2, d2) - slope(b1, d1);

  const double h = 1e-4;
  auto value_at = [&](const BranchPoint& b, const BranchDerivatives& d, double s) {
    BranchPoint guess = b;
    guess.x = b.x + s * h;
    guess.y = b.y + s * h * d.dy;
    guess.u = b.u + s * h * d.du;
    auto c = correct(P, guess);
    if (!c) return std::numeric_limits<double>::quiet_NaN();
    return P.f.value(c->x, c->y);
  };
  double plus = value_at(b2, d2, 1.0) - value_at(b1, d1, 1.0);
  double minus = value_at(b2, d2, -1.0) - value_at(b1, d1, -1.0);
  a.alpha_fd = (plus - minus) / (2.0 * h);
  return a;
}

}  // namespace parcalm

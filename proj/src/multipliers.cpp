#include "parcalm/multipliers.hpp"

#include <cmath>

#include "parcalm/classifier.hpp"
#include "parcalm/linalg.hpp"

namespace parcalm {

std::string to_string(SetKind kind) {
  switch (kind) {
    case SetKind::Empty: return "empty";
    case SetKind::Singleton: return "singleton";
    case SetKind::Ray: return "ray";
    case SetKind::Segment: return "segment";
    case SetKind::Polytope: return "polytope";
  }
  return "?";
}

std::string to_string(BStatus status) {
  return status == BStatus::KktCertified ? "kkt-certified" : "undetermined";
}

namespace {

SetKind kind_of(std::size_t vertices, std::size_t rays) {
  if (vertices == 0) return SetKind::Empty;
  if (rays > 0) return (vertices == 1 && rays == 1) ? SetKind::Ray : SetKind::Polytope;
  if (vertices == 1) return SetKind::Singleton;
  if (vertices == 2) return SetKind::Segment;
  return SetKind::Polytope;
}

// Embeds a vector over the active indices into R^p (FJ: with u0 in front).
Vec embed(const Vec& z, const std::vector<int>& J, int p, bool fj) {
  Vec out = Vec::Zero(p + (fj ? 1 : 0));
  int off = fj ? 1 : 0;
  if (fj) out[0] = z[0];
  for (std::size_t k = 0; k < J.size(); ++k) out[off + J[k]] = z[off + k];
  return out;
}

}  // namespace

double fj_residual(const BilevelProblem& P, double x, const Vec& y, const Vec& v) {
  Vec r = v[0] * P.f.gradient(x, y).tail(P.m);
  Vec gv = P.g_values(x, y);
  double worst = std::abs(v.sum() - 1.0);
  worst = std::max(worst, -v.minCoeff());
  for (int j = 0; j < P.p(); ++j) {
    r += v[j + 1] * P.g[j].gradient(x, y).tail(P.m);
    worst = std::max(worst, std::abs(v[j + 1] * gv[j]));
  }
  return std::max(worst, r.cwiseAbs().maxCoeff());
}

double kkt_residual(const BilevelProblem& P, double x, const Vec& y, const Vec& u) {
  Vec r = P.f.gradient(x, y).tail(P.m);
  Vec gv = P.g_values(x, y);
  double worst = u.size() ? std::max(0.0, -u.minCoeff()) : 0.0;
  for (int j = 0; j < P.p(); ++j) {
    r += u[j] * P.g[j].gradient(x, y).tail(P.m);
    worst = std::max(worst, std::abs(u[j] * gv[j]));
  }
  return std::max(worst, r.cwiseAbs().maxCoeff());
}

MultiplierSet fj_multipliers(const BilevelProblem& P, double x, const Vec& y) {
  MultiplierSet set;
  set.fritz_john = true;
  set.active = P.active_set(x, y);
  const auto& J = set.active;
  const int k = static_cast<int>(J.size());
  Mat A(P.m + 1, k + 1);
  A.topLeftCorner(P.m, 1) = P.f.gradient(x, y).tail(P.m);
  A.topRightCorner(P.m, k) = P.g_jacobian_y(x, y, J);
  A.row(P.m).setOnes();
  Vec b = Vec::Zero(P.m + 1);
  b[P.m] = 1.0;
  for (const Vec& z : polyhedron_vertices(A, b, P.tol.rank, P.tol.residual)) {
    Vec v = embed(z, J, P.p(), true);
    v /= v.sum();
    set.vertices.push_back(v);
    set.residual = std::max(set.residual, fj_residual(P, x, y, v));
  }
  set.kind = kind_of(set.vertices.size(), 0);
  return set;
}

MultiplierSet kkt_multipliers(const BilevelProblem& P, double x, const Vec& y) {
  MultiplierSet set;
  set.active = P.active_set(x, y);
  const auto& J = set.active;
  const int k = static_cast<int>(J.size());
  Mat G = P.g_jacobian_y(x, y, J);
  Vec b = -P.f.gradient(x, y).tail(P.m);
  for (const Vec& z : polyhedron_vertices(G, b, P.tol.rank, P.tol.residual)) {
    Vec v = embed(z, J, P.p(), false);
    set.vertices.push_back(v);
    set.residual = std::max(set.residual, kkt_residual(P, x, y, v));
  }
  if (!set.vertices.empty() && k > 0) {
    Mat R(P.m + 1, k);
    R.topRows(P.m) = G;
    R.row(P.m).setOnes();
    Vec e = Vec::Zero(P.m + 1);
    e[P.m] = 1.0;
    for (const Vec& d : polyhedron_vertices(R, e, P.tol.rank, P.tol.residual)) {
      Vec v = embed(d, J, P.p(), false);
      set.rays.push_back(v / v.cwiseAbs().maxCoeff());
    }
  }
  set.kind = kind_of(set.vertices.size(), set.rays.size());
  return set;
}

StationarityFlags stationarity_status(const BilevelProblem& P, double x, const Vec& y) {
  StationarityFlags flags;
  P.check_dimension(y);
  flags.feasible = P.lower_feasible(x, y);
  if (!flags.feasible) return flags;
  std::vector<int> J = P.active_set(x, y);
  const int k = static_cast<int>(J.size());
  Mat A(P.m, k + 1);
  A.col(0) = P.f.gradient(x, y).tail(P.m);
  A.rightCols(k) = P.g_jacobian_y(x, y, J);
  if (A.cols() > A.rows()) {
    flags.is_gc = true;
  } else {
    RankInfo ri = rank_info(A, P.tol.rank);
    double smax = ri.singular_values.size() ? ri.singular_values[0] : 0.0;
    double smin = ri.singular_values.size() ? ri.singular_values[ri.singular_values.size() - 1] : 0.0;
    // The second term admits every vector the FJ test accepts.
    double cut = std::max(P.tol.rank * std::max(smax, 1.0),
                          std::sqrt(double(P.m) * double(k + 1)) * P.tol.residual * 2.0);
    flags.is_gc = smin <= cut;
  }
  flags.is_fj = !fj_multipliers(P, x, y).empty();
  flags.is_kkt = !kkt_multipliers(P, x, y).empty();
  if (flags.is_kkt) {
    flags.b_status = BStatus::KktCertified;
  } else {
    bool affine = true;
    for (int j : J) affine = affine && P.g[j].affine_in_y();
    if (affine || check_mfcq(P, x, y).holds) flags.b_status = BStatus::KktCertified;
  }
  return flags;
}

}  // namespace parcalm

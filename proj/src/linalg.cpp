#include "parcalm/linalg.hpp"

#include <Eigen/SVD>
#include <limits>

namespace parcalm {

RankInfo rank_info(const Mat& A, double rel_tol, double floor) {
  RankInfo info;
  if (A.rows() == 0 || A.cols() == 0) {
    info.condition = A.cols() == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return info;
  }
  Eigen::JacobiSVD<Mat> svd(A);
  info.singular_values = svd.singularValues();
  double smax = info.singular_values[0];
  double cut = rel_tol * std::max(smax, floor);
  for (int i = 0; i < info.singular_values.size(); ++i)
    if (info.singular_values[i] > cut) ++info.rank;
  if (A.rows() < A.cols()) {
    info.condition = std::numeric_limits<double>::infinity();
  } else {
    double smin = info.singular_values[info.singular_values.size() - 1];
    info.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  }
  return info;
}

Mat null_space(const Mat& A, double rel_tol, double floor) {
  const int n = static_cast<int>(A.cols());
  if (n == 0) return Mat(0, 0);
  if (A.rows() == 0) return Mat::Identity(n, n);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  double smax = s.size() ? s[0] : 0.0;
  double cut = rel_tol * std::max(smax, floor);
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > cut) ++r;
  return svd.matrixV().rightCols(n - r);
}

Vec lstsq(const Mat& A, const Vec& b) {
  if (A.cols() == 0) return Vec(0);
  if (A.rows() == 0) return Vec::Zero(A.cols());
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
  cod.setThreshold(1e-13);
  return cod.solve(b);
}

SignedSolve solve_with_signs(const Mat& A, const Vec& b, const Mat& C, double tol) {
  SignedSolve out;
  out.z = lstsq(A, b);
  out.residual = A.rows() ? (A * out.z - b).cwiseAbs().maxCoeff() : 0.0;
  auto worst = [&](const Vec& z) {
    return C.rows() ? (C * z).maxCoeff() : -std::numeric_limits<double>::infinity();
  };
  out.worst_sign = worst(out.z);
  if (out.worst_sign <= tol || C.rows() == 0) return out;
  Mat N = null_space(A, 1e-10);
  if (N.cols() == 0) return out;
  Mat D = C * N;
  Vec e = -(C * out.z);
  const int rows = static_cast<int>(D.rows());
  SignedSolve best = out;
  for_each_subset(rows, std::min<int>(rows, static_cast<int>(N.cols())), [&](const std::vector<int>& T) {
    if (best.worst_sign <= tol) return;
    Mat DT(T.size(), D.cols());
    Vec eT(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) {
      DT.row(i) = D.row(T[i]);
      eT[i] = e[T[i]];
    }
    Vec t = T.empty() ? Vec::Zero(N.cols()) : lstsq(DT, eT);
    Vec z = out.z + N * t;
    double w = worst(z);
    if (w < best.worst_sign) {
      best.z = z;
      best.worst_sign = w;
      best.residual = A.rows() ? (A * z - b).cwiseAbs().maxCoeff() : 0.0;
    }
  });
  return best;
}

std::vector<Vec> polyhedron_vertices(const Mat& A, const Vec& b, double rank_tol, double feas_tol) {
  std::vector<Vec> vertices;
  const int n = static_cast<int>(A.cols());
  const double bscale = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  const int r = rank_info(A, rank_tol).rank;
  auto add = [&](const Vec& z) {
    for (const Vec& v : vertices)
      if ((v - z).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + z.cwiseAbs().maxCoeff())) return;
    vertices.push_back(z);
  };
  for_each_subset(n, r, [&](const std::vector<int>& S) {
    Vec z = Vec::Zero(n);
    if (!S.empty()) {
      Mat AS(A.rows(), S.size());
      for (std::size_t k = 0; k < S.size(); ++k) AS.col(k) = A.col(S[k]);
      if (rank_info(AS, rank_tol).rank != static_cast<int>(S.size())) return;
      Vec zS = lstsq(AS, b);
      for (std::size_t k = 0; k < S.size(); ++k) z[S[k]] = zS[k];
    }
    if (z.size() && z.minCoeff() < -feas_tol) return;
    z = z.cwiseMax(0.0);
    double res = A.rows() ? (A * z - b).cwiseAbs().maxCoeff() : 0.0;
    if (res > feas_tol * bscale) return;
    add(z);
  });
  return vertices;
}

HullPoint min_norm_hull_point(const Mat& A) {
  HullPoint best;
  const int k = static_cast<int>(A.cols());
  double best_norm = std::numeric_limits<double>::infinity();
  for_each_subset(k, k, [&](const std::vector<int>& S) {
    if (S.empty()) return;
    const int s = static_cast<int>(S.size());
    Mat AS(A.rows(), s);
    for (int i = 0; i < s; ++i) AS.col(i) = A.col(S[i]);
    Mat K = Mat::Zero(s + 1, s + 1);
    K.topLeftCorner(s, s) = AS.transpose() * AS;
    K.block(0, s, s, 1).setOnes();
    K.block(s, 0, 1, s).setOnes();
    Vec rhs = Vec::Zero(s + 1);
    rhs[s] = 1.0;
    Vec sol = lstsq(K, rhs);
    Vec lam = sol.head(s);
    if (lam.minCoeff() < -1e-12 || std::abs(lam.sum() - 1.0) > 1e-9) return;
    lam = lam.cwiseMax(0.0);
    lam /= lam.sum();
    Vec pnt = AS * lam;
    double nrm = pnt.norm();
    if (nrm < best_norm - 1e-15) {
      best_norm = nrm;
      best.point = pnt;
      best.weights = Vec::Zero(k);
      for (int i = 0; i < s; ++i) best.weights[S[i]] = lam[i];
    }
  });
  return best;
}

NewtonResult gauss_newton(const ResidualFn& eval, Vec z0, double tol, int max_iter) {
  NewtonResult out;
  out.z = std::move(z0);
  Vec r;
  Mat J;
  if (!eval(out.z, r, J)) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  // Convergence is judged in the max norm. A step is accepted when it lowers
  // the 2-norm of r or the natural level |J_old^+ r_new| (affine invariant,
  // so badly scaled rows do not stall the iteration).
  auto maxabs = [](const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  double norm = maxabs(r);
  double merit = r.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    if (norm <= tol) break;
    Vec step = lstsq(J, -r);
    if (!step.allFinite()) break;
    const double step_norm = step.norm();
    double alpha = 1.0;
    bool moved = false;
    Vec r_new;
    Mat J_new;
    for (int k = 0; k < 30; ++k, alpha *= 0.5) {
      Vec z = out.z + alpha * step;
      if (!eval(z, r_new, J_new)) continue;
      double n_new = maxabs(r_new);
      double m_new = r_new.squaredNorm();
      bool natural = lstsq(J, r_new).norm() <= (1.0 - alpha / 4.0) * step_norm;
      if (m_new < merit || natural || n_new <= tol) {
        out.z = z;
        r = r_new;
        J = J_new;
        norm = n_new;
        merit = m_new;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  out.residual = norm;
  out.converged = norm <= tol;
  return out;
}

}  // namespace parcalm

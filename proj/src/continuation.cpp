#include "parcalm/continuation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "parcalm/errors.hpp"
#include "parcalm/linalg.hpp"

namespace parcalm {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::MultiplierZero: return "multiplier-zero";
    case EventKind::EigenvalueZero: return "eigenvalue-zero";
    case EventKind::ConstraintActivation: return "constraint-activation";
    case EventKind::LicqLoss: return "licq-loss";
    case EventKind::BoxExit: return "box-exit";
  }
  return "?";
}

ActiveSystem active_system(const BilevelProblem& P, const BranchPoint& b) {
  const int m = P.m;
  const int k = static_cast<int>(b.J.size());
  Vec u = Vec::Zero(P.p());
  for (int j : b.J) u[j] = b.u[j];
  Mat H = P.lagrangian_hessian(b.x, b.y, 1.0, u);
  Mat G = P.g_jacobian_y(b.x, b.y, b.J);
  ActiveSystem s;
  s.residual.resize(m + k);
  s.residual.head(m) = P.f.gradient(b.x, b.y).tail(m);
  for (int i = 0; i < k; ++i) {
    s.residual.head(m) += u[b.J[i]] * G.col(i);
    s.residual[m + i] = P.g[b.J[i]].value(b.x, b.y);
  }
  s.jac_yu = Mat::Zero(m + k, m + k);
  s.jac_yu.topLeftCorner(m, m) = H.bottomRightCorner(m, m);
  s.jac_yu.topRightCorner(m, k) = G;
  s.jac_yu.bottomLeftCorner(k, m) = G.transpose();
  s.jac_x.resize(m + k);
  s.jac_x.head(m) = H.col(0).tail(m);
  s.jac_x.tail(k) = P.g_jacobian_x(b.x, b.y, b.J);
  return s;
}

double active_residual(const BilevelProblem& P, const BranchPoint& b) {
  Vec r = active_system(P, b).residual;
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

BranchDerivatives implicit_derivatives(const BilevelProblem& P, const BranchPoint& b) {
  ActiveSystem s = active_system(P, b);
  const int m = P.m;
  const int k = static_cast<int>(b.J.size());
  RankInfo ri = rank_info(s.jac_yu, P.tol.rank, 0.0);
  BranchDerivatives d;
  d.condition = ri.condition;
  if (ri.rank < m + k) {
    Eigen::JacobiSVD<Mat> svd(s.jac_yu, Eigen::ComputeFullV);
    std::ostringstream msg;
    msg << "singular branch Jacobian at x = " << b.x << "; near-null directions:";
    const Vec& sv = svd.singularValues();
    for (int c = ri.rank; c < m + k; ++c) {
      msg << " [";
      Vec v = svd.matrixV().col(c);
      for (int i = 0; i < m + k; ++i) {
        if (std::abs(v[i]) < 1e-6) continue;
        msg << (i < m ? "y" + std::to_string(i + 1) : "u" + std::to_string(b.J[i - m] + 1)) << ":"
            << v[i] << " ";
      }
      msg << "sigma=" << sv[c] << "]";
    }
    throw NumericalError(msg.str());
  }
  Vec z = s.jac_yu.fullPivLu().solve(-s.jac_x);
  d.dy = z.head(m);
  d.du = Vec::Zero(P.p());
  for (int i = 0; i < k; ++i) d.du[b.J[i]] = z[m + i];
  return d;
}

std::optional<BranchPoint> correct(const BilevelProblem& P, const BranchPoint& guess, int max_iter) {
  const int m = P.m;
  const int k = static_cast<int>(guess.J.size());
  BranchPoint work = guess;
  if (work.u.size() != P.p()) work.u = Vec::Zero(P.p());
  auto eval = [&](const Vec& z, Vec& r, Mat& Jac) {
    work.y = z.head(m);
    for (int i = 0; i < k; ++i) work.u[work.J[i]] = z[m + i];
    try {
      ActiveSystem s = active_system(P, work);
      r = s.residual;
      Jac = s.jac_yu;
    } catch (const DomainError&) {
      return false;
    }
    return r.allFinite() && Jac.allFinite();
  };
  Vec z0(m + k);
  z0.head(m) = guess.y;
  for (int i = 0; i < k; ++i) z0[m + i] = work.u[work.J[i]];
  double scale = 1.0 + z0.cwiseAbs().maxCoeff();
  NewtonResult nr = gauss_newton(eval, z0, 1e-13 * scale, max_iter);
  if (!nr.converged) {
    if (!(nr.residual <= 1e-10 * scale)) return std::nullopt;
  }
  BranchPoint out = guess;
  out.y = nr.z.head(m);
  out.u = Vec::Zero(P.p());
  for (int i = 0; i < k; ++i) out.u[guess.J[i]] = nr.z[m + i];
  return out;
}

// ---------------------------------------------------------------- tracing

namespace {

struct Probe {
  bool ok = true;
  Vec g;           // all constraint values
  Vec eig;         // reduced Hessian eigenvalues
  double cond = 0.0;
};

Probe probe(const BilevelProblem& P, const BranchPoint& b) {
  Probe pr;
  try {
    pr.g = P.g_values(b.x, b.y);
    ActiveSystem s = active_system(P, b);
    pr.cond = rank_info(s.jac_yu, P.tol.rank, 0.0).condition;
    Mat G = P.g_jacobian_y(b.x, b.y, b.J);
    Mat V = b.J.empty() ? Mat(Mat::Identity(P.m, P.m)) : null_space(G.transpose(), P.tol.rank, 0.0);
    Vec u = Vec::Zero(P.p());
    for (int j : b.J) u[j] = b.u[j];
    Mat H = P.lagrangian_hessian(b.x, b.y, 1.0, u).bottomRightCorner(P.m, P.m);
    if (V.cols() > 0) {
      Mat R = V.transpose() * H * V;
      pr.eig = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (R + R.transpose())).eigenvalues();
    }
  } catch (const Error&) {
    pr.ok = false;
  }
  return pr;
}

double box_margin(const BilevelProblem& P, const BranchPoint& b) {
  double d = std::min(b.x - P.box.x_lo, P.box.x_hi - b.x);
  for (int i = 0; i < P.m; ++i) d = std::min({d, b.y[i] - P.box.y_lo[i], P.box.y_hi[i] - b.y[i]});
  return d;
}

// Event function: positive before the event, non-positive after it.
struct EventFn {
  EventKind kind;
  int index;
  double sign = 1.0;
  Vec signs;

  double operator()(const BilevelProblem& P, const BranchPoint& b, const Probe& pr) const {
    switch (kind) {
      case EventKind::MultiplierZero: return sign * b.u[index] - P.tol.multiplier;
      case EventKind::EigenvalueZero: {
        double v = std::numeric_limits<double>::infinity();
        for (int i = 0; i < pr.eig.size() && i < signs.size(); ++i) v = std::min(v, signs[i] * pr.eig[i]);
        return v - P.tol.eigenvalue;
      }
      case EventKind::ConstraintActivation: return -pr.g[index] - P.tol.active;
      case EventKind::LicqLoss: return std::log(1.0 / P.tol.rank) - std::log(pr.cond);
      case EventKind::BoxExit: return box_margin(P, b);
    }
    return 1.0;
  }
};

std::vector<EventFn> armed_events(const BilevelProblem& P, const BranchPoint& b, const Probe& pr) {
  std::vector<EventFn> evs;
  for (int j : b.J) {
    if (std::abs(b.u[j]) > P.tol.multiplier)
      evs.push_back({EventKind::MultiplierZero, j, b.u[j] > 0 ? 1.0 : -1.0, {}});
  }
  if (pr.eig.size() && pr.eig.cwiseAbs().minCoeff() > P.tol.eigenvalue) {
    EventFn e{EventKind::EigenvalueZero, -1, 1.0, pr.eig.cwiseSign()};
    evs.push_back(e);
  }
  for (int j = 0; j < P.p(); ++j) {
    if (std::find(b.J.begin(), b.J.end(), j) != b.J.end()) continue;
    if (pr.g[j] < -P.tol.active) evs.push_back({EventKind::ConstraintActivation, j, 1.0, {}});
  }
  if (pr.cond <= 1.0 / P.tol.rank) evs.push_back({EventKind::LicqLoss, -1, 1.0, {}});
  if (box_margin(P, b) > 0.0) evs.push_back({EventKind::BoxExit, -1, 1.0, {}});
  return evs;
}

Sample make_sample(const BilevelProblem& P, const BranchPoint& b, bool label) {
  Sample s;
  s.x = b.x;
  s.y = b.y;
  s.u = b.u;
  s.J = b.J;
  if (label) {
    try {
      s.type = classify_point(P, b.x, b.y).type;
    } catch (const Error&) {
      s.type = PointType::NotClassifiable;
    }
  }
  return s;
}

// Predictor from `from` to x, then corrector.
std::optional<BranchPoint> step_to(const BilevelProblem& P, const BranchPoint& from, double x) {
  BranchPoint guess = from;
  guess.x = x;
  try {
    BranchDerivatives d = implicit_derivatives(P, from);
    guess.y = from.y + (x - from.x) * d.dy;
    guess.u = from.u + (x - from.x) * d.du;
  } catch (const Error&) {
  }
  return correct(P, guess);
}

}  // namespace

CurveSegment trace_branch(const BilevelProblem& P, const BranchPoint& seed, double x_end,
                          double step, const TraceOptions& opt) {
  P.check_dimension(seed.y);
  if (!(step > 0.0)) throw PreconditionError("trace step must be positive");
  if (seed.u.size() != P.p()) throw PreconditionError("seed multiplier must have length p");
  double r0 = active_residual(P, seed);
  if (r0 > P.tol.residual)
    throw PreconditionError("seed does not satisfy the active-set system (residual " +
                            std::to_string(r0) + ")");
  try {
    implicit_derivatives(P, seed);
  } catch (const NumericalError& e) {
    throw PreconditionError(std::string("seed Jacobian is singular: ") + e.what());
  }
  CurveSegment seg;
  BranchPoint cur = seed;
  if (auto c = correct(P, seed)) cur = *c;
  seg.samples.push_back(make_sample(P, cur, opt.label));
  const double dir = x_end >= seed.x ? 1.0 : -1.0;
  double h = step;
  while (true) {
    double remaining = std::abs(x_end - cur.x);
    if (remaining <= 1e-15 * (1.0 + std::abs(x_end))) {
      seg.stop_reason = "range end";
      return seg;
    }
    Probe pa = probe(P, cur);
    std::vector<EventFn> evs = armed_events(P, cur, pa);
    double h_try = std::min(h, remaining);
    std::optional<BranchPoint> next;
    while (true) {
      next = step_to(P, cur, cur.x + dir * h_try);
      if (next && probe(P, *next).ok) break;
      h_try *= 0.5;
      if (h_try < opt.min_step) {
        seg.stop_reason = "corrector failure";
        return seg;
      }
    }
    Probe pb = probe(P, *next);
    // First event (closest to cur after bisection) wins.
    const EventFn* hit = nullptr;
    BranchPoint lo = cur, hi = *next;
    double best_x = std::numeric_limits<double>::infinity();
    BranchPoint best_lo, best_hi;
    for (const EventFn& ev : evs) {
      if (ev(P, hi, pb) > 0.0) continue;
      BranchPoint a = lo, b = hi;
      while (std::abs(b.x - a.x) > opt.event_tol) {
        double xm = 0.5 * (a.x + b.x);
        auto mid = step_to(P, a, xm);
        Probe pm;
        if (mid) pm = probe(P, *mid);
        if (!mid || !pm.ok) {
          b.x = xm;  // unreachable region behaves like the event side
          continue;
        }
        if (ev(P, *mid, pm) > 0.0) a = *mid;
        else b = *mid;
      }
      double xe = 0.5 * (a.x + b.x);
      if (std::abs(xe - cur.x) < best_x) {
        best_x = std::abs(xe - cur.x);
        hit = &ev;
        best_lo = a;
        best_hi = b;
      }
    }
    if (hit) {
      Event e;
      e.kind = hit->kind;
      e.index = hit->index;
      e.x = 0.5 * (best_lo.x + best_hi.x);
      if (hit->index >= 0) e.detail = "g" + std::to_string(hit->index + 1);
      seg.events.push_back(e);
      Sample s = make_sample(P, best_lo, opt.label);
      s.event = true;
      seg.samples.push_back(s);
      seg.stop_reason = to_string(e.kind);
      return seg;
    }
    cur = *next;
    seg.samples.push_back(make_sample(P, cur, opt.label));
    h = std::min(step, 2.0 * h_try);
  }
}

// ---------------------------------------------------------------- global solve

namespace {

struct Candidate {
  Vec y;
  Vec u;
  double f;
};

int grid_per_axis(const BilevelProblem& P) {
  if (P.m == 1) return P.tol.grid;
  const double cap = 40000.0;
  int n = static_cast<int>(std::floor(std::pow(cap, 1.0 / P.m)));
  return std::max(8, std::min(P.tol.grid, n));
}

}  // namespace

LowerSolution solve_lower_global(const BilevelProblem& P, double x) {
  LowerSolution sol;
  sol.x = x;
  const int m = P.m;
  const int p = P.p();
  const int N = grid_per_axis(P);
  long total = 1;
  for (int i = 0; i < m; ++i) total *= N;
  Vec h(m);
  for (int i = 0; i < m; ++i) h[i] = (P.box.y_hi[i] - P.box.y_lo[i]) / (N - 1);

  std::vector<double> fv(total), viol(total);
  std::vector<int> idx(m, 0);
  Vec y(m);
  auto point_of = [&](long flat, Vec& out) {
    for (int i = 0; i < m; ++i) {
      out[i] = P.box.y_lo[i] + h[i] * static_cast<double>(flat % N);
      flat /= N;
    }
  };
  bool any_feasible = false;
  for (long t = 0; t < total; ++t) {
    point_of(t, y);
    double v = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int j = 0; j < p; ++j) {
      double gj = P.g[j].value_or_nan(x, y);
      if (std::isnan(gj)) ok = false;
      v = std::max(v, gj);
    }
    viol[t] = ok ? v : std::numeric_limits<double>::infinity();
    double f = P.f.value_or_nan(x, y);
    fv[t] = (ok && v <= 0.0 && std::isfinite(f)) ? f : std::numeric_limits<double>::infinity();
    any_feasible = any_feasible || std::isfinite(fv[t]);
  }

  // Seeds: discrete local minima, or least-violation points when nothing is feasible.
  std::vector<std::pair<double, long>> ranked;
  if (any_feasible) {
    for (long t = 0; t < total; ++t) {
      if (!std::isfinite(fv[t])) continue;
      bool is_min = true;
      long stride = 1;
      for (int i = 0; i < m && is_min; ++i, stride *= N) {
        long c = (t / stride) % N;
        if (c > 0 && fv[t - stride] < fv[t]) is_min = false;
        if (c < N - 1 && fv[t + stride] < fv[t]) is_min = false;
      }
      if (is_min) ranked.push_back({fv[t], t});
    }
  } else {
    for (long t = 0; t < total; ++t)
      if (std::isfinite(viol[t])) ranked.push_back({viol[t], t});
  }
  std::sort(ranked.begin(), ranked.end());
  // Keep seeds at least two cells apart.
  std::vector<Vec> seeds;
  for (const auto& [val, t] : ranked) {
    if (static_cast<int>(seeds.size()) >= P.tol.multistart) break;
    point_of(t, y);
    bool close = false;
    for (const Vec& s : seeds) close = close || ((s - y).cwiseAbs().array() <= 2.0 * h.array()).all();
    if (!close) seeds.push_back(y);
  }

  std::vector<Candidate> cands;
  auto consider = [&](const Vec& yc, const Vec& uc) {
    if (!yc.allFinite() || !P.lower_feasible(x, yc)) return;
    for (int i = 0; i < m; ++i)
      if (yc[i] < P.box.y_lo[i] - 1e-9 || yc[i] > P.box.y_hi[i] + 1e-9) return;
    double f = P.f.value_or_nan(x, yc);
    if (!std::isfinite(f)) return;
    cands.push_back({yc, uc, f});
  };

  const double hmax = h.maxCoeff();
  for (const Vec& s : seeds) {
    std::vector<int> near;
    for (int j = 0; j < p; ++j) {
      double gj = P.g[j].value_or_nan(x, s);
      if (std::isnan(gj)) continue;
      double slope = P.g[j].gradient(x, s).tail(m).cwiseAbs().sum();
      if (gj >= -(2.0 * hmax * slope + 1e-9)) near.push_back(j);
    }
    const int nn = static_cast<int>(near.size());
    for_each_subset(nn, std::min(nn, m + 1), [&](const std::vector<int>& sub) {
      std::vector<int> J;
      for (int i : sub) J.push_back(near[i]);
      const int k = static_cast<int>(J.size());
      if (k <= m) {
        BranchPoint b;
        b.x = x;
        b.y = s;
        b.J = J;
        b.u = Vec::Zero(p);
        try {
          Vec uJ = lstsq(P.g_jacobian_y(x, s, J), -P.f.gradient(x, s).tail(m));
          for (int i = 0; i < k; ++i) b.u[J[i]] = uJ[i];
        } catch (const Error&) {
        }
        if (auto c = correct(P, b)) consider(c->y, c->u);
      }
      if (k >= 1) {
        // Abnormal Fritz John system: sum u_j grad g_j = 0, g_J = 0, sum u = 1.
        auto eval = [&](const Vec& z, Vec& r, Mat& Jac) {
          Vec yy = z.head(m);
          r.resize(m + k + 1);
          Jac = Mat::Zero(m + k + 1, m + k);
          r.head(m).setZero();
          try {
            for (int i = 0; i < k; ++i) {
              const auto& gj = P.g[J[i]];
              Vec grad = gj.gradient(x, yy).tail(m);
              Mat Hj = gj.hessian(x, yy).bottomRightCorner(m, m);
              r.head(m) += z[m + i] * grad;
              Jac.topLeftCorner(m, m) += z[m + i] * Hj;
              Jac.block(0, m + i, m, 1) = grad;
              r[m + i] = gj.value(x, yy);
              Jac.block(m + i, 0, 1, m) = grad.transpose();
              Jac(m + k, m + i) = 1.0;
            }
          } catch (const DomainError&) {
            return false;
          }
          r[m + k] = z.tail(k).sum() - 1.0;
          return r.allFinite();
        };
        Vec z0(m + k);
        z0.head(m) = s;
        z0.tail(k).setConstant(1.0 / k);
        NewtonResult nr = gauss_newton(eval, z0, 1e-13, 60);
        if (nr.converged && nr.z.tail(k).minCoeff() >= -1e-9) {
          Vec u = Vec::Zero(p);
          consider(nr.z.head(m), u);
        }
      }
    });
  }
  if (cands.empty()) {
    for (const Vec& s : seeds) consider(s, Vec::Zero(p));
    if (!cands.empty()) {
      sol.inconclusive = true;
      sol.note = "Newton refinement failed; unrefined grid minimizers";
    }
  }
  if (cands.empty()) {
    sol.value = std::numeric_limits<double>::infinity();
    sol.note = "no feasible point found";
    return sol;
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.f < b.f; });
  sol.value = cands.front().f;
  for (const Candidate& c : cands) {
    if (c.f > sol.value + P.tol.residual) break;
    bool dup = false;
    for (const Vec& q : sol.points) dup = dup || (q - c.y).norm() <= 1e-6 * (1.0 + c.y.norm());
    if (dup) continue;
    sol.points.push_back(c.y);
    sol.multipliers.push_back(c.u);
  }
  for (const Vec& q : sol.points) {
    for (int i = 0; i < m; ++i) {
      double tol = 1e-9 * (P.box.y_hi[i] - P.box.y_lo[i]);
      if (q[i] <= P.box.y_lo[i] + tol || q[i] >= P.box.y_hi[i] - tol) {
        sol.inconclusive = true;
        sol.note = "minimizer on the search-box boundary";
      }
    }
  }
  return sol;
}

double value_function(const BilevelProblem& P, double x) {
  LowerSolution s = solve_lower_global(P, x);
  if (s.inconclusive) throw InconclusiveError("value function inconclusive at x = " + std::to_string(x));
  return s.value;
}

double distance_to_set(const Vec& y, const std::vector<Vec>& S) {
  double d = std::numeric_limits<double>::infinity();
  for (const Vec& s : S) d = std::min(d, (s - y).norm());
  return d;
}

const LowerSolution& LowerCache::get(double x) {
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(x);
    if (it != memo_.end()) return it->second;
  }
  // Solve outside the lock so concurrent callers do not serialize; the first insert wins.
  LowerSolution s = solve_lower_global(P_, x);
  std::lock_guard lock(mutex_);
  return memo_.emplace(x, std::move(s)).first->second;
}

SolutionMap value_function_map(const BilevelProblem& P, double x_lo, double x_hi, int count) {
  if (count < 2 || !(x_lo < x_hi)) throw PreconditionError("value-function grid needs count >= 2 and lo < hi");
  SolutionMap map;
  for (int i = 0; i < count; ++i) {
    double x = x_lo + (x_hi - x_lo) * i / (count - 1);
    map.rows.push_back(solve_lower_global(P, x));
  }
  return map;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ProblemError("CSV: malformed number '" + s + "'");
  return v;
}

PointType parse_type(const std::string& s) {
  for (PointType t : {PointType::T1, PointType::T2, PointType::T3, PointType::T4, PointType::T5_1,
                      PointType::T5_2, PointType::NotClassifiable})
    if (to_string(t) == s) return t;
  throw ProblemError("CSV: unknown type label '" + s + "'");
}

}  // namespace

std::string to_csv(const CurveSegment& c, int m, int p) {
  std::ostringstream out;
  out << "x";
  for (int i = 1; i <= m; ++i) out << ",y" << i;
  for (int j = 1; j <= p; ++j) out << ",u" << j;
  out << ",active,type,event\n";
  for (const Sample& s : c.samples) {
    out << fmt(s.x);
    for (int i = 0; i < m; ++i) out << "," << fmt(s.y[i]);
    for (int j = 0; j < p; ++j) out << "," << fmt(s.u[j]);
    unsigned long mask = 0;
    for (int j : s.J) mask |= 1ul << j;
    out << "," << mask << "," << to_string(s.type) << "," << (s.event ? 1 : 0) << "\n";
  }
  return out.str();
}

CurveSegment curve_from_csv(const std::string& text, int m, int p) {
  CurveSegment c;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ProblemError("CSV: missing header");
  const std::size_t cols = 1 + m + p + 3;
  if (split(line).size() != cols) throw ProblemError("CSV: header has wrong column count");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != cols) throw ProblemError("CSV: row has wrong column count");
    Sample s;
    s.x = parse_num(f[0]);
    s.y.resize(m);
    s.u.resize(p);
    for (int i = 0; i < m; ++i) s.y[i] = parse_num(f[1 + i]);
    for (int j = 0; j < p; ++j) s.u[j] = parse_num(f[1 + m + j]);
    unsigned long mask = std::stoul(f[1 + m + p]);
    for (int j = 0; j < p; ++j)
      if (mask & (1ul << j)) s.J.push_back(j);
    s.type = parse_type(f[2 + m + p]);
    s.event = f[3 + m + p] == "1";
    c.samples.push_back(s);
  }
  return c;
}

std::string to_csv(const SolutionMap& s, int m) {
  std::ostringstream out;
  out << "x,member";
  for (int i = 1; i <= m; ++i) out << ",y" << i;
  out << ",V,inconclusive\n";
  for (const LowerSolution& row : s.rows) {
    if (row.points.empty()) {
      out << fmt(row.x) << ",-1";
      for (int i = 0; i < m; ++i) out << ",nan";
      out << "," << fmt(row.value) << "," << (row.inconclusive ? 1 : 0) << "\n";
      continue;
    }
    for (std::size_t k = 0; k < row.points.size(); ++k) {
      out << fmt(row.x) << "," << k;
      for (int i = 0; i < m; ++i) out << "," << fmt(row.points[k][i]);
      out << "," << fmt(row.value) << "," << (row.inconclusive ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

SolutionMap solution_map_from_csv(const std::string& text, int m) {
  SolutionMap s;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ProblemError("CSV: missing header");
  const std::size_t cols = 2 + m + 2;
  if (split(line).size() != cols) throw ProblemError("CSV: header has wrong column count");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != cols) throw ProblemError("CSV: row has wrong column count");
    double x = parse_num(f[0]);
    int member = std::stoi(f[1]);
    if (member <= 0 || s.rows.empty() || s.rows.back().x != x) {
      LowerSolution row;
      row.x = x;
      row.value = parse_num(f[2 + m]);
      row.inconclusive = f[3 + m] == "1";
      s.rows.push_back(row);
    }
    if (member >= 0) {
      Vec y(m);
      for (int i = 0; i < m; ++i) y[i] = parse_num(f[2 + i]);
      s.rows.back().points.push_back(y);
    }
  }
  return s;
}

}  // namespace parcalm

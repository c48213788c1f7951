#include "parcalm/calmness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "parcalm/classifier.hpp"
#include "parcalm/errors.hpp"
#include "parcalm/linalg.hpp"
#include "parcalm/multipliers.hpp"

namespace parcalm {

std::string to_string(SigmaKind k) {
  switch (k) {
    case SigmaKind::BSurrogate: return "B-surrogate";
    case SigmaKind::KKT: return "KKT";
    case SigmaKind::FJ: return "FJ";
    case SigmaKind::GC: return "gc";
    case SigmaKind::F: return "f";
  }
  return "?";
}

SigmaKind sigma_from_string(const std::string& s) {
  for (SigmaKind k : {SigmaKind::BSurrogate, SigmaKind::KKT, SigmaKind::FJ, SigmaKind::GC, SigmaKind::F}) {
    std::string name = to_string(k);
    std::string a = s, b = name;
    std::transform(a.begin(), a.end(), a.begin(), ::tolower);
    std::transform(b.begin(), b.end(), b.begin(), ::tolower);
    if (a == b) return k;
  }
  if (s == "B" || s == "b") return SigmaKind::BSurrogate;
  throw PreconditionError("unknown condition '" + s + "' (expected B-surrogate, KKT, FJ, gc or f)");
}

std::string to_string(ModulusVerdict v) {
  switch (v) {
    case ModulusVerdict::HoldsWithL: return "holds-with-L";
    case ModulusVerdict::NumeratorZero: return "numerator-zero";
    case ModulusVerdict::UnboundedSuspect: return "unbounded-suspect";
  }
  return "?";
}

namespace {

template <class Fn>
void parallel_for(int n, Fn&& fn) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(std::max(n, 1))));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

void check_ball(double radius, int count) {
  if (!(radius > 0.0)) throw PreconditionError("radius must be positive");
  if (count < 1) throw PreconditionError("sample count must be positive");
}

Vec unit_ball(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vec d(m);
  for (int i = 0; i < m; ++i) d[i] = normal(rng);
  double n = d.norm();
  if (n == 0.0) return Vec::Zero(m);
  return d / n * std::pow(unif(rng), 1.0 / m);
}

std::vector<double> grid(double a, double b, int count) {
  std::vector<double> xs(count);
  for (int i = 0; i < count; ++i) xs[i] = count == 1 ? a : a + (b - a) * i / (count - 1);
  return xs;
}

double ball_distance(double x, const Vec& y, double xbar, const Vec& ybar) {
  return std::sqrt((x - xbar) * (x - xbar) + (y - ybar).squaredNorm());
}

bool member_of(const BilevelProblem& P, SigmaKind kind, double x, const Vec& y) {
  StationarityFlags fl = stationarity_status(P, x, y);
  switch (kind) {
    case SigmaKind::FJ: return fl.is_fj;
    case SigmaKind::KKT:
    case SigmaKind::BSurrogate: return fl.is_kkt;
    case SigmaKind::GC: return fl.is_gc;
    case SigmaKind::F: return fl.feasible;
  }
  return false;
}

struct Collector {
  std::vector<SigmaSample> pts;
  void add(double x, const Vec& y) {
    for (const auto& s : pts)
      if (std::abs(s.x - x) <= 1e-7 && (s.y - y).norm() <= 1e-7) return;
    pts.push_back({x, y});
  }
};

// Newton solve of the multiplier system at fixed x with active set J.
std::optional<Vec> stationary_solve(const BilevelProblem& P, SigmaKind kind, double x, const std::vector<int>& J,
                                    const Vec& seed) {
  const int m = P.m;
  const int k = static_cast<int>(J.size());
  const bool has_u0 = kind != SigmaKind::KKT && kind != SigmaKind::BSurrogate;
  const int nu = k + (has_u0 ? 1 : 0);
  const int neq = m + k + (has_u0 ? 1 : 0);
  auto eval = [&](const Vec& z, Vec& r, Mat& Jac) {
    Vec y = z.head(m);
    double u0 = has_u0 ? z[m] : 1.0;
    r = Vec::Zero(neq);
    Jac = Mat::Zero(neq, m + nu);
    try {
      Vec gf = P.f.gradient(x, y).tail(m);
      r.head(m) = u0 * gf;
      Jac.topLeftCorner(m, m) = u0 * P.f.hessian(x, y).bottomRightCorner(m, m);
      if (has_u0) Jac.block(0, m, m, 1) = gf;
      const int uoff = m + (has_u0 ? 1 : 0);
      for (int i = 0; i < k; ++i) {
        const auto& g = P.g[J[i]];
        Vec gg = g.gradient(x, y).tail(m);
        double ui = z[uoff + i];
        r.head(m) += ui * gg;
        Jac.topLeftCorner(m, m) += ui * g.hessian(x, y).bottomRightCorner(m, m);
        Jac.block(0, uoff + i, m, 1) = gg;
        r[m + i] = g.value(x, y);
        Jac.block(m + i, 0, 1, m) = gg.transpose();
      }
      if (has_u0) {
        if (kind == SigmaKind::GC) {
          r[m + k] = z.tail(nu).squaredNorm() - 1.0;
          Jac.block(m + k, m, 1, nu) = 2.0 * z.tail(nu).transpose();
        } else {
          r[m + k] = z.tail(nu).sum() - 1.0;
          Jac.block(m + k, m, 1, nu).setOnes();
        }
      }
    } catch (const DomainError&) {
      return false;
    }
    return r.allFinite() && Jac.allFinite();
  };
  Vec z0(m + nu);
  z0.head(m) = seed;
  if (has_u0) {
    double init = kind == SigmaKind::GC ? 1.0 / std::sqrt(double(nu)) : 1.0 / nu;
    z0.tail(nu).setConstant(init);
  } else if (k > 0) {
    try {
      z0.tail(k) = lstsq(P.g_jacobian_y(x, seed, J), -P.f.gradient(x, seed).tail(m));
    } catch (const Error&) {
      z0.tail(k).setOnes();
    }
  }
  NewtonResult nr = gauss_newton(eval, z0, 1e-14, 60);
  if (!nr.converged) return std::nullopt;
  if (kind != SigmaKind::GC && nu > 0 && nr.z.tail(nu).minCoeff() < -1e-9) return std::nullopt;
  return Vec(nr.z.head(m));
}

std::vector<std::vector<int>> constraint_subsets(const BilevelProblem& P, double xbar, const Vec& ybar,
                                                 double radius) {
  std::vector<int> pool;
  for (int j = 0; j < P.p(); ++j) {
    if (P.p() <= 10) {
      pool.push_back(j);
      continue;
    }
    Vec gg = P.g[j].gradient(xbar, ybar);
    if (P.g[j].value(xbar, ybar) >= -2.0 * radius * (1.0 + gg.norm())) pool.push_back(j);
  }
  std::vector<std::vector<int>> out;
  const int n = static_cast<int>(pool.size());
  for_each_subset(n, std::min(n, P.m + 1), [&](const std::vector<int>& s) {
    std::vector<int> J;
    for (int i : s) J.push_back(pool[i]);
    out.push_back(J);
  });
  return out;
}

void stationary_pass(const BilevelProblem& P, SigmaKind kind, double xbar, const Vec& ybar, double radius,
                     const std::vector<double>& xs, std::mt19937_64& rng, Collector& out) {
  const auto subsets = constraint_subsets(P, xbar, ybar, radius);
  std::vector<Vec> previous;
  for (double x : xs) {
    std::vector<Vec> seeds = {ybar};
    for (const Vec& y : previous) seeds.push_back(y);
    for (int i = 0; i < 3; ++i) seeds.push_back(ybar + radius * unit_ball(rng, P.m));
    std::vector<Vec> here;
    for (const auto& J : subsets) {
      for (const Vec& s : seeds) {
        auto y = stationary_solve(P, kind, x, J, s);
        if (!y || ball_distance(x, *y, xbar, ybar) > radius * (1.0 + 1e-12)) continue;
        if (!P.lower_feasible(x, *y)) continue;
        bool dup = false;
        for (const Vec& h : here) dup = dup || (h - *y).norm() <= 1e-7;
        if (!dup) here.push_back(*y);
      }
    }
    for (const Vec& y : here) out.add(x, y);
    previous = here;
  }
}

}  // namespace

std::vector<SigmaSample> sample_sigma(const BilevelProblem& P, double xbar, const Vec& ybar, double radius,
                                      int count, SigmaKind kind, std::uint64_t seed) {
  check_ball(radius, count);
  P.check_dimension(ybar);
  std::mt19937_64 rng(seed);
  Collector out;
  if (kind == SigmaKind::F) {
    std::vector<double> xs = grid(xbar - radius, xbar + radius, 65);
    std::uniform_int_distribution<int> pick(0, 64);
    for (long attempt = 0; attempt < 50L * count && static_cast<int>(out.pts.size()) < count; ++attempt) {
      double x = xs[pick(rng)];
      double ry = std::sqrt(std::max(0.0, radius * radius - (x - xbar) * (x - xbar)));
      Vec y = ybar + ry * unit_ball(rng, P.m);
      if (P.lower_feasible(x, y)) out.pts.push_back({x, y});
    }
    return out.pts;
  }
  if (P.lower_feasible(xbar, ybar) && member_of(P, kind, xbar, ybar)) out.add(xbar, ybar);
  std::vector<double> xs = grid(xbar - radius, xbar + radius, count);
  xs.push_back(xbar);
  stationary_pass(P, kind, xbar, ybar, radius, xs, rng, out);
  // Second pass concentrated on the x-range where points exist.
  if (static_cast<int>(out.pts.size()) < count && out.pts.size() > 1) {
    double a = out.pts[0].x, b = a;
    for (const auto& s : out.pts) {
      a = std::min(a, s.x);
      b = std::max(b, s.x);
    }
    if (b > a && b - a < 1.9 * radius) stationary_pass(P, kind, xbar, ybar, radius, grid(a, b, count), rng, out);
  }
  return out.pts;
}

double distance_to_m(const MSample& M, double x, const Vec& y) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < M.x.size(); ++i) {
    double d2 = (M.x[i] - x) * (M.x[i] - x) + (M.y[i] - y).squaredNorm();
    best = std::min(best, d2);
  }
  for (auto [a, b] : M.segments) {
    // Point-to-segment distance in (x, y) space.
    double dx = M.x[b] - M.x[a];
    Vec dy = M.y[b] - M.y[a];
    double len2 = dx * dx + dy.squaredNorm();
    if (len2 == 0.0) continue;
    double t = ((x - M.x[a]) * dx + (y - M.y[a]).dot(dy)) / len2;
    t = std::clamp(t, 0.0, 1.0);
    double ex = M.x[a] + t * dx - x;
    Vec ey = M.y[a] + t * dy - y;
    best = std::min(best, ex * ex + ey.squaredNorm());
  }
  return std::sqrt(best);
}

namespace {

MSample build_m(const BilevelProblem& P, LowerCache& cache, double xbar, double radius, int count) {
  MSample M;
  double a = std::max(P.box.x_lo, xbar - 2.0 * radius);
  double b = std::min(P.box.x_hi, xbar + 2.0 * radius);
  std::vector<double> xs = grid(a, b, std::clamp(2 * count + 1, 201, 1601));
  parallel_for(static_cast<int>(xs.size()), [&](int i) { cache.get(xs[i]); });
  const double h = xs.size() > 1 ? xs[1] - xs[0] : 0.0;
  std::vector<int> prev;
  for (double x : xs) {
    const LowerSolution& s = cache.get(x);
    std::vector<int> cur;
    if (!s.inconclusive) {
      for (const Vec& y : s.points) {
        cur.push_back(static_cast<int>(M.x.size()));
        M.x.push_back(x);
        M.y.push_back(y);
      }
    }
    // Join each member to its nearest neighbour at the previous x when unambiguous.
    for (int c : cur) {
      int best = -1;
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      for (int q : prev) {
        double d = (M.y[q] - M.y[c]).norm();
        if (d < d1) {
          d2 = d1;
          d1 = d;
          best = q;
        } else if (d < d2) {
          d2 = d;
        }
      }
      if (best >= 0 && d1 <= std::max(0.25 * radius, 10.0 * h) && d1 < 0.5 * d2) M.segments.push_back({best, c});
    }
    prev = cur;
  }
  return M;
}

PEBReport modulus_impl(const BilevelProblem& P, double xbar, double radius, double v_max,
                       const std::vector<SigmaSample>& pts, bool uwsm, LowerCache& cache) {
  PEBReport r;
  r.uwsm = uwsm;
  r.radius = radius;
  r.v_max = v_max;
  r.samples = static_cast<int>(pts.size());
  parallel_for(static_cast<int>(pts.size()), [&](int i) { cache.get(pts[i].x); });
  if (!uwsm) {
    r.m = build_m(P, cache, xbar, radius, static_cast<int>(pts.size()));
    // Solution sets at the sample abscissae join M as isolated nodes.
    std::set<double> seen;
    for (const auto& s : pts) {
      if (!seen.insert(s.x).second) continue;
      const LowerSolution& sol = cache.get(s.x);
      if (sol.inconclusive) continue;
      for (const Vec& y : sol.points) {
        r.m.x.push_back(s.x);
        r.m.y.push_back(y);
      }
    }
  }
  const double d_tol = 1e-6;
  bool any_numerator = false;
  for (const auto& s : pts) {
    const LowerSolution& sol = cache.get(s.x);
    if (sol.inconclusive || sol.points.empty()) {
      ++r.dropped;
      continue;
    }
    RatioSample rs;
    rs.x = s.x;
    rs.y = s.y;
    rs.v = P.f.value(s.x, s.y) - sol.value;
    // Points at the minimal value belong to K(0) up to rounding.
    if (rs.v <= 1e-9 * (1.0 + std::abs(sol.value)) || rs.v > v_max) continue;
    rs.numerator = uwsm ? distance_to_set(s.y, sol.points) : distance_to_m(r.m, s.x, s.y);
    rs.ratio = rs.numerator > d_tol ? rs.numerator / rs.v : 0.0;
    any_numerator = any_numerator || rs.numerator > d_tol;
    ++r.used;
    if (rs.ratio > r.L || r.log.empty()) {
      if (rs.ratio >= r.L) {
        r.L = rs.ratio;
        r.worst = rs;
      }
    }
    r.log.push_back(rs);
  }
  r.verdict = any_numerator ? ModulusVerdict::HoldsWithL : ModulusVerdict::NumeratorZero;
  if (!any_numerator) r.L = 0.0;
  return r;
}

PEBReport refine(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, double v_max, int samples,
                 SigmaKind condition, std::uint64_t seed, bool uwsm) {
  check_ball(radius, samples);
  LowerCache cache(P);
  PEBReport base = modulus_impl(P, xbar, radius, v_max,
                                sample_sigma(P, xbar, ybar, radius, samples, condition, seed), uwsm, cache);
  base.condition = condition;
  base.level_L = {base.L};
  base.level_samples = {base.samples};
  if (base.verdict == ModulusVerdict::NumeratorZero) return base;
  for (int level = 1; level <= 2; ++level) {
    int n = samples << (2 * level);
    PEBReport r = modulus_impl(P, xbar, radius, v_max,
                               sample_sigma(P, xbar, ybar, radius, n, condition, seed + level), uwsm, cache);
    base.level_L.push_back(r.L);
    base.level_samples.push_back(r.samples);
  }
  if (base.level_L[2] >= 2.0 * base.level_L[0]) base.verdict = ModulusVerdict::UnboundedSuspect;
  return base;
}

}  // namespace

PEBReport modulus_on_samples(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, double v_max,
                             const std::vector<SigmaSample>& pts, bool uwsm) {
  P.check_dimension(ybar);
  LowerCache cache(P);
  return modulus_impl(P, xbar, radius, v_max, pts, uwsm, cache);
}

PEBReport estimate_peb_modulus(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, double v_max,
                               int samples, SigmaKind condition, std::uint64_t seed) {
  if (!P.lower_feasible(xbar, ybar)) throw PreconditionError("reference point is not lower-level feasible");
  if (!(v_max > 0.0)) throw PreconditionError("v_max must be positive");
  return refine(P, xbar, ybar, radius, v_max, samples, condition, seed, false);
}

PEBReport estimate_uwsm_modulus(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, int samples,
                                SigmaKind condition, std::uint64_t seed, double v_max) {
  if (!P.lower_feasible(xbar, ybar)) throw PreconditionError("reference point is not lower-level feasible");
  if (!(v_max > 0.0)) throw PreconditionError("v_max must be positive");
  return refine(P, xbar, ybar, radius, v_max, samples, condition, seed, true);
}

FjMinReport verify_fj_equals_min(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, int samples,
                                 std::uint64_t seed) {
  check_ball(radius, samples);
  ClassificationReport c = classify_simplicity(P, xbar, ybar);
  if (c.simple != SimplicityCase::I)
    throw PreconditionError("reference point is not a Case I simple point (" + c.simple_reason + ")");
  auto pts = sample_sigma(P, xbar, ybar, radius, samples, SigmaKind::FJ, seed);
  if (pts.empty()) throw InconclusiveError("no Fritz John points found near the reference point");
  LowerCache cache(P);
  parallel_for(static_cast<int>(pts.size()), [&](int i) { cache.get(pts[i].x); });
  FjMinReport r;
  for (const auto& s : pts) {
    const LowerSolution& sol = cache.get(s.x);
    if (sol.inconclusive) continue;
    ++r.samples;
    double d = distance_to_set(s.y, sol.points);
    if (d > r.max_distance || r.samples == 1) {
      r.max_distance = std::max(r.max_distance, d);
      r.worst = s;
    }
  }
  if (r.samples == 0) throw InconclusiveError("value function inconclusive at every sample");
  return r;
}

CalmnessReport verify_partial_calmness(const BilevelProblem& P, double xbar, const Vec& ybar, double mu,
                                       double radius, int samples, SigmaKind condition, std::uint64_t seed) {
  check_ball(radius, samples);
  if (!(mu >= 0.0)) throw PreconditionError("mu must be non-negative");
  if (!P.lower_feasible(xbar, ybar)) throw PreconditionError("reference point is not lower-level feasible");
  CalmnessReport r;
  r.condition = condition;
  r.mu = mu;
  r.radius = radius;
  auto pts = sample_sigma(P, xbar, ybar, radius, samples, condition, seed);
  LowerCache cache(P);
  parallel_for(static_cast<int>(pts.size()), [&](int i) { cache.get(pts[i].x); });
  const double Fbar = P.F.value(xbar, ybar);
  r.min_value = std::numeric_limits<double>::infinity();
  for (const auto& s : pts) {
    const LowerSolution& sol = cache.get(s.x);
    if (sol.inconclusive || sol.points.empty()) {
      ++r.dropped;
      continue;
    }
    if (!P.upper_feasible(s.x, s.y)) continue;
    CalmnessSample cs;
    cs.x = s.x;
    cs.y = s.y;
    double gap = std::max(0.0, P.f.value(s.x, s.y) - sol.value);
    cs.value = P.F.value(s.x, s.y) + mu * gap - Fbar;
    r.log.push_back(cs);
    if (cs.value < r.min_value) {
      r.min_value = cs.value;
      r.witness = cs;
    }
  }
  r.samples = static_cast<int>(r.log.size());
  if (r.samples == 0) throw InconclusiveError("no usable samples near the reference point");
  r.holds = r.min_value >= -P.tol.residual;
  return r;
}

double lipschitz_bound(const BilevelProblem& P, double xbar, const Vec& ybar, double radius, int samples,
                       std::uint64_t seed) {
  check_ball(radius, samples);
  std::mt19937_64 rng(seed);
  double best = P.F.gradient(xbar, ybar).norm();
  for (int i = 0; i < samples; ++i) {
    Vec d = unit_ball(rng, P.m + 1) * radius;
    Vec g = P.F.gradient(xbar + d[0], ybar + d.tail(P.m));
    if (g.allFinite()) best = std::max(best, g.norm());
  }
  return best;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const std::vector<RatioSample>& log, int m) {
  std::ostringstream out;
  out << "x";
  for (int i = 1; i <= m; ++i) out << ",y" << i;
  out << ",v,numerator,ratio\n";
  for (const auto& s : log) {
    out << fmt(s.x);
    for (int i = 0; i < m; ++i) out << "," << fmt(s.y[i]);
    out << "," << fmt(s.v) << "," << fmt(s.numerator) << "," << fmt(s.ratio) << "\n";
  }
  return out.str();
}

std::string to_csv(const std::vector<CalmnessSample>& log, int m) {
  std::ostringstream out;
  out << "x";
  for (int i = 1; i <= m; ++i) out << ",y" << i;
  out << ",value\n";
  for (const auto& s : log) {
    out << fmt(s.x);
    for (int i = 0; i < m; ++i) out << "," << fmt(s.y[i]);
    out << "," << fmt(s.value) << "\n";
  }
  return out.str();
}

}  // namespace parcalm

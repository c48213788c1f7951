#include "parcalm/problem.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "parcalm/errors.hpp"

namespace parcalm {

void Tolerances::validate() const {
  const std::pair<const char*, double> fields[] = {{"active", active},
                                                   {"rank", rank},
                                                   {"multiplier", multiplier},
                                                   {"eigenvalue", eigenvalue},
                                                   {"residual", residual}};
  for (const auto& [name, v] : fields)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ProblemError(std::string("tolerance '") + name + "' must be positive");
  if (grid < 8) throw ProblemError("tolerance 'grid' must be at least 8");
  if (multistart < 1) throw ProblemError("tolerance 'multistart' must be positive");
}

// ---------------------------------------------------------------- SmoothFunction

SmoothFunction::SmoothFunction(Expr e, int m) : expr_(std::move(e)), nvars_(m + 1), value_(expr_) {
  DerivativeCache cache;
  grad_expr_ = cache.gradient(expr_, nvars_);
  for (const Expr& d : grad_expr_) grad_.emplace_back(d);
  for (int i = 0; i < nvars_; ++i)
    for (int j = i; j < nvars_; ++j) {
      Expr h = cache.derivative(grad_expr_[i], j);
      if (i > 0 && j > 0 && !h.is_constant(0.0)) affine_in_y_ = false;
      hess_.emplace_back(h);
    }
}

double SmoothFunction::value(double x, const Vec& y) const {
  return value_(x, std::span<const double>(y.data(), y.size()));
}

double SmoothFunction::value_or_nan(double x, const Vec& y) const noexcept {
  return value_.value_or_nan(x, std::span<const double>(y.data(), y.size()));
}

Vec SmoothFunction::gradient(double x, const Vec& y) const {
  std::span<const double> s(y.data(), y.size());
  Vec out(nvars_);
  for (int i = 0; i < nvars_; ++i) out[i] = grad_[i](x, s);
  return out;
}

Mat SmoothFunction::hessian(double x, const Vec& y) const {
  std::span<const double> s(y.data(), y.size());
  Mat out(nvars_, nvars_);
  int k = 0;
  for (int i = 0; i < nvars_; ++i)
    for (int j = i; j < nvars_; ++j) {
      out(i, j) = hess_[k++](x, s);
      out(j, i) = out(i, j);
    }
  return out;
}

// ---------------------------------------------------------------- BilevelProblem

std::vector<int> BilevelProblem::active_set(double x, const Vec& y) const {
  check_dimension(y);
  std::vector<int> J;
  for (int j = 0; j < p(); ++j) {
    double v = g[j].value(x, y);
    if (v > tol.active)
      throw InfeasiblePointError("g" + std::to_string(j + 1) + " = " + std::to_string(v) +
                                 " > 0: point is not lower-level feasible");
    if (std::abs(v) <= tol.active) J.push_back(j);
  }
  return J;
}

bool BilevelProblem::lower_feasible(double x, const Vec& y) const {
  if (y.size() != m) return false;
  for (const auto& gj : g) {
    double v = gj.value_or_nan(x, y);
    if (!(v <= tol.active)) return false;
  }
  return true;
}

bool BilevelProblem::upper_feasible(double x, const Vec& y) const {
  if (y.size() != m) return false;
  for (const auto& Gk : G) {
    double v = Gk.value_or_nan(x, y);
    if (!(v <= tol.active)) return false;
  }
  return true;
}

Vec BilevelProblem::g_values(double x, const Vec& y) const {
  Vec out(p());
  for (int j = 0; j < p(); ++j) out[j] = g[j].value(x, y);
  return out;
}

Mat BilevelProblem::g_jacobian_y(double x, const Vec& y, const std::vector<int>& J) const {
  Mat out(m, static_cast<int>(J.size()));
  for (std::size_t k = 0; k < J.size(); ++k) out.col(k) = g[J[k]].gradient(x, y).tail(m);
  return out;
}

Vec BilevelProblem::g_jacobian_x(double x, const Vec& y, const std::vector<int>& J) const {
  Vec out(static_cast<int>(J.size()));
  for (std::size_t k = 0; k < J.size(); ++k) out[k] = g[J[k]].gradient(x, y)[0];
  return out;
}

Mat BilevelProblem::lagrangian_hessian(double x, const Vec& y, double u0, const Vec& u) const {
  Mat H = Mat::Zero(m + 1, m + 1);
  if (u0 != 0.0) H += u0 * f.hessian(x, y);
  for (int j = 0; j < p(); ++j)
    if (u[j] != 0.0) H += u[j] * g[j].hessian(x, y);
  return H;
}

bool BilevelProblem::in_box(double x, const Vec& y) const {
  if (x < box.x_lo || x > box.x_hi) return false;
  for (int i = 0; i < m; ++i)
    if (y[i] < box.y_lo[i] || y[i] > box.y_hi[i]) return false;
  return true;
}

void BilevelProblem::require_unconstrained_upper() const {
  if (n != 1) throw PreconditionError("only a scalar upper variable (n = 1) is supported");
  if (q() > 0)
    throw PreconditionError("optimality checks require a problem without upper-level constraints");
}

void BilevelProblem::check_dimension(const Vec& y) const {
  if (y.size() != m)
    throw PreconditionError("y has length " + std::to_string(y.size()) + ", expected m = " +
                            std::to_string(m));
}

// ---------------------------------------------------------------- construction

namespace {

SmoothFunction compile(std::string_view text, int m, const std::string& context) {
  try {
    return SmoothFunction(parse(text, m), m);
  } catch (const ParseError& e) {
    throw ProblemError(context + ": " + e.what());
  }
}

void default_box(Box& box, int m) {
  if (box.y_lo.size() == 0) box.y_lo = Vec::Constant(m, -2.0);
  if (box.y_hi.size() == 0) box.y_hi = Vec::Constant(m, 2.0);
}

void validate_box(const Box& box, int m) {
  if (!(box.x_lo < box.x_hi)) throw ProblemError("[box] x: lower bound must be below upper bound");
  if (box.y_lo.size() != m || box.y_hi.size() != m) throw ProblemError("[box] has wrong dimension");
  for (int i = 0; i < m; ++i)
    if (!(box.y_lo[i] < box.y_hi[i]))
      throw ProblemError("[box] y" + std::to_string(i + 1) + ": lower bound must be below upper bound");
}

}  // namespace

BilevelProblem make_problem(std::string name, int m, std::string_view F, std::string_view f,
                            const std::vector<std::string>& g, const std::vector<std::string>& G,
                            Box box, Tolerances tol) {
  if (m < 1) throw ProblemError("[problem] m must be at least 1");
  tol.validate();
  default_box(box, m);
  validate_box(box, m);
  BilevelProblem P;
  P.name = std::move(name);
  P.m = m;
  P.F = compile(F, m, "[upper] F");
  P.f = compile(f, m, "[lower] f");
  for (std::size_t j = 0; j < g.size(); ++j)
    P.g.push_back(compile(g[j], m, "[lower] g" + std::to_string(j + 1)));
  for (std::size_t k = 0; k < G.size(); ++k)
    P.G.push_back(compile(G[k], m, "[upper] G" + std::to_string(k + 1)));
  P.box = std::move(box);
  P.tol = tol;
  return P;
}

// ---------------------------------------------------------------- file format

namespace {

std::string trim(std::string_view s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

double to_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v))
    throw ProblemError(context + ": expected a number, got '" + s + "'");
  return v;
}

int to_int(const std::string& s, const std::string& context) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ProblemError(context + ": expected an integer, got '" + s + "'");
  return v;
}

std::string unquote(const std::string& s, const std::string& context) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"')
    throw ProblemError(context + ": expressions must be double-quoted");
  return s.substr(1, s.size() - 2);
}

std::pair<double, double> to_range(const std::string& s, const std::string& context) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw ProblemError(context + ": expected 'lo, hi'");
  return {to_double(trim(s.substr(0, comma)), context), to_double(trim(s.substr(comma + 1)), context)};
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BilevelProblem load_problem(std::string_view contents) {
  using Section = std::map<std::string, std::pair<std::string, int>>;  // key -> (value, line)
  std::map<std::string, Section> sections;
  static const char* known[] = {"problem", "upper", "lower", "box", "tolerances"};
  std::string current;
  std::istringstream in{std::string(contents)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ProblemError(where + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      bool ok = false;
      for (const char* k : known) ok = ok || current == k;
      if (!ok) throw ProblemError(where + ": unknown section [" + current + "]");
      if (sections.count(current)) throw ProblemError(where + ": duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    if (current.empty()) throw ProblemError(where + ": key outside of a section");
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ProblemError(where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ProblemError(where + ": empty key");
    auto& sec = sections[current];
    if (sec.count(key)) throw ProblemError("[" + current + "] " + key + ": duplicate key");
    sec[key] = {value, lineno};
  }

  auto ctx = [](const std::string& s, const std::string& k) { return "[" + s + "] " + k; };
  if (!sections.count("problem")) throw ProblemError("missing section [problem]");
  if (!sections.count("upper")) throw ProblemError("missing section [upper]");
  if (!sections.count("lower")) throw ProblemError("missing section [lower]");

  std::string name = "unnamed";
  int n = 1, m = -1, p = 0, q = 0;
  for (const auto& [key, entry] : sections["problem"]) {
    const std::string& v = entry.first;
    if (key == "name") name = (v.size() >= 2 && v.front() == '"') ? unquote(v, ctx("problem", key)) : v;
    else if (key == "n") n = to_int(v, ctx("problem", key));
    else if (key == "m") m = to_int(v, ctx("problem", key));
    else if (key == "p") p = to_int(v, ctx("problem", key));
    else if (key == "q") q = to_int(v, ctx("problem", key));
    else throw ProblemError(ctx("problem", key) + ": unknown key");
  }
  if (n != 1) throw ProblemError("[problem] n: only n = 1 is supported");
  if (m < 1) throw ProblemError("[problem] m: missing or not positive");
  if (p < 0 || q < 0) throw ProblemError("[problem] p and q must be non-negative");

  std::string F_text, f_text;
  std::vector<std::string> g_text(p), G_text(q);
  auto indexed = [](const std::string& key, char prefix, int count, int& idx) {
    if (key.size() < 2 || key[0] != prefix) return false;
    for (std::size_t i = 1; i < key.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
    idx = std::stoi(key.substr(1));
    return idx >= 1 && idx <= count;
  };
  for (const auto& [key, entry] : sections["upper"]) {
    int idx = 0;
    if (key == "F") F_text = unquote(entry.first, ctx("upper", key));
    else if (indexed(key, 'G', q, idx)) G_text[idx - 1] = unquote(entry.first, ctx("upper", key));
    else throw ProblemError(ctx("upper", key) + ": unknown key (q = " + std::to_string(q) + ")");
  }
  for (const auto& [key, entry] : sections["lower"]) {
    int idx = 0;
    if (key == "f") f_text = unquote(entry.first, ctx("lower", key));
    else if (indexed(key, 'g', p, idx)) g_text[idx - 1] = unquote(entry.first, ctx("lower", key));
    else throw ProblemError(ctx("lower", key) + ": unknown key (p = " + std::to_string(p) + ")");
  }
  if (F_text.empty()) throw ProblemError("[upper] F: missing");
  if (f_text.empty()) throw ProblemError("[lower] f: missing");
  for (int j = 0; j < p; ++j)
    if (g_text[j].empty()) throw ProblemError("[lower] g" + std::to_string(j + 1) + ": missing");
  for (int k = 0; k < q; ++k)
    if (G_text[k].empty()) throw ProblemError("[upper] G" + std::to_string(k + 1) + ": missing");

  Box box;
  box.y_lo = Vec::Constant(m, -2.0);
  box.y_hi = Vec::Constant(m, 2.0);
  if (sections.count("box")) {
    for (const auto& [key, entry] : sections["box"]) {
      int idx = 0;
      auto [lo, hi] = to_range(entry.first, ctx("box", key));
      if (key == "x") {
        box.x_lo = lo;
        box.x_hi = hi;
      } else if (indexed(key, 'y', m, idx)) {
        box.y_lo[idx - 1] = lo;
        box.y_hi[idx - 1] = hi;
      } else {
        throw ProblemError(ctx("box", key) + ": unknown variable");
      }
    }
  }

  Tolerances tol;
  if (sections.count("tolerances")) {
    for (const auto& [key, entry] : sections["tolerances"]) {
      std::string c = ctx("tolerances", key);
      const std::string& v = entry.first;
      if (key == "active") tol.active = to_double(v, c);
      else if (key == "rank") tol.rank = to_double(v, c);
      else if (key == "multiplier") tol.multiplier = to_double(v, c);
      else if (key == "eigenvalue") tol.eigenvalue = to_double(v, c);
      else if (key == "residual") tol.residual = to_double(v, c);
      else if (key == "grid") tol.grid = to_int(v, c);
      else if (key == "multistart") tol.multistart = to_int(v, c);
      else throw ProblemError(c + ": unknown key");
    }
  }
  return make_problem(name, m, F_text, f_text, g_text, G_text, box, tol);
}

BilevelProblem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemError("cannot open problem file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_problem(ss.str());
}

std::string serialize(const BilevelProblem& P) {
  std::ostringstream out;
  out << "[problem]\n"
      << "name = \"" << P.name << "\"\n"
      << "n = " << P.n << "\nm = " << P.m << "\np = " << P.p() << "\nq = " << P.q() << "\n\n";
  out << "[upper]\nF = \"" << to_string(P.F.expr()) << "\"\n";
  for (int k = 0; k < P.q(); ++k) out << "G" << k + 1 << " = \"" << to_string(P.G[k].expr()) << "\"\n";
  out << "\n[lower]\nf = \"" << to_string(P.f.expr()) << "\"\n";
  for (int j = 0; j < P.p(); ++j) out << "g" << j + 1 << " = \"" << to_string(P.g[j].expr()) << "\"\n";
  out << "\n[box]\nx = " << number(P.box.x_lo) << ", " << number(P.box.x_hi) << "\n";
  for (int i = 0; i < P.m; ++i)
    out << "y" << i + 1 << " = " << number(P.box.y_lo[i]) << ", " << number(P.box.y_hi[i]) << "\n";
  const Tolerances& t = P.tol;
  out << "\n[tolerances]\nactive = " << number(t.active) << "\nrank = " << number(t.rank)
      << "\nmultiplier = " << number(t.multiplier) << "\neigenvalue = " << number(t.eigenvalue)
      << "\nresidual = " << number(t.residual) << "\ngrid = " << t.grid
      << "\nmultistart = " << t.multistart << "\n";
  return out.str();
}

namespace {

std::vector<std::string> texts(const std::vector<SmoothFunction>& fs) {
  std::vector<std::string> out;
  for (const auto& s : fs) out.push_back(to_string(s.expr()));
  return out;
}

BilevelProblem rebuild(const BilevelProblem& P, const std::string& F, const std::vector<std::string>& g) {
  return make_problem(P.name, P.m, F, to_string(P.f.expr()), g, texts(P.G), P.box, P.tol);
}

}  // namespace

BilevelProblem rescale_constraints(const BilevelProblem& P, const std::vector<double>& scale) {
  if (static_cast<int>(scale.size()) != P.p()) throw PreconditionError("scale has wrong length");
  std::vector<std::string> g;
  for (int j = 0; j < P.p(); ++j)
    g.push_back(to_string(Expr::constant(scale[j]) * P.g[j].expr()));
  return rebuild(P, to_string(P.F.expr()), g);
}

BilevelProblem permute_constraints(const BilevelProblem& P, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != P.p()) throw PreconditionError("permutation has wrong length");
  std::vector<std::string> g;
  for (int k : perm) g.push_back(to_string(P.g.at(k).expr()));
  return rebuild(P, to_string(P.F.expr()), g);
}

BilevelProblem rescale_objective(const BilevelProblem& P, double c) {
  return rebuild(P, to_string(Expr::constant(c) * P.F.expr()), texts(P.g));
}

BilevelProblem with_upper_objective(const BilevelProblem& P, std::string_view F) {
  return rebuild(P, std::string(F), texts(P.g));
}

Vec parse_vector(std::string_view text) {
  std::vector<double> vals;
  std::string s(text);
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string item = trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw ProblemError("malformed vector '" + s + "'");
    vals.push_back(to_double(item, "vector"));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return Eigen::Map<Vec>(vals.data(), static_cast<int>(vals.size()));
}

}  // namespace parcalm

#include "parcalm/expr.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>

#include "parcalm/errors.hpp"

namespace parcalm {

struct Expr::Node {
  Op op = Op::Constant;
  double value = 0.0;
  int index = 0;
  Expr lhs{std::shared_ptr<const Node>{}};
  Expr rhs{std::shared_ptr<const Node>{}};
  int max_index = 0;
  std::uint64_t mask = 0;  // bit k set if variable k (k < 63) occurs, bit 63 for larger
};

namespace {

std::uint64_t bit_for(int index) {
  return index < 63 ? (std::uint64_t{1} << index) : (std::uint64_t{1} << 63);
}

bool is_integer(double v) { return std::isfinite(v) && std::trunc(v) == v; }

// Applies an operation; `ok` is cleared on a domain violation.
inline double apply(Op op, double a, double b, bool& ok) {
  switch (op) {
    case Op::Negate: return -a;
    case Op::Sqrt:
      if (a < 0.0) { ok = false; return 0.0; }
      return std::sqrt(a);
    case Op::Exp: return std::exp(a);
    case Op::Log:
      if (!(a > 0.0)) { ok = false; return 0.0; }
      return std::log(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Add: return a + b;
    case Op::Subtract: return a - b;
    case Op::Multiply: return a * b;
    case Op::Divide:
      if (b == 0.0) { ok = false; return 0.0; }
      return a / b;
    case Op::Power:
      if (is_integer(b)) {
        if (a == 0.0 && b < 0.0) { ok = false; return 0.0; }
        return std::pow(a, b);
      }
      if (!(a > 0.0)) { ok = false; return 0.0; }
      return std::pow(a, b);
    default: return 0.0;
  }
}

const char* domain_message(Op op) {
  switch (op) {
    case Op::Sqrt: return "square root of negative value";
    case Op::Log: return "logarithm of non-positive value";
    case Op::Divide: return "division by zero";
    case Op::Power: return "invalid power";
    default: return "domain error";
  }
}

bool is_unary(Op op) {
  return op == Op::Negate || op == Op::Sqrt || op == Op::Exp || op == Op::Log ||
         op == Op::Sin || op == Op::Cos;
}

}  // namespace

Expr make_node(Op op, Expr a, Expr b) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->max_index = std::max(a.node_ ? a.max_index() : 0, b.node_ ? b.max_index() : 0);
  n->mask = (a.node_ ? a.node_->mask : 0) | (b.node_ ? b.node_->mask : 0);
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return Expr(std::move(n));
}

Expr::Expr() {
  static const std::shared_ptr<const Node> zero = std::make_shared<Node>();
  node_ = zero;
}

Expr Expr::constant(double value) {
  if (value == 0.0) return Expr();
  auto n = std::make_shared<Node>();
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw PreconditionError("negative variable index");
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->index = index;
  n->max_index = index;
  n->mask = bit_for(index);
  return Expr(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
int Expr::index() const { return node_->index; }
const Expr& Expr::lhs() const { return node_->lhs; }
const Expr& Expr::rhs() const { return node_->rhs; }
int Expr::max_index() const { return node_->max_index; }

bool Expr::depends_on(int index) const {
  if (index < 63) return (node_->mask & bit_for(index)) != 0;
  if ((node_->mask & bit_for(63)) == 0) return false;
  if (op() == Op::Variable) return this->index() == index;
  if (op() == Op::Constant) return false;
  if (lhs().node_ && lhs().depends_on(index)) return true;
  return rhs().node_ && rhs().depends_on(index);
}

namespace {

// Folds an operation on constants when the result is well defined.
bool fold(Op op, const Expr& a, const Expr* b, Expr& out) {
  if (!a.is_constant() || (b && !b->is_constant())) return false;
  bool ok = true;
  double v = apply(op, a.value(), b ? b->value() : 0.0, ok);
  if (!ok || !std::isfinite(v)) return false;
  out = Expr::constant(v);
  return true;
}

Expr unary(Op op, const Expr& a) {
  Expr out;
  if (fold(op, a, nullptr, out)) return out;
  return make_node(op, a, Expr());
}

}  // namespace

Expr operator-(const Expr& a) {
  if (a.op() == Op::Negate) return a.lhs();
  return unary(Op::Negate, a);
}

Expr operator+(const Expr& a, const Expr& b) {
  Expr out;
  if (fold(Op::Add, a, &b, out)) return out;
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return make_node(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  Expr out;
  if (fold(Op::Subtract, a, &b, out)) return out;
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return make_node(Op::Subtract, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  Expr out;
  if (fold(Op::Multiply, a, &b, out)) return out;
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr();
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return make_node(Op::Multiply, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  Expr out;
  if (fold(Op::Divide, a, &b, out)) return out;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr();
  return make_node(Op::Divide, a, b);
}

Expr pow(const Expr& a, const Expr& b) {
  Expr out;
  if (fold(Op::Power, a, &b, out)) return out;
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(0.0)) return Expr::constant(1.0);
  return make_node(Op::Power, a, b);
}

Expr sqrt(const Expr& a) { return unary(Op::Sqrt, a); }
Expr exp(const Expr& a) { return unary(Op::Exp, a); }
Expr log(const Expr& a) { return unary(Op::Log, a); }
Expr sin(const Expr& a) { return unary(Op::Sin, a); }
Expr cos(const Expr& a) { return unary(Op::Cos, a); }

std::string variable_name(int index) {
  return index == 0 ? std::string("x") : "y" + std::to_string(index);
}

// ---------------------------------------------------------------- parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, int max_y) : s_(text), max_y_(max_y) {}

  Expr run() {
    Expr e = expression();
    skip();
    if (pos_ < s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) { throw ParseError(msg, at); }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r' || s_[pos_] == '\n'))
      ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expression() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }

  Expr term() {
    Expr e = signed_factor();
    for (;;) {
      if (accept('*')) e = e * signed_factor();
      else if (accept('/')) e = e / signed_factor();
      else return e;
    }
  }

  Expr signed_factor() {
    if (accept('-')) return -signed_factor();
    if (accept('+')) return signed_factor();
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (accept('^')) return pow(base, signed_factor());
    return base;
  }

  Expr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec == std::errc::result_out_of_range) fail("number out of range", start);
    if (ec != std::errc()) fail("malformed number", start);
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return Expr::constant(v);
  }

  Expr identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    skip();
    bool call = pos_ < s_.size() && s_[pos_] == '(';
    if (call) {
      static const std::pair<const char*, Op> functions[] = {
          {"sqrt", Op::Sqrt}, {"exp", Op::Exp}, {"log", Op::Log},
          {"sin", Op::Sin},   {"cos", Op::Cos}};
      for (const auto& [fname, op] : functions) {
        if (name != fname) continue;
        ++pos_;
        std::vector<Expr> args;
        if (!accept(')')) {
          args.push_back(expression());
          while (accept(',')) args.push_back(expression());
          if (!accept(')')) fail("expected ')'");
        }
        if (args.size() != 1)
          fail(name + " expects 1 argument, got " + std::to_string(args.size()), start);
        return unary(op, args[0]);
      }
      fail("unknown function '" + name + "'", start);
    }
    if (name == "x") return Expr::variable(0);
    if (name.size() >= 2 && name[0] == 'y' && name[1] != '0') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      if (digits && name.size() < 10) {
        int k = std::stoi(name.substr(1));
        if (max_y_ >= 0 && k > max_y_)
          fail("variable " + name + " exceeds m = " + std::to_string(max_y_), start);
        return Expr::variable(k);
      }
    }
    fail("unknown identifier '" + name + "'", start);
  }

  std::string_view s_;
  int max_y_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, int max_y) { return Parser(text, max_y).run(); }

// ---------------------------------------------------------------- printer

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Subtract: return 1;
    case Op::Multiply:
    case Op::Divide: return 2;
    case Op::Negate: return 3;
    case Op::Power: return 4;
    default: return 5;
  }
}

std::string number_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (v < 0.0) return "(" + s + ")";
  return s;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Constant: out += number_text(e.value()); return;
    case Op::Variable: out += variable_name(e.index()); return;
    case Op::Negate:
      out += '-';
      print_wrapped(e.lhs(), precedence(e.lhs()) < 3, out);
      return;
    case Op::Sqrt:
    case Op::Exp:
    case Op::Log:
    case Op::Sin:
    case Op::Cos: {
      static const char* names[] = {"sqrt", "exp", "log", "sin", "cos"};
      out += names[static_cast<int>(e.op()) - static_cast<int>(Op::Sqrt)];
      out += '(';
      print(e.lhs(), out);
      out += ')';
      return;
    }
    case Op::Add:
    case Op::Subtract:
    case Op::Multiply:
    case Op::Divide: {
      int p = precedence(e);
      static const char* sym[] = {" + ", " - ", " * ", " / "};
      print_wrapped(e.lhs(), precedence(e.lhs()) < p, out);
      out += sym[static_cast<int>(e.op()) - static_cast<int>(Op::Add)];
      print_wrapped(e.rhs(), precedence(e.rhs()) <= p, out);
      return;
    }
    case Op::Power:
      print_wrapped(e.lhs(), precedence(e.lhs()) <= 4, out);
      out += '^';
      print_wrapped(e.rhs(), precedence(e.rhs()) < 3, out);
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------- derivatives

namespace {

class Differentiator {
 public:
  explicit Differentiator(int index) : index_(index) {}

  Expr d(const Expr& e) {
    if (!e.depends_on(index_)) return Expr();
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr r = compute(e);
    memo_.emplace(e.id(), r);
    return r;
  }

 private:
  Expr compute(const Expr& e) {
    const Expr& a = e.lhs();
    const Expr& b = e.rhs();
    switch (e.op()) {
      case Op::Constant: return Expr();
      case Op::Variable: return Expr::constant(e.index() == index_ ? 1.0 : 0.0);
      case Op::Negate: return -d(a);
      case Op::Sqrt: return d(a) / (Expr::constant(2.0) * e);
      case Op::Exp: return e * d(a);
      case Op::Log: return d(a) / a;
      case Op::Sin: return cos(a) * d(a);
      case Op::Cos: return -(sin(a) * d(a));
      case Op::Add: return d(a) + d(b);
      case Op::Subtract: return d(a) - d(b);
      case Op::Multiply: return d(a) * b + a * d(b);
      case Op::Divide: {
        Expr db = d(b);
        if (db.is_constant(0.0)) return d(a) / b;
        return (d(a) * b - a * db) / pow(b, Expr::constant(2.0));
      }
      case Op::Power: {
        Expr db = d(b);
        if (db.is_constant(0.0)) {
          Expr bm1 = b.is_constant() ? Expr::constant(b.value() - 1.0) : b - Expr::constant(1.0);
          return b * pow(a, bm1) * d(a);
        }
        return e * (db * log(a) + b * d(a) / a);
      }
    }
    return Expr();
  }

  int index_;
  std::unordered_map<const void*, Expr> memo_;
};

}  // namespace

Expr differentiate(const Expr& e, int index) { return Differentiator(index).d(e); }

Expr DerivativeCache::derivative(const Expr& e, int index) {
  Key key{e.id(), index};
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second.second;
  }
  Expr r = differentiate(e, index);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = memo_.emplace(key, std::make_pair(e, r));
  return it->second.second;
}

std::vector<Expr> DerivativeCache::gradient(const Expr& e, int nvars) {
  std::vector<Expr> g;
  g.reserve(nvars);
  for (int i = 0; i < nvars; ++i) g.push_back(derivative(e, i));
  return g;
}

std::vector<std::vector<Expr>> DerivativeCache::hessian(const Expr& e, int nvars) {
  std::vector<std::vector<Expr>> h(nvars, std::vector<Expr>(nvars));
  for (int i = 0; i < nvars; ++i) {
    Expr di = derivative(e, i);
    for (int j = i; j < nvars; ++j) {
      h[i][j] = derivative(di, j);
      h[j][i] = h[i][j];
    }
  }
  return h;
}

// ---------------------------------------------------------------- tape

Tape::Tape(const Expr& e) {
  std::unordered_map<const void*, int> slot;
  std::function<int(const Expr&)> emit = [&](const Expr& n) -> int {
    if (auto it = slot.find(n.id()); it != slot.end()) return it->second;
    Instr ins;
    ins.op = n.op();
    if (n.op() == Op::Constant) {
      ins.c = n.value();
    } else if (n.op() == Op::Variable) {
      ins.var = n.index();
    } else {
      ins.a = emit(n.lhs());
      if (!is_unary(n.op())) ins.b = emit(n.rhs());
    }
    int id = static_cast<int>(code_.size());
    code_.push_back(ins);
    nodes_.push_back(n);
    slot.emplace(n.id(), id);
    return id;
  };
  emit(e);
}

double Tape::run(double x, std::span<const double> y, int* failed) const noexcept {
  thread_local std::vector<double> buf;
  if (buf.size() < code_.size()) buf.resize(code_.size());
  const std::size_t n = code_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Instr& ins = code_[i];
    switch (ins.op) {
      case Op::Constant: buf[i] = ins.c; break;
      case Op::Variable:
        if (ins.var == 0) buf[i] = x;
        else if (static_cast<std::size_t>(ins.var) <= y.size()) buf[i] = y[ins.var - 1];
        else {
          *failed = static_cast<int>(i);
          return std::numeric_limits<double>::quiet_NaN();
        }
        break;
      default: {
        bool ok = true;
        buf[i] = apply(ins.op, buf[ins.a], ins.b >= 0 ? buf[ins.b] : 0.0, ok);
        if (!ok) {
          *failed = static_cast<int>(i);
          return std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  }
  return n ? buf[n - 1] : 0.0;
}

double Tape::operator()(double x, std::span<const double> y) const {
  int failed = -1;
  double v = run(x, y, &failed);
  if (failed >= 0) {
    const Instr& ins = code_[failed];
    if (ins.op == Op::Variable)
      throw PreconditionError("variable " + variable_name(ins.var) + " not supplied");
    throw DomainError(domain_message(ins.op), to_string(nodes_[failed]));
  }
  return v;
}

double Tape::value_or_nan(double x, std::span<const double> y) const noexcept {
  int failed = -1;
  return run(x, y, &failed);
}

double evaluate(const Expr& e, double x, std::span<const double> y) { return Tape(e)(x, y); }

}  // namespace parcalm

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace parcalm {

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Negate,
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Add,
  Subtract,
  Multiply,
  Divide,
  Power
};

/**
 * Immutable symbolic expression in the variables x (index 0) and
 * y1..ym (index 1..m).
 *
 * Nodes are shared; copying an Expr is cheap. The smart constructors fold
 * constants and drop additive zeros and multiplicative ones, so derivative
 * trees stay small.
 */
class Expr {
 public:
  struct Node;

  /// The constant zero.
  Expr();

  static Expr constant(double value);
  static Expr variable(int index);

  Op op() const;
  double value() const;  ///< Only meaningful for constants.
  int index() const;     ///< Only meaningful for variables.
  const Expr& lhs() const;
  const Expr& rhs() const;
  const Node* id() const noexcept { return node_.get(); }

  bool is_constant() const { return op() == Op::Constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  /// Largest variable index that appears (0 if only x or none).
  int max_index() const;
  bool depends_on(int index) const;

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend Expr make_node(Op, Expr, Expr);
  std::shared_ptr<const Node> node_;
};

Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& a, const Expr& b);
Expr sqrt(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);

/// Name of variable `index`: "x" for 0, "y<k>" otherwise.
std::string variable_name(int index);

/**
 * Parse infix text. Identifiers are x, y1..ym and the functions sqrt, exp,
 * log, sin, cos. `max_y` bounds the admissible y index (-1 for no bound).
 */
Expr parse(std::string_view text, int max_y = -1);

/// Canonical text; parse(to_string(e)) evaluates identically to e.
std::string to_string(const Expr& e);

/// Evaluate at (x, y). Throws DomainError naming the failing subexpression.
double evaluate(const Expr& e, double x, std::span<const double> y);

/// Symbolic partial derivative with respect to variable `index`.
Expr differentiate(const Expr& e, int index);

/// Thread-safe memo of partial derivatives keyed by (node, variable).
class DerivativeCache {
 public:
  Expr derivative(const Expr& e, int index);
  std::vector<Expr> gradient(const Expr& e, int nvars);
  std::vector<std::vector<Expr>> hessian(const Expr& e, int nvars);

 private:
  struct Key {
    const void* node;
    int index;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<const void*>()(k.node) ^ (std::size_t(k.index) * 0x9e3779b97f4a7c15ULL);
    }
  };
  std::mutex mutex_;
  // Values keep the differentiated node alive so keys stay unique.
  std::unordered_map<Key, std::pair<Expr, Expr>, KeyHash> memo_;
};

/**
 * Postfix compilation of an expression for repeated evaluation.
 * Shared subtrees are evaluated once.
 */
class Tape {
 public:
  Tape() = default;
  explicit Tape(const Expr& e);

  /// Throws DomainError on a domain violation.
  double operator()(double x, std::span<const double> y) const;
  /// Returns NaN on a domain violation.
  double value_or_nan(double x, std::span<const double> y) const noexcept;

 private:
  struct Instr {
    Op op;
    int a = -1;
    int b = -1;
    int var = 0;
    double c = 0.0;
  };
  double run(double x, std::span<const double> y, int* failed) const noexcept;
  std::vector<Instr> code_;
  std::vector<Expr> nodes_;  // node for each instruction, used in messages
};

}  // namespace parcalm

#include <doctest.h>

#include <cmath>
#include <random>

#include "parcalm/errors.hpp"
#include "parcalm/expr.hpp"

using namespace parcalm;

namespace {

double eval(const Expr& e, double x, std::vector<double> y) { return evaluate(e, x, y); }

// Central differences of the value, independent of the symbolic code.
double fd_first(const Expr& e, double x, std::vector<double> y, int i, double h) {
  auto at = [&](double d) {
    std::vector<double> yy = y;
    double xx = x;
    (i == 0 ? xx : yy[i - 1]) += d;
    return evaluate(e, xx, yy);
  };
  return (at(h) - at(-h)) / (2 * h);
}

double fd_second(const Expr& e, double x, std::vector<double> y, int i, int j, double h) {
  auto at = [&](double di, double dj) {
    std::vector<double> yy = y;
    double xx = x;
    (i == 0 ? xx : yy[i - 1]) += di;
    (j == 0 ? xx : yy[j - 1]) += dj;
    return evaluate(e, xx, yy);
  };
  return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
}

}  // namespace

TEST_SUITE("expr") {
  TEST_CASE("parse and evaluate") {
    CHECK(eval(parse("x + 2*y1 - y2/4"), 1, {2, 8}) == doctest::Approx(3));
    CHECK(eval(parse("2^3^2"), 0, {}) == doctest::Approx(512));  // right associative
    CHECK(eval(parse("-x^2"), 3, {}) == doctest::Approx(-9));
    CHECK(eval(parse("sqrt(4) + exp(0) + log(1) + sin(0) + cos(0)"), 0, {}) == doctest::Approx(4));
    CHECK(eval(parse("1.5e-1 * 2E1"), 0, {}) == doctest::Approx(3));
  }

  TEST_CASE("parse errors carry offsets") {
    try {
      parse("x + * y1");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(parse("x + z"), ParseError);
    CHECK_THROWS_AS(parse("sqrt(x, y1)"), ParseError);
    CHECK_THROWS_AS(parse("foo(x)"), ParseError);
    CHECK_THROWS_AS(parse("(x + 1"), ParseError);
    CHECK_THROWS_AS(parse("x 1"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("y3", 2), ParseError);
    CHECK_THROWS_AS(parse("y0"), ParseError);
    CHECK_NOTHROW(parse("y2", 2));
  }

  TEST_CASE("domain errors name the subexpression") {
    try {
      eval(parse("1 + sqrt(x - 2)"), 0, {});
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(e.subexpression().find("sqrt") != std::string::npos);
    }
    CHECK_THROWS_AS(eval(parse("log(y1)"), 0, {0}), DomainError);
    CHECK_THROWS_AS(eval(parse("1/x"), 0, {}), DomainError);
    CHECK(std::isnan(Tape(parse("log(x)")).value_or_nan(-1, {})));
  }

  TEST_CASE("to_string round trip") {
    const char* texts[] = {"x - (y1 - y2)", "x/(y1*y2)", "-(x^2)^y1", "2^-x", "sin(x)*cos(y1) - exp(-y2)",
                           "(x - 1)^2 + y1^2", "y1^4/4 - y1^2/2 + x*y1"};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (const char* t : texts) {
      Expr e = parse(t);
      Expr back = parse(to_string(e));
      for (int k = 0; k < 20; ++k) {
        double x = u(rng);
        std::vector<double> y = {u(rng), u(rng)};
        CHECK(eval(back, x, y) == doctest::Approx(eval(e, x, y)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("constant folding keeps derivatives small") {
    CHECK(differentiate(parse("x + 3"), 0).is_constant(1.0));
    CHECK(differentiate(parse("y1^2"), 0).is_constant(0.0));
    CHECK(differentiate(differentiate(parse("3*x + y1"), 0), 0).is_constant(0.0));
    CHECK(parse("y2*x").max_index() == 2);
    CHECK(parse("y2*x").depends_on(0));
    CHECK_FALSE(parse("y2").depends_on(1));
  }

  TEST_CASE("tape agrees with tree evaluation") {
    Expr e = parse("sqrt(x^2 + y1^2) * exp(-y2) + log(1 + x^2) / (2 + sin(y1))");
    Tape t(e);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 50; ++k) {
      double x = u(rng);
      std::vector<double> y = {u(rng), u(rng)};
      CHECK(t(x, y) == doctest::Approx(eval(e, x, y)).epsilon(1e-15));
    }
  }

  TEST_CASE("symbolic derivatives match central differences") {
    const char* texts[] = {"x*y1^3 - 2*y2", "sqrt(1 + x^2 + y1^2)", "exp(x*y1) + log(2 + y2^2)",
                           "sin(x)*cos(y1*y2)", "(x - y1)^2/(1 + y2^2)", "y1^4/4 - y1^2/2 + x*y1",
                           "y1*((1 + y1^2/2 + (1 - y1)*x)^2 - 2)", "2^(x*y1)"};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    DerivativeCache cache;
    for (const char* t : texts) {
      Expr e = parse(t);
      auto grad = cache.gradient(e, 3);
      auto hess = cache.hessian(e, 3);
      for (int k = 0; k < 100; ++k) {
        double x = u(rng);
        std::vector<double> y = {u(rng), u(rng)};
        for (int i = 0; i < 3; ++i) {
          double sym = eval(grad[i], x, y);
          double fd = fd_first(e, x, y, i, 1e-5);
          CHECK(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym)));
          for (int j = 0; j < 3; ++j) {
            double s2 = eval(hess[i][j], x, y);
            double f2 = fd_second(e, x, y, i, j, 1e-4);
            CHECK(std::abs(s2 - f2) <= 1e-4 * std::max(1.0, std::abs(s2)));
          }
        }
      }
    }
  }

  TEST_CASE("derivative cache is stable") {
    DerivativeCache cache;
    Expr e = parse("x*y1");
    Expr a = cache.derivative(e, 1);
    Expr b = cache.derivative(e, 1);
    CHECK(a.id() == b.id());
  }
}

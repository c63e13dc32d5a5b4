#include <catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "decoupler/error.hpp"
#include "decoupler/expr.hpp"

using namespace decoupler;

namespace {

SymbolTable table(std::vector<std::string> names) { return makeSymbolTable(std::move(names)); }

/// Random trees over x, y, z; rejected later if they leave their real domain.
std::string randomTree(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 11);
  const int choice = depth <= 0 ? pick(rng) % 2 : pick(rng);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  static const char* vars[] = {"x", "y", "z"};
  switch (choice) {
    case 0: return vars[rng() % 3];
    case 1: return formatNumber(std::round(c(rng) * 100.0) / 100.0);
    case 2: return "(" + randomTree(rng, depth - 1) + " + " + randomTree(rng, depth - 1) + ")";
    case 3: return "(" + randomTree(rng, depth - 1) + " - " + randomTree(rng, depth - 1) + ")";
    case 4: return "(" + randomTree(rng, depth - 1) + "*" + randomTree(rng, depth - 1) + ")";
    case 5: return "(" + randomTree(rng, depth - 1) + "/" + randomTree(rng, depth - 1) + ")";
    case 6: return "-" + randomTree(rng, depth - 1);
    case 7: return "sqrt(" + randomTree(rng, depth - 1) + ")";
    case 8: return "exp(" + randomTree(rng, depth - 1) + ")";
    case 9: return "log(" + randomTree(rng, depth - 1) + ")";
    case 10: return (rng() % 2 ? "sin(" : "cos(") + randomTree(rng, depth - 1) + ")";
    default: {
      static const char* powers[] = {"2", "3", "0.5", "(-1)", "1.5"};
      return "(" + randomTree(rng, depth - 1) + ")^" + powers[rng() % 5];
    }
  }
}

struct Case {
  Expression e;
  std::vector<double> at;
};

/// Draws expressions whose value and derivative stay moderate near the point.
std::vector<Case> wellBehavedCases(int count, unsigned seed) {
  auto syms = table({"x", "y", "z"});
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> val(-1.5, 1.5);
  std::vector<Case> out;
  while (static_cast<int>(out.size()) < count) {
    Expression e = Expression::parse(randomTree(rng, 1 + rng() % 6), syms);
    std::vector<double> at{val(rng), val(rng), val(rng)};
    try {
      const double f = e.eval(at);
      const double d = e.diff(0).eval(at);
      bool ok = std::isfinite(f) && std::isfinite(d) && std::fabs(f) < 1e3 && std::fabs(d) < 1e3;
      for (double s : {-1e-3, 1e-3}) {
        auto p = at;
        p[0] += s;
        const double fp = e.eval(p);
        ok = ok && std::isfinite(fp) && std::fabs(fp) < 1e3;
      }
      if (ok) out.push_back({e, at});
    } catch (const DomainError&) {
    }
  }
  return out;
}

}  // namespace

TEST_CASE("parse builds trees with declared symbols", "[expr]") {
  auto syms = table({"v", "rho", "p0"});
  Expression e = Expression::parse("v + sqrt(3*p0)*rho", syms);
  REQUIRE(e.root()->kind == Node::Kind::Binary);
  REQUIRE(e.root()->binary == BinaryOp::Add);
  REQUIRE(e.root()->rhs->lhs->kind == Node::Kind::Unary);
  REQUIRE(e.root()->rhs->lhs->unary == UnaryOp::Sqrt);
  REQUIRE(e.eval({{"v", 0.0}, {"p0", 1.0}, {"rho", 1.0}}) == Catch::Approx(std::sqrt(3.0)).epsilon(1e-15));

  Expression one = Expression::parse("1", table({}));
  REQUIRE(one.constantValue() == 1.0);
}

TEST_CASE("parse reports unknown symbols and syntax positions", "[expr]") {
  auto syms = table({"v", "rho"});
  try {
    Expression::parse("v + w", syms);
    FAIL("expected UnknownSymbol");
  } catch (const UnknownSymbolError& e) {
    REQUIRE(e.name() == "w");
  }
  try {
    Expression::parse("v + * rho", syms);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    REQUIRE(e.position() == 4);
  }
  REQUIRE_THROWS_AS(Expression::parse("v^rho", syms), SyntaxError);
  REQUIRE_THROWS_AS(Expression::parse("(v", syms), SyntaxError);
  REQUIRE_THROWS_AS(Expression::parse("foo(v)", syms), SyntaxError);
  REQUIRE_THROWS_AS(Expression::parse("", syms), SyntaxError);
}

TEST_CASE("precedence and associativity", "[expr]") {
  auto syms = table({"a", "b", "c"});
  std::map<std::string, double> at{{"a", 2.0}, {"b", 3.0}, {"c", 5.0}};
  REQUIRE(Expression::parse("-a^2", syms).eval(at) == -4.0);
  REQUIRE(Expression::parse("a - b - c", syms).eval(at) == -6.0);
  REQUIRE(Expression::parse("a / b / c", syms).eval(at) == Catch::Approx(2.0 / 15.0));
  REQUIRE(Expression::parse("a^3^2", syms).eval(at) == 64.0);
  REQUIRE(Expression::parse("a + b*c^2", syms).eval(at) == 77.0);
  REQUIRE(Expression::parse("a*-b", syms).eval(at) == -6.0);
  REQUIRE(Expression::parse("a^-1", syms).eval(at) == 0.5);
  REQUIRE(Expression::parse("a^(1/2)", syms).eval(at) == Catch::Approx(std::sqrt(2.0)));
  REQUIRE(Expression::parse("2*pi", syms).eval(at) == Catch::Approx(2.0 * M_PI));
  REQUIRE(Expression::parse("1.5e1 + 2E-1", syms).eval(at) == Catch::Approx(15.2));
}

TEST_CASE("eval domain errors", "[expr]") {
  auto syms = table({"rho", "p0"});
  REQUIRE(Expression::parse("p0*rho^3", syms).eval({{"p0", 1.0}, {"rho", 2.0}}) == 8.0);
  REQUIRE_THROWS_AS(Expression::parse("1/rho", syms).eval({{"rho", 0.0}, {"p0", 1.0}}), DomainError);
  REQUIRE_THROWS_AS(Expression::parse("sqrt(rho)", syms).eval({{"rho", -1.0}, {"p0", 1.0}}), DomainError);
  REQUIRE_THROWS_AS(Expression::parse("log(rho)", syms).eval({{"rho", 0.0}, {"p0", 1.0}}), DomainError);
  REQUIRE_THROWS_AS(Expression::parse("rho^0.5", syms).eval({{"rho", -1.0}, {"p0", 1.0}}), DomainError);
  REQUIRE(Expression::parse("rho^3", syms).eval({{"rho", -2.0}, {"p0", 1.0}}) == -8.0);
  try {
    Expression::parse("p0 + 1/rho", syms).eval({{"rho", 0.0}, {"p0", 1.0}});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    REQUIRE(std::string(e.what()).find("1/rho") != std::string::npos);
  }
}

TEST_CASE("diff basic rules", "[expr]") {
  auto syms = table({"rho", "p0", "x"});
  Expression d = Expression::parse("p0*rho^3", syms).diff("rho");
  for (double rho : {0.5, 1.0, 2.0}) {
    REQUIRE(d.eval({{"rho", rho}, {"p0", 1.5}, {"x", 0.0}}) == Catch::Approx(3 * 1.5 * rho * rho));
  }
  REQUIRE(Expression::parse("7", syms).diff("x").isZero());
  REQUIRE(Expression::parse("p0*rho", syms).diff("x").isZero());
  Expression a = Expression::parse("abs(x)", syms).diff("x");
  REQUIRE(a.eval({{"x", -2.0}, {"rho", 0.0}, {"p0", 0.0}}) == -1.0);
  REQUIRE_THROWS_AS(a.eval({{"x", 0.0}, {"rho", 0.0}, {"p0", 0.0}}), DomainError);
}

TEST_CASE("diff agrees with central differences on random trees", "[expr][oracle]") {
  const auto cases = wellBehavedCases(100, 1234);
  const double h = 1e-6;
  for (const auto& c : cases) {
    const double d = c.e.diff(0).eval(c.at);
    auto p = c.at;
    auto m = c.at;
    p[0] += h;
    m[0] -= h;
    const double fd = (c.e.eval(p) - c.e.eval(m)) / (2 * h);
    INFO(c.e.str());
    REQUIRE(std::fabs(d - fd) <= 1e-6 * (1.0 + std::fabs(d)));
  }
}

TEST_CASE("print round trip evaluates identically", "[expr][property]") {
  const auto cases = wellBehavedCases(100, 99);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> val(-1.5, 1.5);
  for (const auto& c : cases) {
    const std::string text = c.e.str();
    Expression back = Expression::parse(text, c.e.symbols());
    REQUIRE(back.str() == text);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> at{val(rng), val(rng), val(rng)};
      double a = 0.0;
      try {
        a = c.e.eval(at);
      } catch (const DomainError&) {
        REQUIRE_THROWS_AS(back.eval(at), DomainError);
        continue;
      }
      const double b = back.eval(at);
      if (std::isnan(a)) {
        REQUIRE(std::isnan(b));
      } else if (std::isinf(a)) {
        REQUIRE(a == b);
      } else {
        REQUIRE(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
      }
    }
  }
}

TEST_CASE("diff is linear", "[expr][property]") {
  const auto cases = wellBehavedCases(40, 5);
  for (std::size_t i = 0; i + 1 < cases.size(); i += 2) {
    const Expression sum = cases[i].e + cases[i + 1].e;
    const auto& at = cases[i].at;
    try {
      const double lhs = sum.diff(0).eval(at);
      const double rhs = cases[i].e.diff(0).eval(at) + cases[i + 1].e.diff(0).eval(at);
      REQUIRE(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)));
    } catch (const DomainError&) {
    }
  }
}

TEST_CASE("substitute and program evaluation", "[expr]") {
  auto syms = table({"a", "b"});
  auto target = table({"u", "w"});
  Expression e = Expression::parse("a*a + sin(b)", syms);
  std::vector<Expression> repl{Expression::parse("u + w", target), Expression::parse("2*w", target)};
  Expression s = e.substitute(repl);
  REQUIRE(s.symbols() == target);
  REQUIRE(s.eval(std::vector<double>{1.0, 0.5}) == Catch::Approx(2.25 + std::sin(1.0)));

  std::vector<Expression> outs{e, e.diff(0), e.diff(1), Expression::constant(3.0, syms)};
  Program prog(outs);
  std::vector<double> in{0.3, -0.7};
  std::vector<double> res(4);
  prog.run(in, res);
  for (std::size_t k = 0; k < outs.size(); ++k) REQUIRE(res[k] == outs[k].eval(in));

  Program bad(std::vector<Expression>{Expression::parse("a", syms), Expression::parse("1/b", syms)});
  try {
    bad.run(std::vector<double>{1.0, 0.0}, res);
    FAIL("expected DomainError");
  } catch (const DomainError& err) {
    REQUIRE(err.output() == 1);
  }
}

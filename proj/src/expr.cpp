#include "decoupler/expr.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <unordered_map>

#include "decoupler/error.hpp"

namespace decoupler {

namespace {

NodePtr makeConstant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Constant;
  n->value = v;
  return n;
}

NodePtr makeSymbol(std::size_t index) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Symbol;
  n->symbol = index;
  return n;
}

NodePtr makeUnary(UnaryOp op, NodePtr child) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Unary;
  n->unary = op;
  n->lhs = std::move(child);
  return n;
}

NodePtr makeBinary(BinaryOp op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Binary;
  n->binary = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

/// Structural identity of a node whose children are already identified.
struct Shape {
  int kind;
  int op;
  std::uint64_t value;
  std::uintptr_t a;
  std::uintptr_t b;
  bool operator==(const Shape&) const = default;
};

struct ShapeHash {
  std::size_t operator()(const Shape& s) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(s.kind), static_cast<std::uint64_t>(s.op),
                            s.value, static_cast<std::uint64_t>(s.a),
                            static_cast<std::uint64_t>(s.b)}) {
      h = (h ^ v) * 1099511628211ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

Shape shapeOf(const Node& n, std::uintptr_t a, std::uintptr_t b) {
  int op = 0;
  if (n.kind == Node::Kind::Unary) op = static_cast<int>(n.unary);
  if (n.kind == Node::Kind::Binary) op = static_cast<int>(n.binary);
  if (n.kind == Node::Kind::Symbol) a = n.symbol;
  return Shape{static_cast<int>(n.kind), op, std::bit_cast<std::uint64_t>(n.value), a, b};
}

/// Rebuilds a tree so that structurally equal subtrees are one node.
NodePtr intern(const NodePtr& root) {
  std::unordered_map<Shape, NodePtr, ShapeHash> pool;
  std::unordered_map<const Node*, NodePtr> done;
  std::vector<std::pair<NodePtr, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    if (done.count(node.get())) continue;
    if (!expanded) {
      stack.emplace_back(node, true);
      if (node->rhs) stack.emplace_back(node->rhs, false);
      if (node->lhs) stack.emplace_back(node->lhs, false);
      continue;
    }
    const NodePtr lhs = node->lhs ? done.at(node->lhs.get()) : nullptr;
    const NodePtr rhs = node->rhs ? done.at(node->rhs.get()) : nullptr;
    const Shape key = shapeOf(*node, reinterpret_cast<std::uintptr_t>(lhs.get()),
                              reinterpret_cast<std::uintptr_t>(rhs.get()));
    auto it = pool.find(key);
    if (it == pool.end()) {
      NodePtr fresh = node;
      if (lhs != node->lhs || rhs != node->rhs) {
        auto copy = std::make_shared<Node>(*node);
        copy->lhs = lhs;
        copy->rhs = rhs;
        fresh = copy;
      }
      it = pool.emplace(key, fresh).first;
    }
    done.emplace(node.get(), it->second);
  }
  return done.at(root.get());
}

bool isConst(const NodePtr& n) { return n->kind == Node::Kind::Constant; }
bool isConst(const NodePtr& n, double v) { return isConst(n) && n->value == v; }

const char* unaryName(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Abs: return "abs";
  }
  return "?";
}

int precedence(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Constant: return n.value < 0 || std::signbit(n.value) ? 3 : 5;
    case Node::Kind::Symbol: return 5;
    case Node::Kind::Unary: return n.unary == UnaryOp::Neg ? 3 : 5;
    case Node::Kind::Binary:
      switch (n.binary) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
      }
  }
  return 5;
}

void print(const Node& n, const std::vector<std::string>& names, std::string& out);

void printWrapped(const Node& n, bool wrap, const std::vector<std::string>& names,
                  std::string& out) {
  if (wrap) out += '(';
  print(n, names, out);
  if (wrap) out += ')';
}

void print(const Node& n, const std::vector<std::string>& names, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Constant:
      out += formatNumber(n.value);
      return;
    case Node::Kind::Symbol:
      out += names[n.symbol];
      return;
    case Node::Kind::Unary:
      if (n.unary == UnaryOp::Neg) {
        out += '-';
        printWrapped(*n.lhs, precedence(*n.lhs) < 4, names, out);
      } else {
        out += unaryName(n.unary);
        out += '(';
        print(*n.lhs, names, out);
        out += ')';
      }
      return;
    case Node::Kind::Binary: {
      if (n.binary == BinaryOp::Pow) {
        printWrapped(*n.lhs, precedence(*n.lhs) < 5, names, out);
        out += '^';
        const double p = n.rhs->value;
        if (std::signbit(p)) {
          out += '(' + formatNumber(p) + ')';
        } else {
          out += formatNumber(p);
        }
        return;
      }
      const int p = precedence(n);
      printWrapped(*n.lhs, precedence(*n.lhs) < p, names, out);
      switch (n.binary) {
        case BinaryOp::Add: out += " + "; break;
        case BinaryOp::Sub: out += " - "; break;
        case BinaryOp::Mul: out += '*'; break;
        case BinaryOp::Div: out += '/'; break;
        case BinaryOp::Pow: break;
      }
      printWrapped(*n.rhs, precedence(*n.rhs) <= p, names, out);
      return;
    }
  }
}

std::string describe(const Node& n, const std::vector<std::string>& names) {
  std::string s;
  print(n, names, s);
  return s;
}

bool isIntegral(double p) { return std::floor(p) == p && std::fabs(p) < 2147483648.0; }

double powValue(double x, double p, bool& ok) {
  ok = true;
  if (x == 0.0 && p < 0.0) {
    ok = false;
    return 0.0;
  }
  if (x < 0.0 && !isIntegral(p)) {
    ok = false;
    return 0.0;
  }
  return std::pow(x, p);
}

double unaryValue(UnaryOp op, double x, bool& ok) {
  ok = true;
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Sqrt:
      if (x < 0.0) ok = false;
      return ok ? std::sqrt(x) : 0.0;
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Log:
      if (x <= 0.0) ok = false;
      return ok ? std::log(x) : 0.0;
    case UnaryOp::Sin: return std::sin(x);
    case UnaryOp::Cos: return std::cos(x);
    case UnaryOp::Abs: return std::fabs(x);
  }
  return 0.0;
}

double binaryValue(BinaryOp op, double a, double b, bool& ok) {
  ok = true;
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div:
      if (b == 0.0) ok = false;
      return ok ? a / b : 0.0;
    case BinaryOp::Pow: return powValue(a, b, ok);
  }
  return 0.0;
}

std::string domainMessage(const Node& n, const std::vector<std::string>& names) {
  std::string what;
  if (n.kind == Node::Kind::Unary) {
    what = n.unary == UnaryOp::Sqrt ? "square root of negative value"
                                    : "logarithm of non-positive value";
  } else if (n.binary == BinaryOp::Div) {
    what = "division by zero";
  } else {
    what = "power outside its real domain";
  }
  return what + " in '" + describe(n, names) + "'";
}

double evalNode(const Node& n, std::span<const double> values,
                const std::vector<std::string>& names) {
  bool ok = true;
  double r = 0.0;
  switch (n.kind) {
    case Node::Kind::Constant: return n.value;
    case Node::Kind::Symbol: return values[n.symbol];
    case Node::Kind::Unary:
      r = unaryValue(n.unary, evalNode(*n.lhs, values, names), ok);
      break;
    case Node::Kind::Binary: {
      const double a = evalNode(*n.lhs, values, names);
      const double b = evalNode(*n.rhs, values, names);
      r = binaryValue(n.binary, a, b, ok);
      break;
    }
  }
  if (!ok) throw DomainError(domainMessage(n, names));
  return r;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (isConst(a, 0.0)) return b;
  if (isConst(b, 0.0)) return a;
  if (isConst(a) && isConst(b)) return makeConstant(a->value + b->value);
  return makeBinary(BinaryOp::Add, a, b);
}

NodePtr neg(const NodePtr& a) {
  if (isConst(a)) return makeConstant(-a->value);
  if (a->kind == Node::Kind::Unary && a->unary == UnaryOp::Neg) return a->lhs;
  return makeUnary(UnaryOp::Neg, a);
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  if (isConst(b, 0.0)) return a;
  if (isConst(a, 0.0)) return neg(b);
  if (isConst(a) && isConst(b)) return makeConstant(a->value - b->value);
  return makeBinary(BinaryOp::Sub, a, b);
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  if (isConst(a, 0.0) || isConst(b, 0.0)) return makeConstant(0.0);
  if (isConst(a, 1.0)) return b;
  if (isConst(b, 1.0)) return a;
  if (isConst(a, -1.0)) return neg(b);
  if (isConst(b, -1.0)) return neg(a);
  if (isConst(a) && isConst(b)) return makeConstant(a->value * b->value);
  return makeBinary(BinaryOp::Mul, a, b);
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  if (isConst(a, 0.0) && !isConst(b, 0.0)) return makeConstant(0.0);
  if (isConst(b, 1.0)) return a;
  if (isConst(a) && isConst(b) && b->value != 0.0) return makeConstant(a->value / b->value);
  return makeBinary(BinaryOp::Div, a, b);
}

NodePtr power(const NodePtr& a, double p) {
  if (p == 0.0) return makeConstant(1.0);
  if (p == 1.0) return a;
  if (isConst(a)) {
    bool ok = true;
    const double v = powValue(a->value, p, ok);
    if (ok) return makeConstant(v);
  }
  return makeBinary(BinaryOp::Pow, a, makeConstant(p));
}

NodePtr unary(UnaryOp op, const NodePtr& a) {
  if (op == UnaryOp::Neg) return neg(a);
  if (isConst(a)) {
    bool ok = true;
    const double v = unaryValue(op, a->value, ok);
    if (ok) return makeConstant(v);
  }
  return makeUnary(op, a);
}

class Differentiator {
 public:
  explicit Differentiator(std::size_t var) : var_(var) {}

  NodePtr operator()(const NodePtr& n) {
    auto it = memo_.find(n.get());
    if (it != memo_.end()) return it->second;
    NodePtr d = compute(n);
    memo_.emplace(n.get(), d);
    return d;
  }

 private:
  NodePtr compute(const NodePtr& n) {
    switch (n->kind) {
      case Node::Kind::Constant: return makeConstant(0.0);
      case Node::Kind::Symbol: return makeConstant(n->symbol == var_ ? 1.0 : 0.0);
      case Node::Kind::Unary: {
        const NodePtr& a = n->lhs;
        const NodePtr da = (*this)(a);
        if (isConst(da, 0.0)) return da;
        switch (n->unary) {
          case UnaryOp::Neg: return neg(da);
          case UnaryOp::Sqrt: return div(da, mul(makeConstant(2.0), n));
          case UnaryOp::Exp: return mul(n, da);
          case UnaryOp::Log: return div(da, a);
          case UnaryOp::Sin: return mul(unary(UnaryOp::Cos, a), da);
          case UnaryOp::Cos: return neg(mul(unary(UnaryOp::Sin, a), da));
          case UnaryOp::Abs: return mul(div(a, n), da);
        }
        return makeConstant(0.0);
      }
      case Node::Kind::Binary: {
        const NodePtr& a = n->lhs;
        const NodePtr& b = n->rhs;
        const NodePtr da = (*this)(a);
        if (n->binary == BinaryOp::Pow) {
          if (isConst(da, 0.0)) return da;
          const double p = b->value;
          return mul(mul(makeConstant(p), power(a, p - 1.0)), da);
        }
        const NodePtr db = (*this)(b);
        switch (n->binary) {
          case BinaryOp::Add: return add(da, db);
          case BinaryOp::Sub: return sub(da, db);
          case BinaryOp::Mul: return add(mul(da, b), mul(a, db));
          case BinaryOp::Div:
            if (isConst(db, 0.0)) return div(da, b);
            return div(sub(mul(da, b), mul(a, db)), power(b, 2.0));
          case BinaryOp::Pow: break;
        }
        return makeConstant(0.0);
      }
    }
    return makeConstant(0.0);
  }

  std::size_t var_;
  std::unordered_map<const Node*, NodePtr> memo_;
};

class Substituter {
 public:
  explicit Substituter(std::span<const Expression> repl) : repl_(repl) {}

  NodePtr operator()(const NodePtr& n) {
    auto it = memo_.find(n.get());
    if (it != memo_.end()) return it->second;
    NodePtr r;
    switch (n->kind) {
      case Node::Kind::Constant: r = n; break;
      case Node::Kind::Symbol: r = repl_[n->symbol].root(); break;
      case Node::Kind::Unary: r = unary(n->unary, (*this)(n->lhs)); break;
      case Node::Kind::Binary: {
        NodePtr a = (*this)(n->lhs);
        switch (n->binary) {
          case BinaryOp::Add: r = add(a, (*this)(n->rhs)); break;
          case BinaryOp::Sub: r = sub(a, (*this)(n->rhs)); break;
          case BinaryOp::Mul: r = mul(a, (*this)(n->rhs)); break;
          case BinaryOp::Div: r = div(a, (*this)(n->rhs)); break;
          case BinaryOp::Pow: r = power(a, n->rhs->value); break;
        }
        break;
      }
    }
    memo_.emplace(n.get(), r);
    return r;
  }

 private:
  std::span<const Expression> repl_;
  std::unordered_map<const Node*, NodePtr> memo_;
};

void collectSymbols(const Node& n, std::set<std::size_t>& out) {
  switch (n.kind) {
    case Node::Kind::Constant: return;
    case Node::Kind::Symbol: out.insert(n.symbol); return;
    case Node::Kind::Unary: collectSymbols(*n.lhs, out); return;
    case Node::Kind::Binary:
      collectSymbols(*n.lhs, out);
      collectSymbols(*n.rhs, out);
      return;
  }
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& names)
      : text_(text), names_(names) {}

  NodePtr parse() {
    skip();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "empty expression");
    NodePtr e = parseSum();
    skip();
    if (pos_ < text_.size()) {
      throw SyntaxError(pos_, std::string("unexpected character '") + text_[pos_] + "'");
    }
    return e;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) throw SyntaxError(pos_, std::string("expected '") + c + "'");
  }

  NodePtr parseSum() {
    NodePtr lhs = parseProduct();
    for (;;) {
      if (accept('+')) {
        lhs = makeBinary(BinaryOp::Add, lhs, parseProduct());
      } else if (accept('-')) {
        lhs = makeBinary(BinaryOp::Sub, lhs, parseProduct());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parseProduct() {
    NodePtr lhs = parseUnary();
    for (;;) {
      if (accept('*')) {
        lhs = makeBinary(BinaryOp::Mul, lhs, parseUnary());
      } else if (accept('/')) {
        lhs = makeBinary(BinaryOp::Div, lhs, parseUnary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parseUnary() {
    if (accept('-')) return makeUnary(UnaryOp::Neg, parseUnary());
    if (accept('+')) return parseUnary();
    return parsePower();
  }

  NodePtr parsePower() {
    NodePtr base = parsePrimary();
    for (;;) {
      skip();
      const std::size_t at = pos_;
      if (!accept('^')) return base;
      bool negate = false;
      if (accept('-')) {
        negate = true;
      } else {
        accept('+');
      }
      NodePtr e = parsePrimary();
      std::set<std::size_t> free;
      collectSymbols(*e, free);
      if (!free.empty()) throw SyntaxError(at + 1, "exponent must be a constant");
      double p = 0.0;
      try {
        p = evalNode(*e, {}, names_);
      } catch (const DomainError&) {
        throw SyntaxError(at, "exponent is not a finite constant");
      }
      if (negate) p = -p;
      if (!std::isfinite(p)) throw SyntaxError(at, "exponent is not a finite constant");
      base = makeBinary(BinaryOp::Pow, base, makeConstant(p));
    }
  }

  NodePtr parsePrimary() {
    skip();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parseSum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parseNumber();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parseName();
    throw SyntaxError(pos_, std::string("unexpected character '") + c + "'");
  }

  NodePtr parseNumber() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      throw SyntaxError(start, "malformed number");
    }
    return makeConstant(v);
  }

  NodePtr parseName() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    skip();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      static const std::pair<const char*, UnaryOp> functions[] = {
          {"sqrt", UnaryOp::Sqrt}, {"exp", UnaryOp::Exp}, {"log", UnaryOp::Log},
          {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos}, {"abs", UnaryOp::Abs}};
      for (const auto& [fname, op] : functions) {
        if (name == fname) {
          ++pos_;
          NodePtr arg = parseSum();
          expect(')');
          return makeUnary(op, arg);
        }
      }
      throw SyntaxError(start, "unknown function '" + name + "'");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return makeSymbol(i);
    }
    if (name == "pi") return makeConstant(std::numbers::pi);
    throw UnknownSymbolError(name);
  }

  std::string_view text_;
  const std::vector<std::string>& names_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string formatNumber(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

SymbolTable makeSymbolTable(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

Expression::Expression() : root_(makeConstant(0.0)), symbols_(makeSymbolTable({})) {}

Expression::Expression(NodePtr root, SymbolTable symbols)
    : root_(std::move(root)), symbols_(std::move(symbols)) {}

Expression Expression::parse(std::string_view text, const SymbolTable& symbols) {
  Parser p(text, *symbols);
  return Expression(intern(p.parse()), symbols);
}

Expression Expression::constant(double value, const SymbolTable& symbols) {
  return Expression(makeConstant(value), symbols);
}

Expression Expression::symbol(std::string_view name, const SymbolTable& symbols) {
  Expression probe(makeConstant(0.0), symbols);
  return Expression(makeSymbol(probe.symbolIndex(name)), symbols);
}

std::size_t Expression::symbolIndex(std::string_view name) const {
  for (std::size_t i = 0; i < symbols_->size(); ++i) {
    if ((*symbols_)[i] == name) return i;
  }
  throw UnknownSymbolError(std::string(name));
}

double Expression::eval(std::span<const double> values) const {
  return evalNode(*root_, values, *symbols_);
}

double Expression::eval(const std::map<std::string, double>& bindings) const {
  std::vector<double> values(symbols_->size(), 0.0);
  for (std::size_t i : freeSymbols()) {
    auto it = bindings.find((*symbols_)[i]);
    if (it == bindings.end()) throw UnknownSymbolError((*symbols_)[i]);
    values[i] = it->second;
  }
  return eval(values);
}

Expression Expression::diff(std::size_t index) const {
  Differentiator d(index);
  return Expression(d(root_), symbols_);
}

Expression Expression::diff(std::string_view name) const { return diff(symbolIndex(name)); }

Expression Expression::substitute(std::span<const Expression> replacements) const {
  if (replacements.size() != symbols_->size()) {
    throw Error(ErrorKind::PreconditionViolation, "substitution needs one expression per symbol");
  }
  SymbolTable target = replacements.empty() ? symbols_ : replacements.front().symbols();
  Substituter s(replacements);
  return Expression(s(root_), target);
}

std::string Expression::str() const { return describe(*root_, *symbols_); }

std::set<std::size_t> Expression::freeSymbols() const {
  std::set<std::size_t> out;
  collectSymbols(*root_, out);
  return out;
}

std::optional<double> Expression::constantValue() const {
  if (root_->kind == Node::Kind::Constant) return root_->value;
  return std::nullopt;
}

bool Expression::isZero() const { return isConst(root_, 0.0); }

Expression operator+(const Expression& a, const Expression& b) {
  return Expression(add(a.root(), b.root()), a.symbols());
}
Expression operator-(const Expression& a, const Expression& b) {
  return Expression(sub(a.root(), b.root()), a.symbols());
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression(mul(a.root(), b.root()), a.symbols());
}
Expression operator/(const Expression& a, const Expression& b) {
  return Expression(div(a.root(), b.root()), a.symbols());
}
Expression operator-(const Expression& a) { return Expression(neg(a.root()), a.symbols()); }
Expression operator*(double a, const Expression& b) {
  return Expression(mul(makeConstant(a), b.root()), b.symbols());
}
Expression operator+(const Expression& a, double b) {
  return Expression(add(a.root(), makeConstant(b)), a.symbols());
}
Expression pow(const Expression& a, double exponent) {
  return Expression(power(a.root(), exponent), a.symbols());
}
Expression apply(UnaryOp op, const Expression& a) {
  return Expression(unary(op, a.root()), a.symbols());
}

Program::Program(std::span<const Expression> outputs) {
  if (!outputs.empty()) symbols_ = outputs.front().symbols();
  std::unordered_map<const Node*, std::size_t> slot;
  std::unordered_map<Shape, std::size_t, ShapeHash> shape;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    std::vector<std::pair<NodePtr, bool>> stack{{outputs[k].root(), false}};
    while (!stack.empty()) {
      auto [node, expanded] = stack.back();
      stack.pop_back();
      if (slot.count(node.get())) continue;
      if (!expanded) {
        stack.emplace_back(node, true);
        if (node->rhs) stack.emplace_back(node->rhs, false);
        if (node->lhs) stack.emplace_back(node->lhs, false);
        continue;
      }
      Instr in{node->kind, node->unary, node->binary, node->value, 0, 0, k, node};
      if (node->kind == Node::Kind::Symbol) in.a = node->symbol;
      if (node->lhs) in.a = slot.at(node->lhs.get());
      if (node->rhs) in.b = slot.at(node->rhs.get());
      const Shape key = shapeOf(*node, in.a, in.b);
      const auto [it, fresh] = shape.emplace(key, code_.size());
      slot.emplace(node.get(), it->second);
      if (fresh) code_.push_back(std::move(in));
    }
    outputs_.push_back(slot.at(outputs[k].root().get()));
  }
}

void Program::run(std::span<const double> inputs, std::span<double> outputs) const {
  std::vector<double> reg(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    bool ok = true;
    switch (in.kind) {
      case Node::Kind::Constant: reg[i] = in.value; break;
      case Node::Kind::Symbol: reg[i] = inputs[in.a]; break;
      case Node::Kind::Unary: reg[i] = unaryValue(in.unary, reg[in.a], ok); break;
      case Node::Kind::Binary: reg[i] = binaryValue(in.binary, reg[in.a], reg[in.b], ok); break;
    }
    if (!ok) {
      throw DomainError(domainMessage(*in.node, *symbols_), in.owner);
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) outputs[k] = reg[outputs_[k]];
}

}  // namespace decoupler

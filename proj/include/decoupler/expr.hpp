#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decoupler {

enum class UnaryOp { Neg, Sqrt, Exp, Log, Sin, Cos, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Constant, Symbol, Unary, Binary };
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::size_t symbol = 0;
  UnaryOp unary = UnaryOp::Neg;
  BinaryOp binary = BinaryOp::Add;
  NodePtr lhs;
  NodePtr rhs;
};

using SymbolTable = std::shared_ptr<const std::vector<std::string>>;

SymbolTable makeSymbolTable(std::vector<std::string> names);

/// Immutable expression tree over a fixed symbol table.
/// Symbols are stored as indices into the table, so evaluation takes a
/// value vector laid out in table order.
class Expression {
 public:
  Expression();
  Expression(NodePtr root, SymbolTable symbols);

  static Expression parse(std::string_view text, const SymbolTable& symbols);
  static Expression constant(double value, const SymbolTable& symbols);
  static Expression symbol(std::string_view name, const SymbolTable& symbols);

  double eval(std::span<const double> values) const;
  double eval(const std::map<std::string, double>& bindings) const;

  Expression diff(std::size_t index) const;
  Expression diff(std::string_view name) const;

  /// Replaces symbol i by replacements[i]; all replacements share one table.
  Expression substitute(std::span<const Expression> replacements) const;

  std::string str() const;
  std::set<std::size_t> freeSymbols() const;
  std::optional<double> constantValue() const;
  bool isZero() const;

  const NodePtr& root() const { return root_; }
  const SymbolTable& symbols() const { return symbols_; }
  std::size_t symbolIndex(std::string_view name) const;

 private:
  NodePtr root_;
  SymbolTable symbols_;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression operator*(double a, const Expression& b);
Expression operator+(const Expression& a, double b);
Expression pow(const Expression& a, double exponent);
Expression apply(UnaryOp op, const Expression& a);

std::string formatNumber(double value);

/// Flattened evaluation program for a batch of expressions sharing one
/// symbol table. Common subtrees (by node identity) are evaluated once.
class Program {
 public:
  Program() = default;
  explicit Program(std::span<const Expression> outputs);

  std::size_t outputCount() const { return outputs_.size(); }
  /// Throws DomainError naming the output index that owns the failing node.
  void run(std::span<const double> inputs, std::span<double> outputs) const;

 private:
  struct Instr {
    Node::Kind kind;
    UnaryOp unary;
    BinaryOp binary;
    double value;
    std::size_t a;
    std::size_t b;
    std::size_t owner;
    NodePtr node;
  };
  std::vector<Instr> code_;
  std::vector<std::size_t> outputs_;
  SymbolTable symbols_;
};

}  // namespace decoupler

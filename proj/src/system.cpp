#include "decoupler/system.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "decoupler/error.hpp"

namespace decoupler {

namespace {

[[noreturn]] void schema(const std::string& message) { fail(ErrorKind::Schema, message); }

bool validIdentifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

std::string exprText(const Json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return formatNumber(j.get<double>());
  schema(where + ": expected an expression string");
}

Expression parseAt(const Json& j, const SymbolTable& table, const std::string& where) {
  const std::string text = exprText(j, where);
  try {
    return Expression::parse(text, table);
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

std::vector<Expression> parseVector(const Json& j, const SymbolTable& table, int n,
                                    const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    schema(where + ": expected an array of " + std::to_string(n) + " expressions");
  }
  std::vector<Expression> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(parseAt(j[i], table, where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<Expression> parseMatrix(const Json& j, const SymbolTable& table, int n,
                                    const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    schema(where + ": expected " + std::to_string(n) + " rows");
  }
  std::vector<Expression> out;
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) {
      schema(where + "[" + std::to_string(i) + "]: expected " + std::to_string(n) + " columns");
    }
    for (int k = 0; k < n; ++k) {
      out.push_back(parseAt(j[i][k], table,
                            where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]"));
    }
  }
  return out;
}

Interval parseInterval(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    schema(where + ": expected [lo, hi]");
  }
  Interval r{j[0].get<double>(), j[1].get<double>()};
  if (!(r.lo < r.hi)) schema(where + ": degenerate interval");
  return r;
}

std::vector<int> parseInts(const Json& j, const std::string& where) {
  if (!j.is_array()) schema(where + ": expected an integer array");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) schema(where + ": expected integers");
    out.push_back(v.get<int>());
  }
  return out;
}

bool dependsOnIndependent(const Expression& e) {
  const auto s = e.freeSymbols();
  return s.count(0) || s.count(1);
}

}  // namespace

const char* modeName(DecouplingMode mode) {
  return mode == DecouplingMode::Full ? "full" : "partial";
}

DecouplingMode parseMode(const std::string& text) {
  if (text == "full") return DecouplingMode::Full;
  if (text == "partial") return DecouplingMode::Partial;
  fail(ErrorKind::Schema, "mode must be 'partial' or 'full', got '" + text + "'");
}

QuasilinearSystem QuasilinearSystem::load(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    schema(std::string("invalid JSON: ") + e.what());
  }
  return fromJson(doc);
}

std::string QuasilinearSystem::save() const { return document_.dump(2) + "\n"; }

QuasilinearSystem QuasilinearSystem::fromJson(const Json& doc) {
  if (!doc.is_object()) schema("model document must be an object");
  QuasilinearSystem s;
  s.document_ = doc;
  s.name_ = doc.value("name", std::string("model"));
  if (!doc.contains("n") || !doc["n"].is_number_integer()) schema("'n' must be an integer");
  s.n_ = doc["n"].get<int>();
  if (s.n_ < 1) schema("'n' must be positive");
  const int n = s.n_;

  if (!doc.contains("states") || !doc["states"].is_array() ||
      static_cast<int>(doc["states"].size()) != n) {
    schema("'states' must list n names");
  }
  std::set<std::string> seen{"t", "x"};
  for (const auto& v : doc["states"]) {
    if (!v.is_string() || !validIdentifier(v.get<std::string>())) schema("invalid state name");
    if (!seen.insert(v.get<std::string>()).second) schema("duplicate name " + v.dump());
    s.states_.push_back(v.get<std::string>());
  }
  if (doc.contains("independent")) {
    const auto& ind = doc["independent"];
    if (!ind.is_array() || ind.size() != 2 || ind[0] != "t" || ind[1] != "x") {
      schema("'independent' must be [\"t\", \"x\"]");
    }
  }
  if (doc.contains("parameters")) {
    if (!doc["parameters"].is_object()) schema("'parameters' must be an object");
    for (const auto& [k, v] : doc["parameters"].items()) {
      if (!validIdentifier(k)) schema("invalid parameter name '" + k + "'");
      if (!seen.insert(k).second) schema("duplicate name '" + k + "'");
      if (!v.is_number()) schema("parameter '" + k + "' must be a number");
      s.parameters_.emplace_back(k, v.get<double>());
    }
  }
  std::vector<std::string> names{"t", "x"};
  names.insert(names.end(), s.states_.begin(), s.states_.end());
  for (const auto& [k, v] : s.parameters_) names.push_back(k);
  s.symbols_ = makeSymbolTable(names);

  if (!doc.contains("A")) schema("missing 'A'");
  std::vector<Expression> a1 = parseMatrix(doc["A"], s.symbols_, n, "A");
  std::vector<Expression> g1(n, Expression::constant(0.0, s.symbols_));
  if (doc.contains("g")) g1 = parseVector(doc["g"], s.symbols_, n, "g");

  if (doc.value("normalize", false)) {
    if (!doc.contains("A0")) schema("'normalize' requires 'A0'");
    std::vector<Expression> a0 = parseMatrix(doc["A0"], s.symbols_, n, "A0");
    bool diagonal = true;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        if (i != k && !a0[i * n + k].isZero()) diagonal = false;
      }
    }
    if (diagonal) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) a1[i * n + k] = a1[i * n + k] / a0[i * n + i];
        g1[i] = g1[i] / a0[i * n + i];
      }
    } else {
      s.numericNormalize_ = true;
      s.a0_ = a0;
    }
  }
  s.a_ = a1;
  s.g_ = g1;

  if (!doc.contains("domain") || !doc["domain"].is_object()) schema("missing 'domain'");
  const auto& dom = doc["domain"];
  for (const auto& st : s.states_) {
    if (!dom.contains(st)) schema("domain missing interval for '" + st + "'");
    s.box_.push_back(parseInterval(dom[st], "domain." + st));
  }
  if (dom.contains("t")) s.tRange_ = parseInterval(dom["t"], "domain.t");
  if (dom.contains("x")) s.xRange_ = parseInterval(dom["x"], "domain.x");
  for (const auto& [k, v] : dom.items()) {
    if (k != "t" && k != "x" &&
        std::find(s.states_.begin(), s.states_.end(), k) == s.states_.end()) {
      schema("domain names unknown variable '" + k + "'");
    }
  }

  if (doc.contains("exclude")) {
    if (!doc["exclude"].is_array()) schema("'exclude' must be an array");
    for (std::size_t i = 0; i < doc["exclude"].size(); ++i) {
      s.exclude_.push_back(
          parseAt(doc["exclude"][i], s.symbols_, "exclude[" + std::to_string(i) + "]"));
    }
  }

  for (const auto& e : s.a_) {
    if (dependsOnIndependent(e)) s.autonomous_ = false;
  }
  for (const auto& e : s.a0_) {
    if (dependsOnIndependent(e)) s.autonomous_ = false;
  }
  for (const auto& e : s.g_) {
    if (!e.isZero()) s.homogeneous_ = false;
    if (dependsOnIndependent(e)) s.autonomous_ = false;
  }

  std::vector<Expression> outputs = s.a_;
  outputs.insert(outputs.end(), s.g_.begin(), s.g_.end());
  outputs.insert(outputs.end(), s.a0_.begin(), s.a0_.end());
  s.values_ = Program(outputs);
  std::vector<Expression> partials;
  for (int k = 0; k < n; ++k) {
    for (const auto& e : s.a_) partials.push_back(e.diff(s.stateSymbol(k)));
  }
  for (int k = 0; k < n && s.numericNormalize_; ++k) {
    for (const auto& e : s.a0_) partials.push_back(e.diff(s.stateSymbol(k)));
  }
  s.partials_ = Program(partials);
  s.excludeProgram_ = Program(s.exclude_);

  if (doc.contains("partitionHint")) {
    const auto& ph = doc["partitionHint"];
    if (!ph.is_object() || !ph.contains("blockSizes")) schema("partitionHint needs blockSizes");
    PartitionHint hint;
    hint.blockSizes = parseInts(ph["blockSizes"], "partitionHint.blockSizes");
    hint.mode = parseMode(ph.value("mode", std::string("partial")));
    if (ph.contains("assignment")) {
      hint.assignment = parseInts(ph["assignment"], "partitionHint.assignment");
    }
    s.partitionHint_ = hint;
  }
  if (doc.contains("autovectorHint")) {
    const auto& ah = doc["autovectorHint"];
    if (!ah.is_object() || !ah.contains("right")) schema("autovectorHint needs 'right'");
    AutovectorHint hint;
    if (!ah["right"].is_array() || static_cast<int>(ah["right"].size()) != n) {
      schema("autovectorHint.right must hold n vectors");
    }
    for (int k = 0; k < n; ++k) {
      hint.right.push_back(parseVector(ah["right"][k], s.symbols_, n,
                                       "autovectorHint.right[" + std::to_string(k) + "]"));
    }
    if (ah.contains("left")) {
      if (!ah["left"].is_array() || static_cast<int>(ah["left"].size()) != n) {
        schema("autovectorHint.left must hold n vectors");
      }
      for (int k = 0; k < n; ++k) {
        hint.left.push_back(parseVector(ah["left"][k], s.symbols_, n,
                                        "autovectorHint.left[" + std::to_string(k) + "]"));
      }
    }
    if (ah.contains("eigenvalues")) {
      hint.eigenvalues = parseVector(ah["eigenvalues"], s.symbols_, n, "autovectorHint.eigenvalues");
    }
    s.autovectorHint_ = hint;
  }
  if (doc.contains("transformHint")) {
    TransformHint hint;
    hint.forward = parseVector(doc["transformHint"], s.symbols_, n, "transformHint");
    for (const auto& e : hint.forward) {
      if (dependsOnIndependent(e)) schema("transformHint must depend on states only");
    }
    if (doc.contains("inverseTransformHint")) {
      const auto& ih = doc["inverseTransformHint"];
      if (!ih.is_object() || !ih.contains("states") || !ih.contains("map")) {
        schema("inverseTransformHint needs 'states' and 'map'");
      }
      std::vector<std::string> inv{"t", "x"};
      for (const auto& v : ih["states"]) {
        if (!v.is_string() || !validIdentifier(v.get<std::string>())) {
          schema("invalid inverseTransformHint state name");
        }
        hint.inverseStates.push_back(v.get<std::string>());
        inv.push_back(v.get<std::string>());
      }
      if (static_cast<int>(hint.inverseStates.size()) != n) {
        schema("inverseTransformHint.states must list n names");
      }
      for (const auto& [k, v] : s.parameters_) inv.push_back(k);
      hint.inverse = parseVector(ih["map"], makeSymbolTable(inv), n, "inverseTransformHint.map");
    }
    s.transformHint_ = hint;
  }
  return s;
}

bool QuasilinearSystem::insideBox(const StatePoint& p, double slack) const {
  for (int k = 0; k < n_; ++k) {
    const double w = slack * box_[k].width();
    if (!(p.u[k] >= box_[k].lo - w && p.u[k] <= box_[k].hi + w)) return false;
  }
  return true;
}

std::vector<double> QuasilinearSystem::inputs(const StatePoint& p) const {
  std::vector<double> in(symbols_->size());
  in[0] = p.t;
  in[1] = p.x;
  for (int k = 0; k < n_; ++k) in[2 + k] = p.u[k];
  for (std::size_t i = 0; i < parameters_.size(); ++i) in[2 + n_ + i] = parameters_[i].second;
  return in;
}

void QuasilinearSystem::evaluate(const StatePoint& p, Eigen::MatrixXd* a,
                                 Eigen::VectorXd* g) const {
  const int n = n_;
  std::vector<double> out(values_.outputCount());
  try {
    values_.run(inputs(p), out);
  } catch (const DomainError& e) {
    std::string where;
    const std::size_t k = e.output();
    if (k < static_cast<std::size_t>(n * n)) {
      where = "A[" + std::to_string(k / n) + "][" + std::to_string(k % n) + "]";
    } else if (k < static_cast<std::size_t>(n * n + n)) {
      where = "g[" + std::to_string(k - n * n) + "]";
    } else {
      const std::size_t r = k - n * n - n;
      where = "A0[" + std::to_string(r / n) + "][" + std::to_string(r % n) + "]";
    }
    throw DomainError(where + ": " + e.what(), k);
  }
  Eigen::MatrixXd a1(n, n);
  Eigen::VectorXd g1(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) a1(i, k) = out[i * n + k];
    g1[i] = out[n * n + i];
  }
  if (numericNormalize_) {
    Eigen::MatrixXd a0(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) a0(i, k) = out[n * n + n + i * n + k];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a0);
    if (std::fabs(lu.determinant()) < 1e-300) throw DomainError("A0 is singular");
    if (a) *a = lu.solve(a1);
    if (g) *g = lu.solve(g1);
    return;
  }
  if (a) *a = a1;
  if (g) *g = g1;
}

Eigen::MatrixXd QuasilinearSystem::matrix(const StatePoint& p) const {
  Eigen::MatrixXd a;
  evaluate(p, &a, nullptr);
  return a;
}

Eigen::VectorXd QuasilinearSystem::source(const StatePoint& p) const {
  Eigen::VectorXd g;
  evaluate(p, nullptr, &g);
  return g;
}

std::vector<Eigen::MatrixXd> QuasilinearSystem::matrixPartials(const StatePoint& p) const {
  const int n = n_;
  std::vector<double> out(partials_.outputCount());
  try {
    partials_.run(inputs(p), out);
  } catch (const DomainError& e) {
    const std::size_t k = e.output() % static_cast<std::size_t>(n * n);
    throw DomainError("dA[" + std::to_string(k / n) + "][" + std::to_string(k % n) + "]/du_" +
                          std::to_string(e.output() / (n * n) % n) + ": " + e.what(),
                      e.output());
  }
  std::vector<Eigen::MatrixXd> d(n, Eigen::MatrixXd(n, n));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[k](i, j) = out[k * n * n + i * n + j];
    }
  }
  if (numericNormalize_) {
    Eigen::MatrixXd a;
    evaluate(p, &a, nullptr);
    std::vector<double> v(values_.outputCount());
    values_.run(inputs(p), v);
    Eigen::MatrixXd a0(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a0(i, j) = v[n * n + n + i * n + j];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a0);
    for (int k = 0; k < n; ++k) {
      Eigen::MatrixXd d0(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) d0(i, j) = out[n * n * n + k * n * n + i * n + j];
      }
      d[k] = lu.solve(d[k] - d0 * a);
    }
  }
  return d;
}

Eigen::MatrixXd QuasilinearSystem::matrixDerivative(const StatePoint& p,
                                                    const Eigen::VectorXd& w) const {
  const auto d = matrixPartials(p);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n_, n_);
  for (int k = 0; k < n_; ++k) r += w[k] * d[k];
  return r;
}

bool QuasilinearSystem::excluded(const StatePoint& p) const {
  try {
    std::vector<double> out(excludeProgram_.outputCount());
    excludeProgram_.run(inputs(p), out);
    for (double v : out) {
      if (!(v <= 0.0)) return true;
    }
    Eigen::MatrixXd a;
    Eigen::VectorXd g;
    evaluate(p, &a, &g);
    if (!a.allFinite() || !g.allFinite()) return true;
  } catch (const DomainError&) {
    return true;
  }
  return false;
}

QuasilinearSystem conjugateSystem(const QuasilinearSystem& tri, const ConjugationSpec& spec) {
  const int n = tri.n();
  if (static_cast<int>(spec.stateNames.size()) != n || static_cast<int>(spec.forward.size()) != n ||
      static_cast<int>(spec.inverse.size()) != n || static_cast<int>(spec.box.size()) != n) {
    fail(ErrorKind::PreconditionViolation, "conjugation spec must have n entries everywhere");
  }
  std::vector<std::string> names{"t", "x"};
  names.insert(names.end(), spec.stateNames.begin(), spec.stateNames.end());
  for (const auto& [k, v] : tri.parameters()) names.push_back(k);
  const SymbolTable table = makeSymbolTable(names);

  std::vector<Expression> forward;
  std::vector<Expression> inverse;
  for (int i = 0; i < n; ++i) {
    forward.push_back(Expression::parse(spec.forward[i], table));
    inverse.push_back(Expression::parse(spec.inverse[i], tri.symbols()));
  }

  std::vector<Expression> repl;
  repl.push_back(Expression::symbol("t", table));
  repl.push_back(Expression::symbol("x", table));
  for (int i = 0; i < n; ++i) repl.push_back(forward[i]);
  for (const auto& [k, v] : tri.parameters()) repl.push_back(Expression::symbol(k, table));

  std::vector<Expression> dh(n * n);
  std::vector<Expression> dH(n * n);
  std::vector<Expression> t(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dh[i * n + j] = inverse[i].diff(tri.stateSymbol(j)).substitute(repl);
      dH[i * n + j] = forward[i].diff(2 + static_cast<std::size_t>(j));
      t[i * n + j] = tri.matrixEntry(i, j).substitute(repl);
    }
  }
  const Expression zero = Expression::constant(0.0, table);
  std::vector<Expression> m(n * n, zero);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < n; ++k) m[i * n + l] = m[i * n + l] + dh[i * n + k] * t[k * n + l];
    }
  }
  Json a = Json::array();
  for (int i = 0; i < n; ++i) {
    Json row = Json::array();
    for (int j = 0; j < n; ++j) {
      Expression e = zero;
      for (int l = 0; l < n; ++l) e = e + m[i * n + l] * dH[l * n + j];
      row.push_back(e.str());
    }
    a.push_back(row);
  }

  Json doc;
  doc["name"] = spec.name;
  doc["n"] = n;
  doc["states"] = spec.stateNames;
  doc["independent"] = {"t", "x"};
  Json params = Json::object();
  for (const auto& [k, v] : tri.parameters()) params[k] = v;
  doc["parameters"] = params;
  doc["A"] = a;
  if (!tri.homogeneous()) {
    Json g = Json::array();
    for (int i = 0; i < n; ++i) {
      Expression e = zero;
      for (int k = 0; k < n; ++k) e = e + dh[i * n + k] * tri.sourceEntry(k).substitute(repl);
      g.push_back(e.str());
    }
    doc["g"] = g;
  }
  Json dom = Json::object();
  for (int i = 0; i < n; ++i) dom[spec.stateNames[i]] = {spec.box[i].lo, spec.box[i].hi};
  if (tri.timeInterval()) dom["t"] = {tri.timeInterval()->lo, tri.timeInterval()->hi};
  if (tri.spaceInterval()) dom["x"] = {tri.spaceInterval()->lo, tri.spaceInterval()->hi};
  doc["domain"] = dom;
  if (!spec.exclude.empty()) doc["exclude"] = spec.exclude;
  if (tri.partitionHint()) {
    const auto& ph = *tri.partitionHint();
    Json j;
    j["blockSizes"] = ph.blockSizes;
    j["mode"] = modeName(ph.mode);
    if (!ph.assignment.empty()) j["assignment"] = ph.assignment;
    doc["partitionHint"] = j;
  }
  doc["transformHint"] = spec.forward;
  Json inv;
  inv["states"] = tri.stateNames();
  inv["map"] = spec.inverse;
  doc["inverseTransformHint"] = inv;

  SamplePlan plan;
  plan.count = spec.validationSamples;
  const auto pts = boxSamples(spec.box, plan);
  std::vector<double> newIn(names.size(), 0.0);
  std::vector<double> triIn(tri.symbols()->size(), 0.0);
  for (std::size_t i = 0; i < tri.parameters().size(); ++i) {
    newIn[2 + n + i] = tri.parameters()[i].second;
    triIn[2 + n + i] = tri.parameters()[i].second;
  }
  for (const auto& u : pts) {
    for (int k = 0; k < n; ++k) newIn[2 + k] = u[k];
    for (int k = 0; k < n; ++k) triIn[2 + k] = forward[k].eval(newIn);
    double err = 0.0;
    for (int k = 0; k < n; ++k) err = std::max(err, std::fabs(inverse[k].eval(triIn) - u[k]));
    if (err > 1e-9 * (1.0 + u.norm())) {
      fail(ErrorKind::NotInverse, "h(H(u)) differs from u by " + formatNumber(err));
    }
    Eigen::MatrixXd jac(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) jac(i, j) = dH[i * n + j].eval(newIn);
    }
    if (std::fabs(jac.determinant()) < 1e-12) {
      fail(ErrorKind::SingularJacobian, "grad H is singular inside the box");
    }
  }
  return QuasilinearSystem::fromJson(doc);
}

}  // namespace decoupler

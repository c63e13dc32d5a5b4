#include "decoupler/models.hpp"

#include <cmath>
#include <random>

#include "decoupler/error.hpp"

namespace decoupler {

namespace {

std::vector<std::string> namesWith(const std::vector<std::string>& states,
                                   const std::map<std::string, double>& params) {
  std::vector<std::string> names{"t", "x"};
  names.insert(names.end(), states.begin(), states.end());
  for (const auto& [k, v] : params) names.push_back(k);
  return names;
}

Json parameterObject(const std::map<std::string, double>& params) {
  Json j = Json::object();
  for (const auto& [k, v] : params) j[k] = v;
  return j;
}

/// True when law and reference agree at a handful of points of the variable.
bool sameLaw(const Expression& law, const Expression& reference, std::size_t var,
             const std::vector<double>& base) {
  for (double v : {0.5, 0.8, 1.1, 1.7, 2.0}) {
    auto in = base;
    in[var] = v;
    try {
      const double a = law.eval(in);
      const double b = reference.eval(in);
      if (std::fabs(a - b) > 1e-12 * (1.0 + std::fabs(b))) return false;
    } catch (const DomainError&) {
      return false;
    }
  }
  return true;
}

std::string paren(const std::string& s) { return "(" + s + ")"; }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double symmetric(std::mt19937_64& rng) { return 2.0 * unit(rng) - 1.0; }
double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

struct Poly {
  double c0 = 0.0;
  std::vector<std::pair<int, double>> linear;
  std::vector<std::tuple<int, int, double>> quadratic;

  double bound(double ub) const {
    double b = 0.0;
    for (const auto& [k, a] : linear) b += std::fabs(a) * ub;
    for (const auto& [k, l, a] : quadratic) b += std::fabs(a) * ub * ub;
    return b;
  }
  void scaleVarying(double f) {
    for (auto& [k, a] : linear) a = round3(a * f);
    for (auto& [k, l, a] : quadratic) a = round3(a * f);
  }
  std::string str(const std::vector<std::string>& names) const {
    std::string s = formatNumber(c0);
    for (const auto& [k, a] : linear) {
      if (a != 0.0) s += " + " + paren(formatNumber(a)) + "*" + names[k];
    }
    for (const auto& [k, l, a] : quadratic) {
      if (a != 0.0) s += " + " + paren(formatNumber(a)) + "*" + names[k] + "*" + names[l];
    }
    return s;
  }
};

Poly randomPoly(std::mt19937_64& rng, int vars) {
  Poly p;
  for (int k = 0; k < vars; ++k) p.linear.emplace_back(k, symmetric(rng));
  const int a = static_cast<int>(rng() % vars);
  const int b = static_cast<int>(rng() % vars);
  p.quadratic.emplace_back(std::min(a, b), std::max(a, b), symmetric(rng));
  return p;
}

}  // namespace

QuasilinearSystem buildBarotropic(const std::string& pressureLaw,
                                  const std::map<std::string, double>& parameters) {
  const std::vector<std::string> states{"rho", "v"};
  const SymbolTable table = makeSymbolTable(namesWith(states, parameters));
  const Expression p = Expression::parse(pressureLaw, table);
  for (std::size_t s : p.freeSymbols()) {
    if (s < 2 || s == 3) fail(ErrorKind::Schema, "pressure law may depend on rho and parameters only");
  }
  const std::string dp = paren(p.diff("rho").str());
  const std::string c = "sqrt" + dp;

  Json doc;
  doc["name"] = "barotropic";
  doc["n"] = 2;
  doc["states"] = states;
  doc["independent"] = {"t", "x"};
  doc["parameters"] = parameterObject(parameters);
  doc["A"] = Json::array({Json::array({"v", "rho"}), Json::array({dp + "/rho", "v"})});
  doc["domain"] = {{"rho", {0.5, 2.0}}, {"v", {-1.0, 1.0}}};
  doc["exclude"] = {"-" + dp};
  doc["partitionHint"] = {{"blockSizes", {1, 1}}, {"mode", "full"}, {"assignment", {0, 1}}};
  doc["autovectorHint"] = {
      {"eigenvalues", {"v + " + c, "v - " + c}},
      {"right", Json::array({Json::array({"rho", c}), Json::array({"rho", "-" + c})})},
      {"left", Json::array({Json::array({c, "rho"}), Json::array({c, "-rho"})})},
  };

  bool cubic = parameters.count("p0") > 0;
  if (cubic) {
    std::vector<double> base(table->size(), 0.0);
    std::size_t i = 4;
    for (const auto& [k, v] : parameters) base[i++] = v;
    cubic = sameLaw(p, Expression::parse("p0*rho^3", table), 2, base);
  }
  if (cubic) {
    doc["transformHint"] = {"v + sqrt(3*p0)*rho", "v - sqrt(3*p0)*rho"};
    doc["inverseTransformHint"] = {
        {"states", {"U1", "U2"}},
        {"map", {"(U1 - U2)/(2*sqrt(3*p0))", "(U1 + U2)/2"}},
    };
  }
  return QuasilinearSystem::fromJson(doc);
}

QuasilinearSystem buildIsentropic(const std::string& entropyTerm, double p0) {
  const std::vector<std::string> states{"rho", "v", "s"};
  const std::map<std::string, double> params{{"p0", p0}};
  const SymbolTable table = makeSymbolTable(namesWith(states, params));
  const Expression f = Expression::parse(entropyTerm, table);
  for (std::size_t s : f.freeSymbols()) {
    if (s != 4 && s != 5) fail(ErrorKind::Schema, "entropy term may depend on s and p0 only");
  }
  const Expression p = Expression::parse("p0*rho^3*s^2", table) + f;
  const std::string pr = paren(p.diff("rho").str());
  const std::string ps = paren(p.diff("s").str());
  const std::string c = "sqrt" + pr;

  Json doc;
  doc["name"] = "isentropic";
  doc["n"] = 3;
  doc["states"] = states;
  doc["independent"] = {"t", "x"};
  doc["parameters"] = parameterObject(params);
  doc["A"] = {{"v", "rho", "0"}, {pr + "/rho", "v", ps + "/rho"}, {"0", "0", "v"}};
  doc["domain"] = {{"rho", {0.5, 2.0}}, {"v", {-1.0, 1.0}}, {"s", {0.5, 1.5}}};
  doc["exclude"] = {"-" + pr};
  doc["partitionHint"] = {{"blockSizes", {1, 1, 1}}, {"mode", "partial"}, {"assignment", {0, 1, 2}}};
  doc["autovectorHint"] = {
      {"eigenvalues", {"v + " + c, "v - " + c, "v"}},
      {"right", {{"rho", c, "0"}, {"rho", "-" + c, "0"}, {ps, "0", "-" + pr}}},
  };
  doc["transformHint"] = {"v + sqrt(3*p0)*rho*s", "v - sqrt(3*p0)*rho*s", "s"};
  doc["inverseTransformHint"] = {
      {"states", {"U1", "U2", "U3"}},
      {"map", {"(U1 - U2)/(2*sqrt(3*p0)*U3)", "(U1 + U2)/2", "U3"}},
  };
  return QuasilinearSystem::fromJson(doc);
}

QuasilinearSystem buildThreadline(double k, const std::string& tensionLaw) {
  const std::vector<std::string> states{"rho", "Vx", "v", "eps"};
  const std::map<std::string, double> params{{"k", k}};
  const SymbolTable lawTable = makeSymbolTable({"t", "x", "m", "k"});
  const Expression law = Expression::parse(tensionLaw, lawTable);
  for (std::size_t s : law.freeSymbols()) {
    if (s < 2) fail(ErrorKind::Schema, "tension law may depend on m and k only");
  }
  const SymbolTable table = makeSymbolTable(namesWith(states, params));
  const std::vector<Expression> repl{
      Expression::symbol("t", table), Expression::symbol("x", table),
      Expression::parse("rho/sqrt(1 + eps^2)", table), Expression::symbol("k", table)};
  const std::string m = "(rho/sqrt(1 + eps^2))";
  const std::string tension = paren(law.substitute(repl).str());
  const std::string dtension = paren(law.diff("m").substitute(repl).str());

  Json doc;
  doc["name"] = "threadline";
  doc["n"] = 4;
  doc["states"] = states;
  doc["independent"] = {"t", "x"};
  doc["parameters"] = parameterObject(params);
  doc["A"] = {
      {"Vx", "rho", "0", "0"},
      {"-" + dtension + "/(rho*(1 + eps^2))", "Vx", "0",
       "eps/(1 + eps^2)^2*(" + dtension + " + " + tension + "/" + m + ")"},
      {"0", "0", "2*Vx", "Vx^2 - " + tension + "/(" + m + "*(1 + eps^2))"},
      {"0", "0", "-1", "0"},
  };
  doc["domain"] = {{"rho", {0.5, 2.0}}, {"Vx", {-1.0, 1.0}}, {"v", {-1.0, 1.0}}, {"eps", {-0.5, 0.5}}};
  doc["partitionHint"] = {{"blockSizes", {2, 2}}, {"mode", "partial"}, {"assignment", {0, 1, 2, 3}}};

  std::vector<double> base(lawTable->size(), 0.0);
  base[3] = k;
  if (sameLaw(law, Expression::parse("k/m", lawTable), 2, base)) {
    const std::string c12 = "sqrt(-" + dtension + "/(1 + eps^2))";
    const std::string c34 = "sqrt(" + tension + "/(" + m + "*(1 + eps^2)))";
    doc["exclude"] = {dtension, "-" + tension};
    doc["autovectorHint"] = {
        {"eigenvalues", {"Vx + " + c12, "Vx - " + c12, "Vx + " + c34, "Vx - " + c34}},
        {"right",
         {{"rho", c12, "0", "0"},
          {"rho", "-" + c12, "0", "0"},
          {"0", "0", "-(Vx + " + c34 + ")", "1"},
          {"0", "0", "-(Vx - " + c34 + ")", "1"}}},
    };
    doc["transformHint"] = {"rho", "Vx", "v", "eps"};
    doc["inverseTransformHint"] = {{"states", {"U1", "U2", "U3", "U4"}},
                                   {"map", {"U1", "U2", "U3", "U4"}}};
  }
  return QuasilinearSystem::fromJson(doc);
}

SyntheticModel buildSyntheticTriangular(const SyntheticOptions& opt) {
  int n = 0;
  for (int b : opt.blockSizes) {
    if (b < 1) fail(ErrorKind::InvalidPartition, "block sizes must be positive");
    n += b;
  }
  if (opt.blockSizes.size() < 2) fail(ErrorKind::InvalidPartition, "need at least two blocks");
  std::vector<int> blockOf;
  std::vector<int> prefix;
  int m = 0;
  for (std::size_t i = 0; i < opt.blockSizes.size(); ++i) {
    m += opt.blockSizes[i];
    prefix.push_back(m);
    for (int r = 0; r < opt.blockSizes[i]; ++r) blockOf.push_back(static_cast<int>(i));
  }
  std::vector<std::string> big;
  std::vector<std::string> small;
  for (int k = 0; k < n; ++k) {
    big.push_back("U" + std::to_string(k + 1));
    small.push_back("u" + std::to_string(k + 1));
  }
  std::mt19937_64 rng(opt.seed);
  const std::vector<Interval> box(n, Interval{-0.5, 0.5});

  for (int attempt = 1; attempt <= 50; ++attempt) {
    Eigen::MatrixXd mat = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) mat(i, j) = round3(mat(i, j) + 0.4 * symmetric(rng));
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    if (svd.singularValues()(0) / svd.singularValues()(n - 1) > 20.0) continue;
    std::vector<std::vector<double>> q(n, std::vector<double>(n, 0.0));
    for (int i = 1; i < n; ++i) {
      for (int j = 0; j < i; ++j) q[i][j] = round3(0.3 * symmetric(rng));
    }

    const SymbolTable uTable = makeSymbolTable(namesWith(small, {}));
    std::vector<std::string> phi(n);
    for (int i = 0; i < n; ++i) {
      phi[i] = small[i];
      for (int j = 0; j < i; ++j) {
        if (q[i][j] != 0.0) phi[i] += " + " + paren(formatNumber(q[i][j])) + "*" + small[j] + "^2";
      }
    }
    std::vector<std::string> forward(n);
    for (int i = 0; i < n; ++i) {
      std::string s;
      for (int j = 0; j < n; ++j) {
        if (mat(i, j) == 0.0) continue;
        if (!s.empty()) s += " + ";
        s += paren(formatNumber(mat(i, j))) + "*(" + phi[j] + ")";
      }
      forward[i] = s.empty() ? "0" : s;
    }
    const SymbolTable bigTable = makeSymbolTable(namesWith(big, {}));
    const Eigen::MatrixXd inv = mat.inverse();
    std::vector<Expression> w(n);
    for (int i = 0; i < n; ++i) {
      std::string s;
      for (int j = 0; j < n; ++j) {
        if (!s.empty()) s += " + ";
        s += paren(formatNumber(inv(i, j))) + "*" + big[j];
      }
      w[i] = Expression::parse(s, bigTable);
    }
    std::vector<Expression> uOfU(n);
    for (int i = 0; i < n; ++i) {
      Expression e = w[i];
      for (int j = 0; j < i; ++j) {
        if (q[i][j] != 0.0) e = e - q[i][j] * pow(uOfU[j], 2.0);
      }
      uOfU[i] = e;
    }
    std::vector<std::string> inverse(n);
    for (int i = 0; i < n; ++i) inverse[i] = uOfU[i].str();

    std::vector<Expression> fwd;
    for (const auto& s : forward) fwd.push_back(Expression::parse(s, uTable));
    SamplePlan plan;
    plan.count = 200;
    double ub = 0.0;
    std::vector<Interval> bigBox(n, Interval{INFINITY, -INFINITY});
    for (const auto& u : boxSamples(box, plan)) {
      std::vector<double> in(2 + n, 0.0);
      for (int k = 0; k < n; ++k) in[2 + k] = u[k];
      for (int k = 0; k < n; ++k) {
        const double v = fwd[k].eval(in);
        ub = std::max(ub, std::fabs(v));
        bigBox[k].lo = std::min(bigBox[k].lo, v);
        bigBox[k].hi = std::max(bigBox[k].hi, v);
      }
    }
    ub *= 1.2;
    for (auto& iv : bigBox) {
      const double pad = 0.1 * iv.width() + 1e-3;
      iv.lo -= pad;
      iv.hi += pad;
    }

    std::vector<std::vector<std::string>> t(n, std::vector<std::string>(n, "0"));
    for (int r = 0; r < n; ++r) {
      const int vars = prefix[blockOf[r]];
      Poly diag = randomPoly(rng, vars);
      diag.c0 = round3(2.0 * (r + 1) + 0.05 * symmetric(rng));
      const double b = diag.bound(ub);
      if (b > 0.0) diag.scaleVarying(0.18 / b);
      std::vector<int> cols;
      for (int c = 0; c < prefix[blockOf[r]]; ++c) {
        if (c != r) cols.push_back(c);
      }
      for (int c : cols) {
        Poly off = randomPoly(rng, vars);
        off.c0 = symmetric(rng);
        const double bnd = off.bound(ub) + std::fabs(off.c0);
        const double budget = 0.35 / static_cast<double>(cols.size());
        off.c0 = round3(off.c0 * budget / bnd);
        off.scaleVarying(budget / bnd);
        t[r][c] = off.str(big);
      }
      t[r][r] = diag.str(big);
    }
    if (opt.perturbed) t[0][0] += " + 0.1*" + big[n - 1];

    std::vector<std::string> g(n, "0");
    if (opt.withSource) {
      for (int r = 0; r < n; ++r) {
        Poly s = randomPoly(rng, prefix[blockOf[r]]);
        s.c0 = round3(0.5 * symmetric(rng));
        const double b = s.bound(ub);
        if (b > 0.0) s.scaleVarying(0.5 / b);
        g[r] = s.str(big);
      }
    }

    Json doc;
    doc["name"] = "synthetic-triangular";
    doc["n"] = n;
    doc["states"] = big;
    doc["independent"] = {"t", "x"};
    doc["parameters"] = Json::object();
    doc["A"] = t;
    if (opt.withSource) doc["g"] = g;
    Json dom = Json::object();
    for (int k = 0; k < n; ++k) dom[big[k]] = {bigBox[k].lo, bigBox[k].hi};
    doc["domain"] = dom;
    std::vector<int> assignment(n);
    for (int k = 0; k < n; ++k) assignment[k] = k;
    doc["partitionHint"] = {{"blockSizes", opt.blockSizes}, {"mode", "partial"}, {"assignment", assignment}};
    QuasilinearSystem tri = QuasilinearSystem::fromJson(doc);

    bool ok = true;
    for (const auto& u : boxSamples(box, plan)) {
      std::vector<double> in(2 + n, 0.0);
      for (int k = 0; k < n; ++k) in[2 + k] = u[k];
      StatePoint p;
      p.u.resize(n);
      for (int k = 0; k < n; ++k) p.u[k] = fwd[k].eval(in);
      const Eigen::MatrixXd a = tri.matrix(p);
      for (int r = 0; r < n && ok; ++r) {
        double radius = 0.0;
        for (int c = 0; c < n; ++c) {
          if (c != r) radius += std::fabs(a(r, c));
        }
        if (std::fabs(a(r, r) - 2.0 * (r + 1)) + radius >= 0.9) ok = false;
      }
      if (!ok) break;
    }
    if (!ok) continue;

    ConjugationSpec spec;
    spec.name = opt.perturbed ? "synthetic-perturbed" : "synthetic";
    spec.stateNames = small;
    spec.forward = forward;
    spec.inverse = inverse;
    spec.box = box;
    SyntheticModel out{tri, conjugateSystem(tri, spec), forward, inverse, attempt};
    return out;
  }
  fail(ErrorKind::RetryExhausted, "synthetic construction failed 50 times");
}

std::vector<std::string> registryNames() {
  return {"barotropic", "isentropic", "threadline", "synthetic"};
}

QuasilinearSystem buildFromRegistry(const std::string& name, const ModelOptions& options) {
  if (name == "barotropic") {
    std::map<std::string, double> params = options.parameters;
    if ((params.empty() || !options.pressure) && !params.count("p0")) params["p0"] = 1.0;
    return buildBarotropic(options.pressure.value_or("p0*rho^3"), params);
  }
  if (name == "isentropic") {
    const auto it = options.parameters.find("p0");
    return buildIsentropic(options.entropyTerm.value_or("s"),
                           it == options.parameters.end() ? 1.0 : it->second);
  }
  if (name == "threadline") {
    double k = options.k.value_or(1.0);
    const auto it = options.parameters.find("k");
    if (it != options.parameters.end()) k = it->second;
    return buildThreadline(k, options.tension.value_or("k/m"));
  }
  if (name == "synthetic") {
    SyntheticOptions so;
    const auto it = options.parameters.find("seed");
    if (it != options.parameters.end()) so.seed = static_cast<std::uint64_t>(it->second);
    return buildSyntheticTriangular(so).conjugated;
  }
  fail(ErrorKind::Schema, "unknown model '" + name + "'");
}

}  // namespace decoupler

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "decoupler/cli.hpp"
#include "decoupler/conditions.hpp"
#include "decoupler/error.hpp"
#include "decoupler/expr.hpp"
#include "decoupler/hypsolve.hpp"
#include "decoupler/models.hpp"
#include "decoupler/transform.hpp"

using namespace decoupler;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Line {
  bool pass = true;
  std::ostringstream detail;
  std::string unmet;

  void require(bool ok, const std::string& clause) {
    if (!ok) {
      pass = false;
      unmet += " [unmet: " + clause + "]";
    }
  }
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

SamplePlan plan(int count, std::uint64_t seed = 42) {
  SamplePlan p;
  p.count = count;
  p.seed = seed;
  return p;
}

PartitionScheme scheme(std::vector<int> sizes, DecouplingMode mode, int n) {
  return makePartition(std::move(sizes), mode, {}, n);
}

Line criterion1() {
  Line line;
  const Clock clock;
  const auto sys = buildBarotropic();
  const auto full = scheme({1, 1}, DecouplingMode::Full, 2);
  CheckOptions analytic;
  analytic.field = analyticFrameField(sys);
  const auto a = checkPartition(sys, full, plan(1000), analytic);
  CheckOptions fd = analytic;
  fd.path = GradientPath::FiniteDifference;
  const auto f = checkPartition(sys, full, plan(1000), fd);
  line.require(a.pass && a.maxAbs() <= 1e-7, "check analytic path <= 1e-7");
  line.require(f.pass && f.maxAbs() <= 1e-5, "check FD path <= 1e-5");

  const auto cand = candidateFromStrings(sys, {"v + sqrt(3)*rho", "v - sqrt(3)*rho"}, full);
  const auto rep = verifyTransform(sys, cand, plan(1000));
  double off = 0.0;
  double diag = 0.0;
  for (const auto& s : rep.transformed) {
    off = std::max({off, std::fabs(s.T(0, 1)), std::fabs(s.T(1, 0))});
    diag = std::max({diag, std::fabs(s.T(0, 0) - s.U[0]), std::fabs(s.T(1, 1) - s.U[1])});
  }
  line.require(rep.pass && !rep.transformed.empty(), "verify-transform verdict pass");
  line.require(off <= 1e-9, "off-diagonal |T| <= 1e-9");
  line.require(diag <= 1e-9, "T_kk - U_k <= 1e-9");
  const double t = clock.seconds();
  line.require(t < 10.0, "runtime < 10 s");
  line.detail << "check analytic " << num(a.maxAbs()) << ", fd " << num(f.maxAbs())
              << "; off-diagonal " << num(off) << ", diagonal " << num(diag) << "; " << num(t)
              << " s";
  return line;
}

Line criterion2() {
  Line line;
  const auto sys = buildBarotropic("rho^2", {});
  const auto rep = checkPartition(sys, scheme({1, 1}, DecouplingMode::Full, 2), plan(1000));
  const double g = rep.family("gradient").maxAbs;
  line.require(g >= 0.5 && g <= 1.0, "gradient residual in [0.5, 1]");
  line.require(!rep.pass, "verdict fail");
  // Test-side oracle: |grad(lambda_1) . r_2| = sqrt(rho/2) with r = (rho, +-c).
  double oracle = 0.0;
  const auto field = defaultFrameField(sys);
  for (const auto& s : generateSamples(sys, plan(1000))) {
    if (s.excluded) continue;
    const double rho = s.point.u[0];
    const double r = gradientConditionResidual(sys, *field, 0, 1, s.point);
    oracle = std::max(oracle, std::fabs(std::fabs(r) - std::sqrt(rho / 2.0)));
  }
  line.require(oracle <= 1e-9, "residual equals sqrt(rho/2)");
  const auto found = searchPartitions(sys, plan(1000));
  line.require(found.empty(), "search returns empty");
  line.detail << "max gradient " << num(g) << ", |r - sqrt(rho/2)| " << num(oracle)
              << ", search results " << found.size();
  return line;
}

Line criterion3() {
  Line line;
  const auto sys = buildIsentropic("s");
  const auto partial = partitionFromHint(*sys.partitionHint(), 3);
  const auto p = checkPartition(sys, partial, plan(1000));
  double bestPartial = p.maxAbs();
  std::vector<int> slots{0, 1, 2};
  do {
    const auto s = makePartition({1, 1, 1}, DecouplingMode::Partial, slots, 3);
    bestPartial = std::min(bestPartial, checkPartition(sys, s, plan(1000)).maxAbs());
  } while (std::next_permutation(slots.begin(), slots.end()));
  line.require(p.pass && p.maxAbs() <= 1e-6, "partial {l1},{l2},{l3} passes <= 1e-6");

  const auto full = checkPartition(sys, scheme({1, 1, 1}, DecouplingMode::Full, 3), plan(1000));
  line.require(!full.pass && full.maxAbs() >= 1e-2, "full mode fails with residual >= 1e-2");

  const auto rep = verifyTransform(sys, candidateFromHint(sys, partial), plan(1000));
  double t33 = 0.0;
  for (const auto& s : rep.transformed) {
    t33 = std::max(t33, std::fabs(s.T(2, 2) - 0.5 * (s.U[0] + s.U[1])));
  }
  line.require(!rep.transformed.empty() && t33 <= 1e-8, "T33 = (U1+U2)/2 to 1e-8");
  line.detail << "partial max " << num(p.maxAbs()) << " (best slot order " << num(bestPartial)
              << "), full max " << num(full.maxAbs()) << ", T33 deviation " << num(t33)
              << ", transformed T13/T23 max " << num(rep.maxOffBlock);
  return line;
}

Line criterion4() {
  Line line;
  const auto sys = buildThreadline(1.0);
  CheckOptions opt;
  opt.field = analyticFrameField(sys);
  const auto tables = computeConditionTables(sys, plan(1000), opt);
  bool layout = tables.clusters.size() == 2;
  for (const auto& c : tables.clusters) layout = layout && c.multiplicity == 2;
  int odd = 0;
  const std::vector<int>* first = nullptr;
  for (const auto& t : tables.tables) {
    if (t.status != SampleStatus::Ok) continue;
    if (!first) first = &t.signature;
    if (t.signature != *first) ++odd;
  }
  for (const auto& s : generateSamples(sys, plan(1000))) {
    if (s.excluded) continue;
    const auto sp = spectrumAt(sys, s.point);
    if (sp.clusters.size() != 2 || sp.clusters[0].multiplicity != 2 ||
        sp.clusters[1].multiplicity != 2) {
      ++odd;
    }
  }
  line.require(layout && odd == 0, "exactly two clusters of multiplicity 2");
  const auto rep = reportFromTables(sys, tables, scheme({2, 2}, DecouplingMode::Partial, 4), opt);
  line.require(rep.pass && rep.maxAbs() <= 1e-6, "partial (2,2) passes <= 1e-6");
  const auto decay = decayCoefficients(tables);
  line.require(decay.evaluated > 0 && decay.maxAbs <= 1e-6, "decay coefficients <= 1e-6");
  line.detail << "clusters " << tables.clusters.size() << ", off-layout samples " << odd
              << ", partial max " << num(rep.maxAbs()) << ", decay max " << num(decay.maxAbs)
              << " over " << decay.evaluated << " samples";
  return line;
}

Line criterion5() {
  Line line;
  const Clock clock;
  const std::vector<std::vector<int>> layouts{{2, 1}, {1, 2},    {1, 1, 1}, {2, 2},    {3, 1},
                                              {1, 3}, {1, 1, 2}, {1, 2, 1}, {2, 1, 1}, {2, 2}};
  int sound = 0;
  int complete = 0;
  double worstPass = 0.0;
  double weakestFail = 1e300;
  for (int k = 0; k < 20; ++k) {
    SyntheticOptions opt;
    opt.seed = static_cast<std::uint64_t>(500 + k);
    opt.blockSizes = layouts[static_cast<std::size_t>(k % 10)];
    opt.withSource = k >= 10;
    const int n = [&] {
      int total = 0;
      for (int b : opt.blockSizes) total += b;
      return total;
    }();
    const auto s = scheme(opt.blockSizes, DecouplingMode::Partial, n);
    const auto good = checkPartition(buildSyntheticTriangular(opt).conjugated, s, plan(1000));
    if (good.pass && good.maxAbs() <= 1e-6) ++sound;
    worstPass = std::max(worstPass, good.maxAbs());
    opt.perturbed = true;
    const auto bad = checkPartition(buildSyntheticTriangular(opt).conjugated, s, plan(1000));
    if (!bad.pass && bad.maxAbs() >= 1e-3) ++complete;
    weakestFail = std::min(weakestFail, bad.maxAbs());
  }
  line.require(sound == 20, "20/20 conjugated systems pass at 1e-6");
  line.require(complete >= 19, ">= 19/20 perturbed systems fail with residual >= 1e-3");
  const double t = clock.seconds();
  line.require(t < 60.0, "runtime < 60 s");
  line.detail << "sound " << sound << "/20 (worst " << num(worstPass) << "), complete " << complete
              << "/20 (weakest " << num(weakestFail) << "); " << num(t) << " s";
  return line;
}

Line criterion6() {
  Line line;
  const auto cubic = nijenhuisSweep(buildBarotropic(), plan(1000));
  const auto square = nijenhuisSweep(buildBarotropic("rho^2", {}), plan(1000));
  line.require(cubic.evaluated > 0 && cubic.maxAbs <= 1e-7, "gamma=3 max |N| <= 1e-7");
  line.require(square.maxAbs >= 0.1, "gamma=2 max |N| >= 0.1");
  line.detail << "gamma=3 " << num(cubic.maxAbs) << ", gamma=2 " << num(square.maxAbs);
  return line;
}

Line criterion7() {
  Line line;
  const Clock clock;
  const auto sys = buildBarotropic();
  const auto cand = candidateFromHint(sys, partitionFromHint(*sys.partitionHint(), 2));
  const auto system = DecoupledSystem::fromCandidate(sys, cand);
  const CompiledMap map(sys, cand.forward);
  const InitialData u0 = [](double x) {
    Eigen::VectorXd u(2);
    u << 1.0 + 0.1 * std::sin(kTwoPi * x), 0.0;
    return u;
  };
  const auto U1 = [](double x) { return std::sqrt(3.0) * (1.0 + 0.1 * std::sin(kTwoPi * x)); };
  const auto U2 = [](double x) { return -std::sqrt(3.0) * (1.0 + 0.1 * std::sin(kTwoPi * x)); };
  const InitialData U0 = [&](double x) {
    Eigen::VectorXd u(2);
    u << U1(x), U2(x);
    return u;
  };
  const double tEnd = 0.1;
  const double slope = std::sqrt(3.0) * 0.1 * kTwoPi;
  std::vector<double> l1;
  bool exact = true;
  double worstRatio = 0.0;
  for (int cells : {200, 400, 800}) {
    Grid1D grid;
    grid.cells = cells;
    const auto coupled = solveCoupled(sys, u0, grid, tEnd, Scheme::LaxFriedrichs);
    const auto hier = solveHierarchical(system, U0, grid, tEnd, Scheme::UpwindCharacteristic, u0);
    l1.push_back(compareSolutions(coupled, hier, &map).back().l1);
    double err = 0.0;
    for (int i = 0; i < cells; ++i) {
      const double x = hier.x[static_cast<std::size_t>(i)];
      err = std::max(err, std::fabs(hier.states.back()(i, 0) - burgersExact(U1, x, tEnd)));
      err = std::max(err, std::fabs(hier.states.back()(i, 1) - burgersExact(U2, x, tEnd)));
    }
    const double bound = 5.0 * grid.dx() * slope;
    exact = exact && err <= bound;
    worstRatio = std::max(worstRatio, err / bound);
  }
  const double r1 = l1[0] / l1[1];
  const double r2 = l1[1] / l1[2];
  line.require(r1 >= 1.5 && r1 <= 3.0 && r2 >= 1.5 && r2 <= 3.0, "L1 refinement ratio in [1.5, 3]");
  line.require(exact, "Burgers vs characteristics L_inf <= 5 dx max|U0'|");
  const double t = clock.seconds();
  line.require(t < 60.0, "runtime < 60 s");
  line.detail << "L1 " << num(l1[0]) << ", " << num(l1[1]) << ", " << num(l1[2]) << " (ratios "
              << num(r1) << ", " << num(r2) << "); exact error / bound " << num(worstRatio) << "; "
              << num(t) << " s";
  return line;
}

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

Line criterion8() {
  Line line;
  const auto syms = makeSymbolTable({"x", "y", "z"});
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> val(-1.5, 1.5);
  int drawn = 0;
  double worstDiff = 0.0;
  const double h = 1e-6;
  while (drawn < 100) {
    const Expression e = Expression::parse(randomTree(rng, 1 + rng() % 6), syms);
    std::vector<double> at{val(rng), val(rng), val(rng)};
    try {
      const int var = static_cast<int>(rng() % 3);
      const double d = e.diff(static_cast<std::size_t>(var)).eval(at);
      auto p = at;
      auto m = at;
      p[static_cast<std::size_t>(var)] += h;
      m[static_cast<std::size_t>(var)] -= h;
      const double fp = e.eval(p);
      const double fm = e.eval(m);
      const double f = e.eval(at);
      // Keep draws away from overflow and steep spots where FD itself is unreliable.
      if (!std::isfinite(d) || std::fabs(f) > 1e3 || std::fabs(d) > 1e3 || std::fabs(fp) > 1e3 ||
          std::fabs(fm) > 1e3) {
        continue;
      }
      const double fd = (fp - fm) / (2 * h);
      worstDiff = std::max(worstDiff, std::fabs(d - fd) / (1.0 + std::fabs(d)));
      ++drawn;
    } catch (const DomainError&) {
    }
  }
  line.require(worstDiff <= 1e-6, "symbolic vs FD <= 1e-6 relative on 100 expressions");

  const auto sys = buildBarotropic("rho^2.5", {});
  std::mt19937 wrng(4);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);
  double worstEig = 0.0;
  int eigSamples = 0;
  for (const auto& smp : generateSamples(sys, plan(50))) {
    if (smp.excluded) continue;
    const Frame f = frameFromSpectrum(spectrumAt(sys, smp.point));
    const Eigen::Vector2d w(dir(wrng), dir(wrng));
    const Eigen::MatrixXd da = sys.matrixDerivative(smp.point, w);
    StatePoint pp = smp.point;
    StatePoint pm = smp.point;
    pp.u += h * w;
    pm.u -= h * w;
    const Spectrum sp = spectrumAt(sys, pp);
    const Spectrum sm = spectrumAt(sys, pm);
    for (int k = 0; k < 2; ++k) {
      const double pert =
          (f.left.row(k) * da * f.right.col(k)).value() / f.left.row(k).dot(f.right.col(k));
      const double fd = (sp.clusters[static_cast<std::size_t>(k)].value.real() -
                         sm.clusters[static_cast<std::size_t>(k)].value.real()) /
                        (2 * h);
      worstEig = std::max(worstEig, std::fabs(pert - fd) / (1.0 + std::fabs(pert)));
    }
    ++eigSamples;
  }
  line.require(eigSamples == 50 && worstEig <= 1e-5, "perturbation vs FD <= 1e-5 on 50 samples");
  line.detail << "expression diff " << num(worstDiff) << " on " << drawn
              << " trees; eigenvalue derivative " << num(worstEig) << " on " << eigSamples
              << " samples";
  return line;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the command twice with different worker counts; returns the reports.
std::pair<std::string, std::string> twice(std::vector<std::string> args) {
  std::string reports[2];
  const char* workers[2] = {"1", "4"};
  for (int k = 0; k < 2; ++k) {
    const fs::path root = fs::temp_directory_path() / ("decoupler-acceptance-" + std::to_string(k));
    fs::remove_all(root);
    auto a = args;
    a.insert(a.end(), {"--out", root.string(), "--workers", workers[k]});
    std::ostringstream out, err;
    runCli(a, out, err);
    for (const auto& e : fs::directory_iterator(root)) reports[k] = slurp(e.path() / "report.json");
    fs::remove_all(root);
  }
  return {reports[0], reports[1]};
}

Line criterion9() {
  Line line;
  const std::vector<std::vector<std::string>> runs{
      {"check", "--model", "barotropic", "--mode", "full", "--partition", "1,1"},
      {"check", "--model", "barotropic", "--pressure", "rho^2", "--partition", "1,1", "--mode",
       "full"},
      {"search", "--model", "barotropic", "--pressure", "rho^2"},
      {"verify-transform", "--model", "barotropic"},
      {"check", "--model", "isentropic"},
      {"check", "--model", "threadline", "--frames", "analytic"},
      {"nijenhuis", "--model", "barotropic"},
      {"check", "--model", "synthetic", "--param", "seed=7", "--partition", "2,1", "--samples",
       "200"},
      {"simulate", "--model", "barotropic", "--initial", "1+0.1*sin(6.283185307179586*x)",
       "--initial", "0", "--cells", "200", "--samples", "200"},
      {"decouple", "--model", "barotropic", "--points", "4", "--flow-steps", "32"},
  };
  int identical = 0;
  for (const auto& r : runs) {
    const auto [a, b] = twice(r);
    if (!a.empty() && a == b && a.find("elapsed") == std::string::npos) {
      ++identical;
    } else {
      line.detail << " [differs: " << r[0] << " " << r[2] << "]";
    }
  }
  line.require(identical == static_cast<int>(runs.size()), "byte-identical report.json");
  line.detail << identical << "/" << runs.size() << " commands byte-identical across 1 and 4 workers";
  return line;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Line()>>> criteria{
      {"1 barotropic reproduction", criterion1},
      {"2 negative control rho^2", criterion2},
      {"3 isentropic reproduction", criterion3},
      {"4 threadline reproduction", criterion4},
      {"5 oracle soundness/completeness", criterion5},
      {"6 Nijenhuis consistency", criterion6},
      {"7 simulation equivalence", criterion7},
      {"8 derivative kernels", criterion8},
      {"9 reproducibility", criterion9},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Line line;
    try {
      line = run();
    } catch (const std::exception& e) {
      line.pass = false;
      line.detail << "threw: " << e.what();
    }
    if (!line.pass) ++failed;
    std::cout << (line.pass ? "PASS" : "FAIL") << "  criterion " << name << ": "
              << line.detail.str() << line.unmet << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}

#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "decoupler/error.hpp"
#include "decoupler/hypsolve.hpp"
#include "decoupler/models.hpp"

using namespace decoupler;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

QuasilinearSystem systemOf(const std::vector<std::string>& states,
                           const std::vector<std::vector<std::string>>& rows,
                           const std::vector<std::string>& g = {}) {
  Json doc;
  doc["name"] = "fixture";
  doc["n"] = states.size();
  doc["states"] = states;
  Json a = Json::array();
  for (const auto& r : rows) a.push_back(Json(r));
  doc["A"] = a;
  if (!g.empty()) doc["g"] = g;
  Json domain = Json::object();
  for (const auto& s : states) domain[s] = {-10.0, 10.0};
  doc["domain"] = domain;
  return QuasilinearSystem::fromJson(doc);
}

Grid1D grid(int cells, double cfl, int levels = 1) {
  Grid1D g;
  g.cells = cells;
  g.cfl = cfl;
  g.levels = levels;
  return g;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

double rho0(double x) { return 1.0 + 0.2 * std::sin(kTwoPi * x); }
double v0(double x) { return 0.1 * std::cos(kTwoPi * x); }

Eigen::VectorXd baroInitial(double x) {
  Eigen::VectorXd u(2);
  u << rho0(x), v0(x);
  return u;
}

Eigen::VectorXd baroInitialU(double x) {
  Eigen::VectorXd u(2);
  u << v0(x) + std::sqrt(3.0) * rho0(x), v0(x) - std::sqrt(3.0) * rho0(x);
  return u;
}

}  // namespace

TEST_CASE("upwind transport at CFL one is an exact shift", "[hypsolve]") {
  const auto sys = systemOf({"w"}, {{"1"}});
  const auto bump = [](double x) { return scalar(std::sin(kTwoPi * x) + 0.3 * std::cos(3 * kTwoPi * x)); };
  const auto sol = solveCoupled(sys, bump, grid(100, 1.0), 0.25, Scheme::UpwindCharacteristic);
  REQUIRE(sol.steps == 25);
  const auto& end = sol.states.back();
  const auto& start = sol.states.front();
  for (int i = 0; i < 100; ++i) REQUIRE(std::fabs(end(i, 0) - start((i + 75) % 100, 0)) <= 1e-12);
}

TEST_CASE("Lax-Friedrichs conserves cell averages", "[hypsolve][property]") {
  const auto sys = systemOf({"w1", "w2"}, {{"0.5", "1"}, {"1", "-0.3"}});
  const auto data = [](double x) {
    Eigen::VectorXd u(2);
    u << std::exp(std::sin(kTwoPi * x)), std::cos(kTwoPi * x) + 0.2;
    return u;
  };
  const auto sol = solveCoupled(sys, data, grid(64, 0.9, 40), 0.4, Scheme::LaxFriedrichs);
  REQUIRE(sol.steps >= 40);
  const Eigen::RowVectorXd mean0 = sol.states.front().colwise().mean();
  for (const auto& s : sol.states) {
    REQUIRE((s.colwise().mean() - mean0).cwiseAbs().maxCoeff() <= 1e-12 * sol.steps);
  }
}

TEST_CASE("zero data stays zero", "[hypsolve]") {
  const auto zeroVel = systemOf({"a", "b"}, {{"a", "1"}, {"1", "b"}});
  for (auto scheme : {Scheme::LaxFriedrichs, Scheme::UpwindCharacteristic}) {
    const auto sol = solveCoupled(zeroVel, [](double) { return Eigen::VectorXd(Eigen::VectorXd::Zero(2)); },
                                  grid(32, 0.9, 3), 0.5, scheme);
    for (const auto& s : sol.states) REQUIRE(s.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("decoupled Burgers pair matches characteristics", "[hypsolve][oracle]") {
  const auto dec = systemOf({"U1", "U2"}, {{"U1", "0"}, {"0", "U2"}});
  const auto system = DecoupledSystem::closedForm(dec, {1, 1});
  const double tEnd = 0.1;
  const auto u1 = [](double x) { return baroInitialU(x)[0]; };
  const auto u2 = [](double x) { return baroInitialU(x)[1]; };
  const double slope = std::sqrt(3.0) * 0.2 * kTwoPi + 0.1 * kTwoPi;
  for (int cells : {100, 200}) {
    const auto sol = solveHierarchical(system, baroInitialU, grid(cells, 0.9), tEnd,
                                       Scheme::UpwindCharacteristic);
    const double dx = 1.0 / cells;
    double err = 0.0;
    for (int i = 0; i < cells; ++i) {
      const double x = sol.x[static_cast<std::size_t>(i)];
      err = std::max(err, std::fabs(sol.states.back()(i, 0) - burgersExact(u1, x, tEnd)));
      err = std::max(err, std::fabs(sol.states.back()(i, 1) - burgersExact(u2, x, tEnd)));
    }
    REQUIRE(err <= 5 * dx * slope);
  }
  REQUIRE(burgersExact([](double x) { return x; }, 1.0, 0.5) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("hierarchy order and hidden dependences", "[hypsolve]") {
  const auto triple =
      systemOf({"U1", "U2", "U3"}, {{"U1", "0", "0"}, {"0", "U2", "0"}, {"0", "0", "(U1+U2)/2"}});
  const auto data = [](double x) {
    Eigen::VectorXd u(3);
    u << 2.0 + 0.1 * std::sin(kTwoPi * x), -1.0 + 0.1 * std::cos(kTwoPi * x),
        0.5 + 0.2 * std::sin(kTwoPi * x);
    return u;
  };
  const auto hier = solveHierarchical(DecoupledSystem::closedForm(triple, {1, 1, 1}), data,
                                      grid(80, 0.9, 2), 0.2, Scheme::UpwindCharacteristic);
  const auto coupled = solveCoupled(triple, data, grid(80, 0.9, 2), 0.2, Scheme::UpwindCharacteristic);
  for (const auto& n : compareSolutions(hier, coupled)) REQUIRE(n.linf <= 1e-12);

  const auto hidden =
      systemOf({"U1", "U2", "U3"}, {{"U1", "0", "U3"}, {"0", "U2", "0"}, {"0", "0", "U1"}});
  try {
    solveHierarchical(DecoupledSystem::closedForm(hidden, {1, 1, 1}), data, grid(20, 0.9), 0.05,
                      Scheme::LaxFriedrichs);
    FAIL("expected a precondition violation");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::PreconditionViolation);
  }
}

TEST_CASE("single block hierarchy equals the coupled solve", "[hypsolve]") {
  const auto sys = buildBarotropic();
  const auto a = solveCoupled(sys, baroInitial, grid(50, 0.8, 2), 0.05, Scheme::LaxFriedrichs);
  const auto b = solveHierarchical(DecoupledSystem::closedForm(sys, {2}), baroInitial,
                                   grid(50, 0.8, 2), 0.05, Scheme::LaxFriedrichs);
  for (std::size_t l = 0; l < a.states.size(); ++l) REQUIRE(a.states[l] == b.states[l]);
}

TEST_CASE("coupled and mapped hierarchical solutions converge together", "[hypsolve][oracle]") {
  const auto sys = buildBarotropic();
  const auto cand = candidateFromHint(sys, makePartition({1, 1}, DecouplingMode::Full, {}, 2));
  const auto system = DecoupledSystem::fromCandidate(sys, cand);
  const CompiledMap map(sys, cand.forward);

  // H is linear here, so the same characteristic scheme agrees to round-off.
  const auto upCoupled = solveCoupled(sys, baroInitial, grid(100, 0.9, 2), 0.1,
                                      Scheme::UpwindCharacteristic);
  const auto upHier = solveHierarchical(system, baroInitialU, grid(100, 0.9, 2), 0.1,
                                        Scheme::UpwindCharacteristic, baroInitial);
  for (const auto& n : compareSolutions(upCoupled, upHier, &map)) REQUIRE(n.linf <= 1e-12);

  std::vector<double> l1;
  for (int cells : {100, 200, 400}) {
    const auto coupled = solveCoupled(sys, baroInitial, grid(cells, 0.9, 2), 0.1,
                                      Scheme::LaxFriedrichs);
    const auto hier = solveHierarchical(system, baroInitialU, grid(cells, 0.9, 2), 0.1,
                                        Scheme::UpwindCharacteristic, baroInitial);
    const auto norms = compareSolutions(coupled, hier, &map);
    REQUIRE(norms.front().linf <= 1e-10);
    l1.push_back(norms.back().l1);
  }
  for (std::size_t k = 1; k < l1.size(); ++k) {
    const double ratio = l1[k - 1] / l1[k];
    REQUIRE(ratio >= 1.5);
    REQUIRE(ratio <= 3.0);
  }
}

TEST_CASE("solver errors", "[hypsolve]") {
  const auto rotation = systemOf({"a", "b"}, {{"0", "-1"}, {"1", "0"}});
  const auto data = [](double x) {
    Eigen::VectorXd u(2);
    u << x, 1.0;
    return u;
  };
  try {
    solveCoupled(rotation, data, grid(10, 0.9), 0.1, Scheme::LaxFriedrichs);
    FAIL("expected a hyperbolicity failure");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::PreconditionViolation);
  }
  const auto sys = buildBarotropic();
  try {
    solveCoupled(sys, baroInitial, grid(10, 1.5), 0.1, Scheme::LaxFriedrichs);
    FAIL("expected a CFL violation");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::CflViolation);
  }
  const auto growth = systemOf({"w"}, {{"0"}}, {"w^2"});
  try {
    solveCoupled(growth, [](double) { return scalar(1.0); }, grid(10, 0.9), 2.0, Scheme::LaxFriedrichs);
    FAIL("expected blow-up");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::BlowupDetected);
  }
  const auto a = solveCoupled(sys, baroInitial, grid(20, 0.9), 0.01, Scheme::LaxFriedrichs);
  const auto b = solveCoupled(sys, baroInitial, grid(40, 0.9), 0.01, Scheme::LaxFriedrichs);
  REQUIRE_THROWS_AS(compareSolutions(a, b), Error);
  for (const auto& n : compareSolutions(a, a)) {
    REQUIRE(n.l1 == 0.0);
    REQUIRE(n.linf == 0.0);
  }
}

TEST_CASE("sources and exports", "[hypsolve]") {
  const auto decay = systemOf({"w"}, {{"1"}}, {"-w"});
  const auto sol = solveCoupled(decay, [](double) { return scalar(1.0); }, grid(16, 0.5, 1), 0.5,
                                Scheme::UpwindCharacteristic);
  REQUIRE(sol.states.back()(3, 0) == Catch::Approx(std::exp(-0.5)).epsilon(0.05));

  const auto sys = buildBarotropic();
  const auto init = initialFromStrings(sys, {"1 + 0.2*sin(6.283185307179586*x)", "0"});
  REQUIRE(init(0.25)[0] == Catch::Approx(1.2));
  REQUIRE_THROWS_AS(initialFromStrings(sys, {"rho", "0"}), Error);
  const auto out = solveCoupled(sys, init, grid(8, 0.9, 1), 0.01, Scheme::LaxFriedrichs);
  std::ostringstream csv;
  out.writeSlice(csv, 1);
  REQUIRE(csv.str().rfind("x,rho,v\n", 0) == 0);
  REQUIRE(out.metadata()["scheme"] == "laxFriedrichs");
}

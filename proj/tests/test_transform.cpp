#include <catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "decoupler/error.hpp"
#include "decoupler/models.hpp"
#include "decoupler/transform.hpp"

using namespace decoupler;

namespace {

SamplePlan plan(int count) {
  SamplePlan p;
  p.count = count;
  return p;
}

PartitionScheme scheme(std::vector<int> sizes, DecouplingMode mode, int n,
                       std::vector<int> slots = {}) {
  return makePartition(std::move(sizes), mode, std::move(slots), n);
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd pivotNormalized(const Eigen::VectorXd& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  return v / v[k];
}

}  // namespace

TEST_CASE("barotropic Riemann invariants diagonalize the system", "[transform]") {
  const auto sys = buildBarotropic();
  const auto cand = candidateFromHint(sys, scheme({1, 1}, DecouplingMode::Full, 2));
  const auto rep = verifyTransform(sys, cand, plan(300));
  REQUIRE(rep.pass);
  REQUIRE(rep.evaluated == 300);
  REQUIRE(rep.maxAnnihilation <= 1e-10);
  REQUIRE(rep.maxOffBlock <= 1e-10);
  REQUIRE(rep.minAbsDet > 1.0);
  for (const auto& s : rep.transformed) {
    REQUIRE(std::fabs(s.T(0, 0) - s.U[0]) <= 1e-10);
    REQUIRE(std::fabs(s.T(1, 1) - s.U[1]) <= 1e-10);
  }

  // Pairing H components with the wrong autovectors breaks annihilation.
  const auto swapped = candidateFromHint(sys, scheme({1, 1}, DecouplingMode::Full, 2, {1, 0}));
  REQUIRE_FALSE(verifyTransform(sys, swapped, plan(50)).pass);
}

TEST_CASE("identity on a block-triangular system", "[transform]") {
  SyntheticOptions opt;
  opt.seed = 3;
  opt.blockSizes = {2, 1};
  const auto model = buildSyntheticTriangular(opt);
  const auto tri = model.triangular;
  const auto rep =
      verifyTransform(tri, identityCandidate(tri, scheme({2, 1}, DecouplingMode::Partial, 3)),
                      plan(200));
  REQUIRE(rep.maxOffBlock <= 1e-12);
  REQUIRE(rep.pass);

  const auto conj = verifyTransform(
      model.conjugated,
      candidateFromStrings(model.conjugated, model.forward,
                           scheme({2, 1}, DecouplingMode::Partial, 3)),
      plan(200));
  REQUIRE(conj.pass);
  REQUIRE(conj.maxOffBlockScaled <= 1e-8);

  opt.perturbed = true;
  const auto bad = buildSyntheticTriangular(opt);
  const auto broken = verifyTransform(
      bad.conjugated,
      candidateFromStrings(bad.conjugated, bad.forward, scheme({2, 1}, DecouplingMode::Partial, 3)),
      plan(200));
  REQUIRE_FALSE(broken.pass);
}

TEST_CASE("isentropic transformed coefficients", "[transform]") {
  const auto sys = buildIsentropic("s");
  const auto cand = candidateFromHint(sys, scheme({1, 1, 1}, DecouplingMode::Partial, 3));
  const auto rep = verifyTransform(sys, cand, plan(200));
  REQUIRE(rep.evaluated == 200);
  for (const auto& s : rep.transformed) {
    REQUIRE(std::fabs(s.T(2, 2) - 0.5 * (s.U[0] + s.U[1])) <= 1e-8);
    REQUIRE(std::fabs(s.T(0, 0) - s.U[0]) <= 1e-8);
    REQUIRE(std::fabs(s.T(1, 1) - s.U[1]) <= 1e-8);
    REQUIRE(std::fabs(s.T(0, 1)) + std::fabs(s.T(1, 0)) <= 1e-8);
    REQUIRE(std::fabs(s.T(2, 0)) + std::fabs(s.T(2, 1)) <= 1e-8);
  }
  // The remaining coupling of U1, U2 to U3 comes from the entropy term.
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.maxOffBlock >= 1e-2);
}

TEST_CASE("threadline identity transform", "[transform]") {
  const auto sys = buildThreadline();
  const auto sch = partitionFromHint(*sys.partitionHint(), sys.n());
  const auto rep = verifyTransform(sys, identityCandidate(sys, sch), plan(200));
  REQUIRE(rep.pass);
  REQUIRE(rep.maxOffBlockScaled <= 1e-8);
}

TEST_CASE("candidate validation", "[transform]") {
  const auto sys = buildBarotropic();
  const auto sch = scheme({1, 1}, DecouplingMode::Full, 2);
  REQUIRE_THROWS_AS(candidateFromStrings(sys, {"v"}, sch), Error);
  REQUIRE_THROWS_AS(candidateFromStrings(sys, {"v + t", "rho"}, sch), Error);
  try {
    verifyTransform(sys, candidateFromStrings(sys, {"v", "v"}, sch), plan(20));
    FAIL("expected SingularCandidate");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::SingularCandidate);
  }
  const auto json = verifyTransform(sys, candidateFromHint(sys, sch), plan(20)).toJson();
  REQUIRE(json["verdict"] == "pass");
  REQUIRE(json.contains("minAbsDet"));
}

TEST_CASE("conjugation identities", "[transform][property]") {
  const auto sys = buildBarotropic();
  const auto cand = candidateFromHint(sys, scheme({1, 1}, DecouplingMode::Full, 2));
  const CompiledMap map(sys, cand.forward);
  const auto rep = verifyTransform(sys, cand, plan(100));
  for (const auto& s : rep.transformed) {
    StatePoint p;
    p.u = s.u;
    const Eigen::MatrixXd a = sys.matrix(p);
    const Eigen::MatrixXd j = map.jacobian(p);
    const Spectrum sa = spectrumOf(a);
    const Spectrum st = spectrumOf(s.T);
    const Frame fa = frameFromSpectrum(sa);
    const Frame ft = frameFromSpectrum(st);
    REQUIRE(fa.size() == ft.size());
    for (int k = 0; k < fa.size(); ++k) {
      REQUIRE(std::fabs(fa.slots[k].eigenvalue - ft.slots[k].eigenvalue) <= 1e-8);
      const Eigen::VectorXd back = j.partialPivLu().solve(Eigen::VectorXd(ft.right.col(k)));
      const Eigen::VectorXd r = fa.right.col(k);
      REQUIRE((pivotNormalized(back) - pivotNormalized(r)).norm() <= 1e-6);
    }
  }
}

TEST_CASE("characteristic flows", "[transform][flow]") {
  const auto sys = buildBarotropic();
  const auto field = defaultFrameField(sys);
  // Slot 1 carries r = (rho, -sqrt(3) rho).
  const auto flow = characteristicFlow(sys, *field, 1, vec({1.0, 0.0}), 0.3, 16);
  REQUIRE_FALSE(flow.leftDomain);
  REQUIRE(flow.errorEstimate <= 1e-8);
  const auto h1 = [](const Eigen::VectorXd& u) { return u[1] + std::sqrt(3.0) * u[0]; };
  for (const auto& u : flow.points) REQUIRE(std::fabs(h1(u) - h1(flow.points.front())) <= 1e-7);
  REQUIRE(flow.points.back()[0] == Catch::Approx(std::exp(0.3)).margin(1e-8));

  const auto out = characteristicFlow(sys, *field, 1, vec({1.0, 0.0}), 5.0, 16);
  REQUIRE(out.leftDomain);
  for (const auto& u : out.points) REQUIRE(u[0] <= 2.0);

  REQUIRE_THROWS_AS(characteristicFlow(sys, *field, 0, vec({3.0, 0.0}), 0.1, 4), Error);

  const VectorField zero = [](const Eigen::VectorXd& u) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(u.size()));
  };
  const auto still =
      integrateField(zero, vec({0.3, -0.2}), 1.0, 8, [](const Eigen::VectorXd&) { return true; });
  REQUIRE(still.points.size() >= 9);
  for (const auto& u : still.points) REQUIRE(u == vec({0.3, -0.2}));
}

TEST_CASE("flows of a decoupled system commute", "[transform][flow]") {
  const auto sys = buildBarotropic();
  const auto field = numericFrameField(sys);
  const Eigen::VectorXd start = vec({1.0, 0.1});
  const auto twoLegs = [&](int first, double firstLength, int second, double secondLength) {
    const auto a = characteristicFlow(sys, *field, first, start, firstLength, 16);
    const auto b = characteristicFlow(sys, *field, second, a.points.back(), secondLength, 16);
    REQUIRE_FALSE(a.leftDomain);
    REQUIRE_FALSE(b.leftDomain);
    return Eigen::VectorXd(b.points.back());
  };
  REQUIRE((twoLegs(0, 0.2, 1, 0.15) - twoLegs(1, 0.15, 0, 0.2)).norm() <= 1e-6);
}

TEST_CASE("numeric construction of barotropic invariants", "[transform][construct]") {
  const auto sys = buildBarotropic();
  GridSpec spec;
  spec.pointsPerDim = 5;
  spec.flowSteps = 64;
  const auto built =
      constructTransformNumeric(sys, scheme({1, 1}, DecouplingMode::Full, 2), vec({1.0, 0.0}), spec);
  REQUIRE(built.shootingFailures == 0);
  REQUIRE(built.invarianceResidual <= 1e-6);
  REQUIRE(built.usable);
  REQUIRE(built.trusted);
  REQUIRE(built.grid.size() == 25);

  // H1 must be a strictly monotone function of v + sqrt(3) rho.
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t g = 0; g < built.grid.size(); ++g) {
    pairs.emplace_back(built.grid[g][1] + std::sqrt(3.0) * built.grid[g][0], built.values[g][0]);
  }
  std::sort(pairs.begin(), pairs.end());
  int rising = 0;
  int falling = 0;
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    if (pairs[k].first - pairs[k - 1].first < 1e-9) {
      REQUIRE(std::fabs(pairs[k].second - pairs[k - 1].second) <= 1e-6);
      continue;
    }
    rising += pairs[k].second > pairs[k - 1].second;
    falling += pairs[k].second < pairs[k - 1].second;
  }
  REQUIRE((rising == 0 || falling == 0));
  REQUIRE(rising + falling > 0);

  const int degree = 5;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(pairs.size()), degree + 1);
  Eigen::VectorXd target(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (int d = 0; d <= degree; ++d) {
      design(static_cast<Eigen::Index>(k), d) = std::pow(pairs[k].first, d);
    }
    target[static_cast<Eigen::Index>(k)] = pairs[k].second;
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
  REQUIRE((design * coef - target).lpNorm<Eigen::Infinity>() <= 1e-4);

  std::ostringstream csv;
  built.writeCsv(csv, sys.stateNames());
  REQUIRE(csv.str().rfind("rho,v,H1.1,H2.1\n", 0) == 0);
  REQUIRE(built.metadata()["quality"]["usable"] == true);
  REQUIRE(built.interpolate(built.grid[7]).isApprox(built.values[7]));
}

TEST_CASE("numeric construction on a triangular system", "[transform][construct]") {
  SyntheticOptions opt;
  opt.seed = 3;
  opt.blockSizes = {2, 1};
  const auto model = buildSyntheticTriangular(opt);
  const auto& tri = model.triangular;
  Eigen::VectorXd base(3);
  for (int d = 0; d < 3; ++d) base[d] = 0.5 * (tri.stateBox()[d].lo + tri.stateBox()[d].hi);
  GridSpec spec;
  spec.pointsPerDim = 3;
  spec.flowSteps = 32;
  const auto built =
      constructTransformNumeric(tri, scheme({2, 1}, DecouplingMode::Partial, 3), base, spec);
  REQUIRE(built.shootingFailures == 0);
  REQUIRE(built.invarianceResidual <= 1e-6);
  REQUIRE(built.usable);

  Eigen::VectorXd outside = base;
  outside[0] = tri.stateBox()[0].hi + 10.0;
  try {
    constructTransformNumeric(tri, scheme({2, 1}, DecouplingMode::Partial, 3), outside, spec);
    FAIL("expected a precondition violation");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::PreconditionViolation);
  }
}

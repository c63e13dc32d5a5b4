#include <cmath>
#include <random>

#include "decoupler/error.hpp"
#include "decoupler/system.hpp"

namespace decoupler {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                           31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double radicalInverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

/// Unit-cube points; Halton with a seeded Cranley-Patterson shift, or a
/// cell-centred tensor grid.
std::vector<std::vector<double>> unitPoints(int dims, const SamplePlan& plan) {
  if (plan.count < 1) fail(ErrorKind::PreconditionViolation, "sample count must be >= 1");
  if (dims > static_cast<int>(std::size(kPrimes))) {
    fail(ErrorKind::TooLarge, "too many sampled dimensions");
  }
  std::vector<std::vector<double>> pts;
  if (plan.strategy == SamplingStrategy::TensorGrid) {
    int m = static_cast<int>(std::floor(std::pow(plan.count, 1.0 / dims) + 1e-9));
    m = std::max(m, 1);
    std::size_t total = 1;
    for (int d = 0; d < dims; ++d) total *= static_cast<std::size_t>(m);
    for (std::size_t i = 0; i < total; ++i) {
      std::vector<double> p(dims);
      std::size_t rem = i;
      for (int d = 0; d < dims; ++d) {
        p[d] = (static_cast<double>(rem % m) + 0.5) / m;
        rem /= m;
      }
      pts.push_back(std::move(p));
    }
    return pts;
  }
  std::mt19937_64 gen(plan.seed);
  std::vector<double> shift(dims);
  for (int d = 0; d < dims; ++d) shift[d] = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  for (int i = 0; i < plan.count; ++i) {
    std::vector<double> p(dims);
    for (int d = 0; d < dims; ++d) {
      double v = radicalInverse(static_cast<std::uint64_t>(i) + 1, kPrimes[d]) + shift[d];
      p[d] = v - std::floor(v);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace

std::vector<Eigen::VectorXd> boxSamples(const std::vector<Interval>& box, const SamplePlan& plan) {
  const int n = static_cast<int>(box.size());
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : unitPoints(n, plan)) {
    Eigen::VectorXd u(n);
    for (int k = 0; k < n; ++k) u[k] = box[k].lo + p[k] * box[k].width();
    out.push_back(u);
  }
  return out;
}

std::vector<Sample> generateSamples(const QuasilinearSystem& sys, const SamplePlan& plan) {
  const int n = sys.n();
  const auto& tr = sys.timeInterval();
  const auto& xr = sys.spaceInterval();
  const int dims = n + (tr ? 1 : 0) + (xr ? 1 : 0);
  std::vector<Sample> out;
  for (const auto& p : unitPoints(dims, plan)) {
    Sample s;
    s.point.u.resize(n);
    for (int k = 0; k < n; ++k) s.point.u[k] = sys.stateBox()[k].lo + p[k] * sys.stateBox()[k].width();
    int d = n;
    if (tr) s.point.t = tr->lo + p[d++] * tr->width();
    if (xr) s.point.x = xr->lo + p[d++] * xr->width();
    s.excluded = sys.excluded(s.point);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace decoupler

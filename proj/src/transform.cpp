#include "decoupler/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "decoupler/error.hpp"
#include "decoupler/parallel.hpp"

namespace decoupler {

namespace {

constexpr double kSingularDet = 1e-8;
constexpr double kSingularFraction = 0.01;
constexpr double kFlowErrorPerUnit = 1e-8;
constexpr int kMaxFlowDoublings = 10;
constexpr double kInvarianceGate = 1e-6;

StatePoint pointAt(const Eigen::VectorXd& u) {
  StatePoint p;
  p.u = u;
  return p;
}

void checkComponents(const QuasilinearSystem& sys, const std::vector<Expression>& forward,
                     const PartitionScheme& scheme) {
  if (static_cast<int>(forward.size()) != sys.n()) {
    fail(ErrorKind::PreconditionViolation, "candidate needs one component per state");
  }
  if (scheme.size() != sys.n()) fail(ErrorKind::InvalidPartition, "partition size mismatch");
  for (const auto& e : forward) {
    for (std::size_t s : e.freeSymbols()) {
      if (s < 2) fail(ErrorKind::PreconditionViolation, "H may depend on the states only");
    }
  }
}

}  // namespace

TransformCandidate candidateFromHint(const QuasilinearSystem& sys, const PartitionScheme& scheme) {
  if (!sys.transformHint()) {
    fail(ErrorKind::PreconditionViolation, "model '" + sys.name() + "' has no transformHint");
  }
  TransformCandidate c{sys.transformHint()->forward, scheme};
  checkComponents(sys, c.forward, scheme);
  return c;
}

TransformCandidate candidateFromStrings(const QuasilinearSystem& sys,
                                        const std::vector<std::string>& components,
                                        const PartitionScheme& scheme) {
  TransformCandidate c;
  c.partition = scheme;
  for (const auto& text : components) c.forward.push_back(Expression::parse(text, sys.symbols()));
  checkComponents(sys, c.forward, scheme);
  return c;
}

TransformCandidate identityCandidate(const QuasilinearSystem& sys, const PartitionScheme& scheme) {
  TransformCandidate c;
  c.partition = scheme;
  for (const auto& name : sys.stateNames()) c.forward.push_back(Expression::symbol(name, sys.symbols()));
  checkComponents(sys, c.forward, scheme);
  return c;
}

namespace {

std::vector<Expression> jacobianEntries(const QuasilinearSystem& sys,
                                        const std::vector<Expression>& forward) {
  std::vector<Expression> out;
  for (const auto& h : forward) {
    for (int k = 0; k < sys.n(); ++k) out.push_back(h.diff(sys.stateSymbol(k)));
  }
  return out;
}

}  // namespace

CompiledMap::CompiledMap(const QuasilinearSystem& sys, const std::vector<Expression>& forward)
    : sys_(sys),
      n_(sys.n()),
      value_(forward),
      jacobian_(jacobianEntries(sys, forward)) {}

Eigen::VectorXd CompiledMap::value(const StatePoint& p) const {
  const auto in = sys_.inputs(p);
  Eigen::VectorXd out(n_);
  value_.run(in, std::span<double>(out.data(), static_cast<std::size_t>(n_)));
  return out;
}

Eigen::MatrixXd CompiledMap::jacobian(const StatePoint& p) const {
  const auto in = sys_.inputs(p);
  std::vector<double> flat(static_cast<std::size_t>(n_ * n_));
  jacobian_.run(in, flat);
  Eigen::MatrixXd j(n_, n_);
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < n_; ++c) j(r, c) = flat[static_cast<std::size_t>(r * n_ + c)];
  }
  return j;
}

std::optional<Eigen::VectorXd> CompiledMap::invert(const Eigen::VectorXd& U,
                                                   const StatePoint& guess) const {
  StatePoint p = guess;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    try {
      r = value(p) - U;
      j = jacobian(p);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (r.norm() <= 1e-14 * (1.0 + U.norm())) return p.u;
    const Eigen::VectorXd step = j.partialPivLu().solve(r);
    if (!step.allFinite()) return std::nullopt;
    p.u -= step;
    if (step.norm() <= 1e-14 * (1.0 + p.u.norm())) break;
  }
  try {
    if ((value(p) - U).norm() <= 1e-10 * (1.0 + U.norm())) return p.u;
  } catch (const Error&) {
  }
  return std::nullopt;
}

Json TransformReport::toJson() const {
  Json j;
  j["model"] = model;
  j["partition"] = partition.toJson();
  j["tolerance"] = tolerance;
  j["samples"] = {{"total", samples},
                  {"evaluated", evaluated},
                  {"excluded", excluded},
                  {"degenerate", degenerate},
                  {"singular", singular}};
  j["minAbsDet"] = minAbsDet;
  j["annihilation"] = {{"maxAbs", maxAnnihilation}, {"maxScaled", maxAnnihilationScaled}};
  j["offBlock"] = {{"maxAbs", maxOffBlock},
                   {"maxScaled", maxOffBlockScaled},
                   {"argMaxSample", argMaxOffBlock}};
  j["blockDependence"] = {{"maxAbs", maxDependence}};
  j["verdict"] = pass ? "pass" : "fail";
  return j;
}

TransformReport verifyTransform(const QuasilinearSystem& sys, const TransformCandidate& candidate,
                                const SamplePlan& plan, const TransformOptions& options) {
  checkComponents(sys, candidate.forward, candidate.partition);
  const int n = sys.n();
  const PartitionScheme& scheme = candidate.partition;
  const auto field = options.field ? options.field : defaultFrameField(sys);
  const CompiledMap map(sys, candidate.forward);
  const std::vector<int> blockOf = scheme.blockOfPosition();
  const bool partial = scheme.mode == DecouplingMode::Partial;
  const auto forbidden = [&](int rowBlock, int colBlock) {
    return partial ? rowBlock < colBlock : rowBlock != colBlock;
  };
  // Entry (r, c) of T, or of G when c < 0, must not depend on U_k.
  const auto independent = [&](int r, int c, int k) {
    const int i = blockOf[r];
    if (partial) return (c < 0 || blockOf[c] <= i) && blockOf[k] > i;
    return (c < 0 || blockOf[c] == i) && blockOf[k] != i;
  };
  const auto transformedAt = [&](const StatePoint& q, Eigen::MatrixXd* t, Eigen::VectorXd* g) {
    const Eigen::MatrixXd j = map.jacobian(q);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
    *t = j * sys.matrix(q) * lu.inverse();
    *g = j * sys.source(q);
  };

  const auto samples = generateSamples(sys, plan);
  enum class Status { Ok, Excluded, Degenerate, Singular };
  std::vector<Status> status(samples.size(), Status::Excluded);
  std::vector<TransformedSample> rows(samples.size());

  parallelFor(samples.size(), options.workers, [&](std::size_t si) {
    const Sample& s = samples[si];
    if (s.excluded) return;
    TransformedSample& out = rows[si];
    out.index = static_cast<int>(si);
    out.u = s.point.u;
    try {
      const Eigen::MatrixXd j = map.jacobian(s.point);
      out.det = j.determinant();
      if (!(std::fabs(out.det) >= kSingularDet)) {
        status[si] = Status::Singular;
        return;
      }
      out.U = map.value(s.point);
      transformedAt(s.point, &out.T, &out.G);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          if (forbidden(blockOf[r], blockOf[c])) {
            out.offBlock = std::max(out.offBlock, std::fabs(out.T(r, c)));
          }
        }
      }
      const Frame f = field->at(s.point);
      for (int a = 0; a < n; ++a) {
        for (int c = 0; c < n; ++c) {
          if (!forbidden(blockOf[a], blockOf[c])) continue;
          const Eigen::VectorXd r = f.right.col(scheme.slots[c]);
          const double v = std::fabs(j.row(a).dot(r));
          out.annihilation = std::max(out.annihilation, v);
          out.annihilationScaled = std::max(
              out.annihilationScaled, v / ((1.0 + j.row(a).norm()) * (1.0 + r.norm())));
        }
      }
      for (int k = 0; k < n; ++k) {
        const double delta = 1e-5 * (1.0 + out.U.norm());
        Eigen::VectorXd up = out.U;
        Eigen::VectorXd um = out.U;
        up[k] += delta;
        um[k] -= delta;
        const auto xp = map.invert(up, s.point);
        const auto xm = map.invert(um, s.point);
        if (!xp || !xm) fail(ErrorKind::NotInverse, "Newton inversion of H failed");
        StatePoint qp = s.point;
        StatePoint qm = s.point;
        qp.u = *xp;
        qm.u = *xm;
        Eigen::MatrixXd tp, tm;
        Eigen::VectorXd gp, gm;
        transformedAt(qp, &tp, &gp);
        transformedAt(qm, &tm, &gm);
        for (int r = 0; r < n; ++r) {
          for (int c = -1; c < n; ++c) {
            if (!independent(r, c, k)) continue;
            const double d = c < 0 ? gp[r] - gm[r] : tp(r, c) - tm(r, c);
            out.dependence = std::max(out.dependence, std::fabs(d) / (2 * delta));
          }
        }
      }
      status[si] = Status::Ok;
    } catch (const Error&) {
      status[si] = Status::Degenerate;
    }
  });

  TransformReport rep;
  rep.model = sys.name();
  rep.partition = scheme;
  rep.tolerance = options.tolerance;
  double minDet = INFINITY;
  for (std::size_t si = 0; si < samples.size(); ++si) {
    ++rep.samples;
    const TransformedSample& r = rows[si];
    switch (status[si]) {
      case Status::Excluded: ++rep.excluded; continue;
      case Status::Degenerate: ++rep.degenerate; continue;
      case Status::Singular:
        ++rep.singular;
        minDet = std::min(minDet, std::fabs(r.det));
        continue;
      case Status::Ok: break;
    }
    ++rep.evaluated;
    minDet = std::min(minDet, std::fabs(r.det));
    if (rep.argMaxOffBlock < 0 || r.offBlock > rep.maxOffBlock) {
      rep.maxOffBlock = r.offBlock;
      rep.argMaxOffBlock = static_cast<int>(si);
    }
    rep.maxOffBlockScaled = std::max(rep.maxOffBlockScaled, r.offBlock / (1.0 + r.T.norm()));
    rep.maxAnnihilation = std::max(rep.maxAnnihilation, r.annihilation);
    rep.maxAnnihilationScaled = std::max(rep.maxAnnihilationScaled, r.annihilationScaled);
    rep.maxDependence = std::max(rep.maxDependence, r.dependence);
    if (options.keepSamples) rep.transformed.push_back(r);
  }
  rep.minAbsDet = std::isfinite(minDet) ? minDet : 0.0;
  const int considered = rep.evaluated + rep.singular;
  if (considered > 0 && rep.singular > kSingularFraction * considered) {
    fail(ErrorKind::SingularCandidate, "det grad H below 1e-8 at " + std::to_string(rep.singular) +
                                           " of " + std::to_string(considered) + " samples");
  }
  rep.pass = rep.evaluated > 0 && rep.excluded + rep.degenerate <= 0.2 * rep.samples &&
             rep.maxOffBlockScaled <= options.tolerance &&
             rep.maxAnnihilationScaled <= options.tolerance &&
             rep.maxDependence <= options.dependenceTolerance;
  return rep;
}

namespace {

struct Run {
  std::vector<Eigen::VectorXd> points;
  bool left = false;
};

using FieldFactory = std::function<VectorField()>;
using Inside = std::function<bool(const Eigen::VectorXd&)>;

Eigen::VectorXd rk4Step(const VectorField& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Run rk4Run(const FieldFactory& make, const Eigen::VectorXd& start, double length, int steps,
           const Inside& inside) {
  Run run;
  run.points.push_back(start);
  const VectorField f = make();
  const double h = length / steps;
  Eigen::VectorXd x = start;
  for (int i = 0; i < steps; ++i) {
    Eigen::VectorXd y;
    try {
      y = rk4Step(f, x, h);
    } catch (const Error&) {
      run.left = true;
      break;
    }
    if (!y.allFinite() || !inside(y)) {
      run.left = true;
      break;
    }
    run.points.push_back(y);
    x = y;
  }
  return run;
}

FlowResult adaptiveFlow(const FieldFactory& make, const Eigen::VectorXd& start, double length,
                        int steps, const Inside& inside) {
  steps = std::max(1, steps);
  Run coarse = rk4Run(make, start, length, steps, inside);
  FlowResult out;
  for (int d = 0;; ++d) {
    Run fine = rk4Run(make, start, length, 2 * steps, inside);
    const std::size_t common = std::min(coarse.points.size() - 1, (fine.points.size() - 1) / 2);
    const double reached = static_cast<double>(common) * std::fabs(length) / steps;
    const double diff = (coarse.points[common] - fine.points[2 * common]).norm();
    out.errorEstimate = reached > 0.0 ? diff / reached : 0.0;
    out.points = std::move(fine.points);
    out.leftDomain = fine.left;
    out.steps = 2 * steps;
    if (out.errorEstimate <= kFlowErrorPerUnit || d == kMaxFlowDoublings) return out;
    coarse.points = out.points;
    coarse.left = out.leftDomain;
    steps *= 2;
  }
}

Inside admissible(const QuasilinearSystem& sys) {
  return [&sys](const Eigen::VectorXd& u) {
    const StatePoint p = pointAt(u);
    return sys.insideBox(p) && !sys.excluded(p);
  };
}

}  // namespace

FlowResult integrateField(const VectorField& f, const Eigen::VectorXd& start, double length,
                          int steps, const Inside& inside) {
  return adaptiveFlow([&f] { return f; }, start, length, steps, inside);
}

FlowResult characteristicFlow(const QuasilinearSystem& sys, const FrameField& field, int slot,
                              const Eigen::VectorXd& start, double length, int steps) {
  const Inside inside = admissible(sys);
  if (start.size() != sys.n() || !inside(start)) {
    fail(ErrorKind::PreconditionViolation, "flow start is not an admissible state");
  }
  const Frame first = field.at(pointAt(start));
  if (slot < 0 || slot >= first.size()) fail(ErrorKind::PreconditionViolation, "no such frame slot");
  const FieldFactory make = [&field, &first, slot] {
    auto previous = std::make_shared<Frame>(first);
    return VectorField([&field, previous, slot](const Eigen::VectorXd& u) {
      *previous = field.near(*previous, pointAt(u));
      return Eigen::VectorXd(previous->right.col(slot));
    });
  };
  return adaptiveFlow(make, start, length, steps, inside);
}

SlicePullback::SlicePullback(const QuasilinearSystem& sys, std::shared_ptr<const FrameField> field,
                             const PartitionScheme& scheme, const Eigen::VectorXd& basePoint,
                             const GridSpec& spec)
    : sys_(sys),
      field_(field ? std::move(field) : defaultFrameField(sys)),
      scheme_(scheme),
      base_(basePoint),
      spec_(spec) {
  if (scheme_.size() != sys.n()) fail(ErrorKind::InvalidPartition, "partition size mismatch");
  const StatePoint bp = pointAt(base_);
  if (base_.size() != sys.n() || !sys.insideBox(bp) || sys.excluded(bp)) {
    fail(ErrorKind::PreconditionViolation, "base point is not an admissible state");
  }
  baseFrame_ = field_->at(bp);
  const std::vector<int> blockOf = scheme_.blockOfPosition();
  const bool partial = scheme_.mode == DecouplingMode::Partial;
  levels_.resize(static_cast<std::size_t>(scheme_.blocks()));
  for (int i = 0; i < scheme_.blocks(); ++i) {
    for (int pos = 0; pos < scheme_.size(); ++pos) {
      const bool annihilated = partial ? blockOf[pos] > i : blockOf[pos] != i;
      if (annihilated) levels_[i].push_back(scheme_.slots[pos]);
    }
  }
}

Eigen::VectorXd SlicePullback::direction(int slot, const Eigen::VectorXd& u) const {
  return field_->near(baseFrame_, pointAt(u)).right.col(slot);
}

Eigen::VectorXd SlicePullback::flowAll(const Eigen::VectorXd& u, const std::vector<int>& slots,
                                       const Eigen::VectorXd& tau) const {
  Eigen::VectorXd x = u;
  const int steps = std::max(1, spec_.flowSteps);
  for (std::size_t q = 0; q < slots.size(); ++q) {
    const int slot = slots[q];
    const VectorField f = [this, slot](const Eigen::VectorXd& y) { return direction(slot, y); };
    const double h = tau[static_cast<Eigen::Index>(q)] / steps;
    if (h == 0.0) continue;
    for (int s = 0; s < steps; ++s) x = rk4Step(f, x, h);
  }
  if (!x.allFinite()) fail(ErrorKind::ShootingFailed, "flow produced a non-finite state");
  return x;
}

Eigen::VectorXd SlicePullback::operator()(const Eigen::VectorXd& u) const {
  const int n = sys_.n();
  const std::vector<int> blockOf = scheme_.blockOfPosition();
  Eigen::VectorXd h(n);
  for (int i = 0; i < scheme_.blocks(); ++i) {
    const std::vector<int>& dist = levels_[i];
    Eigen::VectorXd y = u;
    if (!dist.empty()) {
      const int m = static_cast<int>(dist.size());
      Eigen::MatrixXd dualRows(m, n);
      for (int q = 0; q < m; ++q) dualRows.row(q) = baseFrame_.dual.row(dist[q]);
      const auto residual = [&](const Eigen::VectorXd& tau, Eigen::VectorXd* end) {
        *end = flowAll(u, dist, tau);
        return Eigen::VectorXd(dualRows * (*end - base_));
      };
      Eigen::VectorXd tau = -(dualRows * (u - base_));
      Eigen::VectorXd end;
      Eigen::VectorXd f = residual(tau, &end);
      Eigen::MatrixXd jac(m, m);
      for (int q = 0; q < m; ++q) {
        const double eps = 1e-6 * (1.0 + std::fabs(tau[q]));
        Eigen::VectorXd shifted = tau;
        shifted[q] += eps;
        Eigen::VectorXd scratch;
        jac.col(q) = (residual(shifted, &scratch) - f) / eps;
      }
      bool converged = f.lpNorm<Eigen::Infinity>() <= spec_.shootTolerance;
      for (int it = 0; it < spec_.maxIterations && !converged; ++it) {
        const Eigen::VectorXd step = -jac.partialPivLu().solve(f);
        if (!step.allFinite()) break;
        tau += step;
        const Eigen::VectorXd next = residual(tau, &end);
        // Broyden update of the shooting Jacobian.
        jac += (next - f - jac * step) * step.transpose() / step.squaredNorm();
        f = next;
        converged = f.lpNorm<Eigen::Infinity>() <= spec_.shootTolerance;
      }
      if (!converged) fail(ErrorKind::ShootingFailed, "no slice intersection within the iteration cap");
      y = end;
    }
    for (int pos = 0; pos < n; ++pos) {
      if (blockOf[pos] == i) h[pos] = baseFrame_.dual.row(scheme_.slots[pos]).dot(y - base_);
    }
  }
  return h;
}

namespace {

std::vector<int> gridIndex(std::size_t flat, int dims, int m) {
  std::vector<int> idx(static_cast<std::size_t>(dims));
  for (int d = dims - 1; d >= 0; --d) {
    idx[static_cast<std::size_t>(d)] = static_cast<int>(flat % static_cast<std::size_t>(m));
    flat /= static_cast<std::size_t>(m);
  }
  return idx;
}

double gridCoordinate(const Interval& iv, int i, int m) {
  return m == 1 ? 0.5 * (iv.lo + iv.hi) : iv.lo + iv.width() * i / (m - 1);
}

}  // namespace

Eigen::VectorXd ConstructedTransform::interpolate(const Eigen::VectorXd& u) const {
  const int dims = static_cast<int>(box.size());
  const int m = pointsPerDim;
  std::vector<int> lower(static_cast<std::size_t>(dims));
  std::vector<double> frac(static_cast<std::size_t>(dims));
  for (int d = 0; d < dims; ++d) {
    const Interval& iv = box[static_cast<std::size_t>(d)];
    const double t = m == 1 ? 0.0 : (u[d] - iv.lo) / iv.width() * (m - 1);
    const int i = std::clamp(static_cast<int>(std::floor(t)), 0, std::max(0, m - 2));
    lower[static_cast<std::size_t>(d)] = i;
    frac[static_cast<std::size_t>(d)] = m == 1 ? 0.0 : t - i;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(values.empty() ? 0 : values.front().size());
  for (std::size_t corner = 0; corner < (std::size_t{1} << dims); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int d = 0; d < dims; ++d) {
      const bool up = (corner >> d) & 1U;
      const double fd = frac[static_cast<std::size_t>(d)];
      weight *= up ? fd : 1.0 - fd;
      const int i = std::min(lower[static_cast<std::size_t>(d)] + (up ? 1 : 0), m - 1);
      flat = flat * static_cast<std::size_t>(m) + static_cast<std::size_t>(i);
    }
    if (weight != 0.0) out += weight * values[flat];
  }
  return out;
}

Json ConstructedTransform::metadata() const {
  Json j;
  j["partition"] = partition.toJson();
  j["basePoint"] = std::vector<double>(basePoint.data(), basePoint.data() + basePoint.size());
  Json b = Json::array();
  for (const auto& iv : box) b.push_back({iv.lo, iv.hi});
  j["grid"] = {{"pointsPerDim", pointsPerDim}, {"box", b}, {"points", grid.size()}};
  j["quality"] = {{"shootingFailures", shootingFailures},
                  {"invarianceResidual", invarianceResidual},
                  {"interpolatedAnnihilation", interpolatedAnnihilation},
                  {"trusted", trusted},
                  {"usable", usable}};
  return j;
}

void ConstructedTransform::writeCsv(std::ostream& os,
                                    const std::vector<std::string>& stateNames) const {
  for (const auto& name : stateNames) os << name << ',';
  for (int pos = 0; pos < partition.size(); ++pos) {
    os << 'H' << partition.label(pos) << (pos + 1 < partition.size() ? "," : "\n");
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (Eigen::Index d = 0; d < grid[g].size(); ++d) os << formatNumber(grid[g][d]) << ',';
    for (Eigen::Index d = 0; d < values[g].size(); ++d) {
      os << formatNumber(values[g][d]) << (d + 1 < values[g].size() ? "," : "\n");
    }
  }
}

ConstructedTransform constructTransformNumeric(const QuasilinearSystem& sys,
                                               const PartitionScheme& scheme,
                                               const Eigen::VectorXd& basePoint,
                                               const GridSpec& spec) {
  const int n = sys.n();
  const auto field = spec.field ? spec.field : defaultFrameField(sys);
  const SlicePullback pull(sys, field, scheme, basePoint, spec);

  ConstructedTransform out;
  out.partition = scheme;
  out.basePoint = basePoint;
  out.box = spec.box.empty() ? sys.stateBox() : spec.box;
  if (static_cast<int>(out.box.size()) != n) fail(ErrorKind::PreconditionViolation, "grid box size");
  out.pointsPerDim = std::max(1, spec.pointsPerDim);
  const int m = out.pointsPerDim;
  std::size_t cells = 1;
  for (int d = 0; d < n; ++d) cells *= static_cast<std::size_t>(m);
  if (cells > 1000000) fail(ErrorKind::TooLarge, "grid exceeds 1e6 points");

  out.grid.resize(cells);
  out.values.assign(cells, Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN()));
  std::vector<char> failed(cells, 0);
  parallelFor(cells, spec.workers, [&](std::size_t g) {
    const std::vector<int> idx = gridIndex(g, n, m);
    Eigen::VectorXd u(n);
    for (int d = 0; d < n; ++d) u[d] = gridCoordinate(out.box[static_cast<std::size_t>(d)], idx[d], m);
    out.grid[g] = u;
    if (sys.excluded(pointAt(u))) {
      failed[g] = 1;
      return;
    }
    try {
      out.values[g] = pull(u);
    } catch (const Error&) {
      failed[g] = 1;
    }
  });
  for (char f : failed) out.shootingFailures += f;

  // Short flows along each annihilated direction from a spread of grid states.
  std::vector<std::size_t> probes;
  const std::size_t stride = std::max<std::size_t>(1, cells / 8);
  for (std::size_t g = stride / 2; g < cells; g += stride) {
    if (!failed[g]) probes.push_back(g);
  }
  double scale = 0.0;
  for (const auto& iv : out.box) scale += iv.width();
  const double arc = 0.05 * scale / n;
  const std::vector<int> blockOf = scheme.blockOfPosition();
  const Inside inside = admissible(sys);
  std::vector<double> drift(probes.size(), 0.0);
  parallelFor(probes.size(), spec.workers, [&](std::size_t pi) {
    const Eigen::VectorXd& u = out.grid[probes[pi]];
    const Eigen::VectorXd& hu = out.values[probes[pi]];
    for (int i = 0; i < scheme.blocks(); ++i) {
      for (int slot : pull.annihilated(i)) {
        const VectorField f = [&pull, slot](const Eigen::VectorXd& y) { return pull.direction(slot, y); };
        for (double sign : {1.0, -1.0}) {
          try {
            Eigen::VectorXd y = u;
            const int steps = std::max(1, spec.flowSteps);
            for (int s = 0; s < steps; ++s) y = rk4Step(f, y, sign * arc / steps);
            if (!inside(y)) continue;
            const Eigen::VectorXd hy = pull(y);
            for (int pos = 0; pos < n; ++pos) {
              if (blockOf[pos] == i) drift[pi] = std::max(drift[pi], std::fabs(hy[pos] - hu[pos]));
            }
            break;
          } catch (const Error&) {
            drift[pi] = INFINITY;
          }
        }
      }
    }
  });
  for (double d : drift) out.invarianceResidual = std::max(out.invarianceResidual, d);
  if (probes.empty()) out.invarianceResidual = INFINITY;

  if (m >= 2) {
    std::size_t lowerCells = 1;
    for (int d = 0; d < n; ++d) lowerCells *= static_cast<std::size_t>(m - 1);
    const std::size_t cellStride = std::max<std::size_t>(1, lowerCells / 16);
    for (std::size_t c = 0; c < lowerCells; c += cellStride) {
      const std::vector<int> idx = gridIndex(c, n, m - 1);
      Eigen::VectorXd centre(n);
      Eigen::VectorXd step(n);
      for (int d = 0; d < n; ++d) {
        const Interval& iv = out.box[static_cast<std::size_t>(d)];
        const double spacing = iv.width() / (m - 1);
        centre[d] = gridCoordinate(iv, idx[d], m) + 0.5 * spacing;
        step[d] = 0.25 * spacing;
      }
      if (!inside(centre)) continue;
      Eigen::MatrixXd grad(n, n);
      for (int d = 0; d < n; ++d) {
        Eigen::VectorXd up = centre;
        Eigen::VectorXd down = centre;
        up[d] += step[d];
        down[d] -= step[d];
        grad.col(d) = (out.interpolate(up) - out.interpolate(down)) / (2 * step[d]);
      }
      if (!grad.allFinite()) continue;
      try {
        for (int i = 0; i < scheme.blocks(); ++i) {
          for (int slot : pull.annihilated(i)) {
            const Eigen::VectorXd r = pull.direction(slot, centre);
            for (int pos = 0; pos < n; ++pos) {
              if (blockOf[pos] != i) continue;
              out.interpolatedAnnihilation =
                  std::max(out.interpolatedAnnihilation, std::fabs(grad.row(pos).dot(r)));
            }
          }
        }
      } catch (const Error&) {
      }
    }
  }

  try {
    SamplePlan plan;
    plan.count = 200;
    CheckOptions check;
    check.field = field;
    check.workers = spec.workers;
    out.trusted = checkPartition(sys, scheme, plan, check).pass;
  } catch (const Error&) {
    out.trusted = false;
  }
  out.usable = out.shootingFailures == 0 && out.invarianceResidual <= kInvarianceGate;
  return out;
}

}  // namespace decoupler

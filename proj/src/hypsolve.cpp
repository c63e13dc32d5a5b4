#include "decoupler/hypsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "decoupler/error.hpp"
#include "decoupler/parallel.hpp"

namespace decoupler {

namespace {

constexpr double kBlowupFactor = 1e6;

void splitSpeeds(const Eigen::MatrixXd& m, Eigen::MatrixXd* plus, Eigen::MatrixXd* minus) {
  if (m.rows() == 1) {
    *plus = m.cwiseMax(0.0);
    *minus = m.cwiseMin(0.0);
    return;
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXcd lambda = es.eigenvalues();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (std::fabs(lambda[k].imag()) > 1e-10 * (1.0 + std::abs(lambda[k]))) {
      fail(ErrorKind::PreconditionViolation, "coefficient matrix is not hyperbolic");
    }
  }
  const Eigen::MatrixXd r = es.eigenvectors().real();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) {
    fail(ErrorKind::IllConditioned, "coefficient matrix has no eigenvector basis");
  }
  const Eigen::MatrixXd inv = lu.inverse();
  const Eigen::VectorXd re = lambda.real();
  *plus = r * re.cwiseMax(0.0).asDiagonal() * inv;
  *minus = r * re.cwiseMin(0.0).asDiagonal() * inv;
}

double spectralRadius(const Eigen::MatrixXd& t) {
  if (t.rows() == 1) return std::fabs(t(0, 0));
  const Eigen::VectorXcd lambda = t.eigenvalues();
  double s = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (std::fabs(lambda[k].imag()) > 1e-8 * (1.0 + std::abs(lambda[k]))) {
      fail(ErrorKind::PreconditionViolation, "coefficient matrix is not hyperbolic");
    }
    s = std::max(s, std::fabs(lambda[k].real()));
  }
  return s;
}

}  // namespace

const char* schemeName(Scheme s) {
  return s == Scheme::LaxFriedrichs ? "laxFriedrichs" : "upwindCharacteristic";
}

Scheme parseScheme(const std::string& text) {
  if (text == "laxFriedrichs" || text == "lf") return Scheme::LaxFriedrichs;
  if (text == "upwindCharacteristic" || text == "upwind") return Scheme::UpwindCharacteristic;
  fail(ErrorKind::PreconditionViolation, "unknown scheme '" + text + "'");
}

const char* boundaryName(Boundary b) { return b == Boundary::Periodic ? "periodic" : "outflow"; }

Boundary parseBoundary(const std::string& text) {
  if (text == "periodic") return Boundary::Periodic;
  if (text == "outflow") return Boundary::Outflow;
  fail(ErrorKind::PreconditionViolation, "unknown boundary '" + text + "'");
}

void GridSolution::writeSlice(std::ostream& os, int level) const {
  os << 'x';
  for (const auto& name : names) os << ',' << name;
  os << '\n';
  const Eigen::MatrixXd& s = states.at(static_cast<std::size_t>(level));
  for (int i = 0; i < cells(); ++i) {
    os << formatNumber(x[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < s.cols(); ++k) os << ',' << formatNumber(s(i, k));
    os << '\n';
  }
}

Json GridSolution::metadata() const {
  Json j;
  j["scheme"] = schemeName(scheme);
  j["boundary"] = boundaryName(boundary);
  j["cfl"] = cfl;
  j["cells"] = cells();
  j["xMin"] = x.empty() ? 0.0 : x.front() - 0.5 * (x.size() > 1 ? x[1] - x[0] : 0.0);
  j["dx"] = x.size() > 1 ? x[1] - x[0] : 0.0;
  j["times"] = times;
  j["steps"] = steps;
  j["variables"] = names;
  return j;
}

InitialData initialFromStrings(const QuasilinearSystem& sys, const std::vector<std::string>& text) {
  if (static_cast<int>(text.size()) != sys.n()) {
    fail(ErrorKind::PreconditionViolation, "initial data needs one expression per state");
  }
  std::vector<Expression> exprs;
  for (const auto& s : text) {
    Expression e = Expression::parse(s, sys.symbols());
    for (std::size_t k : e.freeSymbols()) {
      if (k != 1 && k < 2 + static_cast<std::size_t>(sys.n())) {
        fail(ErrorKind::PreconditionViolation, "initial data may depend on x and parameters only");
      }
    }
    exprs.push_back(std::move(e));
  }
  auto program = std::make_shared<Program>(exprs);
  const int n = sys.n();
  return [&sys, program, n](double x) {
    StatePoint p;
    p.x = x;
    p.u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd out(n);
    program->run(sys.inputs(p), std::span<double>(out.data(), static_cast<std::size_t>(n)));
    return out;
  };
}

DecoupledSystem DecoupledSystem::closedForm(const QuasilinearSystem& sys,
                                            std::vector<int> blockSizes) {
  DecoupledSystem d(sys);
  d.n_ = sys.n();
  int total = 0;
  for (int m : blockSizes) {
    if (m < 1) fail(ErrorKind::InvalidPartition, "block sizes must be positive");
    d.blockStart_.push_back(total);
    total += m;
  }
  if (total != d.n_) fail(ErrorKind::InvalidPartition, "block sizes must sum to n");
  d.blockSizes_ = std::move(blockSizes);
  d.names_ = sys.stateNames();
  return d;
}

DecoupledSystem DecoupledSystem::fromCandidate(const QuasilinearSystem& sys,
                                               const TransformCandidate& candidate) {
  DecoupledSystem d = closedForm(sys, candidate.partition.blockSizes);
  d.candidate_ = candidate;
  d.map_ = std::make_shared<CompiledMap>(sys, candidate.forward);
  d.names_.clear();
  for (int k = 0; k < d.n_; ++k) d.names_.push_back("U" + std::to_string(k + 1));
  return d;
}

Eigen::VectorXd DecoupledSystem::state(const Eigen::VectorXd& U, const Eigen::VectorXd& guess) const {
  if (!map_) return U;
  StatePoint p;
  p.u = guess;
  const auto u = map_->invert(U, p);
  if (!u) fail(ErrorKind::NotInverse, "Newton inversion of H failed");
  return *u;
}

void DecoupledSystem::coefficients(double t, double x, const Eigen::VectorXd& U, int block,
                                   Eigen::VectorXd* guess, Eigen::MatrixXd* T,
                                   Eigen::VectorXd* G) const {
  StatePoint p;
  p.t = t;
  p.x = x;
  if (map_) {
    p.u = state(U, *guess);
    *guess = p.u;
    const Eigen::MatrixXd j = map_->jacobian(p);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
    *T = j * sys_->matrix(p) * lu.inverse();
    *G = j * sys_->source(p);
    return;
  }
  p.u = U;
  const int known = block < 0 ? n_ : blockStart_[block] + blockSizes_[block];
  for (int k = known; k < n_; ++k) p.u[k] = std::numeric_limits<double>::quiet_NaN();
  *T = sys_->matrix(p);
  *G = sys_->source(p);
  if (block < 0) return;
  const int s = blockStart_[block];
  const int m = blockSizes_[block];
  const bool upperZero = (T->block(s, known, m, n_ - known).array() == 0.0).all();
  if (!upperZero || !T->block(s, 0, m, known).allFinite() || !G->segment(s, m).allFinite()) {
    fail(ErrorKind::PreconditionViolation,
         "block " + std::to_string(block + 1) + " depends on a later block");
  }
}

GridSolution solveHierarchical(const DecoupledSystem& system, const InitialData& initialU,
                               const Grid1D& grid, double tEnd, Scheme scheme,
                               const InitialData& initialGuess) {
  if (grid.cells < 3) fail(ErrorKind::PreconditionViolation, "grid needs at least 3 cells");
  if (!(grid.xMax > grid.xMin)) fail(ErrorKind::PreconditionViolation, "empty x interval");
  if (!(grid.cfl > 0.0 && grid.cfl <= 1.0)) {
    fail(ErrorKind::CflViolation, "CFL number must lie in (0, 1]");
  }
  if (!(tEnd >= 0.0) || grid.levels < 1) fail(ErrorKind::PreconditionViolation, "bad time range");
  if (system.needsGuess() && !initialGuess) {
    fail(ErrorKind::PreconditionViolation, "an initial state guess is required for Newton");
  }
  const int cells = grid.cells;
  const int n = system.n();
  const int blocks = static_cast<int>(system.blockSizes().size());
  const double dx = grid.dx();
  const bool masked = blocks > 1;

  GridSolution out;
  out.names = system.names();
  out.scheme = scheme;
  out.boundary = grid.boundary;
  out.cfl = grid.cfl;
  for (int i = 0; i < cells; ++i) out.x.push_back(grid.centre(i));

  Eigen::MatrixXd u(cells, n);
  std::vector<Eigen::VectorXd> guess(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) {
    u.row(i) = initialU(out.x[static_cast<std::size_t>(i)]).transpose();
    guess[static_cast<std::size_t>(i)] =
        initialGuess ? initialGuess(out.x[static_cast<std::size_t>(i)]) : Eigen::VectorXd(u.row(i).transpose());
  }
  if (!u.allFinite()) fail(ErrorKind::PreconditionViolation, "initial data is not finite");
  const double bound = kBlowupFactor * (1.0 + u.cwiseAbs().maxCoeff());
  const auto neighbour = [&](int i) {
    if (grid.boundary == Boundary::Periodic) return (i + cells) % cells;
    return std::clamp(i, 0, cells - 1);
  };

  double t = 0.0;
  out.times.push_back(0.0);
  out.states.push_back(u);
  std::vector<double> speed(static_cast<std::size_t>(cells));
  Eigen::MatrixXd next(cells, n);

  for (int level = 1; level <= grid.levels; ++level) {
    const double target = tEnd * level / grid.levels;
    while (t < target) {
      parallelFor(static_cast<std::size_t>(cells), grid.workers, [&](std::size_t i) {
        Eigen::MatrixXd tm;
        Eigen::VectorXd gm;
        system.coefficients(t, out.x[i], u.row(static_cast<Eigen::Index>(i)).transpose(), -1,
                            &guess[i], &tm, &gm);
        speed[i] = spectralRadius(tm);
      });
      const double fastest = *std::max_element(speed.begin(), speed.end());
      double dt = grid.cfl * dx / (fastest > 0.0 ? fastest : 1.0);
      const bool last = dt >= target - t;
      if (last) dt = target - t;
      if (fastest * dt / dx > 1.0 + 1e-12) fail(ErrorKind::CflViolation, "time step exceeds CFL 1");

      parallelFor(static_cast<std::size_t>(cells), grid.workers, [&](std::size_t ci) {
        const int i = static_cast<int>(ci);
        const Eigen::VectorXd ui = u.row(i).transpose();
        const Eigen::VectorXd ul = u.row(neighbour(i - 1)).transpose();
        const Eigen::VectorXd ur = u.row(neighbour(i + 1)).transpose();
        Eigen::MatrixXd tm;
        Eigen::VectorXd gm;
        int s = 0;
        for (int b = 0; b < blocks; ++b) {
          const int m = system.blockSizes()[static_cast<std::size_t>(b)];
          system.coefficients(t, out.x[ci], ui, masked ? b : -1, &guess[ci], &tm, &gm);
          Eigen::VectorXd v;
          if (scheme == Scheme::LaxFriedrichs) {
            v = 0.5 * (ul + ur).segment(s, m) -
                dt / (2 * dx) * tm.block(s, 0, m, s + m) * (ur - ul).head(s + m);
          } else {
            Eigen::MatrixXd plus, minus;
            splitSpeeds(tm.block(s, s, m, m), &plus, &minus);
            v = ui.segment(s, m) -
                dt / dx * (plus * (ui - ul).segment(s, m) + minus * (ur - ui).segment(s, m));
            if (s > 0) v -= dt / (2 * dx) * tm.block(s, 0, m, s) * (ur - ul).head(s);
          }
          next.block(i, s, 1, m) = v.transpose();
          s += m;
        }
      });
      if (!system.homogeneous()) {
        parallelFor(static_cast<std::size_t>(cells), grid.workers, [&](std::size_t ci) {
          const int i = static_cast<int>(ci);
          const Eigen::VectorXd ui = next.row(i).transpose();
          Eigen::MatrixXd tm;
          Eigen::VectorXd gm;
          int s = 0;
          Eigen::VectorXd add(n);
          for (int b = 0; b < blocks; ++b) {
            const int m = system.blockSizes()[static_cast<std::size_t>(b)];
            system.coefficients(t, out.x[ci], ui, masked ? b : -1, &guess[ci], &tm, &gm);
            add.segment(s, m) = gm.segment(s, m);
            s += m;
          }
          next.row(i) += dt * add.transpose();
        });
      }
      u.swap(next);
      t = last ? target : t + dt;
      ++out.steps;
      if (!u.allFinite() || u.cwiseAbs().maxCoeff() > bound) {
        fail(ErrorKind::BlowupDetected, "solution blew up at t = " + formatNumber(t));
      }
    }
    out.times.push_back(target);
    out.states.push_back(u);
  }
  return out;
}

GridSolution solveCoupled(const QuasilinearSystem& sys, const InitialData& initial,
                          const Grid1D& grid, double tEnd, Scheme scheme) {
  return solveHierarchical(DecoupledSystem::closedForm(sys, {sys.n()}), initial, grid, tEnd, scheme);
}

std::vector<LevelNorms> compareSolutions(const GridSolution& a, const GridSolution& b,
                                         const CompiledMap* map) {
  if (a.cells() != b.cells() || a.times.size() != b.times.size() ||
      a.states.size() != b.states.size()) {
    fail(ErrorKind::GridMismatch, "solutions use different grids or time levels");
  }
  for (int i = 0; i < a.cells(); ++i) {
    const double xa = a.x[static_cast<std::size_t>(i)];
    const double xb = b.x[static_cast<std::size_t>(i)];
    if (std::fabs(xa - xb) > 1e-12 * (1.0 + std::fabs(xa))) {
      fail(ErrorKind::GridMismatch, "cell centres differ");
    }
  }
  for (std::size_t l = 0; l < a.times.size(); ++l) {
    if (std::fabs(a.times[l] - b.times[l]) > 1e-12 * (1.0 + std::fabs(a.times[l]))) {
      fail(ErrorKind::GridMismatch, "time levels differ");
    }
  }
  const double dx = a.cells() > 1 ? a.x[1] - a.x[0] : 1.0;
  std::vector<LevelNorms> out;
  for (std::size_t l = 0; l < a.states.size(); ++l) {
    Eigen::MatrixXd sa = a.states[l];
    if (map) {
      for (int i = 0; i < a.cells(); ++i) {
        StatePoint p;
        p.t = a.times[l];
        p.x = a.x[static_cast<std::size_t>(i)];
        p.u = sa.row(i).transpose();
        sa.row(i) = map->value(p).transpose();
      }
    }
    if (sa.cols() != b.states[l].cols()) fail(ErrorKind::GridMismatch, "state counts differ");
    const Eigen::MatrixXd diff = (sa - b.states[l]).cwiseAbs();
    out.push_back({a.times[l], dx * diff.sum(), diff.size() ? diff.maxCoeff() : 0.0});
  }
  return out;
}

double burgersExact(const std::function<double(double)>& u0, double x, double t) {
  double u = u0(x);
  for (int it = 0; it < 10000; ++it) {
    const double next = u0(x - u * t);
    if (std::fabs(next - u) <= 1e-15 * (1.0 + std::fabs(u))) return next;
    u = next;
  }
  fail(ErrorKind::PreconditionViolation, "characteristics cross before t; no smooth solution");
}

}  // namespace decoupler

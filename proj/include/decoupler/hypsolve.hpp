#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "decoupler/json.hpp"
#include "decoupler/system.hpp"
#include "decoupler/transform.hpp"

namespace decoupler {

enum class Scheme { LaxFriedrichs, UpwindCharacteristic };
enum class Boundary { Periodic, Outflow };

const char* schemeName(Scheme s);
Scheme parseScheme(const std::string& text);
const char* boundaryName(Boundary b);
Boundary parseBoundary(const std::string& text);

struct Grid1D {
  double xMin = 0.0;
  double xMax = 1.0;
  int cells = 100;
  Boundary boundary = Boundary::Periodic;
  double cfl = 0.9;
  /// Solutions are stored at tEnd * k / levels for k = 0..levels.
  int levels = 1;
  int workers = 0;

  double dx() const { return (xMax - xMin) / cells; }
  double centre(int i) const { return xMin + (i + 0.5) * dx(); }
};

struct GridSolution {
  std::vector<std::string> names;
  std::vector<double> x;
  std::vector<double> times;
  /// One cells x n array per stored time level.
  std::vector<Eigen::MatrixXd> states;
  Scheme scheme = Scheme::LaxFriedrichs;
  Boundary boundary = Boundary::Periodic;
  double cfl = 0.0;
  int steps = 0;

  int cells() const { return static_cast<int>(x.size()); }
  void writeSlice(std::ostream& os, int level) const;
  Json metadata() const;
};

using InitialData = std::function<Eigen::VectorXd(double)>;

/// Initial data from expressions in x and the model parameters.
InitialData initialFromStrings(const QuasilinearSystem& sys, const std::vector<std::string>& text);

/// Block lower-triangular system in the variables U, solved block by block.
class DecoupledSystem {
 public:
  /// A model whose states are already U, ordered block by block. Later blocks
  /// are hidden from earlier ones, so a hidden dependence is reported.
  static DecoupledSystem closedForm(const QuasilinearSystem& sys, std::vector<int> blockSizes);
  /// T = (grad H) A (grad H)^-1 and G = (grad H) g at u = h(U), with h by Newton.
  static DecoupledSystem fromCandidate(const QuasilinearSystem& sys,
                                       const TransformCandidate& candidate);

  int n() const { return n_; }
  const std::vector<int>& blockSizes() const { return blockSizes_; }
  const std::vector<std::string>& names() const { return names_; }
  bool needsGuess() const { return candidate_.has_value(); }
  bool homogeneous() const { return sys_->homogeneous(); }

  /// Coefficients at (t, x, U). With block >= 0 only rows of that block are
  /// meaningful. guess carries u between calls on the candidate path.
  void coefficients(double t, double x, const Eigen::VectorXd& U, int block,
                    Eigen::VectorXd* guess, Eigen::MatrixXd* T, Eigen::VectorXd* G) const;
  /// u = h(U) on the candidate path; U itself otherwise.
  Eigen::VectorXd state(const Eigen::VectorXd& U, const Eigen::VectorXd& guess) const;

 private:
  DecoupledSystem(const QuasilinearSystem& sys) : sys_(&sys) {}

  const QuasilinearSystem* sys_;
  int n_ = 0;
  std::vector<int> blockSizes_;
  std::vector<int> blockStart_;
  std::vector<std::string> names_;
  std::optional<TransformCandidate> candidate_;
  std::shared_ptr<CompiledMap> map_;
};

GridSolution solveCoupled(const QuasilinearSystem& sys, const InitialData& initial,
                          const Grid1D& grid, double tEnd, Scheme scheme);

/// initialGuess supplies u(x) for Newton on the candidate path.
GridSolution solveHierarchical(const DecoupledSystem& system, const InitialData& initialU,
                               const Grid1D& grid, double tEnd, Scheme scheme,
                               const InitialData& initialGuess = {});

struct LevelNorms {
  double time = 0.0;
  double l1 = 0.0;
  double linf = 0.0;
};

/// Norms of a - b per stored level; map is applied to a first when given.
std::vector<LevelNorms> compareSolutions(const GridSolution& a, const GridSolution& b,
                                         const CompiledMap* map = nullptr);

/// Smooth solution of U_t + U U_x = 0 by characteristics, U = U0(x - U t).
double burgersExact(const std::function<double(double)>& u0, double x, double t);

}  // namespace decoupler

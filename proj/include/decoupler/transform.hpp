#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "decoupler/conditions.hpp"
#include "decoupler/json.hpp"
#include "decoupler/spectrum.hpp"
#include "decoupler/system.hpp"

namespace decoupler {

/// Candidate decoupling map U = H(u); components are listed in partition
/// position order, block by block.
struct TransformCandidate {
  std::vector<Expression> forward;
  PartitionScheme partition;
};

TransformCandidate candidateFromHint(const QuasilinearSystem& sys, const PartitionScheme& scheme);
TransformCandidate candidateFromStrings(const QuasilinearSystem& sys,
                                        const std::vector<std::string>& components,
                                        const PartitionScheme& scheme);
TransformCandidate identityCandidate(const QuasilinearSystem& sys, const PartitionScheme& scheme);

struct TransformOptions {
  double tolerance = 1e-8;
  /// Bound on |dT/dU| for entries that must not depend on U.
  double dependenceTolerance = 1e-6;
  int workers = 0;
  std::shared_ptr<const FrameField> field;
  bool keepSamples = true;
};

struct TransformedSample {
  int index = 0;
  Eigen::VectorXd u;
  Eigen::VectorXd U;
  Eigen::MatrixXd T;
  Eigen::VectorXd G;
  double det = 0.0;
  double offBlock = 0.0;
  double annihilation = 0.0;
  double annihilationScaled = 0.0;
  double dependence = 0.0;
};

struct TransformReport {
  std::string model;
  PartitionScheme partition;
  double tolerance = 1e-8;
  int samples = 0;
  int evaluated = 0;
  int excluded = 0;
  int degenerate = 0;
  int singular = 0;
  double minAbsDet = 0.0;
  double maxAnnihilation = 0.0;
  double maxAnnihilationScaled = 0.0;
  double maxOffBlock = 0.0;
  double maxOffBlockScaled = 0.0;
  double maxDependence = 0.0;
  int argMaxOffBlock = -1;
  bool pass = false;
  std::vector<TransformedSample> transformed;

  Json toJson() const;
};

/// H(u), its exact Jacobian and a Newton inverse, compiled once.
class CompiledMap {
 public:
  CompiledMap(const QuasilinearSystem& sys, const std::vector<Expression>& forward);
  Eigen::VectorXd value(const StatePoint& p) const;
  Eigen::MatrixXd jacobian(const StatePoint& p) const;
  /// Solves H(u) = U starting from guess; nullopt when Newton stalls.
  std::optional<Eigen::VectorXd> invert(const Eigen::VectorXd& U, const StatePoint& guess) const;

 private:
  const QuasilinearSystem& sys_;
  int n_;
  Program value_;
  Program jacobian_;
};

TransformReport verifyTransform(const QuasilinearSystem& sys, const TransformCandidate& candidate,
                                const SamplePlan& plan, const TransformOptions& options = {});

struct FlowResult {
  std::vector<Eigen::VectorXd> points;
  bool leftDomain = false;
  /// Step-halving endpoint difference per unit parameter length.
  double errorEstimate = 0.0;
  int steps = 0;
};

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// RK4 for du/ds = f(u) over [0, length]; steps double until the step-halving
/// estimate is at most 1e-8 per unit length. inside() truncates the curve.
FlowResult integrateField(const VectorField& f, const Eigen::VectorXd& start, double length,
                          int steps, const std::function<bool(const Eigen::VectorXd&)>& inside);

/// Integral curve of the right autovector in a frame slot, with each frame
/// aligned to the previous one.
FlowResult characteristicFlow(const QuasilinearSystem& sys, const FrameField& field, int slot,
                              const Eigen::VectorXd& start, double length, int steps);

struct GridSpec {
  int pointsPerDim = 5;
  /// Grid box; the state box when empty.
  std::vector<Interval> box;
  int flowSteps = 128;
  int maxIterations = 100;
  double shootTolerance = 1e-8;
  int workers = 0;
  std::shared_ptr<const FrameField> field;
};

struct ConstructedTransform {
  PartitionScheme partition;
  Eigen::VectorXd basePoint;
  std::vector<Eigen::VectorXd> grid;
  /// H at each grid state; NaN rows where shooting failed.
  std::vector<Eigen::VectorXd> values;
  int shootingFailures = 0;
  double invarianceResidual = 0.0;
  /// Largest |grad H . r| of the multilinear interpolant at interior test points.
  double interpolatedAnnihilation = 0.0;
  bool trusted = false;
  bool usable = false;

  Json metadata() const;
  void writeCsv(std::ostream& os, const std::vector<std::string>& stateNames) const;
  /// Multilinear interpolation of the gridded H.
  Eigen::VectorXd interpolate(const Eigen::VectorXd& u) const;

  int pointsPerDim = 0;
  std::vector<Interval> box;
};

/// Decoupling coordinates obtained by pulling a state back to the slice
/// through the base point along the annihilating flows.
class SlicePullback {
 public:
  SlicePullback(const QuasilinearSystem& sys, std::shared_ptr<const FrameField> field,
                const PartitionScheme& scheme, const Eigen::VectorXd& basePoint,
                const GridSpec& spec);
  /// H(u); throws ShootingFailed.
  Eigen::VectorXd operator()(const Eigen::VectorXd& u) const;
  /// Vector field of frame slot s aligned to the base frame.
  Eigen::VectorXd direction(int slot, const Eigen::VectorXd& u) const;
  /// Slots spanning the distribution annihilated by block i.
  const std::vector<int>& annihilated(int block) const { return levels_[block]; }

 private:
  Eigen::VectorXd flowAll(const Eigen::VectorXd& u, const std::vector<int>& slots,
                          const Eigen::VectorXd& tau) const;

  const QuasilinearSystem& sys_;
  std::shared_ptr<const FrameField> field_;
  PartitionScheme scheme_;
  Eigen::VectorXd base_;
  Frame baseFrame_;
  GridSpec spec_;
  std::vector<std::vector<int>> levels_;
};

ConstructedTransform constructTransformNumeric(const QuasilinearSystem& sys,
                                               const PartitionScheme& scheme,
                                               const Eigen::VectorXd& basePoint,
                                               const GridSpec& spec = {});

}  // namespace decoupler

#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "decoupler/json.hpp"
#include "decoupler/spectrum.hpp"
#include "decoupler/system.hpp"

namespace decoupler {

/// Ordered blocks of frame slots. slots[pos] is the frame slot placed at
/// position pos; positions run block by block.
struct PartitionScheme {
  std::vector<int> blockSizes;
  std::vector<int> slots;
  DecouplingMode mode = DecouplingMode::Partial;

  int blocks() const { return static_cast<int>(blockSizes.size()); }
  int size() const { return static_cast<int>(slots.size()); }
  /// Block index of every position.
  std::vector<int> blockOfPosition() const;
  /// 1-based "i.alpha" label of a position.
  std::string label(int pos) const;
  std::string describe() const;
  Json toJson() const;
};

/// Validates and completes a scheme; empty slots mean the identity order.
PartitionScheme makePartition(std::vector<int> blockSizes, DecouplingMode mode,
                              std::vector<int> slots, int n);
PartitionScheme partitionFromHint(const PartitionHint& hint, int n);
/// Parses "2,1" style block sizes.
std::vector<int> parseBlockSizes(const std::string& text);

/// Sum over blocks of n_i m_i (n - m_i).
int constraintCount(const PartitionScheme& scheme);

enum class GradientPath { Auto, FiniteDifference };

const char* gradientPathName(GradientPath path);

enum class SourceForm { Bracket, Direct };

struct CheckOptions {
  double tolerance = 1e-6;
  GradientPath path = GradientPath::Auto;
  int workers = 0;
  /// Frame field to differentiate; the model default when null.
  std::shared_ptr<const FrameField> field;
  /// Per-sample residual rows are written here when set.
  std::ostream* csv = nullptr;
};

/// Central-difference step used for every frame derivative at u.
double frameStep(const Eigen::VectorXd& u);

enum class SampleStatus { Ok, Excluded, Degenerate };

/// Slot-level residual tables at one sample; independent of any partition.
struct SampleTables {
  SampleStatus status = SampleStatus::Excluded;
  std::string reason;
  StatePoint point;
  /// Cluster multiplicities (negative for complex clusters) in frame order.
  std::vector<int> signature;
  /// gradient(a, c) = grad(lambda_a) . r_c; gradientFd always uses differences.
  Eigen::MatrixXd gradient;
  Eigen::MatrixXd gradientFd;
  /// interaction[a](b, c) = l_a . ((grad r_b) r_c - (grad r_c) r_b).
  std::vector<Eigen::MatrixXd> interaction;
  /// source(a, c) = l_a . [r_c, g]; sourceDirect(a, c) = grad(l_a . g) . r_c.
  Eigen::MatrixXd source;
  Eigen::MatrixXd sourceDirect;
  double normA = 0.0;
  double normG = 0.0;
  Eigen::VectorXd rightNorms;
};

struct ConditionTables {
  int n = 0;
  bool homogeneous = true;
  FrameProvenance provenance = FrameProvenance::Numeric;
  GradientPath path = GradientPath::Auto;
  std::vector<Sample> samples;
  std::vector<SampleTables> tables;
  /// Cluster layout of the first admissible sample; samples with another
  /// layout are degenerate.
  std::vector<FrameCluster> clusters;
  bool jordanBlocks = false;
  bool nonHyperbolic = false;
};

SampleTables evaluateSample(const QuasilinearSystem& sys, const FrameField& field,
                            const StatePoint& p, GradientPath path, double separationTolerance);

ConditionTables computeConditionTables(const QuasilinearSystem& sys, const SamplePlan& plan,
                                       const CheckOptions& options);

/// Single residuals at one point, addressed by frame slot.
double gradientConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a,
                                 int c, const StatePoint& p,
                                 GradientPath path = GradientPath::Auto);
double interactionConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a,
                                    int b, int c, const StatePoint& p);
double sourceConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a, int c,
                               const StatePoint& p, SourceForm form = SourceForm::Bracket);

struct TupleStat {
  std::string family;
  int a = -1;
  int b = -1;
  int c = -1;
  std::string labelA;
  std::string labelB;
  std::string labelC;
  double maxAbs = 0.0;
  double meanAbs = 0.0;
  double maxScaled = 0.0;
  int argMax = -1;
};

struct FamilyStat {
  std::string name;
  bool vacuous = true;
  int tuples = 0;
  double maxAbs = 0.0;
  double maxScaled = 0.0;
  int argMax = -1;
};

struct ConditionReport {
  std::string model;
  PartitionScheme partition;
  double tolerance = 1e-6;
  FrameProvenance provenance = FrameProvenance::Numeric;
  GradientPath path = GradientPath::Auto;
  int samples = 0;
  int evaluated = 0;
  int excluded = 0;
  int degenerate = 0;
  std::map<std::string, int> degenerateReasons;
  std::vector<FamilyStat> families;
  std::vector<TupleStat> tuples;
  /// Largest direct-form source residual, a diagnostic beside the bracket form.
  double sourceDirectMax = 0.0;
  bool jordanBlocks = false;
  bool nonHyperbolic = false;
  bool excessiveExclusion = false;
  int constraintCount = 0;
  int residualRank = 0;
  bool pass = false;

  const FamilyStat& family(const std::string& name) const;
  double maxAbs() const;
  double maxScaled() const;
  Json toJson() const;
};

/// Aggregates precomputed tables for one scheme. Throws InvalidPartition when
/// a numeric frame would split an eigenvalue cluster across blocks.
ConditionReport reportFromTables(const QuasilinearSystem& sys, const ConditionTables& tables,
                                 const PartitionScheme& scheme, const CheckOptions& options);

ConditionReport checkPartition(const QuasilinearSystem& sys, const PartitionScheme& scheme,
                               const SamplePlan& plan, const CheckOptions& options = {});

struct SearchResult {
  PartitionScheme partition;
  ConditionReport report;
};

/// All passing schemes of both modes, sorted by block count descending and
/// then by largest scaled residual.
std::vector<SearchResult> searchPartitions(const QuasilinearSystem& sys, const SamplePlan& plan,
                                           const CheckOptions& options = {}, int maxK = 0);

struct DecayReport {
  double maxAbs = 0.0;
  int argMax = -1;
  int evaluated = 0;
};

/// grad(lambda_a) . r_b over pairs of slots sharing a cluster.
DecayReport decayCoefficients(const ConditionTables& tables);

/// max |N_jik| of the Nijenhuis tensor of A at p.
double nijenhuisResidual(const QuasilinearSystem& sys, const StatePoint& p);

struct NijenhuisReport {
  double maxAbs = 0.0;
  int argMax = -1;
  int evaluated = 0;
  int excluded = 0;
  Json toJson() const;
};

NijenhuisReport nijenhuisSweep(const QuasilinearSystem& sys, const SamplePlan& plan,
                               int workers = 0);

}  // namespace decoupler

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decoupler/expr.hpp"
#include "decoupler/json.hpp"

namespace decoupler {

struct StatePoint {
  double t = 0.0;
  double x = 0.0;
  Eigen::VectorXd u;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class DecouplingMode { Partial, Full };

const char* modeName(DecouplingMode mode);
DecouplingMode parseMode(const std::string& text);

struct PartitionHint {
  std::vector<int> blockSizes;
  DecouplingMode mode = DecouplingMode::Partial;
  std::vector<int> assignment;
};

/// Closed-form eigenstructure supplied with a model; right[k] and left[k]
/// hold the n components of the k-th vector.
struct AutovectorHint {
  std::vector<Expression> eigenvalues;
  std::vector<std::vector<Expression>> right;
  std::vector<std::vector<Expression>> left;
};

struct TransformHint {
  std::vector<Expression> forward;
  std::vector<std::string> inverseStates;
  std::vector<Expression> inverse;
};

/// u_t + A(t,x,u) u_x = g(t,x,u), stored together with the JSON document it
/// was loaded from so that saving reproduces the input byte for byte.
class QuasilinearSystem {
 public:
  static QuasilinearSystem load(const std::string& text);
  static QuasilinearSystem fromJson(const Json& document);

  const Json& document() const { return document_; }
  std::string save() const;

  int n() const { return n_; }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& stateNames() const { return states_; }
  const std::vector<std::pair<std::string, double>>& parameters() const { return parameters_; }
  const SymbolTable& symbols() const { return symbols_; }
  std::size_t stateSymbol(int k) const { return 2 + static_cast<std::size_t>(k); }

  const std::vector<Interval>& stateBox() const { return box_; }
  const std::optional<Interval>& timeInterval() const { return tRange_; }
  const std::optional<Interval>& spaceInterval() const { return xRange_; }
  bool insideBox(const StatePoint& p, double slack = 0.0) const;

  const Expression& matrixEntry(int i, int j) const { return a_[i * n_ + j]; }
  const Expression& sourceEntry(int i) const { return g_[i]; }
  bool autonomous() const { return autonomous_; }
  bool homogeneous() const { return homogeneous_; }

  std::vector<double> inputs(const StatePoint& p) const;

  Eigen::MatrixXd matrix(const StatePoint& p) const;
  Eigen::VectorXd source(const StatePoint& p) const;
  /// dA/du_k for every k, exact via symbolic derivatives.
  std::vector<Eigen::MatrixXd> matrixPartials(const StatePoint& p) const;
  Eigen::MatrixXd matrixDerivative(const StatePoint& p, const Eigen::VectorXd& w) const;
  /// True when any exclusion predicate is positive or evaluation fails.
  bool excluded(const StatePoint& p) const;

  const std::optional<PartitionHint>& partitionHint() const { return partitionHint_; }
  const std::optional<AutovectorHint>& autovectorHint() const { return autovectorHint_; }
  const std::optional<TransformHint>& transformHint() const { return transformHint_; }

 private:
  void evaluate(const StatePoint& p, Eigen::MatrixXd* a, Eigen::VectorXd* g) const;

  Json document_;
  std::string name_;
  int n_ = 0;
  std::vector<std::string> states_;
  std::vector<std::pair<std::string, double>> parameters_;
  SymbolTable symbols_;
  std::vector<Interval> box_;
  std::optional<Interval> tRange_;
  std::optional<Interval> xRange_;
  std::vector<Expression> a_;
  std::vector<Expression> g_;
  std::vector<Expression> a0_;
  std::vector<Expression> exclude_;
  bool numericNormalize_ = false;
  bool autonomous_ = true;
  bool homogeneous_ = true;
  Program values_;
  Program partials_;
  Program excludeProgram_;
  std::optional<PartitionHint> partitionHint_;
  std::optional<AutovectorHint> autovectorHint_;
  std::optional<TransformHint> transformHint_;
};

enum class SamplingStrategy { LowDiscrepancy, TensorGrid };

struct SamplePlan {
  int count = 1000;
  SamplingStrategy strategy = SamplingStrategy::LowDiscrepancy;
  std::uint64_t seed = 42;
  double separationTolerance = 1e-3;
};

struct Sample {
  StatePoint point;
  bool excluded = false;
};

std::vector<Sample> generateSamples(const QuasilinearSystem& sys, const SamplePlan& plan);

/// Points of a box given as per-dimension intervals, without exclusion.
std::vector<Eigen::VectorXd> boxSamples(const std::vector<Interval>& box, const SamplePlan& plan);

struct ConjugationSpec {
  std::string name;
  std::vector<std::string> stateNames;
  /// U = H(u), over the new state names and the parameters.
  std::vector<std::string> forward;
  /// u = h(U), over the triangular system's states and the parameters.
  std::vector<std::string> inverse;
  std::vector<Interval> box;
  std::vector<std::string> exclude;
  int validationSamples = 200;
};

/// Builds A(u) = (grad H)^-1 T(H(u)) (grad H) and g(u) = (grad H)^-1 G(H(u)).
/// (grad H)^-1 is taken as grad_U h evaluated at H(u), so no symbolic inverse
/// is needed; the round trip h(H(u)) = u is validated on samples.
QuasilinearSystem conjugateSystem(const QuasilinearSystem& triangular, const ConjugationSpec& spec);

}  // namespace decoupler

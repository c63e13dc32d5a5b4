#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "decoupler/system.hpp"

namespace decoupler {

enum class AutovectorKind { Eigen, Generalized, ComplexRe, ComplexIm };

const char* autovectorKindName(AutovectorKind kind);

struct Autovector {
  AutovectorKind kind = AutovectorKind::Eigen;
  /// Level inside its Jordan chain; 1 for eigenvectors.
  int rank = 1;
  Eigen::VectorXd right;
  Eigen::RowVectorXd left;
};

/// One eigenvalue cluster. Complex clusters stand for a conjugate pair and
/// store the member with positive imaginary part.
struct Cluster {
  std::complex<double> value;
  bool isComplex = false;
  int multiplicity = 0;
  int geometric = 0;
  std::vector<int> chainLengths;
  std::vector<Autovector> vectors;
};

struct Spectrum {
  StatePoint point;
  std::vector<Cluster> clusters;
  double condition = 1.0;
  double spectralRadius = 0.0;
  double normA = 0.0;
};

constexpr double kDefaultClusterTol = 1e-6;
constexpr double kRankTol = 1e-8;
constexpr double kMaxCondition = 1e8;

Spectrum spectrumOf(const Eigen::MatrixXd& a, double clusterTol = kDefaultClusterTol);
Spectrum spectrumAt(const QuasilinearSystem& sys, const StatePoint& p,
                    double clusterTol = kDefaultClusterTol);

/// Largest defect of the eigen/Jordan/complex relations and of biorthogonality.
double spectrumDefect(const Eigen::MatrixXd& a, const Spectrum& s);

enum class FrameProvenance { Numeric, AnalyticHint };

const char* provenanceName(FrameProvenance p);

struct FrameSlot {
  /// Scalar attached to the slot: the eigenvalue, or Re/Im of a complex one.
  double eigenvalue = 0.0;
  int cluster = 0;
  AutovectorKind kind = AutovectorKind::Eigen;
  int rank = 1;
};

struct FrameCluster {
  std::complex<double> value;
  bool isComplex = false;
  int multiplicity = 0;
  std::vector<int> chainLengths;
  std::vector<int> slots;
};

struct Frame {
  StatePoint point;
  FrameProvenance provenance = FrameProvenance::Numeric;
  std::vector<FrameSlot> slots;
  std::vector<FrameCluster> clusters;
  /// Right autovectors as columns.
  Eigen::MatrixXd right;
  /// Left autovectors as rows (hinted ones when supplied, else the dual basis).
  Eigen::MatrixXd left;
  /// Rows of right^-1.
  Eigen::MatrixXd dual;

  int size() const { return static_cast<int>(slots.size()); }
  /// True when the slot's cluster is a real eigenvalue of multiplicity one.
  bool simple(int slot) const;
  bool hasJordanBlocks() const;
  bool hasComplex() const;
};

Frame frameFromSpectrum(const Spectrum& s);

/// Replaces each raw eigenspace basis by the basis closest to the reference
/// (projection onto the raw eigenspace, then rescaling so every vector keeps
/// the reference value at the reference pivot index).
Frame alignFrames(const Frame& reference, const Spectrum& raw);

Frame analyticFrame(const QuasilinearSystem& sys, const AutovectorHint& hint, const StatePoint& p);
Frame analyticFrame(const QuasilinearSystem& sys, const StatePoint& p);

class FrameField {
 public:
  virtual ~FrameField() = default;
  virtual Frame at(const StatePoint& p) const = 0;
  /// Frame at p continued smoothly from a nearby reference frame.
  virtual Frame near(const Frame& reference, const StatePoint& p) const = 0;
  virtual FrameProvenance provenance() const = 0;
};

std::shared_ptr<const FrameField> numericFrameField(const QuasilinearSystem& sys,
                                                    double clusterTol = kDefaultClusterTol);
std::shared_ptr<const FrameField> analyticFrameField(const QuasilinearSystem& sys);
std::shared_ptr<const FrameField> analyticFrameField(const QuasilinearSystem& sys,
                                                     AutovectorHint hint);
/// Analytic frames when the model carries autovector hints, numeric otherwise.
std::shared_ptr<const FrameField> defaultFrameField(const QuasilinearSystem& sys);

}  // namespace decoupler

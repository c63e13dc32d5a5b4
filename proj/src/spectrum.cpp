#include "decoupler/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "decoupler/error.hpp"

namespace decoupler {

namespace {

using Complex = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

template <class Matrix>
double largestSingular(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Columns spanning the null space of b, ordered by increasing singular
/// value, at most cap of them.
template <class Matrix>
Matrix nullSpace(const Matrix& b, double tol, int cap) {
  const int n = static_cast<int>(b.cols());
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  const int dim = std::min(n - rank, cap);
  Matrix out(n, dim);
  for (int k = 0; k < dim; ++k) out.col(k) = svd.matrixV().col(n - 1 - k);
  return out;
}

template <class Matrix>
Matrix orthonormalColumns(const Matrix& m, double relTol) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > relTol * std::max(sv(0), 1e-300)) ++rank;
  }
  return svd.matrixU().leftCols(rank);
}

template <class Vector>
int pivotIndex(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best)) * (1.0 + 1e-12)) best = i;
  }
  return best;
}

/// Canonical basis of span(q): unit entries on pivot rows chosen by
/// column-pivoted QR, then each vector scaled to the pivot convention.
template <class Matrix>
Matrix canonicalBasis(const Matrix& q) {
  const int d = static_cast<int>(q.cols());
  Matrix qt = q.transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(qt);
  const auto& perm = qr.colsPermutation().indices();
  Matrix sub(d, d);
  for (int k = 0; k < d; ++k) sub.row(k) = q.row(perm(k));
  Matrix e = q * sub.inverse();
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return perm(a) < perm(b); });
  Matrix out(q.rows(), d);
  for (int k = 0; k < d; ++k) {
    out.col(k) = e.col(order[k]);
    const int p = pivotIndex(out.col(k).eval());
    out.col(k) /= out(p, k);
  }
  return out;
}

/// Jordan chains of b restricted to its generalized null space of
/// dimension m; each chain is returned in rank order (eigenvector first).
template <class Matrix>
std::vector<std::vector<Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>>> jordanChains(
    const Matrix& b, int m, double normA) {
  using Vector = Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>;
  const int n = static_cast<int>(b.rows());
  std::vector<Matrix> null{Matrix(n, 0)};
  Matrix bk = Matrix::Identity(n, n);
  int top = 0;
  for (int k = 1; k <= m; ++k) {
    bk = bk * b;
    null.push_back(nullSpace(bk, kRankTol * std::pow(1.0 + normA, k), m));
    if (null.back().cols() >= m) {
      top = k;
      break;
    }
  }
  if (top == 0) fail(ErrorKind::IllConditioned, "generalized eigenspace has the wrong dimension");
  std::vector<std::vector<Vector>> active;
  std::vector<std::vector<Vector>> done;
  for (int k = top; k >= 1; --k) {
    for (auto& chain : active) chain.push_back(b * chain.back());
    const int have = static_cast<int>(active.size());
    const int need = static_cast<int>(null[k].cols() - null[k - 1].cols()) - have;
    if (need > 0) {
      Matrix lower(n, null[k - 1].cols() + have);
      lower.leftCols(null[k - 1].cols()) = null[k - 1];
      for (int c = 0; c < have; ++c) lower.col(null[k - 1].cols() + c) = active[c].back();
      Matrix q = orthonormalColumns(lower, 1e-10);
      Matrix rest = null[k] - q * (q.adjoint() * null[k]);
      Eigen::JacobiSVD<Matrix> svd(rest, Eigen::ComputeThinU);
      for (int c = 0; c < need && c < svd.matrixU().cols(); ++c) {
        active.push_back({svd.matrixU().col(c)});
      }
    }
  }
  for (auto& chain : active) {
    std::reverse(chain.begin(), chain.end());
    const int p = pivotIndex(chain.front());
    const auto scale = chain.front()(p);
    for (auto& v : chain) v /= scale;
    done.push_back(chain);
  }
  int total = 0;
  for (const auto& c : done) total += static_cast<int>(c.size());
  if (total != m) fail(ErrorKind::IllConditioned, "Jordan chain construction failed");
  std::stable_sort(done.begin(), done.end(),
                   [](const auto& a, const auto& b2) { return a.size() > b2.size(); });
  return done;
}

/// Vectors for one cluster: semisimple canonical basis or Jordan chains.
template <class Matrix>
std::vector<std::pair<Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>, int>> clusterVectors(
    const Matrix& a, typename Matrix::Scalar lambda, int m, const Matrix& eigvecs, double normA,
    std::vector<int>& chainLengths, int& geometric) {
  using Vector = Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>;
  const int n = static_cast<int>(a.rows());
  const Matrix b = a - lambda * Matrix::Identity(n, n);
  Matrix basis = nullSpace(b, kRankTol * (1.0 + normA), m);
  geometric = static_cast<int>(basis.cols());
  if (geometric < m) {
    Matrix v = eigvecs;
    for (int c = 0; c < v.cols(); ++c) v.col(c).normalize();
    Matrix q = orthonormalColumns(v, 1e-6);
    if (q.cols() == m) {
      basis = q;
      geometric = m;
    }
  }
  std::vector<std::pair<Vector, int>> out;
  chainLengths.clear();
  if (geometric == m) {
    Matrix e = canonicalBasis(basis);
    for (int c = 0; c < m; ++c) {
      out.emplace_back(e.col(c), 1);
      chainLengths.push_back(1);
    }
    return out;
  }
  for (const auto& chain : jordanChains(b, m, normA)) {
    chainLengths.push_back(static_cast<int>(chain.size()));
    for (std::size_t r = 0; r < chain.size(); ++r) out.emplace_back(chain[r], static_cast<int>(r) + 1);
  }
  return out;
}

void assignLeft(Spectrum& s, const Eigen::MatrixXd& right) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(right);
  const auto& sv = svd.singularValues();
  s.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(s.condition <= kMaxCondition)) {
    fail(ErrorKind::IllConditioned,
         "autovector matrix condition number " + formatNumber(s.condition) + " exceeds 1e8");
  }
  const Eigen::MatrixXd left = right.inverse();
  int col = 0;
  for (auto& c : s.clusters) {
    for (auto& v : c.vectors) v.left = left.row(col++);
  }
}

}  // namespace

const char* autovectorKindName(AutovectorKind kind) {
  switch (kind) {
    case AutovectorKind::Eigen: return "eigen";
    case AutovectorKind::Generalized: return "generalized";
    case AutovectorKind::ComplexRe: return "complexRe";
    case AutovectorKind::ComplexIm: return "complexIm";
  }
  return "?";
}

const char* provenanceName(FrameProvenance p) {
  return p == FrameProvenance::Numeric ? "numeric" : "analyticHint";
}

Spectrum spectrumOf(const Eigen::MatrixXd& a, double clusterTol) {
  const int n = static_cast<int>(a.rows());
  if (!a.allFinite()) fail(ErrorKind::IllConditioned, "matrix has non-finite entries");
  Spectrum s;
  s.normA = a.norm();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) fail(ErrorKind::IllConditioned, "eigen-decomposition failed");
  const VectorXc ev = es.eigenvalues();
  const MatrixXc vecs = es.eigenvectors();
  for (int i = 0; i < n; ++i) s.spectralRadius = std::max(s.spectralRadius, std::abs(ev(i)));
  const double tol = clusterTol * (1.0 + s.spectralRadius);

  std::vector<int> real;
  std::vector<int> upper;
  int lower = 0;
  for (int i = 0; i < n; ++i) {
    if (std::fabs(ev(i).imag()) <= tol) {
      real.push_back(i);
    } else if (ev(i).imag() > 0) {
      upper.push_back(i);
    } else {
      ++lower;
    }
  }
  if (lower != static_cast<int>(upper.size())) {
    fail(ErrorKind::IllConditioned, "unpaired complex eigenvalues");
  }
  auto byValue = [&](int p, int q) {
    if (ev(p).real() != ev(q).real()) return ev(p).real() < ev(q).real();
    return ev(p).imag() < ev(q).imag();
  };
  std::sort(real.begin(), real.end(), byValue);
  std::sort(upper.begin(), upper.end(), byValue);

  auto group = [&](const std::vector<int>& idx) {
    std::vector<std::vector<int>> groups;
    for (int i : idx) {
      if (!groups.empty() && std::abs(ev(i) - ev(groups.back().back())) <= tol) {
        groups.back().push_back(i);
      } else {
        groups.push_back({i});
      }
    }
    return groups;
  };

  std::vector<Cluster> clusters;
  for (const auto& g : group(real)) {
    Cluster c;
    double mean = 0.0;
    for (int i : g) mean += ev(i).real();
    mean /= static_cast<double>(g.size());
    c.value = Complex(mean, 0.0);
    c.multiplicity = static_cast<int>(g.size());
    Eigen::MatrixXd v(n, g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      VectorXc z = vecs.col(g[k]);
      const int p = pivotIndex(z);
      z /= z(p);
      v.col(k) = z.real();
    }
    for (const auto& [vec, rank] :
         clusterVectors<Eigen::MatrixXd>(a, mean, c.multiplicity, v, s.normA, c.chainLengths, c.geometric)) {
      Autovector av;
      av.kind = rank == 1 ? AutovectorKind::Eigen : AutovectorKind::Generalized;
      av.rank = rank;
      av.right = vec;
      c.vectors.push_back(av);
    }
    clusters.push_back(std::move(c));
  }
  const MatrixXc ac = a.cast<Complex>();
  for (const auto& g : group(upper)) {
    Cluster c;
    Complex mean(0.0, 0.0);
    for (int i : g) mean += ev(i);
    mean /= static_cast<double>(g.size());
    c.value = mean;
    c.isComplex = true;
    const int m = static_cast<int>(g.size());
    c.multiplicity = 2 * m;
    MatrixXc v(n, m);
    for (int k = 0; k < m; ++k) v.col(k) = vecs.col(g[k]);
    for (const auto& [vec, rank] :
         clusterVectors<MatrixXc>(ac, mean, m, v, s.normA, c.chainLengths, c.geometric)) {
      Autovector re;
      re.kind = AutovectorKind::ComplexRe;
      re.rank = rank;
      re.right = vec.real();
      Autovector im = re;
      im.kind = AutovectorKind::ComplexIm;
      im.right = vec.imag();
      c.vectors.push_back(re);
      c.vectors.push_back(im);
    }
    clusters.push_back(std::move(c));
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& p, const Cluster& q) {
    if (p.value.real() != q.value.real()) return p.value.real() < q.value.real();
    return p.value.imag() < q.value.imag();
  });
  s.clusters = std::move(clusters);
  Eigen::MatrixXd right(n, n);
  int col = 0;
  for (const auto& c : s.clusters) {
    for (const auto& v : c.vectors) right.col(col++) = v.right;
  }
  assignLeft(s, right);
  return s;
}

Spectrum spectrumAt(const QuasilinearSystem& sys, const StatePoint& p, double clusterTol) {
  Spectrum s = spectrumOf(sys.matrix(p), clusterTol);
  s.point = p;
  return s;
}

double spectrumDefect(const Eigen::MatrixXd& a, const Spectrum& s) {
  const int n = static_cast<int>(a.rows());
  const double scale = 1.0 + s.normA;
  double worst = 0.0;
  Eigen::MatrixXd right(n, n);
  Eigen::MatrixXd left(n, n);
  int col = 0;
  for (const auto& c : s.clusters) {
    const MatrixXc b = a.cast<Complex>() - c.value * MatrixXc::Identity(n, n);
    int start = 0;
    const int step = c.isComplex ? 2 : 1;
    for (int len : c.chainLengths) {
      for (int r = 1; r <= len; ++r) {
        const int idx = start + (r - 1) * step;
        VectorXc z = c.vectors[idx].right.cast<Complex>();
        Eigen::RowVectorXcd l = c.vectors[idx].left.cast<Complex>();
        if (c.isComplex) {
          z += Complex(0.0, 1.0) * c.vectors[idx + 1].right.cast<Complex>();
          l = l + Complex(0.0, -1.0) * c.vectors[idx + 1].left.cast<Complex>();
        }
        MatrixXc br = MatrixXc::Identity(n, n);
        for (int k = 0; k < r; ++k) br = br * b;
        MatrixXc bl = MatrixXc::Identity(n, n);
        for (int k = 0; k < len - r + 1; ++k) bl = bl * b;
        worst = std::max(worst, (br * z).norm() / (std::pow(scale, r) * z.norm()));
        worst = std::max(worst, (l * bl).norm() / (std::pow(scale, len - r + 1) * l.norm()));
      }
      start += len * step;
    }
    for (const auto& v : c.vectors) {
      right.col(col) = v.right;
      left.row(col) = v.left;
      ++col;
    }
  }
  worst = std::max(worst, (left * right - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
  return worst;
}

bool Frame::simple(int slot) const {
  const auto& c = clusters[slots[slot].cluster];
  return !c.isComplex && c.multiplicity == 1;
}

bool Frame::hasJordanBlocks() const {
  for (const auto& c : clusters) {
    for (int len : c.chainLengths) {
      if (len > 1) return true;
    }
  }
  return false;
}

bool Frame::hasComplex() const {
  for (const auto& c : clusters) {
    if (c.isComplex) return true;
  }
  return false;
}

Frame frameFromSpectrum(const Spectrum& s) {
  Frame f;
  f.point = s.point;
  f.provenance = FrameProvenance::Numeric;
  int total = 0;
  for (const auto& c : s.clusters) total += static_cast<int>(c.vectors.size());
  f.right.resize(total, total);
  f.left.resize(total, total);
  int slot = 0;
  for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
    const auto& c = s.clusters[ci];
    FrameCluster fc;
    fc.value = c.value;
    fc.isComplex = c.isComplex;
    fc.multiplicity = c.multiplicity;
    fc.chainLengths = c.chainLengths;
    for (const auto& v : c.vectors) {
      FrameSlot fs;
      fs.cluster = static_cast<int>(ci);
      fs.kind = v.kind;
      fs.rank = v.rank;
      fs.eigenvalue = v.kind == AutovectorKind::ComplexIm ? c.value.imag() : c.value.real();
      f.right.col(slot) = v.right;
      f.left.row(slot) = v.left;
      fc.slots.push_back(slot);
      f.slots.push_back(fs);
      ++slot;
    }
    f.clusters.push_back(fc);
  }
  f.dual = f.left;
  return f;
}

namespace {

bool sameSignature(const FrameCluster& a, const Cluster& b) {
  return a.isComplex == b.isComplex && a.multiplicity == b.multiplicity &&
         a.chainLengths == b.chainLengths;
}

/// Projects target onto span(basis) and rescales so the entry at the
/// target's pivot keeps the target's value.
template <class Matrix, class Vector>
Vector projectAndPin(const Matrix& basis, const Vector& target) {
  const Matrix q = orthonormalColumns(basis, 1e-12);
  Vector p = q * (q.adjoint() * target);
  const int piv = pivotIndex(target);
  if (std::abs(p(piv)) <= 1e-8 * std::abs(target(piv))) {
    fail(ErrorKind::MismatchedSignature, "reference vector is orthogonal to the new eigenspace");
  }
  return p * (target(piv) / p(piv));
}

}  // namespace

Frame alignFrames(const Frame& reference, const Spectrum& raw) {
  if (reference.clusters.size() != raw.clusters.size()) {
    fail(ErrorKind::MismatchedSignature, "cluster count changed between nearby points");
  }
  const int n = static_cast<int>(reference.right.rows());
  Frame f = reference;
  f.point = raw.point;
  std::vector<bool> used(raw.clusters.size(), false);
  for (std::size_t ci = 0; ci < reference.clusters.size(); ++ci) {
    const auto& rc = reference.clusters[ci];
    int best = -1;
    for (std::size_t k = 0; k < raw.clusters.size(); ++k) {
      if (used[k] || !sameSignature(rc, raw.clusters[k])) continue;
      if (best < 0 || std::abs(raw.clusters[k].value - rc.value) <
                          std::abs(raw.clusters[best].value - rc.value)) {
        best = static_cast<int>(k);
      }
    }
    if (best < 0) fail(ErrorKind::MismatchedSignature, "multiplicity pattern changed");
    used[best] = true;
    const Cluster& c = raw.clusters[best];
    f.clusters[ci].value = c.value;
    if (!c.isComplex) {
      for (int slot : rc.slots) {
        const int rank = reference.slots[slot].rank;
        std::vector<int> cols;
        for (std::size_t v = 0; v < c.vectors.size(); ++v) {
          if (c.vectors[v].rank <= rank) cols.push_back(static_cast<int>(v));
        }
        Eigen::MatrixXd basis(n, cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) basis.col(k) = c.vectors[cols[k]].right;
        const Eigen::VectorXd target = reference.right.col(slot);
        f.right.col(slot) = projectAndPin(basis, target);
        f.slots[slot].eigenvalue = c.value.real();
      }
    } else {
      for (std::size_t s = 0; s + 1 < rc.slots.size(); s += 2) {
        const int re = rc.slots[s];
        const int im = rc.slots[s + 1];
        const int rank = reference.slots[re].rank;
        std::vector<int> cols;
        for (std::size_t v = 0; v + 1 < c.vectors.size(); v += 2) {
          if (c.vectors[v].rank <= rank) cols.push_back(static_cast<int>(v));
        }
        MatrixXc basis(n, cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) {
          basis.col(k) = c.vectors[cols[k]].right.cast<Complex>() +
                         Complex(0.0, 1.0) * c.vectors[cols[k] + 1].right.cast<Complex>();
        }
        const VectorXc target = reference.right.col(re).cast<Complex>() +
                                Complex(0.0, 1.0) * reference.right.col(im).cast<Complex>();
        const VectorXc z = projectAndPin(basis, target);
        f.right.col(re) = z.real();
        f.right.col(im) = z.imag();
        f.slots[re].eigenvalue = c.value.real();
        f.slots[im].eigenvalue = c.value.imag();
      }
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.right);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 0.0 && sv(0) / sv(sv.size() - 1) <= kMaxCondition)) {
    fail(ErrorKind::IllConditioned, "aligned autovectors are nearly dependent");
  }
  f.dual = f.right.inverse();
  f.left = f.dual;
  return f;
}

Frame analyticFrame(const QuasilinearSystem& sys, const AutovectorHint& hint, const StatePoint& p) {
  const int n = sys.n();
  const Eigen::MatrixXd a = sys.matrix(p);
  const std::vector<double> in = sys.inputs(p);
  Frame f;
  f.point = p;
  f.provenance = FrameProvenance::AnalyticHint;
  f.right.resize(n, n);
  std::vector<double> lambda(n);
  const double normA = a.norm();
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) f.right(i, k) = hint.right[k][i].eval(in);
    const Eigen::VectorXd r = f.right.col(k);
    if (!hint.eigenvalues.empty()) {
      lambda[k] = hint.eigenvalues[k].eval(in);
    } else {
      lambda[k] = r.dot(a * r) / r.squaredNorm();
    }
    const double res = (a * r - lambda[k] * r).norm();
    if (!(res <= 1e-8 * std::max(1.0, normA) * r.norm())) {
      fail(ErrorKind::HintInconsistent, "hinted autovector " + std::to_string(k) +
                                            " has eigen-residual " + formatNumber(res));
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.right);
  const auto& sv = svd.singularValues();
  if (!(sv(n - 1) > 0.0 && sv(0) / sv(n - 1) <= kMaxCondition)) {
    fail(ErrorKind::IllConditioned, "hinted autovectors are nearly dependent");
  }
  f.dual = f.right.inverse();
  if (!hint.left.empty()) {
    f.left.resize(n, n);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) f.left(k, i) = hint.left[k][i].eval(in);
    }
  } else {
    f.left = f.dual;
  }
  double radius = 0.0;
  for (double l : lambda) radius = std::max(radius, std::fabs(l));
  const double tol = kDefaultClusterTol * (1.0 + radius);
  for (int k = 0; k < n; ++k) {
    FrameSlot s;
    s.eigenvalue = lambda[k];
    s.kind = AutovectorKind::Eigen;
    int cluster = -1;
    for (std::size_t c = 0; c < f.clusters.size(); ++c) {
      if (std::fabs(f.clusters[c].value.real() - lambda[k]) <= tol) cluster = static_cast<int>(c);
    }
    if (cluster < 0) {
      FrameCluster fc;
      fc.value = lambda[k];
      f.clusters.push_back(fc);
      cluster = static_cast<int>(f.clusters.size()) - 1;
    }
    auto& fc = f.clusters[cluster];
    fc.multiplicity += 1;
    fc.chainLengths.push_back(1);
    fc.slots.push_back(k);
    s.cluster = cluster;
    f.slots.push_back(s);
  }
  return f;
}

Frame analyticFrame(const QuasilinearSystem& sys, const StatePoint& p) {
  if (!sys.autovectorHint()) {
    fail(ErrorKind::PreconditionViolation, "model has no autovectorHint");
  }
  return analyticFrame(sys, *sys.autovectorHint(), p);
}

namespace {

class NumericField : public FrameField {
 public:
  NumericField(const QuasilinearSystem& sys, double tol) : sys_(sys), tol_(tol) {}
  Frame at(const StatePoint& p) const override {
    return frameFromSpectrum(spectrumAt(sys_, p, tol_));
  }
  Frame near(const Frame& reference, const StatePoint& p) const override {
    return alignFrames(reference, spectrumAt(sys_, p, tol_));
  }
  FrameProvenance provenance() const override { return FrameProvenance::Numeric; }

 private:
  const QuasilinearSystem& sys_;
  double tol_;
};

class HintField : public FrameField {
 public:
  HintField(const QuasilinearSystem& sys, AutovectorHint hint) : sys_(sys), hint_(std::move(hint)) {}
  Frame at(const StatePoint& p) const override { return analyticFrame(sys_, hint_, p); }
  Frame near(const Frame&, const StatePoint& p) const override { return at(p); }
  FrameProvenance provenance() const override { return FrameProvenance::AnalyticHint; }

 private:
  const QuasilinearSystem& sys_;
  AutovectorHint hint_;
};

}  // namespace

std::shared_ptr<const FrameField> numericFrameField(const QuasilinearSystem& sys, double clusterTol) {
  return std::make_shared<NumericField>(sys, clusterTol);
}

std::shared_ptr<const FrameField> analyticFrameField(const QuasilinearSystem& sys) {
  if (!sys.autovectorHint()) {
    fail(ErrorKind::PreconditionViolation, "model has no autovectorHint");
  }
  return std::make_shared<HintField>(sys, *sys.autovectorHint());
}

std::shared_ptr<const FrameField> analyticFrameField(const QuasilinearSystem& sys,
                                                     AutovectorHint hint) {
  return std::make_shared<HintField>(sys, std::move(hint));
}

std::shared_ptr<const FrameField> defaultFrameField(const QuasilinearSystem& sys) {
  if (sys.autovectorHint()) return analyticFrameField(sys);
  return numericFrameField(sys);
}

}  // namespace decoupler

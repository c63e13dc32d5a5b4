#include "decoupler/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "decoupler/error.hpp"
#include "decoupler/parallel.hpp"

namespace decoupler {

namespace {

constexpr double kMaxExcludedFraction = 0.2;
constexpr int kPilotSamples = 10;
constexpr int kRankRows = 200;
constexpr int kMaxSearchDimension = 8;

[[noreturn]] void invalid(const std::string& message) {
  fail(ErrorKind::InvalidPartition, message);
}

std::vector<int> signatureOf(const Frame& f) {
  std::vector<int> sig;
  for (const auto& c : f.clusters) {
    sig.push_back(c.isComplex ? -c.multiplicity : c.multiplicity);
    for (int len : c.chainLengths) sig.push_back(len);
    sig.push_back(0);
  }
  return sig;
}

}  // namespace

std::vector<int> PartitionScheme::blockOfPosition() const {
  std::vector<int> out;
  for (int i = 0; i < blocks(); ++i) out.insert(out.end(), blockSizes[i], i);
  return out;
}

std::string PartitionScheme::label(int pos) const {
  int start = 0;
  for (int i = 0; i < blocks(); ++i) {
    if (pos < start + blockSizes[i]) {
      return std::to_string(i + 1) + "." + std::to_string(pos - start + 1);
    }
    start += blockSizes[i];
  }
  return "?";
}

std::string PartitionScheme::describe() const {
  std::ostringstream os;
  os << modeName(mode) << " ";
  int pos = 0;
  for (int i = 0; i < blocks(); ++i) {
    os << (i ? " | " : "") << "{";
    for (int a = 0; a < blockSizes[i]; ++a, ++pos) os << (a ? "," : "") << slots[pos];
    os << "}";
  }
  return os.str();
}

Json PartitionScheme::toJson() const {
  Json j;
  j["blockSizes"] = blockSizes;
  j["mode"] = modeName(mode);
  j["assignment"] = slots;
  return j;
}

PartitionScheme makePartition(std::vector<int> blockSizes, DecouplingMode mode,
                              std::vector<int> slots, int n) {
  if (blockSizes.size() < 2) invalid("a partition needs at least two blocks");
  int total = 0;
  for (int s : blockSizes) {
    if (s < 1) invalid("block sizes must be positive");
    total += s;
  }
  if (total != n) {
    invalid("block sizes sum to " + std::to_string(total) + ", system has n = " + std::to_string(n));
  }
  if (slots.empty()) {
    slots.resize(n);
    std::iota(slots.begin(), slots.end(), 0);
  }
  if (static_cast<int>(slots.size()) != n) invalid("assignment must list every frame slot once");
  std::vector<char> seen(n, 0);
  for (int s : slots) {
    if (s < 0 || s >= n || seen[s]) invalid("assignment must be a permutation of 0..n-1");
    seen[s] = 1;
  }
  return PartitionScheme{std::move(blockSizes), std::move(slots), mode};
}

PartitionScheme partitionFromHint(const PartitionHint& hint, int n) {
  return makePartition(hint.blockSizes, hint.mode, hint.assignment, n);
}

std::vector<int> parseBlockSizes(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      invalid("cannot read block size '" + item + "'");
    }
  }
  return out;
}

int constraintCount(const PartitionScheme& scheme) {
  const int n = scheme.size();
  int m = 0;
  int count = 0;
  for (int ni : scheme.blockSizes) {
    m += ni;
    count += ni * m * (n - m);
  }
  return count;
}

const char* gradientPathName(GradientPath path) {
  return path == GradientPath::Auto ? "perturbation" : "finiteDifference";
}

double frameStep(const Eigen::VectorXd& u) { return 1e-5 * (1.0 + u.norm()); }

SampleTables evaluateSample(const QuasilinearSystem& sys, const FrameField& field,
                            const StatePoint& p, GradientPath path, double separationTolerance) {
  SampleTables t;
  t.point = p;
  try {
    const Frame f0 = field.at(p);
    const int n = f0.size();
    t.signature = signatureOf(f0);
    const Eigen::MatrixXd a = sys.matrix(p);
    t.normA = a.norm();
    if (field.provenance() == FrameProvenance::Numeric) {
      double rho = 0.0;
      for (const auto& c : f0.clusters) rho = std::max(rho, std::abs(c.value));
      for (std::size_t i = 0; i < f0.clusters.size(); ++i) {
        for (std::size_t j = i + 1; j < f0.clusters.size(); ++j) {
          if (std::abs(f0.clusters[i].value - f0.clusters[j].value) <
              separationTolerance * (1.0 + rho)) {
            t.status = SampleStatus::Degenerate;
            t.reason = "separation";
            return t;
          }
        }
      }
    }
    const bool withSource = !sys.homogeneous();
    const Eigen::VectorXd g = withSource ? sys.source(p) : Eigen::VectorXd::Zero(n);
    t.normG = g.norm();
    t.rightNorms = f0.right.colwise().norm().transpose();

    const double h = frameStep(p.u);
    std::vector<Eigen::MatrixXd> dr(n);
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(n, n);
    t.gradientFd.resize(n, n);
    t.sourceDirect = Eigen::MatrixXd::Zero(n, n);
    for (int c = 0; c < n; ++c) {
      const double hc = h / t.rightNorms[c];
      StatePoint qp = p;
      StatePoint qm = p;
      qp.u += hc * f0.right.col(c);
      qm.u -= hc * f0.right.col(c);
      const Frame fp = field.near(f0, qp);
      const Frame fm = field.near(f0, qm);
      if (fp.size() != n || fm.size() != n) {
        fail(ErrorKind::MismatchedSignature, "frame size changed along a difference stencil");
      }
      dr[c] = (fp.right - fm.right) / (2.0 * hc);
      for (int s = 0; s < n; ++s) {
        t.gradientFd(s, c) = (fp.slots[s].eigenvalue - fm.slots[s].eigenvalue) / (2.0 * hc);
      }
      if (withSource) {
        const Eigen::VectorXd gp = sys.source(qp);
        const Eigen::VectorXd gm = sys.source(qm);
        dg.col(c) = (gp - gm) / (2.0 * hc);
        t.sourceDirect.col(c) = (fp.left * gp - fm.left * gm) / (2.0 * hc);
      }
    }

    t.gradient = t.gradientFd;
    if (path == GradientPath::Auto) {
      const auto partials = sys.matrixPartials(p);
      for (int c = 0; c < n; ++c) {
        Eigen::MatrixXd da = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < n; ++k) da += f0.right(k, c) * partials[k];
        for (int s = 0; s < n; ++s) {
          if (!f0.simple(s)) continue;
          const Eigen::RowVectorXd l = f0.left.row(s);
          const Eigen::VectorXd r = f0.right.col(s);
          t.gradient(s, c) = (l * da * r).value() / l.dot(r);
        }
      }
    }

    t.interaction.assign(n, Eigen::MatrixXd::Zero(n, n));
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        const Eigen::VectorXd bracket = dr[c].col(b) - dr[b].col(c);
        const Eigen::VectorXd proj = f0.left * bracket;
        for (int s = 0; s < n; ++s) t.interaction[s](b, c) = proj[s];
      }
    }

    t.source = Eigen::MatrixXd::Zero(n, n);
    if (withSource) {
      const Eigen::VectorXd coeff = f0.dual * g;
      Eigen::MatrixXd alongG = Eigen::MatrixXd::Zero(n, n);
      for (int b = 0; b < n; ++b) alongG += coeff[b] * dr[b];
      t.source = f0.left * (dg - alongG);
    }
    t.status = SampleStatus::Ok;
  } catch (const Error& e) {
    t.status = SampleStatus::Degenerate;
    t.reason = errorKindName(e.kind());
  }
  return t;
}

ConditionTables computeConditionTables(const QuasilinearSystem& sys, const SamplePlan& plan,
                                       const CheckOptions& options) {
  const auto field = options.field ? options.field : defaultFrameField(sys);
  ConditionTables out;
  out.n = sys.n();
  out.homogeneous = sys.homogeneous();
  out.provenance = field->provenance();
  out.path = options.path;
  out.samples = generateSamples(sys, plan);
  out.tables.resize(out.samples.size());
  parallelFor(out.samples.size(), options.workers, [&](std::size_t i) {
    const Sample& s = out.samples[i];
    if (s.excluded) {
      out.tables[i].point = s.point;
      out.tables[i].status = SampleStatus::Excluded;
      out.tables[i].reason = "excluded";
      return;
    }
    out.tables[i] = evaluateSample(sys, *field, s.point, options.path, plan.separationTolerance);
  });

  const SampleTables* reference = nullptr;
  for (const auto& t : out.tables) {
    if (t.status == SampleStatus::Ok) {
      reference = &t;
      break;
    }
  }
  if (reference) {
    const Frame f = field->at(reference->point);
    out.clusters = f.clusters;
    out.jordanBlocks = f.hasJordanBlocks();
    out.nonHyperbolic = f.hasComplex() || f.hasJordanBlocks();
    const std::vector<int> sig = reference->signature;
    for (auto& t : out.tables) {
      if (t.status == SampleStatus::Ok && t.signature != sig) {
        t.status = SampleStatus::Degenerate;
        t.reason = "clusterLayout";
      }
    }
  }
  return out;
}

namespace {

SampleTables singlePoint(const QuasilinearSystem& sys, const FrameField& field, const StatePoint& p,
                         GradientPath path) {
  SampleTables t = evaluateSample(sys, field, p, path, SamplePlan{}.separationTolerance);
  if (t.status != SampleStatus::Ok) {
    fail(ErrorKind::DegenerateSample, "degenerate sample (" + t.reason + ")");
  }
  return t;
}

void checkSlot(int s, int n) {
  if (s < 0 || s >= n) fail(ErrorKind::PreconditionViolation, "frame slot out of range");
}

}  // namespace

double gradientConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a,
                                 int c, const StatePoint& p, GradientPath path) {
  checkSlot(a, sys.n());
  checkSlot(c, sys.n());
  return singlePoint(sys, field, p, path).gradient(a, c);
}

double interactionConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a,
                                    int b, int c, const StatePoint& p) {
  checkSlot(a, sys.n());
  checkSlot(b, sys.n());
  checkSlot(c, sys.n());
  return singlePoint(sys, field, p, GradientPath::FiniteDifference).interaction[a](b, c);
}

double sourceConditionResidual(const QuasilinearSystem& sys, const FrameField& field, int a, int c,
                               const StatePoint& p, SourceForm form) {
  checkSlot(a, sys.n());
  checkSlot(c, sys.n());
  if (sys.homogeneous()) return 0.0;
  const SampleTables t = singlePoint(sys, field, p, GradientPath::FiniteDifference);
  return form == SourceForm::Bracket ? t.source(a, c) : t.sourceDirect(a, c);
}

const FamilyStat& ConditionReport::family(const std::string& name) const {
  for (const auto& f : families) {
    if (f.name == name) return f;
  }
  fail(ErrorKind::PreconditionViolation, "no condition family " + name);
}

double ConditionReport::maxAbs() const {
  double m = 0.0;
  for (const auto& f : families) m = std::max(m, f.maxAbs);
  return m;
}

double ConditionReport::maxScaled() const {
  double m = 0.0;
  for (const auto& f : families) m = std::max(m, f.maxScaled);
  return m;
}

Json ConditionReport::toJson() const {
  Json j;
  j["model"] = model;
  j["partition"] = partition.toJson();
  j["tolerance"] = tolerance;
  j["frameProvenance"] = provenanceName(provenance);
  j["gradientPath"] = gradientPathName(path);
  Json s;
  s["total"] = samples;
  s["evaluated"] = evaluated;
  s["excluded"] = excluded;
  s["degenerate"] = degenerate;
  s["degenerateReasons"] = Json::object();
  for (const auto& [k, v] : degenerateReasons) s["degenerateReasons"][k] = v;
  j["samples"] = s;
  j["flags"] = {{"jordanBlocks", jordanBlocks},
                {"nonHyperbolic", nonHyperbolic},
                {"excessiveExclusion", excessiveExclusion}};
  Json fams = Json::array();
  for (const auto& f : families) {
    fams.push_back({{"family", f.name},
                    {"vacuous", f.vacuous},
                    {"tuples", f.tuples},
                    {"maxAbs", f.maxAbs},
                    {"maxScaled", f.maxScaled},
                    {"argMaxSample", f.argMax}});
  }
  j["families"] = fams;
  Json tups = Json::array();
  for (const auto& t : tuples) {
    Json e;
    e["family"] = t.family;
    e["i_alpha"] = t.labelA;
    e["l_beta"] = t.labelB;
    e["j_gamma"] = t.labelC;
    e["maxAbs"] = t.maxAbs;
    e["meanAbs"] = t.meanAbs;
    e["maxScaled"] = t.maxScaled;
    e["argMaxSample"] = t.argMax;
    tups.push_back(e);
  }
  j["tuples"] = tups;
  j["diagnostics"] = {{"sourceDirectMax", sourceDirectMax},
                      {"constraintCount", constraintCount},
                      {"residualRank", residualRank}};
  j["verdict"] = pass ? "pass" : "fail";
  return j;
}

ConditionReport reportFromTables(const QuasilinearSystem& sys, const ConditionTables& tables,
                                 const PartitionScheme& scheme, const CheckOptions& options) {
  const int n = tables.n;
  if (scheme.size() != n) invalid("partition size does not match the system");
  const std::vector<int> blockOf = scheme.blockOfPosition();
  std::vector<int> positionOf(n);
  for (int pos = 0; pos < n; ++pos) positionOf[scheme.slots[pos]] = pos;
  if (tables.provenance == FrameProvenance::Numeric) {
    for (const auto& c : tables.clusters) {
      for (int s : c.slots) {
        if (blockOf[positionOf[s]] != blockOf[positionOf[c.slots.front()]]) {
          invalid("numeric frames cannot split an eigenvalue cluster across blocks");
        }
      }
    }
  }

  const bool partial = scheme.mode == DecouplingMode::Partial;
  const auto ordered = [&](int bi, int bj) { return partial ? bi < bj : bi != bj; };

  ConditionReport rep;
  rep.model = sys.name();
  rep.partition = scheme;
  rep.tolerance = options.tolerance;
  rep.provenance = tables.provenance;
  rep.path = tables.path;
  rep.jordanBlocks = tables.jordanBlocks;
  rep.nonHyperbolic = tables.nonHyperbolic;
  rep.constraintCount = constraintCount(scheme);

  std::vector<TupleStat> tuples;
  const auto add = [&](const char* fam, int pa, int pb, int pc) {
    TupleStat t;
    t.family = fam;
    t.a = scheme.slots[pa];
    t.b = pb < 0 ? -1 : scheme.slots[pb];
    t.c = scheme.slots[pc];
    t.labelA = scheme.label(pa);
    t.labelB = pb < 0 ? "" : scheme.label(pb);
    t.labelC = scheme.label(pc);
    tuples.push_back(t);
  };
  for (int pa = 0; pa < n; ++pa) {
    for (int pc = 0; pc < n; ++pc) {
      if (ordered(blockOf[pa], blockOf[pc])) add("gradient", pa, -1, pc);
    }
  }
  for (int pa = 0; pa < n; ++pa) {
    for (int pb = 0; pb < n; ++pb) {
      for (int pc = 0; pc < n; ++pc) {
        const int i = blockOf[pa];
        const int l = blockOf[pb];
        const int j = blockOf[pc];
        const bool keep = partial ? (l <= i && i < j && !(l == i && pb == pa))
                                  : (l == i && i != j && pb != pa);
        if (keep) add("interaction", pa, pb, pc);
      }
    }
  }
  if (!tables.homogeneous) {
    for (int pa = 0; pa < n; ++pa) {
      for (int pc = 0; pc < n; ++pc) {
        if (ordered(blockOf[pa], blockOf[pc])) add("source", pa, -1, pc);
      }
    }
  }

  std::vector<double> sums(tuples.size(), 0.0);
  std::vector<int> okRows;
  if (options.csv) {
    *options.csv << "sampleIndex,t,x";
    for (const auto& name : sys.stateNames()) *options.csv << "," << name;
    *options.csv << ",family,i_alpha,l_beta,j_gamma,residual\n";
  }
  for (std::size_t si = 0; si < tables.tables.size(); ++si) {
    const SampleTables& st = tables.tables[si];
    ++rep.samples;
    if (st.status == SampleStatus::Excluded) {
      ++rep.excluded;
      continue;
    }
    if (st.status == SampleStatus::Degenerate) {
      ++rep.degenerate;
      ++rep.degenerateReasons[st.reason];
      continue;
    }
    ++rep.evaluated;
    okRows.push_back(static_cast<int>(si));
    const double scaleA = 1.0 + st.normA;
    for (std::size_t k = 0; k < tuples.size(); ++k) {
      TupleStat& t = tuples[k];
      double raw = 0.0;
      double scale = 1.0;
      if (t.family == "gradient") {
        raw = st.gradient(t.a, t.c);
        scale = scaleA * (1.0 + st.rightNorms[t.c]);
      } else if (t.family == "interaction") {
        raw = st.interaction[t.a](t.b, t.c);
        scale = scaleA * (1.0 + st.rightNorms[t.b]) * (1.0 + st.rightNorms[t.c]);
      } else {
        raw = st.source(t.a, t.c);
        scale = (scaleA + st.normG) * (1.0 + st.rightNorms[t.c]);
        rep.sourceDirectMax = std::max(rep.sourceDirectMax, std::fabs(st.sourceDirect(t.a, t.c)));
      }
      const double mag = std::isnan(raw) ? INFINITY : std::fabs(raw);
      if (t.argMax < 0 || mag > t.maxAbs) {
        t.maxAbs = mag;
        t.argMax = static_cast<int>(si);
      }
      t.maxScaled = std::max(t.maxScaled, mag / scale);
      sums[k] += mag;
      if (options.csv) {
        *options.csv << si << "," << formatNumber(st.point.t) << "," << formatNumber(st.point.x);
        for (int q = 0; q < st.point.u.size(); ++q) *options.csv << "," << formatNumber(st.point.u[q]);
        *options.csv << "," << t.family << "," << t.labelA << "," << t.labelB << "," << t.labelC
                     << "," << formatNumber(raw) << "\n";
      }
    }
  }
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    tuples[k].meanAbs = rep.evaluated ? sums[k] / rep.evaluated : 0.0;
  }

  for (const char* name : {"gradient", "interaction", "source"}) {
    FamilyStat f;
    f.name = name;
    for (const auto& t : tuples) {
      if (t.family != name) continue;
      ++f.tuples;
      if (f.argMax < 0 || t.maxAbs > f.maxAbs) {
        f.maxAbs = t.maxAbs;
        f.argMax = t.argMax;
      }
      f.maxScaled = std::max(f.maxScaled, t.maxScaled);
    }
    f.vacuous = f.tuples == 0 || rep.evaluated == 0;
    rep.families.push_back(f);
  }

  const int bad = rep.excluded + rep.degenerate;
  rep.excessiveExclusion =
      rep.samples == 0 || static_cast<double>(bad) > kMaxExcludedFraction * rep.samples;

  if (!tuples.empty() && !okRows.empty()) {
    const int rows = std::min<int>(kRankRows, static_cast<int>(okRows.size()));
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(tuples.size()));
    for (int r = 0; r < rows; ++r) {
      const SampleTables& st = tables.tables[okRows[r]];
      for (std::size_t k = 0; k < tuples.size(); ++k) {
        const TupleStat& t = tuples[k];
        if (t.family == "gradient") {
          m(r, k) = st.gradient(t.a, t.c);
        } else if (t.family == "interaction") {
          m(r, k) = st.interaction[t.a](t.b, t.c);
        } else {
          m(r, k) = st.source(t.a, t.c);
        }
      }
    }
    if (m.allFinite() && m.cwiseAbs().maxCoeff() > options.tolerance) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
      qr.setThreshold(1e-8);
      rep.residualRank = static_cast<int>(qr.rank());
    }
  }

  rep.tuples = std::move(tuples);
  rep.pass = rep.evaluated > 0 && !rep.excessiveExclusion;
  for (const auto& f : rep.families) {
    if (!(f.maxScaled <= options.tolerance)) rep.pass = false;
  }
  return rep;
}

ConditionReport checkPartition(const QuasilinearSystem& sys, const PartitionScheme& scheme,
                               const SamplePlan& plan, const CheckOptions& options) {
  if (scheme.size() != sys.n()) invalid("partition size does not match the system");
  const ConditionTables tables = computeConditionTables(sys, plan, options);
  return reportFromTables(sys, tables, scheme, options);
}

namespace {

struct Enumerator {
  const ConditionTables& tables;
  const CheckOptions& options;
  std::vector<std::vector<int>> units;
  std::vector<int> pilot;
  int maxK = 0;
  std::vector<std::vector<std::vector<int>>> partial;
  std::vector<std::vector<std::vector<int>>> full;

  bool compatible(int a, int c) const {
    for (int si : pilot) {
      const SampleTables& st = tables.tables[si];
      const double scale = (1.0 + st.normA) * (1.0 + st.rightNorms[c]);
      if (!(std::fabs(st.gradient(a, c)) / scale <= options.tolerance)) return false;
    }
    return true;
  }

  bool blocksCompatible(const std::vector<int>& before, const std::vector<int>& after) const {
    for (int u : before) {
      for (int v : after) {
        for (int a : units[u]) {
          for (int c : units[v]) {
            if (!compatible(a, c)) return false;
          }
        }
      }
    }
    return true;
  }

  void orderedFrom(unsigned remaining, std::vector<std::vector<int>>& blocks) {
    if (remaining == 0) {
      if (blocks.size() >= 2) partial.push_back(blocks);
      return;
    }
    if (static_cast<int>(blocks.size()) >= maxK) return;
    for (unsigned sub = remaining; sub; sub = (sub - 1) & remaining) {
      if (blocks.empty() && sub == remaining) continue;
      std::vector<int> block;
      for (int u = 0; u < static_cast<int>(units.size()); ++u) {
        if (sub & (1u << u)) block.push_back(u);
      }
      bool ok = true;
      for (const auto& earlier : blocks) ok = ok && blocksCompatible(earlier, block);
      if (!ok) continue;
      blocks.push_back(block);
      orderedFrom(remaining & ~sub, blocks);
      blocks.pop_back();
    }
  }

  void unorderedFrom(unsigned remaining, std::vector<std::vector<int>>& blocks) {
    if (remaining == 0) {
      if (blocks.size() >= 2) full.push_back(blocks);
      return;
    }
    if (static_cast<int>(blocks.size()) >= maxK) return;
    int lowest = 0;
    while (!(remaining & (1u << lowest))) ++lowest;
    const unsigned rest = remaining & ~(1u << lowest);
    for (unsigned sub = rest;; sub = (sub - 1) & rest) {
      const unsigned chosen = sub | (1u << lowest);
      if (!(blocks.empty() && chosen == remaining)) {
        std::vector<int> block;
        for (int u = 0; u < static_cast<int>(units.size()); ++u) {
          if (chosen & (1u << u)) block.push_back(u);
        }
        bool ok = true;
        for (const auto& other : blocks) {
          ok = ok && blocksCompatible(other, block) && blocksCompatible(block, other);
        }
        if (ok) {
          blocks.push_back(block);
          unorderedFrom(remaining & ~chosen, blocks);
          blocks.pop_back();
        }
      }
      if (sub == 0) break;
    }
  }

  PartitionScheme scheme(const std::vector<std::vector<int>>& blocks, DecouplingMode mode) const {
    PartitionScheme s;
    s.mode = mode;
    for (const auto& b : blocks) {
      std::vector<int> slots;
      for (int u : b) slots.insert(slots.end(), units[u].begin(), units[u].end());
      std::sort(slots.begin(), slots.end());
      s.blockSizes.push_back(static_cast<int>(slots.size()));
      s.slots.insert(s.slots.end(), slots.begin(), slots.end());
    }
    return s;
  }
};

}  // namespace

std::vector<SearchResult> searchPartitions(const QuasilinearSystem& sys, const SamplePlan& plan,
                                           const CheckOptions& options, int maxK) {
  if (sys.n() > kMaxSearchDimension) {
    fail(ErrorKind::TooLarge, "partition search is limited to n <= 8, system has n = " +
                                  std::to_string(sys.n()));
  }
  const ConditionTables tables = computeConditionTables(sys, plan, options);
  Enumerator e{tables, options, {}, {}, 0, {}, {}};
  if (tables.provenance == FrameProvenance::Numeric) {
    for (const auto& c : tables.clusters) e.units.push_back(c.slots);
  } else {
    for (int s = 0; s < tables.n; ++s) e.units.push_back({s});
  }
  std::vector<SearchResult> out;
  if (e.units.size() < 2) return out;
  e.maxK = maxK > 0 ? maxK : static_cast<int>(e.units.size());
  for (std::size_t i = 0; i < tables.tables.size() && e.pilot.size() < kPilotSamples; ++i) {
    if (tables.tables[i].status == SampleStatus::Ok) e.pilot.push_back(static_cast<int>(i));
  }
  if (e.pilot.empty()) return out;
  const unsigned all = (1u << e.units.size()) - 1;
  std::vector<std::vector<int>> blocks;
  e.orderedFrom(all, blocks);
  e.unorderedFrom(all, blocks);

  CheckOptions quiet = options;
  quiet.csv = nullptr;
  const auto consider = [&](const PartitionScheme& s) {
    ConditionReport r = reportFromTables(sys, tables, s, quiet);
    if (r.pass) out.push_back({s, std::move(r)});
  };
  for (const auto& b : e.full) consider(e.scheme(b, DecouplingMode::Full));
  for (const auto& b : e.partial) consider(e.scheme(b, DecouplingMode::Partial));
  std::stable_sort(out.begin(), out.end(), [](const SearchResult& x, const SearchResult& y) {
    if (x.partition.blocks() != y.partition.blocks()) {
      return x.partition.blocks() > y.partition.blocks();
    }
    const double mx = x.report.maxScaled();
    const double my = y.report.maxScaled();
    if (mx != my) return mx < my;
    if (x.partition.mode != y.partition.mode) return x.partition.mode == DecouplingMode::Full;
    return x.partition.describe() < y.partition.describe();
  });
  return out;
}

DecayReport decayCoefficients(const ConditionTables& tables) {
  DecayReport rep;
  for (std::size_t si = 0; si < tables.tables.size(); ++si) {
    const SampleTables& st = tables.tables[si];
    if (st.status != SampleStatus::Ok) continue;
    ++rep.evaluated;
    for (const auto& c : tables.clusters) {
      for (int a : c.slots) {
        for (int b : c.slots) {
          const double v = std::fabs(st.gradient(a, b));
          if (rep.argMax < 0 || v > rep.maxAbs) {
            rep.maxAbs = v;
            rep.argMax = static_cast<int>(si);
          }
        }
      }
    }
  }
  return rep;
}

double nijenhuisResidual(const QuasilinearSystem& sys, const StatePoint& p) {
  if (!sys.autonomous() || !sys.homogeneous()) {
    fail(ErrorKind::NotApplicable,
         "the Nijenhuis tensor is defined for autonomous homogeneous systems only");
  }
  const int n = sys.n();
  const Eigen::MatrixXd a = sys.matrix(p);
  const auto d = sys.matrixPartials(p);
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        double v = 0.0;
        for (int al = 0; al < n; ++al) {
          v += a(al, i) * d[al](j, k) - a(al, k) * d[al](j, i) + a(j, al) * d[k](al, i) -
               a(j, al) * d[i](al, k);
        }
        worst = std::max(worst, std::fabs(v));
      }
    }
  }
  return worst;
}

Json NijenhuisReport::toJson() const {
  return {{"maxAbs", maxAbs}, {"argMaxSample", argMax}, {"evaluated", evaluated},
          {"excluded", excluded}};
}

NijenhuisReport nijenhuisSweep(const QuasilinearSystem& sys, const SamplePlan& plan, int workers) {
  if (!sys.autonomous() || !sys.homogeneous()) {
    fail(ErrorKind::NotApplicable,
         "the Nijenhuis tensor is defined for autonomous homogeneous systems only");
  }
  const auto samples = generateSamples(sys, plan);
  std::vector<double> values(samples.size(), -1.0);
  parallelFor(samples.size(), workers, [&](std::size_t i) {
    if (samples[i].excluded) return;
    try {
      values[i] = nijenhuisResidual(sys, samples[i].point);
    } catch (const Error&) {
      values[i] = -1.0;
    }
  });
  NijenhuisReport rep;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      ++rep.excluded;
      continue;
    }
    ++rep.evaluated;
    if (rep.argMax < 0 || values[i] > rep.maxAbs) {
      rep.maxAbs = values[i];
      rep.argMax = static_cast<int>(i);
    }
  }
  return rep;
}

}  // namespace decoupler

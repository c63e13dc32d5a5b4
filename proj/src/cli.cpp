#include "decoupler/cli.hpp"

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "decoupler/conditions.hpp"
#include "decoupler/error.hpp"
#include "decoupler/hypsolve.hpp"
#include "decoupler/models.hpp"
#include "decoupler/transform.hpp"

namespace decoupler {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelArgs {
  std::string model = "barotropic";
  std::vector<std::string> params;
  std::string pressure;
  std::string entropy;
  std::string tension;
};

struct SampleArgs {
  int samples = 1000;
  std::uint64_t seed = 42;
  std::string strategy = "lowDiscrepancy";
  double separation = 1e-3;
};

struct PartitionArgs {
  std::string partition;
  std::string mode = "partial";
  std::string assign;
};

struct Args {
  ModelArgs model;
  SampleArgs sampling;
  PartitionArgs partition;
  std::string frames = "auto";
  std::string path = "perturbation";
  std::string out = "runs";
  int workers = -1;
  double tol = -1.0;
  double depTol = 1e-6;
  int maxK = 0;
  bool noCsv = false;
  std::vector<std::string> transform;
  std::string base;
  int points = 5;
  int flowSteps = 128;
  std::vector<std::string> initial;
  int cells = 200;
  double tEnd = 0.1;
  double cfl = 0.9;
  std::string scheme = "laxFriedrichs";
  std::string hierScheme = "upwindCharacteristic";
  std::string boundary = "periodic";
  double xMin = 0.0;
  double xMax = 1.0;
  int levels = 1;
  std::string blocks = "2,1";
  bool source = false;
  bool perturbed = false;
  std::string emitName;
  std::string output;
};

void addModel(CLI::App* cmd, Args& a) {
  cmd->add_option("--model", a.model.model, "Registry name or model JSON file")->capture_default_str();
  cmd->add_option("--param", a.model.params, "Parameter override name=value (repeatable)");
  cmd->add_option("--pressure", a.model.pressure, "Barotropic pressure law p(rho)");
  cmd->add_option("--entropy", a.model.entropy, "Isentropic entropy term f(s)");
  cmd->add_option("--tension", a.model.tension, "Threadline tension law T(m)");
  cmd->add_option("--frames", a.frames, "auto, numeric or analytic")->capture_default_str();
}

void addSampling(CLI::App* cmd, Args& a) {
  cmd->add_option("--samples", a.sampling.samples, "Sample count")->capture_default_str();
  cmd->add_option("--seed", a.sampling.seed, "Random seed")->capture_default_str();
  cmd->add_option("--strategy", a.sampling.strategy, "lowDiscrepancy or tensorGrid")
      ->capture_default_str();
  cmd->add_option("--separation", a.sampling.separation, "Eigenvalue separation tolerance")
      ->capture_default_str();
}

void addRun(CLI::App* cmd, Args& a) {
  cmd->add_option("--out", a.out, "Output root; runs go to <out>/<command>-<hash>")
      ->capture_default_str();
  cmd->add_option("--workers", a.workers, "Worker threads (default: DECOUPLER_WORKERS or all cores)");
}

void addPartition(CLI::App* cmd, Args& a) {
  cmd->add_option("--partition", a.partition.partition, "Block sizes such as 2,1");
  cmd->add_option("--mode", a.partition.mode, "partial or full")->capture_default_str();
  cmd->add_option("--assign", a.partition.assign, "Frame slot at each position, such as 1,0");
}

std::vector<int> parseIntList(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad integer list '" + text + "'");
    }
  }
  return out;
}

std::vector<double> parseDoubleList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number list '" + text + "'");
    }
  }
  return out;
}

std::map<std::string, double> parseParams(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects name=value");
    try {
      std::size_t used = 0;
      const std::string value = item.substr(eq + 1);
      out[item.substr(0, eq)] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw UsageError("bad value in --param " + item);
    }
  }
  return out;
}

std::string readFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool isModelFile(const std::string& model) {
  return model.ends_with(".json") || fs::exists(model);
}

QuasilinearSystem loadModel(const ModelArgs& m) {
  const auto params = parseParams(m.params);
  if (isModelFile(m.model)) {
    if (!m.pressure.empty() || !m.entropy.empty() || !m.tension.empty()) {
      throw UsageError("--pressure/--entropy/--tension apply to registry models only");
    }
    QuasilinearSystem sys = QuasilinearSystem::load(readFile(m.model));
    if (params.empty()) return sys;
    Json doc = sys.document();
    for (const auto& [name, value] : params) {
      if (!doc.contains("parameters") || !doc["parameters"].contains(name)) {
        throw UsageError("model has no parameter '" + name + "'");
      }
      doc["parameters"][name] = value;
    }
    return QuasilinearSystem::fromJson(doc);
  }
  const auto names = registryNames();
  if (std::find(names.begin(), names.end(), m.model) == names.end()) {
    throw UsageError("unknown model '" + m.model + "'");
  }
  ModelOptions opt;
  opt.parameters = params;
  if (!m.pressure.empty()) opt.pressure = m.pressure;
  if (!m.entropy.empty()) opt.entropyTerm = m.entropy;
  if (!m.tension.empty()) opt.tension = m.tension;
  return buildFromRegistry(m.model, opt);
}

Json modelConfig(const ModelArgs& m) {
  Json j;
  if (isModelFile(m.model)) {
    j["model"] = m.model;
    j["modelHash"] = configHash(Json(readFile(m.model)));
  } else {
    j["model"] = m.model;
  }
  Json p = Json::object();
  for (const auto& [name, value] : parseParams(m.params)) p[name] = value;
  j["parameters"] = p;
  if (!m.pressure.empty()) j["pressure"] = m.pressure;
  if (!m.entropy.empty()) j["entropy"] = m.entropy;
  if (!m.tension.empty()) j["tension"] = m.tension;
  return j;
}

SamplePlan samplePlan(const SampleArgs& s) {
  if (s.samples < 1) throw UsageError("--samples must be positive");
  SamplePlan plan;
  plan.count = s.samples;
  plan.seed = s.seed;
  plan.separationTolerance = s.separation;
  if (s.strategy == "lowDiscrepancy") {
    plan.strategy = SamplingStrategy::LowDiscrepancy;
  } else if (s.strategy == "tensorGrid") {
    plan.strategy = SamplingStrategy::TensorGrid;
  } else {
    throw UsageError("unknown --strategy '" + s.strategy + "'");
  }
  return plan;
}

Json samplingConfig(const SampleArgs& s) {
  return {{"samples", s.samples},
          {"seed", s.seed},
          {"strategy", s.strategy},
          {"separationTolerance", s.separation}};
}

std::shared_ptr<const FrameField> frameField(const QuasilinearSystem& sys, const std::string& kind) {
  if (kind == "auto") return defaultFrameField(sys);
  if (kind == "numeric") return numericFrameField(sys);
  if (kind == "analytic") {
    if (!sys.autovectorHint()) throw UsageError("model has no autovectorHint for --frames analytic");
    return analyticFrameField(sys);
  }
  throw UsageError("unknown --frames '" + kind + "'");
}

DecouplingMode parseModeArg(const std::string& text) {
  if (text == "partial") return DecouplingMode::Partial;
  if (text == "full") return DecouplingMode::Full;
  throw UsageError("--mode must be partial or full");
}

PartitionScheme resolvePartition(const QuasilinearSystem& sys, const PartitionArgs& p) {
  if (p.partition.empty()) {
    if (!sys.partitionHint()) throw UsageError("no --partition given and the model has no partitionHint");
    return partitionFromHint(*sys.partitionHint(), sys.n());
  }
  const std::vector<int> slots = p.assign.empty() ? std::vector<int>{} : parseIntList(p.assign);
  return makePartition(parseIntList(p.partition), parseModeArg(p.mode), slots, sys.n());
}

Json partitionConfig(const PartitionArgs& p) {
  return {{"partition", p.partition}, {"mode", p.mode}, {"assign", p.assign}};
}

int resolveWorkerCount(int flag) {
  if (flag >= 0) return flag;
  if (const char* env = std::getenv("DECOUPLER_WORKERS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      throw UsageError("DECOUPLER_WORKERS must be an integer");
    }
  }
  return 0;
}

GradientPath parsePath(const std::string& text) {
  if (text == "perturbation" || text == "auto") return GradientPath::Auto;
  if (text == "fd" || text == "finiteDifference") return GradientPath::FiniteDifference;
  throw UsageError("--path must be perturbation or fd");
}

class Run {
 public:
  Run(const std::string& command, Json config, const std::string& root)
      : config_(std::move(config)) {
    config_["command"] = command;
    dir_ = fs::path(root) / (command + "-" + configHash(config_));
  }

  std::ofstream file(const std::string& name) const {
    fs::create_directories(dir_);
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return os;
  }

  int finish(Json result, bool pass, std::ostream& out) const {
    Json report;
    report["command"] = config_["command"];
    report["config"] = config_;
    report["result"] = std::move(result);
    report["verdict"] = pass ? "pass" : "fail";
    const std::string text = report.dump(2) + "\n";
    file("report.json") << text;
    out << text << "run directory: " << dir_.string() << "\n";
    return pass ? kExitPass : kExitFail;
  }

  const Json& config() const { return config_; }

 private:
  Json config_;
  fs::path dir_;
};

Json baseConfig(const Args& a, bool withSampling = true) {
  Json c = modelConfig(a.model);
  c["frames"] = a.frames;
  if (withSampling) c["sampling"] = samplingConfig(a.sampling);
  return c;
}

int cmdCheck(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  CheckOptions opt;
  opt.tolerance = a.tol > 0 ? a.tol : 1e-6;
  opt.path = parsePath(a.path);
  opt.workers = resolveWorkerCount(a.workers);
  opt.field = frameField(sys, a.frames);
  const SamplePlan plan = samplePlan(a.sampling);

  Json config = baseConfig(a);
  config["partition"] = partitionConfig(a.partition);
  config["tolerance"] = opt.tolerance;
  config["gradientPath"] = gradientPathName(opt.path);
  const Run run("check", config, a.out);

  PartitionScheme scheme;
  if (a.partition.partition == "search") {
    const auto found = searchPartitions(sys, plan, opt);
    if (found.empty()) return run.finish({{"searched", true}, {"partition", nullptr}}, false, out);
    scheme = found.front().partition;
  } else {
    scheme = resolvePartition(sys, a.partition);
  }
  std::ofstream csv;
  if (!a.noCsv) {
    csv = run.file("residuals.csv");
    opt.csv = &csv;
  }
  const ConditionReport rep = checkPartition(sys, scheme, plan, opt);
  Json result = rep.toJson();
  result["maxResidual"] = rep.maxAbs();
  return run.finish(result, rep.pass, out);
}

int cmdSearch(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  CheckOptions opt;
  opt.tolerance = a.tol > 0 ? a.tol : 1e-6;
  opt.path = parsePath(a.path);
  opt.workers = resolveWorkerCount(a.workers);
  opt.field = frameField(sys, a.frames);
  Json config = baseConfig(a);
  config["tolerance"] = opt.tolerance;
  config["gradientPath"] = gradientPathName(opt.path);
  config["maxK"] = a.maxK;
  const Run run("search", config, a.out);
  const auto found = searchPartitions(sys, samplePlan(a.sampling), opt, a.maxK);
  Json list = Json::array();
  for (const auto& r : found) {
    list.push_back({{"partition", r.partition.toJson()},
                    {"describe", r.partition.describe()},
                    {"maxAbs", r.report.maxAbs()},
                    {"maxScaled", r.report.maxScaled()}});
  }
  return run.finish({{"count", found.size()}, {"schemes", list}}, !found.empty(), out);
}

TransformCandidate candidateFor(const QuasilinearSystem& sys, const Args& a,
                                const PartitionScheme& scheme) {
  if (a.transform.empty()) return candidateFromHint(sys, scheme);
  return candidateFromStrings(sys, a.transform, scheme);
}

int cmdVerify(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  TransformOptions opt;
  opt.tolerance = a.tol > 0 ? a.tol : 1e-8;
  opt.dependenceTolerance = a.depTol;
  opt.workers = resolveWorkerCount(a.workers);
  opt.field = frameField(sys, a.frames);
  Json config = baseConfig(a);
  config["partition"] = partitionConfig(a.partition);
  config["transform"] = a.transform;
  config["tolerance"] = opt.tolerance;
  config["dependenceTolerance"] = opt.dependenceTolerance;
  const Run run("verify-transform", config, a.out);
  const auto scheme = resolvePartition(sys, a.partition);
  const auto cand = candidateFor(sys, a, scheme);
  const auto rep = verifyTransform(sys, cand, samplePlan(a.sampling), opt);

  if (!a.noCsv) {
    auto csv = run.file("transformed.csv");
    const int n = sys.n();
    csv << "sampleIndex";
    for (const auto& s : sys.stateNames()) csv << ',' << s;
    for (int k = 0; k < n; ++k) csv << ",U" << k + 1;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) csv << ",T" << r + 1 << '_' << c + 1;
    }
    csv << ",det\n";
    for (const auto& s : rep.transformed) {
      csv << s.index;
      for (int k = 0; k < n; ++k) csv << ',' << formatNumber(s.u[k]);
      for (int k = 0; k < n; ++k) csv << ',' << formatNumber(s.U[k]);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) csv << ',' << formatNumber(s.T(r, c));
      }
      csv << ',' << formatNumber(s.det) << '\n';
    }
  }
  Json result = rep.toJson();
  Json comps = Json::array();
  for (const auto& e : cand.forward) comps.push_back(e.str());
  result["components"] = comps;
  return run.finish(result, rep.pass, out);
}

int cmdDecouple(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  GridSpec spec;
  spec.pointsPerDim = a.points;
  spec.flowSteps = a.flowSteps;
  spec.workers = resolveWorkerCount(a.workers);
  spec.field = frameField(sys, a.frames);
  Json config = baseConfig(a, false);
  config["partition"] = partitionConfig(a.partition);
  config["base"] = a.base;
  config["pointsPerDim"] = a.points;
  config["flowSteps"] = a.flowSteps;
  const Run run("decouple", config, a.out);
  const auto scheme = resolvePartition(sys, a.partition);
  Eigen::VectorXd base(sys.n());
  if (a.base.empty()) {
    for (int d = 0; d < sys.n(); ++d) base[d] = 0.5 * (sys.stateBox()[d].lo + sys.stateBox()[d].hi);
  } else {
    const auto v = parseDoubleList(a.base);
    if (static_cast<int>(v.size()) != sys.n()) throw UsageError("--base needs one value per state");
    for (int d = 0; d < sys.n(); ++d) base[d] = v[static_cast<std::size_t>(d)];
  }
  const auto built = constructTransformNumeric(sys, scheme, base, spec);
  auto csv = run.file("transform_grid.csv");
  built.writeCsv(csv, sys.stateNames());
  return run.finish(built.metadata(), built.usable, out);
}

int cmdSimulate(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  if (static_cast<int>(a.initial.size()) != sys.n()) {
    throw UsageError("--initial must be given once per state");
  }
  Grid1D grid;
  grid.xMin = a.xMin;
  grid.xMax = a.xMax;
  grid.cells = a.cells;
  grid.cfl = a.cfl;
  grid.levels = a.levels;
  grid.boundary = parseBoundary(a.boundary);
  grid.workers = resolveWorkerCount(a.workers);
  const Scheme coupledScheme = parseScheme(a.scheme);
  const Scheme hierScheme = parseScheme(a.hierScheme);

  Json config = baseConfig(a);
  config["partition"] = partitionConfig(a.partition);
  config["transform"] = a.transform;
  config["initial"] = a.initial;
  config["grid"] = {{"xMin", a.xMin}, {"xMax", a.xMax}, {"cells", a.cells}, {"cfl", a.cfl},
                    {"levels", a.levels}, {"boundary", a.boundary}};
  config["tEnd"] = a.tEnd;
  config["scheme"] = schemeName(coupledScheme);
  config["hierarchicalScheme"] = schemeName(hierScheme);
  const Run run("simulate", config, a.out);

  const auto scheme = resolvePartition(sys, a.partition);
  const auto cand = candidateFor(sys, a, scheme);
  TransformOptions vopt;
  vopt.workers = grid.workers;
  vopt.field = frameField(sys, a.frames);
  vopt.keepSamples = false;
  const auto verified = verifyTransform(sys, cand, samplePlan(a.sampling), vopt);
  Json result;
  result["verification"] = verified.toJson();
  if (!verified.pass) return run.finish(result, false, out);

  const InitialData u0 = initialFromStrings(sys, a.initial);
  const auto map = std::make_shared<CompiledMap>(sys, cand.forward);
  const InitialData U0 = [&](double x) {
    StatePoint p;
    p.x = x;
    p.u = u0(x);
    return map->value(p);
  };
  const auto coupled = solveCoupled(sys, u0, grid, a.tEnd, coupledScheme);
  const auto hier = solveHierarchical(DecoupledSystem::fromCandidate(sys, cand), U0, grid, a.tEnd,
                                      hierScheme, u0);
  for (std::size_t l = 0; l < coupled.states.size(); ++l) {
    auto c = run.file("solution_coupled_" + std::to_string(l) + ".csv");
    coupled.writeSlice(c, static_cast<int>(l));
    auto h = run.file("solution_hierarchical_" + std::to_string(l) + ".csv");
    hier.writeSlice(h, static_cast<int>(l));
  }
  Json norms = Json::array();
  for (const auto& n : compareSolutions(coupled, hier, map.get())) {
    norms.push_back({{"time", n.time}, {"L1", n.l1}, {"Linf", n.linf}});
  }
  result["coupled"] = coupled.metadata();
  result["hierarchical"] = hier.metadata();
  result["difference"] = norms;
  return run.finish(result, true, out);
}

int cmdNijenhuis(const Args& a, std::ostream& out) {
  const auto sys = loadModel(a.model);
  const double tol = a.tol > 0 ? a.tol : 1e-7;
  Json config = baseConfig(a);
  config["tolerance"] = tol;
  const Run run("nijenhuis", config, a.out);
  const auto rep = nijenhuisSweep(sys, samplePlan(a.sampling), resolveWorkerCount(a.workers));
  return run.finish(rep.toJson(), rep.evaluated > 0 && rep.maxAbs <= tol, out);
}

int cmdOracle(const Args& a, std::ostream& out) {
  SyntheticOptions opt;
  opt.seed = a.sampling.seed;
  opt.blockSizes = parseIntList(a.blocks);
  opt.withSource = a.source;
  opt.perturbed = a.perturbed;
  const Json config = {{"seed", a.sampling.seed},
                       {"blocks", a.blocks},
                       {"withSource", a.source},
                       {"perturbed", a.perturbed}};
  const Run run("oracle-gen", config, a.out);
  const auto model = buildSyntheticTriangular(opt);
  run.file("triangular.json") << model.triangular.save();
  run.file("conjugated.json") << model.conjugated.save();
  run.file("map.json") << Json{{"forward", model.forward}, {"inverse", model.inverse}}.dump(2) << "\n";
  return run.finish({{"files", {"triangular.json", "conjugated.json", "map.json"}},
                     {"n", model.conjugated.n()},
                     {"attempts", model.attempts},
                     {"forward", model.forward}},
                    true, out);
}

int cmdModels(const Args& a, bool list, std::ostream& out) {
  if (list) {
    for (const auto& name : registryNames()) out << name << "\n";
    return kExitPass;
  }
  ModelArgs m = a.model;
  m.model = a.emitName;
  const auto names = registryNames();
  if (std::find(names.begin(), names.end(), m.model) == names.end()) {
    throw UsageError("unknown model '" + m.model + "'");
  }
  const std::string text = loadModel(m).save();
  if (a.output.empty()) {
    out << text;
  } else {
    std::ofstream os(a.output, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + a.output);
    os << text;
  }
  return kExitPass;
}

void errorJson(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

std::string configHash(const Json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Structure conditions and decoupling transforms for quasilinear hyperbolic systems",
               "decoupler"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand("check", "Check the structure conditions for one partition");
  addModel(check, a);
  addSampling(check, a);
  addRun(check, a);
  addPartition(check, a);
  check->add_option("--tol", a.tol, "Scaled residual tolerance (default 1e-6)");
  check->add_option("--path", a.path, "Gradient path: perturbation or fd")->capture_default_str();
  check->add_flag("--no-csv", a.noCsv, "Skip residuals.csv");

  auto* search = app.add_subcommand("search", "Enumerate passing partitions");
  addModel(search, a);
  addSampling(search, a);
  addRun(search, a);
  search->add_option("--tol", a.tol, "Scaled residual tolerance (default 1e-6)");
  search->add_option("--path", a.path, "Gradient path: perturbation or fd")->capture_default_str();
  search->add_option("--max-k", a.maxK, "Largest block count to try (0: n)")->capture_default_str();

  auto* verify = app.add_subcommand("verify-transform", "Verify a candidate decoupling map");
  addModel(verify, a);
  addSampling(verify, a);
  addRun(verify, a);
  addPartition(verify, a);
  verify->add_option("--H", a.transform, "Component of H, in position order (repeatable)");
  verify->add_option("--tol", a.tol, "Off-block tolerance (default 1e-8)");
  verify->add_option("--dep-tol", a.depTol, "Block dependence tolerance")->capture_default_str();
  verify->add_flag("--no-csv", a.noCsv, "Skip transformed.csv");

  auto* decouple = app.add_subcommand("decouple", "Construct decoupling coordinates on a grid");
  addModel(decouple, a);
  addRun(decouple, a);
  addPartition(decouple, a);
  decouple->add_option("--base", a.base, "Base point, one value per state (default: box centre)");
  decouple->add_option("--points", a.points, "Grid points per dimension")->capture_default_str();
  decouple->add_option("--flow-steps", a.flowSteps, "RK4 steps per flow")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Coupled versus hierarchical 1D solves");
  addModel(simulate, a);
  addSampling(simulate, a);
  addRun(simulate, a);
  addPartition(simulate, a);
  simulate->add_option("--H", a.transform, "Component of H, in position order (repeatable)");
  simulate->add_option("--initial", a.initial, "Initial state expression in x (one per state)")
      ->required();
  simulate->add_option("--cells", a.cells, "Grid cells")->capture_default_str();
  simulate->add_option("--t-end", a.tEnd, "Final time")->capture_default_str();
  simulate->add_option("--cfl", a.cfl, "CFL number")->capture_default_str();
  simulate->add_option("--scheme", a.scheme, "Coupled scheme: laxFriedrichs or upwindCharacteristic")
      ->capture_default_str();
  simulate->add_option("--hier-scheme", a.hierScheme, "Hierarchical scheme")->capture_default_str();
  simulate->add_option("--boundary", a.boundary, "periodic or outflow")->capture_default_str();
  simulate->add_option("--xmin", a.xMin, "Left end of the x interval")->capture_default_str();
  simulate->add_option("--xmax", a.xMax, "Right end of the x interval")->capture_default_str();
  simulate->add_option("--levels", a.levels, "Stored time levels after t=0")->capture_default_str();

  auto* nij = app.add_subcommand("nijenhuis", "Sweep the Nijenhuis tensor of A");
  addModel(nij, a);
  addSampling(nij, a);
  addRun(nij, a);
  nij->add_option("--tol", a.tol, "Flatness tolerance (default 1e-7)");

  auto* oracle = app.add_subcommand("oracle-gen", "Emit a synthetic triangular oracle system");
  addRun(oracle, a);
  oracle->add_option("--seed", a.sampling.seed, "Random seed")->capture_default_str();
  oracle->add_option("--blocks", a.blocks, "Block sizes")->capture_default_str();
  oracle->add_flag("--source", a.source, "Include a source term");
  oracle->add_flag("--perturbed", a.perturbed, "Inject an off-block dependence");

  auto* models = app.add_subcommand("models", "List or emit built-in models");
  models->require_subcommand(1);
  auto* listCmd = models->add_subcommand("list", "List registry names");
  auto* emit = models->add_subcommand("emit", "Write a registry model as JSON");
  emit->add_option("name", a.emitName, "Registry name")->required();
  emit->add_option("--param", a.model.params, "Parameter override name=value (repeatable)");
  emit->add_option("--pressure", a.model.pressure, "Barotropic pressure law p(rho)");
  emit->add_option("--entropy", a.model.entropy, "Isentropic entropy term f(s)");
  emit->add_option("--tension", a.model.tension, "Threadline tension law T(m)");
  emit->add_option("--output", a.output, "Write to this file instead of stdout");

  std::vector<std::string> argvStore{"decoupler"};
  argvStore.insert(argvStore.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argvStore) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitPass;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    errorJson(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (check->parsed()) return cmdCheck(a, out);
    if (search->parsed()) return cmdSearch(a, out);
    if (verify->parsed()) return cmdVerify(a, out);
    if (decouple->parsed()) return cmdDecouple(a, out);
    if (simulate->parsed()) return cmdSimulate(a, out);
    if (nij->parsed()) return cmdNijenhuis(a, out);
    if (oracle->parsed()) return cmdOracle(a, out);
    if (models->parsed()) return cmdModels(a, listCmd->parsed(), out);
  } catch (const UsageError& e) {
    errorJson(err, "usage", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    errorJson(err, errorKindName(e.kind()), e.what());
    return e.kind() == ErrorKind::InvalidPartition ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    errorJson(err, "runtime", e.what());
    return kExitRuntime;
  }
  errorJson(err, "usage", "no command given");
  return kExitUsage;
}

}  // namespace decoupler

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decoupler/system.hpp"

namespace decoupler {

/// Builder inputs shared by the registry; unset fields take model defaults.
struct ModelOptions {
  std::map<std::string, double> parameters;
  std::optional<std::string> pressure;
  std::optional<std::string> entropyTerm;
  std::optional<std::string> tension;
  std::optional<double> k;
};

QuasilinearSystem buildBarotropic(const std::string& pressureLaw = "p0*rho^3",
                                  const std::map<std::string, double>& parameters = {{"p0", 1.0}});
QuasilinearSystem buildIsentropic(const std::string& entropyTerm = "s", double p0 = 1.0);
QuasilinearSystem buildThreadline(double k = 1.0, const std::string& tensionLaw = "k/m");

struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::vector<int> blockSizes{2, 1};
  bool withSource = false;
  /// Adds 0.1*U_last to an entry that must not depend on it.
  bool perturbed = false;
};

struct SyntheticModel {
  QuasilinearSystem triangular;
  QuasilinearSystem conjugated;
  std::vector<std::string> forward;
  std::vector<std::string> inverse;
  int attempts = 0;
};

SyntheticModel buildSyntheticTriangular(const SyntheticOptions& options);

std::vector<std::string> registryNames();
QuasilinearSystem buildFromRegistry(const std::string& name, const ModelOptions& options = {});

}  // namespace decoupler

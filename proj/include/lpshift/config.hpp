#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "lpshift/spectral.hpp"

namespace lpshift {

struct SolverOptions {
  double power_tol = 1e-13;
  int power_max_iter = 100000;
  int gelfand_iters = 500;
  int restarts = 20;
  unsigned seed = 0;
  int angles = 64;
  int probes = 64;
  std::int64_t state_cap = std::int64_t{1} << 20;
};

// A fully validated system: alphabet, exponent, potential, symbol function,
// working depth, and solver settings. Parsing either succeeds completely or
// raises a validation error naming the violated invariant.
struct SystemConfig {
  int n = 2;
  double p = 2.0;
  int depth = 4;
  std::optional<Potential> rho;
  std::optional<CylinderFunction> a;
  SolverOptions solver;

  const Potential& potential() const { return *rho; }
  const CylinderFunction& symbol() const { return *a; }
};

SystemConfig parse_config(const nlohmann::json& doc);
// The fully validated system (renormalized rho included), re-parseable.
nlohmann::json config_to_json(const SystemConfig& cfg);
SystemConfig load_config(const std::string& path);

// Machine-readable description of the accepted config document, including
// the canonical word order used for all value vectors.
nlohmann::json config_schema();

nlohmann::json tolerances_json(const SolverOptions& solver);
nlohmann::json to_json(const GelfandEnclosure& g);
nlohmann::json to_json(const RadiusReport& r);
nlohmann::json to_json(const RelationReport& r);
nlohmann::json to_json(const AndoReport& r);
nlohmann::json to_json(const RadonNikodymReport& r);
nlohmann::json to_json(const LampertiDecomposition& d);
nlohmann::json to_json(const MarkovMeasure& m);
nlohmann::json to_json(const Objective& v);
nlohmann::json to_json(const GibbsResult& g);
nlohmann::json to_json(const NumericOptResult& r);
nlohmann::json to_json(const DiskReport& d);

}  // namespace lpshift

#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "mfcopula/likelihood.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/sampler.hpp"

namespace mfcopula {

// Candidate values for the fixed entries of `select`. Each alpha list
// applies to the field of the same index; a single list applies to all.
struct SelectionGrid {
  std::vector<std::vector<double>> alpha;
  std::vector<double> delta_upper;
  std::vector<double> delta_lower;

  // Cartesian product alpha_1 x ... x alpha_p x deltaU x deltaL, with the
  // last factor varying fastest.
  std::vector<ParameterVector> cells(const ParameterVector& base) const;
  bool empty() const { return delta_upper.empty() || delta_lower.empty() || alpha.empty(); }
};

struct DiagnosticDesign {
  int distance_bins = 3;
  std::vector<double> upper_levels{0.9, 0.95};
  std::vector<double> lower_levels{0.05, 0.1};
  std::int64_t mc = 10000;
  std::size_t draws = 100;
};

struct RunConfig {
  ParameterVector parameters;   // initial values and fixed mask
  nlohmann::json priors;        // per-name overrides of the default priors
  SamplerConfig sampler;
  SelectionGrid grid;
  DiagnosticDesign diagnostics;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  PriorSpec prior_spec() const;
};

using EnvLookup = std::function<const char*(const std::string&)>;

// Built-in defaults as JSON (two fields).
nlohmann::json default_config_json();

// Defaults, then the file (if the path is non-empty), then environment
// overrides: every scalar leaf at path a.b.c can be replaced by
// ST_A__B__C (upper case, "__" between levels).
nlohmann::json resolve_config_json(const std::string& path, const EnvLookup& env);
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path, const EnvLookup& env);
nlohmann::json to_json(const RunConfig& config);

// Process environment lookup.
const char* process_env(const std::string& name);

}  // namespace mfcopula

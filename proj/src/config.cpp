#include "mfcopula/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "mfcopula/error.hpp"
#include "mfcopula/io.hpp"

namespace mfcopula {

namespace {

std::string env_name(const std::vector<std::string>& path) {
  std::string out = "ST_";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += "__";
    for (char c : path[i]) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

nlohmann::json parse_scalar_like(const nlohmann::json& current, const std::string& text, const std::string& var) {
  try {
    if (current.is_string()) return text;
    if (current.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(var + ": expected true or false, got '" + text + "'");
    }
    if (current.is_number_unsigned()) {
      std::uint64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) throw ConfigError(var + ": expected an unsigned integer");
      return v;
    }
    if (current.is_number_integer()) {
      std::int64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) throw ConfigError(var + ": expected an integer");
      return v;
    }
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size()) throw ConfigError(var + ": expected a number");
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(var + ": " + e.what());
  }
}

void apply_env(nlohmann::json& node, std::vector<std::string>& path, const EnvLookup& env) {
  if (node.is_object()) {
    for (auto& [key, value] : node.items()) {
      path.push_back(key);
      apply_env(value, path, env);
      path.pop_back();
    }
    return;
  }
  if (node.is_array() || node.is_null()) return;
  const std::string var = env_name(path);
  if (const char* v = env(var)) node = parse_scalar_like(node, v, var);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<ParameterVector> SelectionGrid::cells(const ParameterVector& base) const {
  const int p = base.fields();
  if (empty()) throw ConfigError("selection grid is empty");
  if (alpha.size() != 1 && static_cast<int>(alpha.size()) != p) {
    throw ConfigError("selection grid: alpha needs one list, or one list per field");
  }
  std::vector<std::vector<double>> factors;
  for (int i = 0; i < p; ++i) factors.push_back(alpha.size() == 1 ? alpha[0] : alpha[i]);
  factors.push_back(delta_upper);
  factors.push_back(delta_lower);
  for (const auto& f : factors)
    if (f.empty()) throw ConfigError("selection grid: every factor needs at least one value");

  std::vector<ParameterVector> out;
  std::vector<std::size_t> idx(factors.size(), 0);
  while (true) {
    ParameterVector theta = base;
    for (int i = 0; i < p; ++i) theta.alpha[i] = factors[i][idx[i]];
    theta.delta_upper = factors[p][idx[p]];
    theta.delta_lower = factors[p + 1][idx[p + 1]];
    for (int i = 0; i < p; ++i) theta.fix(theta.index_of("alpha" + std::to_string(i + 1)));
    theta.fix(theta.index_of("deltaU"));
    theta.fix(theta.index_of("deltaL"));
    out.push_back(theta);
    std::size_t k = factors.size();
    while (k > 0) {
      --k;
      if (++idx[k] < factors[k].size()) break;
      idx[k] = 0;
      if (k == 0) return out;
    }
  }
}

PriorSpec RunConfig::prior_spec() const {
  PriorSpec spec = PriorSpec::defaults(parameters);
  if (priors.is_null()) return spec;
  if (!priors.is_object()) throw ConfigError("config field 'priors' must be an object");
  for (const auto& [name, value] : priors.items()) {
    const std::size_t k = parameters.index_of(name);
    const auto family = get_or<std::string>(value, "family", "");
    if (family == "exponential") {
      spec.entries[k] = Prior::exponential(get_or<double>(value, "rate", 1.0));
    } else if (family == "uniform") {
      spec.entries[k] = Prior::uniform(get_or<double>(value, "lower", 0.0), get_or<double>(value, "upper", 1.0));
    } else if (family == "flat") {
      spec.entries[k] = Prior::flat();
    } else {
      throw ConfigError("prior for " + name + ": family must be exponential, uniform or flat");
    }
  }
  return spec;
}

nlohmann::json default_config_json() {
  RunConfig c;
  c.parameters = ParameterVector::bivariate(4.0, 4.0, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  c.priors = nlohmann::json::object();
  c.grid.alpha = {{0.5, 2.0, 5.0}};
  c.grid.delta_upper = {0.3, 0.6, 0.9};
  c.grid.delta_lower = {0.3, 0.6, 0.9};
  return to_json(c);
}

nlohmann::json resolve_config_json(const std::string& path, const EnvLookup& env) {
  nlohmann::json j = default_config_json();
  if (!path.empty()) {
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    } catch (const IngestError& e) {
      throw ConfigError(e.what());
    }
    if (!file.is_object()) throw ConfigError(path + ": top level must be an object");
    // Parameter blocks replace the defaults wholesale so p can change.
    if (file.contains("parameters")) j["parameters"] = file["parameters"];
    file.erase("parameters");
    j.merge_patch(file);
  }
  std::vector<std::string> p;
  apply_env(j, p, env);
  return j;
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  if (!j.contains("parameters")) throw ConfigError("config: missing 'parameters'");
  c.parameters = parameters_from_json(j.at("parameters"));
  c.priors = j.value("priors", nlohmann::json::object());
  const auto s = j.value("sampler", nlohmann::json::object());
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
  c.sampler.iterations = get_or<std::int64_t>(s, "iterations", c.sampler.iterations);
  c.sampler.burn_in = get_or<std::int64_t>(s, "burn_in", c.sampler.burn_in);
  c.sampler.adapt_interval = get_or<std::int64_t>(s, "adapt_interval", c.sampler.adapt_interval);
  c.sampler.adapt_scale = get_or<double>(s, "adapt_scale", c.sampler.adapt_scale);
  c.sampler.target_rw = get_or<double>(s, "target_rw", c.sampler.target_rw);
  c.sampler.target_mala = get_or<double>(s, "target_mala", c.sampler.target_mala);
  c.sampler.sigma_rw = get_or<double>(s, "sigma_rw", c.sampler.sigma_rw);
  c.sampler.sigma_mala = get_or<double>(s, "sigma_mala", c.sampler.sigma_mala);
  c.sampler.thinning = get_or<std::int64_t>(s, "thinning", c.sampler.thinning);
  c.sampler.store_latents = get_or<bool>(s, "store_latents", c.sampler.store_latents);
  const auto blocking = get_or<std::string>(s, "blocking", "joint");
  if (blocking == "joint") {
    c.sampler.blocking = LatentBlocking::joint;
  } else if (blocking == "per_replicate") {
    c.sampler.blocking = LatentBlocking::per_replicate;
  } else {
    throw ConfigError("config field 'sampler.blocking' must be joint or per_replicate");
  }
  c.sampler.seed = c.seed;
  c.sampler.validate();

  const auto g = j.value("grid", nlohmann::json::object());
  if (g.contains("alpha")) {
    const auto& a = g.at("alpha");
    try {
      if (!a.empty() && a.front().is_number()) {
        c.grid.alpha = {a.get<std::vector<double>>()};
      } else {
        c.grid.alpha = a.get<std::vector<std::vector<double>>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config field 'grid.alpha': ") + e.what());
    }
  }
  c.grid.delta_upper = get_or<std::vector<double>>(g, "delta_upper", {});
  c.grid.delta_lower = get_or<std::vector<double>>(g, "delta_lower", {});

  const auto d = j.value("diagnostics", nlohmann::json::object());
  c.diagnostics.distance_bins = get_or<int>(d, "distance_bins", c.diagnostics.distance_bins);
  c.diagnostics.upper_levels = get_or<std::vector<double>>(d, "upper_levels", c.diagnostics.upper_levels);
  c.diagnostics.lower_levels = get_or<std::vector<double>>(d, "lower_levels", c.diagnostics.lower_levels);
  c.diagnostics.mc = get_or<std::int64_t>(d, "mc", c.diagnostics.mc);
  c.diagnostics.draws = get_or<std::size_t>(d, "draws", c.diagnostics.draws);
  if (c.diagnostics.distance_bins < 1) throw ConfigError("config field 'diagnostics.distance_bins' must be positive");
  if (c.diagnostics.mc < 1) throw ConfigError("config field 'diagnostics.mc' must be positive");
  if (c.diagnostics.draws < 1) throw ConfigError("config field 'diagnostics.draws' must be positive");
  c.prior_spec();  // validates names and families
  return c;
}

RunConfig load_run_config(const std::string& path, const EnvLookup& env) {
  return parse_run_config(resolve_config_json(path, env));
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json sampler = to_json(c.sampler);
  sampler.erase("seed");
  return nlohmann::json{{"spec_version", kSpecVersion},
                        {"parameters", to_json(c.parameters)},
                        {"priors", c.priors.is_null() ? nlohmann::json::object() : c.priors},
                        {"sampler", sampler},
                        {"grid",
                         {{"alpha", c.grid.alpha}, {"delta_upper", c.grid.delta_upper}, {"delta_lower", c.grid.delta_lower}}},
                        {"diagnostics",
                         {{"distance_bins", c.diagnostics.distance_bins},
                          {"upper_levels", c.diagnostics.upper_levels},
                          {"lower_levels", c.diagnostics.lower_levels},
                          {"mc", c.diagnostics.mc},
                          {"draws", c.diagnostics.draws}}},
                        {"output_dir", c.output_dir},
                        {"seed", c.seed}};
}

const char* process_env(const std::string& name) { return std::getenv(name.c_str()); }

}  // namespace mfcopula

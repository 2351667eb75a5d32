#include "mfcopula/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "mfcopula/diagnostics.hpp"
#include "mfcopula/error.hpp"
#include "mfcopula/io.hpp"
#include "mfcopula/likelihood.hpp"
#include "mfcopula/sampler.hpp"
#include "mfcopula/simulate.hpp"

namespace mfcopula {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ParamFlags {
  std::vector<double> alpha, gamma, range;
  std::optional<double> delta_upper, delta_lower, rho;
  std::vector<std::string> fix;
  bool any() const {
    return !alpha.empty() || !gamma.empty() || !range.empty() || delta_upper || delta_lower || rho;
  }
};

void add_param_flags(CLI::App* cmd, ParamFlags& f, bool with_fix) {
  cmd->add_option("--alpha", f.alpha, "alpha per field (comma separated)")->delimiter(',');
  cmd->add_option("--gamma", f.gamma, "gamma per field")->delimiter(',');
  cmd->add_option("--delta-upper", f.delta_upper, "deltaU");
  cmd->add_option("--delta-lower", f.delta_lower, "deltaL");
  cmd->add_option("--range", f.range, "range lambda per field")->delimiter(',');
  cmd->add_option("--rho", f.rho, "cross-correlation rho12 (two fields)");
  if (with_fix) {
    cmd->add_option("--fix", f.fix, "parameter names held fixed, e.g. alpha1,alpha2,deltaU,deltaL")->delimiter(',');
  }
}

// Same parameters restricted to the first `p` fields (p = 1 or 2).
ParameterVector with_fields(const ParameterVector& base, int p) {
  if (p == base.fields()) return base;
  if (p < 1 || p > base.fields() || p > 2) {
    throw ConfigError("--p " + std::to_string(p) + " needs explicit parameters for every field (use --config)");
  }
  ParameterVector out = p == 1 ? ParameterVector::univariate(base.alpha[0], base.gamma[0], base.delta_upper,
                                                              base.delta_lower, base.range[0])
                               : ParameterVector::bivariate(base.alpha[0], base.alpha[1], base.gamma[0], base.gamma[1],
                                                            base.delta_upper, base.delta_lower, base.range[0],
                                                            base.range[1], base.rho);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::string name = out.name(k);
    const auto names = base.names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end() && base.is_fixed(static_cast<std::size_t>(it - names.begin()))) out.fix(k);
  }
  return out;
}

ParameterVector apply_param_flags(ParameterVector theta, const ParamFlags& f) {
  auto assign = [&](Eigen::VectorXd& target, const std::vector<double>& values, const char* flag) {
    if (values.empty()) return;
    if (static_cast<Eigen::Index>(values.size()) != target.size()) {
      throw ConfigError(std::string(flag) + ": expected " + std::to_string(target.size()) + " values, got " +
                        std::to_string(values.size()));
    }
    target = Eigen::Map<const Eigen::VectorXd>(values.data(), target.size());
  };
  assign(theta.alpha, f.alpha, "--alpha");
  assign(theta.gamma, f.gamma, "--gamma");
  assign(theta.range, f.range, "--range");
  if (f.delta_upper) theta.delta_upper = *f.delta_upper;
  if (f.delta_lower) theta.delta_lower = *f.delta_lower;
  if (f.rho) {
    if (theta.fields() != 2) throw ConfigError("--rho: only defined for two fields");
    theta.rho = *f.rho;
  }
  for (const auto& name : f.fix) {
    try {
      theta.fix(theta.index_of(name));
    } catch (const ConfigError&) {
      throw ConfigError("--fix: unknown parameter '" + name + "'");
    }
  }
  return theta;
}

// Infers p from the flag lengths when they all agree.
int flag_fields(const ParamFlags& f) {
  for (const auto* v : {&f.alpha, &f.gamma, &f.range})
    if (!v->empty()) return static_cast<int>(v->size());
  return 0;
}

struct DataFlags {
  std::string observations, sites, project = "none", transform = "rank";
  bool require_complete = false, per_site = false;
  int harmonics = 2;
};

void add_data_flags(CLI::App* cmd, DataFlags& f, bool required) {
  auto* o = cmd->add_option("--observations", f.observations, "observations CSV (field,site,replicate,value)");
  auto* s = cmd->add_option("--sites", f.sites, "sites CSV (site,x,y or site,lon,lat)");
  if (required) {
    o->required();
    s->required();
  }
  cmd->add_option("--project", f.project, "coordinate projection for lon/lat sites")
      ->check(CLI::IsMember({"none", "local-km"}));
  cmd->add_flag("--require-complete", f.require_complete, "reject replicates with missing cells");
  cmd->add_option("--transform", f.transform, "rank | scores | detrend-rank")
      ->check(CLI::IsMember({"rank", "scores", "detrend-rank"}));
  cmd->add_flag("--per-site", f.per_site, "rank each site separately");
  cmd->add_option("--harmonics", f.harmonics, "annual harmonics for detrend-rank");
}

Dataset load_data(const DataFlags& f, json& provenance) {
  IngestReport report;
  RawPanel panel = ingest_csv(f.observations, f.sites,
                              f.require_complete ? MissingPolicy::require_complete : MissingPolicy::drop,
                              f.project == "local-km" ? SiteProjection::local_km : SiteProjection::none, &report);
  Dataset data;
  if (f.transform == "scores") {
    data = scores_dataset(panel);
  } else if (f.transform == "detrend-rank") {
    data = rank_transform(harmonic_detrend(panel, f.harmonics), f.per_site);
  } else {
    data = rank_transform(panel, f.per_site);
  }
  provenance = json{{"observations", f.observations},
                    {"sites", f.sites},
                    {"project", f.project},
                    {"transform", f.transform},
                    {"per_site", f.per_site},
                    {"harmonics", f.harmonics},
                    {"require_complete", f.require_complete},
                    {"provenance", to_string(data.provenance)},
                    {"fields", data.fields()},
                    {"sites_count", data.site_count()},
                    {"replicates", data.replicates()},
                    {"rows", report.rows},
                    {"dropped_replicates", report.dropped_replicates},
                    {"dropped_labels", report.dropped_labels}};
  return data;
}

std::string ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("--out: cannot create directory " + dir);
  return dir;
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

json repair_notes(const ParameterVector& theta) {
  json notes = json::array();
  for (int i = 0; i < theta.fields(); ++i) {
    const auto m = theta.marginal(i);
    if (m.repaired()) notes.push_back("field" + std::to_string(i + 1) + ": " + m.describe_repair());
  }
  return notes;
}

struct SamplerFlags {
  std::optional<std::int64_t> iterations, burn_in, thinning, adapt_interval;
  std::optional<double> sigma_rw, sigma_mala;
  std::optional<std::string> blocking;
  bool store_latents = false;
};

void add_sampler_flags(CLI::App* cmd, SamplerFlags& f) {
  cmd->add_option("--iterations", f.iterations, "total iterations N");
  cmd->add_option("--burn-in", f.burn_in, "burn-in iterations N_b");
  cmd->add_option("--thinning", f.thinning, "storage stride");
  cmd->add_option("--adapt-interval", f.adapt_interval, "adaptation interval N_0");
  cmd->add_option("--sigma-rw", f.sigma_rw, "initial random-walk step size");
  cmd->add_option("--sigma-mala", f.sigma_mala, "initial MALA step size");
  cmd->add_option("--blocking", f.blocking, "joint | per_replicate")
      ->check(CLI::IsMember({"joint", "per_replicate"}));
  cmd->add_flag("--store-latents", f.store_latents, "also write the final latent variables");
}

void apply_sampler_flags(SamplerConfig& c, const SamplerFlags& f) {
  if (f.iterations) c.iterations = *f.iterations;
  if (f.burn_in) c.burn_in = *f.burn_in;
  if (f.thinning) c.thinning = *f.thinning;
  if (f.adapt_interval) c.adapt_interval = *f.adapt_interval;
  if (f.sigma_rw) c.sigma_rw = *f.sigma_rw;
  if (f.sigma_mala) c.sigma_mala = *f.sigma_mala;
  if (f.blocking) c.blocking = *f.blocking == "joint" ? LatentBlocking::joint : LatentBlocking::per_replicate;
  if (f.store_latents) c.store_latents = true;
  c.validate();
}

std::string latents_csv(const Eigen::MatrixXd& latents, const std::vector<std::string>& labels, int p) {
  std::string out = "replicate,R0U,R0L";
  for (int i = 0; i < p; ++i) out += ",R" + std::to_string(i + 1) + "U,R" + std::to_string(i + 1) + "L";
  out += '\n';
  for (Eigen::Index k = 0; k < latents.cols(); ++k) {
    out += labels[static_cast<std::size_t>(k)];
    for (Eigen::Index m = 0; m < latents.rows(); ++m) out += ',' + format_double(latents(m, k));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config, out = "out", sites;
  std::optional<int> p;
  Eigen::Index d = 25, n = 100, grid = 0, dense_cap = 4000;
  std::uint64_t seed = 1;
  bool seed_set = false;
  ParamFlags params;
};

void run_simulate(const SimulateArgs& a, const EnvLookup& env, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config, env);
  const std::uint64_t seed = a.seed_set ? a.seed : cfg.seed;
  int p = a.p.value_or(flag_fields(a.params) ? flag_fields(a.params) : cfg.parameters.fields());
  ParameterVector theta = apply_param_flags(with_fields(cfg.parameters, p), a.params);
  theta.fixed.clear();
  theta.validate();
  if (a.d < 1 || a.n < 1) throw ConfigError("--d and --n must be positive");

  SiteSet sites;
  std::vector<std::string> site_ids;
  json sites_source;
  if (!a.sites.empty()) {
    SiteTable table = read_sites_csv(a.sites);
    sites = std::move(table.sites);
    site_ids = std::move(table.ids);
    sites_source = a.sites;
  } else {
    sites = SiteSet::uniform_unit_square(a.d, seed);
    for (Eigen::Index j = 0; j < a.d; ++j) site_ids.push_back("s" + std::to_string(j + 1));
    sites_source = json{{"uniform_unit_square", a.d}};
  }

  SimulationOptions options;
  options.dense_cap = a.dense_cap;
  const SimulationOutput sim = simulate(theta, sites, a.n, seed, options);
  const std::string dir = ensure_dir(a.out);
  std::vector<std::string> fields, labels;
  for (int i = 0; i < p; ++i) fields.push_back("field" + std::to_string(i + 1));
  for (Eigen::Index k = 0; k < a.n; ++k) labels.push_back("r" + std::to_string(k + 1));
  write_text(join(dir, "observations.csv"), observations_csv(fields, site_ids, labels, sim.u));
  write_text(join(dir, "model_scale.csv"), observations_csv(fields, site_ids, labels, sim.x));
  write_text(join(dir, "sites.csv"), sites_csv(site_ids, sites));
  write_text(join(dir, "latents.csv"), latents_csv(sim.latents, labels, p));
  json files = {"observations.csv", "model_scale.csv", "sites.csv", "latents.csv"};
  if (a.grid > 0) {
    const SiteSet grid = SiteSet::regular_grid(a.grid);
    const Eigen::MatrixXd maps = simulate_grid(theta, grid, seed, options);
    std::string csv = "field,x,y,u\n";
    for (int i = 0; i < p; ++i) {
      for (Eigen::Index g = 0; g < grid.size(); ++g) {
        csv += fields[i] + ',' + format_double(grid.coordinates()(g, 0)) + ',' +
               format_double(grid.coordinates()(g, 1)) + ',' + format_double(maps(i, g)) + '\n';
      }
    }
    write_text(join(dir, "grid_map.csv"), csv);
    files.push_back("grid_map.csv");
  }
  json sidecar{{"spec_version", kSpecVersion},
               {"command", "simulate"},
               {"seed", seed},
               {"p", p},
               {"d", sites.size()},
               {"n", a.n},
               {"grid", a.grid},
               {"dense_cap", a.dense_cap},
               {"sites", sites_source},
               {"parameters", to_json(theta)},
               {"marginal_repairs", repair_notes(theta)},
               {"files", files}};
  write_json(join(dir, "simulate.json"), sidecar);
  out << dir << '\n';
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string config, out = "out";
  std::optional<std::uint64_t> seed;
  DataFlags data;
  ParamFlags params;
  SamplerFlags sampler;
};

struct PreparedFit {
  RunConfig cfg;
  Dataset data;
  json provenance;
};

PreparedFit prepare_fit(const FitArgs& a, const EnvLookup& env) {
  PreparedFit f;
  f.cfg = load_run_config(a.config, env);
  if (a.seed) f.cfg.seed = *a.seed;
  f.data = load_data(a.data, f.provenance);
  const int p = flag_fields(a.params) ? flag_fields(a.params) : f.data.fields();
  if (p != f.data.fields()) {
    throw ConfigError("parameter flags describe " + std::to_string(p) + " fields but the data has " +
                      std::to_string(f.data.fields()));
  }
  f.cfg.parameters = apply_param_flags(with_fields(f.cfg.parameters, p), a.params);
  apply_sampler_flags(f.cfg.sampler, a.sampler);
  f.cfg.sampler.seed = f.cfg.seed;
  return f;
}

ChainOutput fit_one(const Dataset& data, const ParameterVector& theta, const PriorSpec& priors, SamplerConfig sampler,
                    std::uint64_t seed, std::uint64_t stream) {
  sampler.seed = substream_seed(seed, stream);
  const ParameterVector initial = initial_parameters(theta, priors);
  return run_chain(data, initial, initial_latents(data.fields(), data.replicates()), priors, sampler);
}

void write_chain(const std::string& dir, const ChainOutput& chain, const Dataset& data) {
  write_text(join(dir, "chain.csv"), chain_csv(chain));
  write_json(join(dir, "chain.json"), chain_summary(chain));
  if (chain.config.store_latents) {
    write_text(join(dir, "latents_final.csv"), latents_csv(chain.final_latents, data.replicate_labels, data.fields()));
  }
}

void run_fit(const FitArgs& a, const EnvLookup& env, std::ostream& out) {
  PreparedFit f = prepare_fit(a, env);
  const PriorSpec priors = f.cfg.prior_spec();
  const ChainOutput chain = fit_one(f.data, f.cfg.parameters, priors, f.cfg.sampler, f.cfg.seed, 0);
  const std::string dir = ensure_dir(a.out);
  write_chain(dir, chain, f.data);
  json sidecar{{"spec_version", kSpecVersion},
               {"command", "fit"},
               {"seed", f.cfg.seed},
               {"chain_seed", chain.config.seed},
               {"config", to_json(f.cfg)},
               {"data", f.provenance},
               {"initial", to_json(initial_parameters(f.cfg.parameters, priors))},
               {"files", {"chain.csv", "chain.json"}}};
  write_json(join(dir, "fit.json"), sidecar);
  out << dir << '\n';
}

// ---------------------------------------------------------------- chi

struct ChiArgs {
  std::string config, out = "out", chain, tail = "both", abscissa = "distance";
  std::optional<double> u, h;
  std::vector<double> u_grid, h_grid, h_window;
  int bins = 12;
  std::int64_t mc = 10000;
  std::size_t draws = 100;
  std::uint64_t seed = 1;
  DataFlags data;
};

std::vector<ParameterVector> chain_draws(const std::string& path, std::size_t count) {
  const ChainTable table = read_chain_csv(path);
  const auto rows = static_cast<std::size_t>(table.samples.rows());
  if (rows == 0) throw IngestError(path + ": chain has no samples");
  count = std::clamp<std::size_t>(count, 1, rows);
  std::vector<ParameterVector> out;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t row = count == 1 ? rows - 1 : s * (rows - 1) / (count - 1);
    const Eigen::VectorXd r = table.samples.row(static_cast<Eigen::Index>(row)).transpose();
    out.push_back(parameters_from_names(table.names, std::vector<double>(r.data(), r.data() + r.size())));
  }
  return out;
}

void run_chi(const ChiArgs& a, std::ostream& out) {
  const bool have_data = !a.data.observations.empty() || !a.data.sites.empty();
  if (have_data && (a.data.observations.empty() || a.data.sites.empty())) {
    throw ConfigError("--observations and --sites must be given together");
  }
  if (!have_data && a.chain.empty()) throw ConfigError("chi needs --observations/--sites, --chain, or both");
  std::optional<Dataset> data;
  json provenance;
  if (have_data) data = load_data(a.data, provenance);
  std::vector<ParameterVector> draws;
  if (!a.chain.empty()) draws = chain_draws(a.chain, a.draws);
  const int p = data ? data->fields() : draws.front().fields();
  if (data && !draws.empty() && draws.front().fields() != p) throw ConfigError("--chain and the data disagree on p");

  std::vector<Tail> tails;
  if (a.tail != "lower") tails.push_back(Tail::upper);
  if (a.tail != "upper") tails.push_back(Tail::lower);

  const std::string dir = ensure_dir(a.out);
  json files = json::array();
  auto emit = [&](const ChiCurve& curve) {
    const std::string name = std::string("chi_") + to_string(curve.estimator) + "_" + to_string(curve.tail) + "_" +
                             curve.pair.label() + "_" + to_string(curve.abscissa_type) + ".csv";
    write_text(join(dir, name), chi_csv({curve}));
    files.push_back(name);
  };

  for (Tail tail : tails) {
    for (FieldPair pair : field_pairs(p)) {
      if (a.abscissa == "distance") {
        const double u = a.u.value_or(tail == Tail::upper ? 0.9 : 0.1);
        std::vector<double> hs = a.h_grid;
        if (data) {
          const ChiCurve emp = empirical_chi(*data, tail, pair, u,
                                             equal_count_bins(pair_distances(data->sites, pair), a.bins));
          emit(emp);
          if (hs.empty()) hs = emp.abscissa;
        }
        if (!draws.empty()) {
          if (hs.empty()) throw ConfigError("--h-grid: required for model curves without data");
          emit(model_chi_distance(draws, tail, pair, u, hs, a.mc, a.seed));
        }
      } else {
        if (!a.h) throw ConfigError("--h: required for threshold curves");
        std::vector<double> us = a.u_grid;
        if (us.empty()) {
          for (int k = 0; k < 10; ++k) us.push_back(tail == Tail::upper ? 0.80 + 0.02 * k : 0.02 + 0.02 * k);
        }
        if (data) {
          double lo = 0.0, hi = 0.0;
          if (a.h_window.size() == 2) {
            lo = a.h_window[0];
            hi = a.h_window[1];
          } else {
            const auto edges = equal_count_bins(pair_distances(data->sites, pair), a.bins);
            auto it = std::upper_bound(edges.begin(), edges.end(), *a.h);
            const std::size_t b = std::min<std::size_t>(
                it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1, edges.size() - 2);
            lo = edges[b];
            hi = edges[b + 1];
          }
          emit(empirical_chi_threshold(*data, tail, pair, lo, hi, us));
        }
        if (!draws.empty()) emit(model_chi_threshold(draws, tail, pair, *a.h, us, a.mc, a.seed));
      }
    }
  }
  json sidecar{{"spec_version", kSpecVersion},
               {"command", "chi"},
               {"seed", a.seed},
               {"tail", a.tail},
               {"abscissa", a.abscissa},
               {"u", a.u ? json(*a.u) : json(nullptr)},
               {"h", a.h ? json(*a.h) : json(nullptr)},
               {"u_grid", a.u_grid},
               {"h_grid", a.h_grid},
               {"h_window", a.h_window},
               {"bins", a.bins},
               {"mc", a.mc},
               {"draws", a.draws},
               {"chain", a.chain},
               {"data", provenance},
               {"files", files}};
  write_json(join(dir, "chi.json"), sidecar);
  out << dir << '\n';
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  std::string config, chain, out;
  std::optional<int> p;
  ParamFlags params;
};

void run_classify(const ClassifyArgs& a, const EnvLookup& env, std::ostream& out) {
  ParameterVector theta;
  json source;
  if (!a.chain.empty()) {
    if (a.params.any()) throw ConfigError("--chain cannot be combined with parameter flags");
    const ChainTable table = read_chain_csv(a.chain);
    if (table.samples.rows() == 0) throw IngestError(a.chain + ": chain has no samples");
    std::vector<double> median;
    for (Eigen::Index c = 0; c < table.samples.cols(); ++c) {
      const Eigen::VectorXd col = table.samples.col(c);
      median.push_back(sample_quantile(std::vector<double>(col.data(), col.data() + col.size()), 0.5));
    }
    theta = parameters_from_names(table.names, median);
    source = json{{"chain", a.chain}, {"statistic", "posterior median"}};
  } else {
    const RunConfig cfg = load_run_config(a.config, env);
    const int p = a.p.value_or(flag_fields(a.params) ? flag_fields(a.params) : cfg.parameters.fields());
    theta = apply_param_flags(with_fields(cfg.parameters, p), a.params);
    source = json{{"flags", true}};
  }
  theta.fixed.clear();
  theta.validate();
  json report = to_json(classify_tails(theta));
  report["spec_version"] = kSpecVersion;
  report["parameters"] = to_json(theta);
  report["source"] = source;
  if (a.out.empty()) {
    out << report.dump() << '\n';
  } else {
    write_json(a.out, report);
    out << a.out << '\n';
  }
}

// ---------------------------------------------------------------- select

void run_select(const FitArgs& a, const EnvLookup& env, std::ostream& out) {
  PreparedFit f = prepare_fit(a, env);
  const auto cells = f.cfg.grid.cells(f.cfg.parameters);
  const PriorSpec priors = f.cfg.prior_spec();
  const SelectionDesign design = selection_design(f.data, f.cfg.diagnostics.distance_bins,
                                                  f.cfg.diagnostics.upper_levels, f.cfg.diagnostics.lower_levels);
  const std::string dir = ensure_dir(a.out);
  std::vector<SelectionCandidate> candidates;
  json cell_info = json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::string label;
    for (int i = 0; i < cells[c].fields(); ++i) label += "alpha" + std::to_string(i + 1) + "=" + format_double(cells[c].alpha[i]) + ";";
    label += "deltaU=" + format_double(cells[c].delta_upper) + ";deltaL=" + format_double(cells[c].delta_lower);
    const ChainOutput chain = fit_one(f.data, cells[c], priors, f.cfg.sampler, f.cfg.seed, c);
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", c + 1);
    const std::string cell_dir = ensure_dir(join(dir, name));
    write_chain(cell_dir, chain, f.data);
    candidates.push_back({label, posterior_draws(chain, f.cfg.diagnostics.draws)});
    cell_info.push_back({{"label", label}, {"dir", name}, {"chain_seed", chain.config.seed}, {"parameters", to_json(cells[c])}});
  }
  const auto ranking = grid_model_selection(candidates, design, f.cfg.diagnostics.mc, f.cfg.seed);
  std::string csv = "rank,label,dir,discrepancy,cells_used,cells_missing\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const auto& res = ranking[r];
    csv += std::to_string(r + 1) + ',' + res.label + ',' + cell_info[res.input_index]["dir"].get<std::string>() + ',' +
           format_double(res.discrepancy) + ',' + std::to_string(res.cells_used) + ',' +
           std::to_string(res.cells_missing) + '\n';
  }
  write_text(join(dir, "ranking.csv"), csv);
  json cells_json = json::array();
  for (std::size_t c = 0; c < design.cells.size(); ++c) {
    const auto& cell = design.cells[c];
    cells_json.push_back({{"tail", to_string(cell.tail)},
                          {"pair", cell.pair.label()},
                          {"h_lo", cell.h_lo},
                          {"h_hi", cell.h_hi},
                          {"h", cell.h},
                          {"u", cell.u},
                          {"empirical", std::isnan(cell.empirical) ? json(nullptr) : json(cell.empirical)}});
  }
  json sidecar{{"spec_version", kSpecVersion},
               {"command", "select"},
               {"seed", f.cfg.seed},
               {"config", to_json(f.cfg)},
               {"data", f.provenance},
               {"cells", cell_info},
               {"design", cells_json},
               {"design_missing", design.missing()},
               {"files", {"ranking.csv"}}};
  write_json(join(dir, "select.json"), sidecar);
  out << dir << '\n';
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const IngestError*>(&e)) return "ingest";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const AssemblyError*>(&e)) return "assembly";
  if (dynamic_cast<const SizeError*>(&e)) return "size";
  if (dynamic_cast<const UnsupportedConfiguration*>(&e)) return "unsupported";
  if (dynamic_cast<const InternalError*>(&e)) return "internal";
  return "runtime";
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Multi-factor copula model for multivariate spatial extremes", "mfcopula"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "draw replicates from the model");
  s->add_option("--config", sim.config, "run configuration JSON");
  s->add_option("--p", sim.p, "number of fields")->check(CLI::PositiveNumber);
  s->add_option("--d", sim.d, "number of random sites on the unit square");
  s->add_option("--n", sim.n, "number of replicates");
  s->add_option("--seed", sim.seed, "random seed")->each([&](const std::string&) { sim.seed_set = true; });
  s->add_option("--sites", sim.sites, "sites CSV (site,x,y) instead of random sites");
  s->add_option("--grid", sim.grid, "also write one replicate on a g x g grid");
  s->add_option("--dense-cap", sim.dense_cap, "largest p*d for the dense factorization");
  s->add_option("--out", sim.out, "output directory");
  add_param_flags(s, sim.params, false);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "run the MCMC sampler on data");
  f->add_option("--config", fit.config, "run configuration JSON");
  f->add_option("--seed", fit.seed, "random seed");
  f->add_option("--out", fit.out, "output directory");
  add_data_flags(f, fit.data, true);
  add_param_flags(f, fit.params, true);
  add_sampler_flags(f, fit.sampler);

  ChiArgs chi;
  auto* c = app.add_subcommand("chi", "empirical and model tail-dependence curves");
  c->set_help_flag("--help", "Print this help message and exit");
  add_data_flags(c, chi.data, false);
  c->add_option("--chain", chi.chain, "chain CSV for model curves");
  c->add_option("--tail", chi.tail, "upper | lower | both")->check(CLI::IsMember({"upper", "lower", "both"}));
  c->add_option("--abscissa", chi.abscissa, "distance | threshold")->check(CLI::IsMember({"distance", "threshold"}));
  c->add_option("--u", chi.u, "threshold for distance curves");
  c->add_option("--h", chi.h, "distance for threshold curves");
  c->add_option("--u-grid", chi.u_grid, "thresholds for threshold curves")->delimiter(',');
  c->add_option("--h-grid", chi.h_grid, "distances for model distance curves")->delimiter(',');
  c->add_option("--h-window", chi.h_window, "lo,hi distance window for empirical threshold curves")
      ->delimiter(',')
      ->expected(2);
  c->add_option("--bins", chi.bins, "equal-count distance bins")->check(CLI::PositiveNumber);
  c->add_option("--mc", chi.mc, "Monte Carlo replicates per posterior draw")->check(CLI::PositiveNumber);
  c->add_option("--draws", chi.draws, "posterior draws used for model curves")->check(CLI::PositiveNumber);
  c->add_option("--seed", chi.seed, "random seed");
  c->add_option("--out", chi.out, "output directory");

  ClassifyArgs cls;
  auto* k = app.add_subcommand("classify", "tail dependence classes of a parameter vector");
  k->add_option("--config", cls.config, "run configuration JSON");
  k->add_option("--chain", cls.chain, "chain CSV; classifies the posterior median");
  k->add_option("--p", cls.p, "number of fields")->check(CLI::PositiveNumber);
  k->add_option("--out", cls.out, "output JSON path (default stdout)");
  add_param_flags(k, cls.params, false);

  FitArgs sel;
  auto* g = app.add_subcommand("select", "fit every grid cell and rank by tail-dependence fit");
  g->add_option("--config", sel.config, "run configuration JSON (grid)");
  g->add_option("--seed", sel.seed, "random seed");
  g->add_option("--out", sel.out, "output directory");
  add_data_flags(g, sel.data, true);
  add_param_flags(g, sel.params, true);
  add_sampler_flags(g, sel.sampler);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (s->parsed()) run_simulate(sim, env, out);
    if (f->parsed()) run_fit(fit, env, out);
    if (c->parsed()) run_chi(chi, out);
    if (k->parsed()) run_classify(cls, env, out);
    if (g->parsed()) run_select(sel, env, out);
  } catch (const std::exception& e) {
    report_error(err, error_kind(e), e.what());
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mfcopula

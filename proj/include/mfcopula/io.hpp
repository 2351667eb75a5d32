#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "mfcopula/dataset.hpp"
#include "mfcopula/diagnostics.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/sampler.hpp"
#include "mfcopula/simulate.hpp"

namespace mfcopula {

inline constexpr const char* kSpecVersion = "1";

// Values before standardization, same layout as Dataset::scores.
struct RawPanel {
  std::vector<std::string> field_names;
  std::vector<std::string> site_ids;
  SiteSet sites;
  std::vector<std::string> replicate_labels;
  Eigen::MatrixXd values;

  int fields() const { return static_cast<int>(field_names.size()); }
  Eigen::Index site_count() const { return sites.size(); }
  Eigen::Index replicates() const { return values.cols(); }
};

enum class MissingPolicy { require_complete, drop };
enum class SiteProjection { none, local_km };

struct IngestReport {
  std::size_t rows = 0;
  std::size_t dropped_replicates = 0;
  std::vector<std::string> dropped_labels;
};

struct SiteTable {
  std::vector<std::string> ids;
  SiteSet sites;
};
SiteTable parse_sites_csv(std::istream& in, SiteProjection projection, const std::string& name = "sites");
SiteTable read_sites_csv(const std::string& path, SiteProjection projection = SiteProjection::none);

// Fields and replicates keep their order of first appearance in the
// observations; sites keep the order of the sites file.
RawPanel ingest_csv(const std::string& observations_path, const std::string& sites_path,
                    MissingPolicy policy = MissingPolicy::drop, SiteProjection projection = SiteProjection::none,
                    IngestReport* report = nullptr);
RawPanel ingest_csv(std::istream& observations, std::istream& sites, MissingPolicy policy,
                    SiteProjection projection, IngestReport* report = nullptr,
                    const std::string& observations_name = "observations", const std::string& sites_name = "sites");

// u = rank / (N + 1) with average ranks for ties, ranking each field over
// all sites and replicates (or each site separately when per_site is set).
Dataset rank_transform(const RawPanel& panel, bool per_site = false);
// Values already in (0, 1).
Dataset scores_dataset(const RawPanel& panel);

// Day of year (1-based) of a YYYY-MM-DD label; throws IngestError.
int day_of_year(const std::string& date);

// Per (field, site) least squares on an intercept and K annual harmonics;
// returns the residuals.
RawPanel harmonic_detrend(const RawPanel& panel, int harmonics);

// Shortest decimal that round-trips.
std::string format_double(double value);

void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

// observations CSV (field,site,replicate,value) and sites CSV (site,x,y).
std::string observations_csv(const std::vector<std::string>& field_names, const std::vector<std::string>& site_ids,
                             const std::vector<std::string>& replicate_labels, const Eigen::MatrixXd& values);
std::string sites_csv(const std::vector<std::string>& site_ids, const SiteSet& sites);

std::string chain_csv(const ChainOutput& chain);
struct ChainTable {
  std::vector<std::string> names;
  Eigen::MatrixXd samples;
};
ChainTable parse_chain_csv(std::istream& in, const std::string& name = "chain");
ChainTable read_chain_csv(const std::string& path);

std::string chi_csv(const std::vector<ChiCurve>& curves);

nlohmann::json to_json(const ParameterVector& theta);
ParameterVector parameters_from_json(const nlohmann::json& j);
// Builds a parameter vector from flat names and values (p = 1 or 2).
ParameterVector parameters_from_names(const std::vector<std::string>& names, const std::vector<double>& values);
nlohmann::json to_json(const TailReport& report);
nlohmann::json to_json(const SamplerConfig& config);
nlohmann::json chain_summary(const ChainOutput& chain);

}  // namespace mfcopula

#include "mfcopula/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mfcopula/error.hpp"

namespace mfcopula {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

struct CsvRows {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (1-based row, cells)
};

CsvRows read_csv(std::istream& in, const std::string& name) {
  CsvRows csv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (csv.header.empty()) {
      csv.header = std::move(cells);
      continue;
    }
    if (cells.size() != csv.header.size()) {
      throw IngestError(name + " row " + std::to_string(row) + ": expected " + std::to_string(csv.header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    csv.rows.emplace_back(row, std::move(cells));
  }
  if (csv.header.empty()) throw IngestError(name + ": empty file");
  return csv;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path);
  return in;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

SiteTable parse_sites_csv(std::istream& sites_in, SiteProjection projection, const std::string& sites_name) {
  const CsvRows sites_csv_rows = read_csv(sites_in, sites_name);
  const auto& sh = sites_csv_rows.header;
  if (sh.size() != 3 || sh[0] != "site") {
    throw IngestError(sites_name + " row 1: header must be site,x,y or site,lon,lat");
  }
  const bool lon_lat = sh[1] == "lon" && sh[2] == "lat";
  if (!lon_lat && !(sh[1] == "x" && sh[2] == "y")) {
    throw IngestError(sites_name + " row 1: header must be site,x,y or site,lon,lat");
  }
  if (lon_lat && projection != SiteProjection::local_km) {
    throw IngestError(sites_name + ": lon/lat coordinates need --project local-km");
  }
  SiteTable table;
  std::unordered_map<std::string, std::size_t> site_row;
  Eigen::MatrixXd coords(static_cast<Eigen::Index>(sites_csv_rows.rows.size()), 2);
  for (const auto& [row, cells] : sites_csv_rows.rows) {
    if (cells[0].empty()) throw IngestError(sites_name + " row " + std::to_string(row) + ": empty site id");
    if (auto it = site_row.find(cells[0]); it != site_row.end()) {
      throw IngestError(sites_name + " rows " + std::to_string(it->second) + " and " + std::to_string(row) +
                        ": duplicate site '" + cells[0] + "'");
    }
    double x = 0.0, y = 0.0;
    if (!parse_number(cells[1], x) || !parse_number(cells[2], y)) {
      throw IngestError(sites_name + " row " + std::to_string(row) + ": non-numeric coordinate");
    }
    const auto j = static_cast<Eigen::Index>(table.ids.size());
    site_row[cells[0]] = row;
    table.ids.push_back(cells[0]);
    coords(j, 0) = x;
    coords(j, 1) = y;
  }
  if (table.ids.empty()) throw IngestError(sites_name + ": no sites");
  table.sites = SiteSet(lon_lat ? project_local_km(coords) : coords);
  return table;
}

SiteTable read_sites_csv(const std::string& path, SiteProjection projection) {
  auto in = open_input(path);
  return parse_sites_csv(in, projection, path);
}

RawPanel ingest_csv(std::istream& observations, std::istream& sites_in, MissingPolicy policy,
                    SiteProjection projection, IngestReport* report, const std::string& obs_name,
                    const std::string& sites_name) {
  SiteTable table = parse_sites_csv(sites_in, projection, sites_name);
  RawPanel panel;
  panel.site_ids = std::move(table.ids);
  panel.sites = std::move(table.sites);
  std::unordered_map<std::string, std::size_t> site_index;
  for (std::size_t j = 0; j < panel.site_ids.size(); ++j) site_index[panel.site_ids[j]] = j;

  // Observations.
  const CsvRows obs = read_csv(observations, obs_name);
  const std::vector<std::string> expected{"field", "site", "replicate", "value"};
  if (obs.header != expected) throw IngestError(obs_name + " row 1: header must be field,site,replicate,value");
  std::unordered_map<std::string, std::size_t> field_index, replicate_index;
  std::vector<std::string> replicates;
  struct Cell {
    std::size_t field, site, replicate;
    double value;
    std::size_t row;
  };
  std::vector<Cell> cells;
  for (const auto& [row, c] : obs.rows) {
    auto sit = site_index.find(c[1]);
    if (sit == site_index.end()) {
      throw IngestError(obs_name + " row " + std::to_string(row) + ": unknown site '" + c[1] + "'");
    }
    double value = 0.0;
    if (!parse_number(c[3], value)) {
      throw IngestError(obs_name + " row " + std::to_string(row) + ": non-numeric value '" + c[3] + "'");
    }
    if (c[0].empty()) throw IngestError(obs_name + " row " + std::to_string(row) + ": empty field name");
    auto [fit, fnew] = field_index.emplace(c[0], panel.field_names.size());
    if (fnew) panel.field_names.push_back(c[0]);
    auto [rit, rnew] = replicate_index.emplace(c[2], replicates.size());
    if (rnew) replicates.push_back(c[2]);
    cells.push_back({fit->second, sit->second, rit->second, value, row});
  }
  if (cells.empty()) throw IngestError(obs_name + ": no observations");

  const std::size_t p = panel.field_names.size();
  const std::size_t d = panel.site_ids.size();
  const std::size_t n_all = replicates.size();
  std::vector<std::size_t> seen(p * d * n_all, 0);  // 0 = missing, else source row
  std::vector<double> values(p * d * n_all, 0.0);
  for (const auto& c : cells) {
    const std::size_t key = (c.replicate * p + c.field) * d + c.site;
    if (seen[key] != 0) {
      throw IngestError(obs_name + " rows " + std::to_string(seen[key]) + " and " + std::to_string(c.row) +
                        ": duplicate cell (" + panel.field_names[c.field] + ", " + panel.site_ids[c.site] + ", " +
                        replicates[c.replicate] + ")");
    }
    seen[key] = c.row;
    values[key] = c.value;
  }

  IngestReport local;
  local.rows = cells.size();
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < n_all; ++k) {
    bool complete = true;
    std::size_t missing_field = 0, missing_site = 0;
    for (std::size_t i = 0; i < p && complete; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (seen[(k * p + i) * d + j] == 0) {
          complete = false;
          missing_field = i;
          missing_site = j;
          break;
        }
      }
    }
    if (complete) {
      keep.push_back(k);
      continue;
    }
    if (policy == MissingPolicy::require_complete) {
      throw IngestError(obs_name + ": missing cell (" + panel.field_names[missing_field] + ", " +
                        panel.site_ids[missing_site] + ", " + replicates[k] + ") with --require-complete");
    }
    ++local.dropped_replicates;
    local.dropped_labels.push_back(replicates[k]);
  }
  if (keep.empty()) throw IngestError(obs_name + ": no complete replicates");

  panel.values.resize(static_cast<Eigen::Index>(p * d), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const std::size_t k = keep[c];
    panel.replicate_labels.push_back(replicates[k]);
    for (std::size_t r = 0; r < p * d; ++r) {
      panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[k * p * d + r];
    }
  }
  if (report) *report = local;
  return panel;
}

RawPanel ingest_csv(const std::string& observations_path, const std::string& sites_path, MissingPolicy policy,
                    SiteProjection projection, IngestReport* report) {
  auto obs = open_input(observations_path);
  auto sites = open_input(sites_path);
  return ingest_csv(obs, sites, policy, projection, report, observations_path, sites_path);
}

Dataset rank_transform(const RawPanel& panel, bool per_site) {
  const int p = panel.fields();
  const Eigen::Index d = panel.site_count();
  const Eigen::Index n = panel.replicates();
  Dataset data;
  data.field_names = panel.field_names;
  data.site_ids = panel.site_ids;
  data.sites = panel.sites;
  data.replicate_labels = panel.replicate_labels;
  data.provenance = Provenance::rank_transformed;
  data.scores.resize(p * d, n);
  for (int i = 0; i < p; ++i) {
    if (per_site) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const Eigen::Index row = i * d + j;
        std::vector<double> v(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) v[k] = panel.values(row, k);
        const auto r = average_ranks(v);
        for (Eigen::Index k = 0; k < n; ++k) data.scores(row, k) = r[k] / static_cast<double>(n + 1);
      }
    } else {
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(d * n));
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < d; ++j) v.push_back(panel.values(i * d + j, k));
      const auto r = average_ranks(v);
      const double denom = static_cast<double>(d * n + 1);
      std::size_t e = 0;
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < d; ++j) data.scores(i * d + j, k) = r[e++] / denom;
    }
  }
  return data;
}

Dataset scores_dataset(const RawPanel& panel) {
  Dataset data;
  data.field_names = panel.field_names;
  data.site_ids = panel.site_ids;
  data.sites = panel.sites;
  data.replicate_labels = panel.replicate_labels;
  data.provenance = Provenance::externally_standardized;
  data.scores = panel.values;
  data.validate();
  return data;
}

int day_of_year(const std::string& date) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(date);
  in >> y >> dash1 >> m >> dash2 >> d;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!in || dash1 != '-' || dash2 != '-' || !in.eof() || !ymd.ok()) {
    throw IngestError("replicate label '" + date + "' is not a YYYY-MM-DD date");
  }
  const sys_days start{year{y} / January / 1};
  return static_cast<int>((sys_days{ymd} - start).count()) + 1;
}

RawPanel harmonic_detrend(const RawPanel& panel, int harmonics) {
  if (harmonics < 1) throw ConfigError("harmonic_detrend: number of harmonics must be at least 1");
  const Eigen::Index n = panel.replicates();
  const Eigen::Index cols = 2 * harmonics + 1;
  if (n < cols) {
    throw DomainError("harmonic_detrend: " + std::to_string(n) + " observations cannot fit " +
                      std::to_string(cols) + " coefficients");
  }
  Eigen::MatrixXd design(n, cols);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double doy = day_of_year(panel.replicate_labels[static_cast<std::size_t>(k)]);
    design(k, 0) = 1.0;
    for (int m = 1; m <= harmonics; ++m) {
      const double angle = 2.0 * M_PI * m * doy / 365.25;
      design(k, 2 * m - 1) = std::sin(angle);
      design(k, 2 * m) = std::cos(angle);
    }
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) throw DomainError("harmonic_detrend: harmonic design is rank deficient for these dates");
  RawPanel out = panel;
  for (Eigen::Index r = 0; r < panel.values.rows(); ++r) {
    const Eigen::VectorXd y = panel.values.row(r).transpose();
    const Eigen::VectorXd beta = qr.solve(y);
    out.values.row(r) = (y - design * beta).transpose();
  }
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path);
  out << contents;
  if (!out) throw IngestError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string observations_csv(const std::vector<std::string>& field_names, const std::vector<std::string>& site_ids,
                             const std::vector<std::string>& replicate_labels, const Eigen::MatrixXd& values) {
  const auto d = static_cast<Eigen::Index>(site_ids.size());
  std::string out = "field,site,replicate,value\n";
  for (Eigen::Index k = 0; k < values.cols(); ++k) {
    for (std::size_t i = 0; i < field_names.size(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        out += field_names[i] + ',' + site_ids[j] + ',' + replicate_labels[k] + ',' +
               format_double(values(static_cast<Eigen::Index>(i) * d + j, k)) + '\n';
      }
    }
  }
  return out;
}

std::string sites_csv(const std::vector<std::string>& site_ids, const SiteSet& sites) {
  std::string out = "site,x,y\n";
  for (Eigen::Index j = 0; j < sites.size(); ++j) {
    out += site_ids[j] + ',' + format_double(sites.coordinates()(j, 0)) + ',' +
           format_double(sites.dimension() > 1 ? sites.coordinates()(j, 1) : 0.0) + '\n';
  }
  return out;
}

std::string chain_csv(const ChainOutput& chain) {
  std::string out;
  for (std::size_t c = 0; c < chain.names.size(); ++c) out += (c ? "," : "") + chain.names[c];
  out += '\n';
  for (Eigen::Index s = 0; s < chain.theta.rows(); ++s) {
    for (Eigen::Index c = 0; c < chain.theta.cols(); ++c) out += (c ? "," : "") + format_double(chain.theta(s, c));
    out += '\n';
  }
  return out;
}

ChainTable parse_chain_csv(std::istream& in, const std::string& name) {
  const CsvRows csv = read_csv(in, name);
  ChainTable table;
  table.names = csv.header;
  table.samples.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(csv.header.size()));
  for (std::size_t s = 0; s < csv.rows.size(); ++s) {
    const auto& [row, cells] = csv.rows[s];
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_number(cells[c], v)) {
        throw IngestError(name + " row " + std::to_string(row) + ": non-numeric value '" + cells[c] + "'");
      }
      table.samples(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return table;
}

ChainTable read_chain_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_chain_csv(in, path);
}

std::string chi_csv(const std::vector<ChiCurve>& curves) {
  std::string out = "tail,pair,abscissa_type,abscissa,estimate,lo,hi,estimator\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.abscissa.size(); ++k) {
      out += std::string(to_string(c.tail)) + ',' + c.pair.label() + ',' + to_string(c.abscissa_type) + ',' +
             format_double(c.abscissa[k]) + ',' + format_double(c.estimate[k]) + ',' + format_double(c.lower[k]) +
             ',' + format_double(c.upper[k]) + ',' + to_string(c.estimator) + '\n';
    }
  }
  return out;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ParameterVector& theta) {
  nlohmann::json j;
  j["alpha"] = to_vector(theta.alpha);
  j["gamma"] = to_vector(theta.gamma);
  j["delta_upper"] = theta.delta_upper;
  j["delta_lower"] = theta.delta_lower;
  j["range"] = to_vector(theta.range);
  if (theta.fields() == 2) {
    j["rho"] = theta.rho;
  } else if (theta.fields() > 2) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < theta.lmc.rows(); ++r) rows.push_back(to_vector(theta.lmc.row(r).transpose()));
    j["lmc"] = rows;
  }
  std::vector<std::string> fixed;
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (theta.is_fixed(k)) fixed.push_back(theta.name(k));
  j["fixed"] = fixed;
  return j;
}

ParameterVector parameters_from_json(const nlohmann::json& j) {
  try {
    ParameterVector theta;
    theta.alpha = from_vector(j.at("alpha").get<std::vector<double>>());
    theta.gamma = from_vector(j.at("gamma").get<std::vector<double>>());
    theta.delta_upper = j.at("delta_upper").get<double>();
    theta.delta_lower = j.at("delta_lower").get<double>();
    theta.range = from_vector(j.at("range").get<std::vector<double>>());
    const int p = theta.fields();
    if (theta.gamma.size() != p || theta.range.size() != p) {
      throw ConfigError("parameters: alpha, gamma and range must have one entry per field");
    }
    if (p == 2) {
      theta.rho = j.value("rho", 0.0);
    } else if (p == 1) {
      theta.lmc = Eigen::MatrixXd::Ones(1, 1);
    } else {
      const auto rows = j.at("lmc").get<std::vector<std::vector<double>>>();
      theta.lmc.resize(p, p);
      if (static_cast<int>(rows.size()) != p) throw ConfigError("parameters: lmc must be p x p");
      for (int r = 0; r < p; ++r) {
        if (static_cast<int>(rows[r].size()) != p) throw ConfigError("parameters: lmc must be p x p");
        for (int c = 0; c < p; ++c) theta.lmc(r, c) = rows[r][c];
      }
    }
    for (const auto& name : j.value("fixed", std::vector<std::string>{})) theta.fix(theta.index_of(name));
    return theta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("parameters: ") + e.what());
  }
}

ParameterVector parameters_from_names(const std::vector<std::string>& names, const std::vector<double>& values) {
  if (names.size() != values.size()) throw ConfigError("parameter names and values differ in length");
  int p = 0;
  while (std::find(names.begin(), names.end(), "alpha" + std::to_string(p + 1)) != names.end()) ++p;
  if (p < 1 || p > 2) throw ConfigError("chain columns must describe p = 1 or 2 fields");
  ParameterVector theta = p == 1 ? ParameterVector::univariate(1, 0.5, 0.5, 0.5, 1)
                                 : ParameterVector::bivariate(1, 1, 0.5, 0.5, 0.5, 0.5, 1, 1, 0);
  if (names.size() != theta.size()) throw ConfigError("chain has " + std::to_string(names.size()) + " columns, expected " + std::to_string(theta.size()));
  auto flat = theta.flatten();
  for (std::size_t c = 0; c < names.size(); ++c) flat[theta.index_of(names[c])] = values[c];
  theta.assign(flat);
  return theta;
}

nlohmann::json to_json(const TailReport& report) {
  auto condition = [](const TailCondition& c) {
    nlohmann::json j{{"label", to_string(c.label)}, {"lhs", c.lhs}, {"threshold", c.threshold}};
    if (!c.note.empty()) j["note"] = c.note;
    return j;
  };
  nlohmann::json j;
  for (const char* tail : {"upper", "lower"}) {
    const auto& fields = std::string(tail) == "upper" ? report.upper : report.lower;
    nlohmann::json t;
    std::vector<std::string> labels;
    for (const auto& c : fields) labels.push_back(to_string(c.label));
    t["fields"] = labels;
    nlohmann::json cross = nlohmann::json::object();
    nlohmann::json details;
    for (std::size_t i = 0; i < fields.size(); ++i) details["field" + std::to_string(i + 1)] = condition(fields[i]);
    for (const auto& c : report.cross) {
      const auto key = std::to_string(c.first + 1) + std::to_string(c.second + 1);
      const auto& cond = std::string(tail) == "upper" ? c.upper : c.lower;
      cross[key] = to_string(cond.label);
      details["cross" + key] = condition(cond);
    }
    t["cross"] = cross;
    t["details"] = details;
    j[tail] = t;
  }
  // "U: AD, AD--AD and L: AD, AI--AI" for two fields.
  auto compact = [&](bool upper) {
    const auto& fields = upper ? report.upper : report.lower;
    std::string s = upper ? "U: " : "L: ";
    for (std::size_t i = 0; i < fields.size(); ++i) {
      s += (i ? ", " : "") + std::string(to_string(fields[i].label));
    }
    if (report.cross.size() == 1) {
      s += std::string("--") + to_string(upper ? report.cross[0].upper.label : report.cross[0].lower.label);
    } else {
      for (const auto& c : report.cross) {
        s += "; " + std::to_string(c.first + 1) + std::to_string(c.second + 1) + " " +
             to_string(upper ? c.upper.label : c.lower.label);
      }
    }
    return s;
  };
  const std::string summary = compact(true) + " and " + compact(false);
  j["summary"] = summary;
  return j;
}

nlohmann::json to_json(const SamplerConfig& c) {
  return nlohmann::json{{"iterations", c.iterations},
                        {"burn_in", c.burn_in},
                        {"adapt_interval", c.adapt_interval},
                        {"adapt_scale", c.adapt_scale},
                        {"target_rw", c.target_rw},
                        {"target_mala", c.target_mala},
                        {"sigma_rw", c.sigma_rw},
                        {"sigma_mala", c.sigma_mala},
                        {"thinning", c.thinning},
                        {"seed", c.seed},
                        {"store_latents", c.store_latents},
                        {"blocking", c.blocking == LatentBlocking::joint ? "joint" : "per_replicate"}};
}

nlohmann::json chain_summary(const ChainOutput& chain) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["spec_version"] = kSpecVersion;
  j["stored_samples"] = chain.theta.rows();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& s : summarize(chain)) {
    params.push_back({{"name", s.name},
                      {"mean", finite_or_null(s.mean)},
                      {"sd", finite_or_null(s.sd)},
                      {"median", finite_or_null(s.median)},
                      {"ci_lower", finite_or_null(s.lower)},
                      {"ci_upper", finite_or_null(s.upper)},
                      {"fixed", chain.reference.is_fixed(chain.reference.index_of(s.name))}});
  }
  j["parameters"] = params;
  nlohmann::json ess = nlohmann::json::object(), rhat = nlohmann::json::object();
  for (std::size_t m = 0; m < chain.free_names.size(); ++m) {
    ess[chain.free_names[m]] = finite_or_null(chain.ess[static_cast<Eigen::Index>(m)]);
    rhat[chain.free_names[m]] = finite_or_null(chain.split_rhat[static_cast<Eigen::Index>(m)]);
  }
  j["ess"] = ess;
  j["split_rhat"] = rhat;
  j["acceptance"] = {{"rw", finite_or_null(chain.acceptance_rw)}, {"mala", finite_or_null(chain.acceptance_mala)}};
  j["final_sigma"] = {{"rw", chain.sigma_rw}, {"mala", chain.sigma_mala}};
  std::vector<nlohmann::json> rw, mala;
  for (double v : chain.window_rate_rw) rw.push_back(finite_or_null(v));
  for (double v : chain.window_rate_mala) mala.push_back(finite_or_null(v));
  j["acceptance_trajectory"] = {{"window", chain.config.adapt_interval}, {"rw", rw}, {"mala", mala}};
  j["nonfinite_proposals"] = {{"rw", chain.nonfinite_rw}, {"mala", chain.nonfinite_mala}};
  return j;
}

}  // namespace mfcopula

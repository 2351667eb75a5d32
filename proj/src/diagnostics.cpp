#include "mfcopula/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "mfcopula/error.hpp"
#include "mfcopula/rng.hpp"
#include "mfcopula/simulate.hpp"

namespace mfcopula {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ975 = 1.959963984540054;
constexpr std::int64_t kChunk = 4096;

void check_pair(FieldPair pair, int fields) {
  if (pair.first < 0 || pair.second < 0 || pair.first >= fields || pair.second >= fields) {
    throw DomainError("field pair " + pair.label() + " is out of range for p = " + std::to_string(fields));
  }
}

void check_level(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("chi threshold must lie in (0, 1), got " + std::to_string(u));
}

std::vector<double> finite_values(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (std::isfinite(x)) out.push_back(x);
  return out;
}

ChiCurve summarize_draws(const std::vector<std::vector<double>>& values, ChiCurve curve) {
  const std::size_t cols = curve.abscissa.size();
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> column;
    for (const auto& row : values) column.push_back(row[c]);
    column = finite_values(column);
    curve.estimate.push_back(sample_quantile(column, 0.5));
    curve.lower.push_back(sample_quantile(column, 0.025));
    curve.upper.push_back(sample_quantile(column, 0.975));
  }
  return curve;
}

}  // namespace

const char* to_string(Tail t) { return t == Tail::upper ? "upper" : "lower"; }
const char* to_string(AbscissaType a) { return a == AbscissaType::distance ? "distance" : "threshold"; }
const char* to_string(Estimator e) { return e == Estimator::empirical ? "empirical" : "model"; }

std::string FieldPair::label() const { return std::to_string(first + 1) + std::to_string(second + 1); }

std::vector<FieldPair> field_pairs(int fields) {
  std::vector<FieldPair> out;
  for (int a = 0; a < fields; ++a) out.push_back({a, a});
  for (int a = 0; a < fields; ++a)
    for (int b = a + 1; b < fields; ++b) out.push_back({a, b});
  return out;
}

double ExceedanceCounts::chi() const {
  const std::int64_t cond = first + second;
  if (cond == 0) return kNaN;
  return 2.0 * static_cast<double>(joint) / static_cast<double>(cond);
}

std::pair<double, double> ExceedanceCounts::wilson() const {
  const double est = chi();
  if (std::isnan(est)) return {kNaN, kNaN};
  const double n = 0.5 * static_cast<double>(first + second);
  const double z2 = kZ975 * kZ975;
  const double denom = 1.0 + z2 / n;
  const double centre = (est + z2 / (2.0 * n)) / denom;
  const double half = kZ975 * std::sqrt(est * (1.0 - est) / n + z2 / (4.0 * n * n)) / denom;
  return {std::clamp(std::min(centre - half, est), 0.0, 1.0), std::clamp(std::max(centre + half, est), 0.0, 1.0)};
}

bool exceeds(double value, double threshold, Tail tail) {
  return tail == Tail::upper ? value > threshold : value < threshold;
}

std::vector<double> equal_count_bins(std::vector<double> distances, int count) {
  if (distances.empty()) throw DomainError("equal_count_bins: no distances");
  if (count < 1) throw DomainError("equal_count_bins: need at least one bin");
  std::sort(distances.begin(), distances.end());
  const std::size_t n = distances.size();
  std::vector<double> edges{distances.front()};
  for (int b = 1; b < count; ++b) {
    const double e = distances[static_cast<std::size_t>(b) * n / static_cast<std::size_t>(count)];
    if (e > edges.back()) edges.push_back(e);
  }
  if (distances.back() > edges.back() || edges.size() == 1) edges.push_back(distances.back());
  return edges;
}

std::vector<double> pair_distances(const SiteSet& sites, FieldPair pair) {
  const Eigen::Index d = sites.size();
  std::vector<double> out;
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = pair.within() ? a + 1 : 0; b < d; ++b) out.push_back(sites.distances()(a, b));
  }
  return out;
}

namespace {

// Visits every site pair of a field pair with its distance.
template <class Visit>
void for_each_site_pair(const SiteSet& sites, FieldPair pair, Visit&& visit) {
  const Eigen::Index d = sites.size();
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = pair.within() ? a + 1 : 0; b < d; ++b) visit(a, b, sites.distances()(a, b));
  }
}

void accumulate(const Dataset& data, Tail tail, FieldPair pair, Eigen::Index a, Eigen::Index b,
                const std::vector<double>& thresholds, std::vector<ExceedanceCounts>& counts) {
  const Eigen::Index d = data.site_count();
  const Eigen::Index ra = pair.first * d + a;
  const Eigen::Index rb = pair.second * d + b;
  for (Eigen::Index k = 0; k < data.replicates(); ++k) {
    const double x = data.scores(ra, k);
    const double y = data.scores(rb, k);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const bool ex = exceeds(x, thresholds[t], tail);
      const bool ey = exceeds(y, thresholds[t], tail);
      counts[t].first += ex;
      counts[t].second += ey;
      counts[t].joint += ex && ey;
    }
  }
}

}  // namespace

ExceedanceCounts count_exceedances(const Dataset& data, Tail tail, FieldPair pair, double threshold, double h_lo,
                                   double h_hi, bool include_hi) {
  check_pair(pair, data.fields());
  std::vector<ExceedanceCounts> counts(1);
  const std::vector<double> levels{threshold};
  for_each_site_pair(data.sites, pair, [&](Eigen::Index a, Eigen::Index b, double h) {
    if (h < h_lo || h > h_hi || (!include_hi && h == h_hi)) return;
    accumulate(data, tail, pair, a, b, levels, counts);
  });
  return counts[0];
}

ChiCurve empirical_chi(const Dataset& data, Tail tail, FieldPair pair, double u, std::vector<double> edges) {
  check_pair(pair, data.fields());
  check_level(u);
  if (edges.empty()) {
    const auto h = pair_distances(data.sites, pair);
    if (h.empty()) throw DomainError("empirical_chi: field pair " + pair.label() + " has no site pairs");
    edges = equal_count_bins(h, 12);
  }
  if (edges.size() < 2) throw DomainError("empirical_chi: need at least two bin edges");
  const std::size_t bins = edges.size() - 1;
  std::vector<ExceedanceCounts> counts(bins);
  std::vector<double> h_sum(bins, 0.0);
  std::vector<std::size_t> h_count(bins, 0);
  const std::vector<double> levels{u};
  for_each_site_pair(data.sites, pair, [&](Eigen::Index a, Eigen::Index b, double h) {
    if (h < edges.front() || h > edges.back()) return;
    auto it = std::upper_bound(edges.begin(), edges.end(), h);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    bin = std::min(bin, bins - 1);
    h_sum[bin] += h;
    ++h_count[bin];
    std::vector<ExceedanceCounts> one(1);
    accumulate(data, tail, pair, a, b, levels, one);
    counts[bin].joint += one[0].joint;
    counts[bin].first += one[0].first;
    counts[bin].second += one[0].second;
  });

  ChiCurve curve;
  curve.tail = tail;
  curve.pair = pair;
  curve.abscissa_type = AbscissaType::distance;
  curve.estimator = Estimator::empirical;
  curve.fixed = u;
  for (std::size_t b = 0; b < bins; ++b) {
    if (h_count[b] == 0) continue;
    curve.abscissa.push_back(h_sum[b] / static_cast<double>(h_count[b]));
    curve.estimate.push_back(counts[b].chi());
    const auto [lo, hi] = counts[b].wilson();
    curve.lower.push_back(lo);
    curve.upper.push_back(hi);
  }
  return curve;
}

ChiCurve empirical_chi_threshold(const Dataset& data, Tail tail, FieldPair pair, double h_lo, double h_hi,
                                 const std::vector<double>& thresholds) {
  check_pair(pair, data.fields());
  for (double u : thresholds) check_level(u);
  std::vector<ExceedanceCounts> counts(thresholds.size());
  double h_sum = 0.0;
  std::size_t h_count = 0;
  for_each_site_pair(data.sites, pair, [&](Eigen::Index a, Eigen::Index b, double h) {
    if (h < h_lo || h > h_hi) return;
    h_sum += h;
    ++h_count;
    accumulate(data, tail, pair, a, b, thresholds, counts);
  });
  ChiCurve curve;
  curve.tail = tail;
  curve.pair = pair;
  curve.abscissa_type = AbscissaType::threshold;
  curve.estimator = Estimator::empirical;
  curve.fixed = h_count ? h_sum / static_cast<double>(h_count) : kNaN;
  curve.abscissa = thresholds;
  for (const auto& c : counts) {
    curve.estimate.push_back(c.chi());
    const auto [lo, hi] = c.wilson();
    curve.lower.push_back(lo);
    curve.upper.push_back(hi);
  }
  return curve;
}

double pair_correlation(const ParameterVector& theta, FieldPair pair, double h) {
  check_pair(pair, theta.fields());
  const Eigen::MatrixXd lmc = theta.coregionalization();
  double r = 0.0;
  for (int f = 0; f <= std::min(pair.first, pair.second); ++f) {
    r += lmc(pair.first, f) * lmc(pair.second, f) * exp_correlation(h, theta.range[f]);
  }
  return r;
}

std::vector<ExceedanceCounts> simulate_pair_counts(const ParameterVector& theta, Tail tail, FieldPair pair,
                                                   double h, const std::vector<double>& thresholds,
                                                   std::int64_t mc, std::uint64_t seed, Execution execution) {
  theta.validate();
  check_pair(pair, theta.fields());
  if (mc < 1) throw DomainError("simulate_pair_counts: mc must be positive");
  if (!(h >= 0.0)) throw DomainError("simulate_pair_counts: distance must be non-negative");
  for (double u : thresholds) check_level(u);

  const MarginalSpec m1 = theta.marginal(pair.first);
  const MarginalSpec m2 = theta.marginal(pair.second);
  const BetaCoefficients b1 = theta.betas(pair.first);
  const BetaCoefficients b2 = theta.betas(pair.second);
  std::vector<double> q1, q2;
  for (double u : thresholds) {
    q1.push_back(marginal_quantile(u, m1));
    q2.push_back(marginal_quantile(u, m2));
  }
  const double r = std::clamp(pair_correlation(theta, pair, h), -1.0, 1.0);
  const double s = std::sqrt(std::max(0.0, 1.0 - r * r));

  const std::int64_t chunks = (mc + kChunk - 1) / kChunk;
  std::vector<std::vector<ExceedanceCounts>> partial(static_cast<std::size_t>(chunks),
                                                     std::vector<ExceedanceCounts>(thresholds.size()));
  for_each_index(chunks, execution, [&](std::ptrdiff_t c) {
    Engine rng = make_engine(seed, static_cast<std::uint64_t>(c));
    auto& counts = partial[static_cast<std::size_t>(c)];
    const std::int64_t begin = c * kChunk;
    const std::int64_t end = std::min(mc, begin + kChunk);
    for (std::int64_t k = begin; k < end; ++k) {
      const double r0u = standard_exponential(rng);
      const double r0l = standard_exponential(rng);
      const double r1u = standard_exponential(rng);
      const double r1l = standard_exponential(rng);
      double r2u = r1u, r2l = r1l;
      if (!pair.within()) {
        r2u = standard_exponential(rng);
        r2l = standard_exponential(rng);
      }
      const double e1 = standard_normal(rng);
      const double e2 = standard_normal(rng);
      const double t1 = b1.upper_shared * r0u + b1.upper_field * r1u - b1.lower_shared * r0l - b1.lower_field * r1l;
      const double t2 = b2.upper_shared * r0u + b2.upper_field * r2u - b2.lower_shared * r0l - b2.lower_field * r2l;
      const double x1 = t1 + laplace_from_gaussian(e1);
      const double x2 = t2 + laplace_from_gaussian(r * e1 + s * e2);
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const bool a = exceeds(x1, q1[t], tail);
        const bool b = exceeds(x2, q2[t], tail);
        counts[t].first += a;
        counts[t].second += b;
        counts[t].joint += a && b;
      }
    }
  });

  std::vector<ExceedanceCounts> total(thresholds.size());
  for (const auto& part : partial) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      total[t].joint += part[t].joint;
      total[t].first += part[t].first;
      total[t].second += part[t].second;
    }
  }
  return total;
}

ChiEstimate true_chi(const ParameterVector& theta, Tail tail, FieldPair pair, double h, double u, std::int64_t mc,
                     std::uint64_t seed, Execution execution) {
  const auto counts = simulate_pair_counts(theta, tail, pair, h, {u}, mc, seed, execution)[0];
  ChiEstimate out;
  out.estimate = counts.chi();
  const double n = 0.5 * static_cast<double>(counts.first + counts.second);
  out.standard_error = n > 0.0 ? std::sqrt(out.estimate * (1.0 - out.estimate) / n) : kNaN;
  return out;
}

ChiCurve model_chi_distance(const std::vector<ParameterVector>& draws, Tail tail, FieldPair pair, double u,
                            const std::vector<double>& distances, std::int64_t mc, std::uint64_t seed,
                            Execution execution) {
  if (draws.empty()) throw DomainError("model_chi: no parameter draws");
  std::vector<std::vector<double>> values(draws.size(), std::vector<double>(distances.size(), kNaN));
  for_each_index(static_cast<std::ptrdiff_t>(draws.size()), execution, [&](std::ptrdiff_t s) {
    const std::uint64_t draw_seed = substream_seed(seed, static_cast<std::uint64_t>(s));
    for (std::size_t c = 0; c < distances.size(); ++c) {
      values[s][c] =
          simulate_pair_counts(draws[s], tail, pair, distances[c], {u}, mc, draw_seed, Execution::serial)[0].chi();
    }
  });
  ChiCurve curve;
  curve.tail = tail;
  curve.pair = pair;
  curve.abscissa_type = AbscissaType::distance;
  curve.estimator = Estimator::model;
  curve.fixed = u;
  curve.abscissa = distances;
  return summarize_draws(values, curve);
}

ChiCurve model_chi_threshold(const std::vector<ParameterVector>& draws, Tail tail, FieldPair pair, double h,
                             const std::vector<double>& thresholds, std::int64_t mc, std::uint64_t seed,
                             Execution execution) {
  if (draws.empty()) throw DomainError("model_chi: no parameter draws");
  std::vector<std::vector<double>> values(draws.size());
  for_each_index(static_cast<std::ptrdiff_t>(draws.size()), execution, [&](std::ptrdiff_t s) {
    const std::uint64_t draw_seed = substream_seed(seed, static_cast<std::uint64_t>(s));
    const auto counts = simulate_pair_counts(draws[s], tail, pair, h, thresholds, mc, draw_seed, Execution::serial);
    for (const auto& c : counts) values[s].push_back(c.chi());
  });
  ChiCurve curve;
  curve.tail = tail;
  curve.pair = pair;
  curve.abscissa_type = AbscissaType::threshold;
  curve.estimator = Estimator::model;
  curve.fixed = h;
  curve.abscissa = thresholds;
  return summarize_draws(values, curve);
}

std::vector<ParameterVector> posterior_draws(const ChainOutput& chain, std::size_t count) {
  const auto stored = static_cast<std::size_t>(chain.theta.rows());
  if (stored == 0) throw DomainError("posterior_draws: chain has no stored samples");
  count = std::clamp<std::size_t>(count, 1, stored);
  std::vector<ParameterVector> out;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t row = count == 1 ? stored - 1 : s * (stored - 1) / (count - 1);
    out.push_back(sample_parameters(chain, static_cast<Eigen::Index>(row)));
  }
  return out;
}

std::size_t SelectionDesign::missing() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const SelectionCell& c) { return std::isnan(c.empirical); }));
}

SelectionDesign selection_design(const Dataset& data, int distance_bins, std::vector<double> upper_levels,
                                 std::vector<double> lower_levels) {
  SelectionDesign design;
  for (Tail tail : {Tail::upper, Tail::lower}) {
    const auto& levels = tail == Tail::upper ? upper_levels : lower_levels;
    for (FieldPair pair : field_pairs(data.fields())) {
      const auto h = pair_distances(data.sites, pair);
      if (h.empty()) continue;
      const auto edges = equal_count_bins(h, distance_bins);
      for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const bool last = b + 2 == edges.size();
        double sum = 0.0;
        std::size_t count = 0;
        for (double x : h) {
          if (x >= edges[b] && (x < edges[b + 1] || (last && x == edges[b + 1]))) {
            sum += x;
            ++count;
          }
        }
        if (count == 0) continue;
        for (double u : levels) {
          SelectionCell cell;
          cell.tail = tail;
          cell.pair = pair;
          cell.h_lo = edges[b];
          cell.h_hi = edges[b + 1];
          cell.h = sum / static_cast<double>(count);
          cell.u = u;
          cell.empirical = count_exceedances(data, tail, pair, u, edges[b], edges[b + 1], last).chi();
          design.cells.push_back(cell);
        }
      }
    }
  }
  return design;
}

SelectionResult discrepancy(const SelectionDesign& design, const std::vector<double>& model) {
  if (model.size() != design.cells.size()) throw DomainError("discrepancy: model values do not match the design");
  SelectionResult out;
  out.model = model;
  double sum = 0.0;
  for (std::size_t c = 0; c < model.size(); ++c) {
    const double e = design.cells[c].empirical;
    if (std::isnan(e) || std::isnan(model[c])) {
      ++out.cells_missing;
      continue;
    }
    sum += (model[c] - e) * (model[c] - e);
    ++out.cells_used;
  }
  out.discrepancy = out.cells_used ? sum / static_cast<double>(out.cells_used) : kNaN;
  return out;
}

std::vector<SelectionResult> grid_model_selection(const std::vector<SelectionCandidate>& candidates,
                                                  const SelectionDesign& design, std::int64_t mc,
                                                  std::uint64_t seed, Execution execution) {
  if (candidates.empty()) throw DomainError("grid_model_selection: no candidate fits");
  // Cells sharing (tail, pair, h) share one simulation over their levels.
  std::map<std::tuple<int, int, int, double>, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < design.cells.size(); ++c) {
    const auto& cell = design.cells[c];
    groups[{static_cast<int>(cell.tail), cell.pair.first, cell.pair.second, cell.h}].push_back(c);
  }
  std::vector<SelectionResult> results;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<double> model(design.cells.size(), kNaN);
    for (const auto& [key, members] : groups) {
      const auto& first = design.cells[members.front()];
      std::vector<double> levels;
      for (std::size_t c : members) levels.push_back(design.cells[c].u);
      // Common random numbers across candidates.
      const auto curve =
          model_chi_threshold(candidates[i].draws, first.tail, first.pair, first.h, levels, mc, seed, execution);
      for (std::size_t m = 0; m < members.size(); ++m) model[members[m]] = curve.estimate[m];
    }
    SelectionResult r = discrepancy(design, model);
    r.label = candidates[i].label;
    r.input_index = i;
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(), [](const SelectionResult& a, const SelectionResult& b) {
    if (std::isnan(a.discrepancy)) return false;
    if (std::isnan(b.discrepancy)) return true;
    return a.discrepancy < b.discrepancy;
  });
  return results;
}

}  // namespace mfcopula

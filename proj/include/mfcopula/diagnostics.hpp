#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mfcopula/dataset.hpp"
#include "mfcopula/execution.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/sampler.hpp"

namespace mfcopula {

enum class Tail { upper, lower };
enum class AbscissaType { distance, threshold };
enum class Estimator { empirical, model };

const char* to_string(Tail t);
const char* to_string(AbscissaType a);
const char* to_string(Estimator e);

// Zero-based field indices; labelled one-based ("11", "12", ...).
struct FieldPair {
  int first = 0;
  int second = 0;
  std::string label() const;
  bool within() const { return first == second; }
};

// All pairs i1 <= i2 for p fields.
std::vector<FieldPair> field_pairs(int fields);

struct ChiCurve {
  Tail tail = Tail::upper;
  FieldPair pair;
  AbscissaType abscissa_type = AbscissaType::distance;
  Estimator estimator = Estimator::empirical;
  std::vector<double> abscissa;
  std::vector<double> estimate;  // NaN when undefined
  std::vector<double> lower;     // 95% envelope
  std::vector<double> upper;
  double fixed = 0.0;            // the threshold (distance curves) or distance (threshold curves)
};

// Exceedance counts for one pooled cell; both conditioning directions.
struct ExceedanceCounts {
  std::int64_t joint = 0;
  std::int64_t first = 0;   // conditioning coordinate 1 exceeds
  std::int64_t second = 0;  // conditioning coordinate 2 exceeds
  // 2 joint / (first + second): the average over both directions,
  // weighted by their conditioning counts. NaN when nothing exceeds.
  double chi() const;
  // Wilson 95% interval with (first + second) / 2 trials.
  std::pair<double, double> wilson() const;
};

bool exceeds(double value, double threshold, Tail tail);

// Edges of `count` bins holding roughly equal numbers of the given
// distances; the last edge is inclusive.
std::vector<double> equal_count_bins(std::vector<double> distances, int count);

// Distances of the site pairs used for a field pair: unordered distinct
// sites within a field, ordered pairs (including j1 == j2) across fields.
std::vector<double> pair_distances(const SiteSet& sites, FieldPair pair);

ExceedanceCounts count_exceedances(const Dataset& data, Tail tail, FieldPair pair, double threshold,
                                   double h_lo, double h_hi, bool include_hi);

// chi as a function of distance at fixed u; `edges` empty means 12
// equal-count bins. Abscissa is the mean pair distance in each bin.
ChiCurve empirical_chi(const Dataset& data, Tail tail, FieldPair pair, double u,
                       std::vector<double> edges = {});
// chi as a function of u for the site pairs with distance in [h_lo, h_hi].
ChiCurve empirical_chi_threshold(const Dataset& data, Tail tail, FieldPair pair, double h_lo, double h_hi,
                                 const std::vector<double>& thresholds);

// Correlation of the latent Gaussian pair (W'_{i1}(s), W'_{i2}(s')) at
// distance h.
double pair_correlation(const ParameterVector& theta, FieldPair pair, double h);

// Exact Monte Carlo draws of (U_{i1}(s1), U_{i2}(s2)) with |s1 - s2| = h,
// counted against each threshold. Chunk c uses substream c of `seed`.
std::vector<ExceedanceCounts> simulate_pair_counts(const ParameterVector& theta, Tail tail, FieldPair pair,
                                                   double h, const std::vector<double>& thresholds,
                                                   std::int64_t mc, std::uint64_t seed,
                                                   Execution execution = Execution::parallel);

struct ChiEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

ChiEstimate true_chi(const ParameterVector& theta, Tail tail, FieldPair pair, double h, double u,
                     std::int64_t mc, std::uint64_t seed, Execution execution = Execution::parallel);

// Posterior median and 2.5% / 97.5% quantiles of the model chi over the
// given parameter draws. Draw s uses substream s of `seed`.
ChiCurve model_chi_distance(const std::vector<ParameterVector>& draws, Tail tail, FieldPair pair, double u,
                            const std::vector<double>& distances, std::int64_t mc, std::uint64_t seed,
                            Execution execution = Execution::parallel);
ChiCurve model_chi_threshold(const std::vector<ParameterVector>& draws, Tail tail, FieldPair pair, double h,
                             const std::vector<double>& thresholds, std::int64_t mc, std::uint64_t seed,
                             Execution execution = Execution::parallel);

// `count` stored samples evenly spaced through the chain.
std::vector<ParameterVector> posterior_draws(const ChainOutput& chain, std::size_t count);

struct SelectionCell {
  Tail tail = Tail::upper;
  FieldPair pair;
  double h_lo = 0.0;
  double h_hi = 0.0;
  double h = 0.0;           // mean pair distance in the bin
  double u = 0.0;
  double empirical = 0.0;   // NaN when the conditioning set is empty
};

struct SelectionDesign {
  std::vector<SelectionCell> cells;
  std::size_t missing() const;
};

// {upper, lower} x pairs x distance terciles x levels.
SelectionDesign selection_design(const Dataset& data, int distance_bins = 3,
                                 std::vector<double> upper_levels = {0.9, 0.95},
                                 std::vector<double> lower_levels = {0.05, 0.1});

struct SelectionResult {
  std::string label;
  std::size_t input_index = 0;
  double discrepancy = 0.0;
  std::size_t cells_used = 0;
  std::size_t cells_missing = 0;
  std::vector<double> model;  // per design cell
};

// Mean squared difference over cells with a defined empirical value.
SelectionResult discrepancy(const SelectionDesign& design, const std::vector<double>& model);

struct SelectionCandidate {
  std::string label;
  std::vector<ParameterVector> draws;
};

// Sorted ascending by discrepancy; ties keep input order.
std::vector<SelectionResult> grid_model_selection(const std::vector<SelectionCandidate>& candidates,
                                                  const SelectionDesign& design, std::int64_t mc,
                                                  std::uint64_t seed, Execution execution = Execution::parallel);

}  // namespace mfcopula

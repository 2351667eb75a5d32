#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mfcopula/spatial.hpp"

namespace mfcopula {

enum class Provenance { raw, rank_transformed, externally_standardized };
const char* to_string(Provenance p);

// p fields x d sites x n replicates of scores in (0, 1). Scores are stored
// field-major by row (i * d + j) and one replicate per column, matching
// the ordering of the latent Gaussian vector.
struct Dataset {
  std::vector<std::string> field_names;
  std::vector<std::string> site_ids;
  SiteSet sites;
  std::vector<std::string> replicate_labels;
  Eigen::MatrixXd scores;
  Provenance provenance = Provenance::externally_standardized;

  int fields() const { return static_cast<int>(field_names.size()); }
  Eigen::Index site_count() const { return sites.size(); }
  Eigen::Index replicates() const { return scores.cols(); }
  double score(int field, Eigen::Index site, Eigen::Index replicate) const {
    return scores(field * site_count() + site, replicate);
  }

  // Throws DomainError unless shapes agree and every score is in (0, 1).
  void validate() const;

  // Default names ("field1", "s1", "r1", ...) around a score matrix.
  static Dataset from_scores(int fields, const SiteSet& sites, Eigen::MatrixXd scores);
};

}  // namespace mfcopula

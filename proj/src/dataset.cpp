#include "mfcopula/dataset.hpp"

#include <cmath>
#include <string>

#include "mfcopula/error.hpp"

namespace mfcopula {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::raw: return "raw";
    case Provenance::rank_transformed: return "rank_transformed";
    case Provenance::externally_standardized: return "externally_standardized";
  }
  return "unknown";
}

void Dataset::validate() const {
  const Eigen::Index d = site_count();
  if (fields() < 1) throw DomainError("dataset: no fields");
  if (d < 1) throw DomainError("dataset: no sites");
  if (scores.rows() != fields() * d) {
    throw DomainError("dataset: score matrix has " + std::to_string(scores.rows()) + " rows, expected p*d = " +
                      std::to_string(fields() * d));
  }
  if (!site_ids.empty() && static_cast<Eigen::Index>(site_ids.size()) != d) {
    throw DomainError("dataset: site id count does not match the site set");
  }
  if (!replicate_labels.empty() && static_cast<Eigen::Index>(replicate_labels.size()) != scores.cols()) {
    throw DomainError("dataset: replicate label count does not match the score matrix");
  }
  for (Eigen::Index k = 0; k < scores.cols(); ++k) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      const double u = scores(r, k);
      if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("dataset: score " + std::to_string(u) + " at field " + std::to_string(r / d + 1) +
                          ", site " + std::to_string(r % d + 1) + ", replicate " + std::to_string(k + 1) +
                          " is outside (0, 1)");
      }
    }
  }
}

Dataset Dataset::from_scores(int fields, const SiteSet& sites, Eigen::MatrixXd scores) {
  Dataset data;
  for (int i = 0; i < fields; ++i) data.field_names.push_back("field" + std::to_string(i + 1));
  for (Eigen::Index j = 0; j < sites.size(); ++j) data.site_ids.push_back("s" + std::to_string(j + 1));
  for (Eigen::Index k = 0; k < scores.cols(); ++k) data.replicate_labels.push_back("r" + std::to_string(k + 1));
  data.sites = sites;
  data.scores = std::move(scores);
  return data;
}

}  // namespace mfcopula

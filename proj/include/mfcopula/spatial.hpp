#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace mfcopula {

// Site coordinates (one row per site) and their Euclidean distance matrix.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(Eigen::MatrixXd coordinates);

  Eigen::Index size() const { return coordinates_.rows(); }
  Eigen::Index dimension() const { return coordinates_.cols(); }
  const Eigen::MatrixXd& coordinates() const { return coordinates_; }
  const Eigen::MatrixXd& distances() const { return distances_; }

  // Lexicographic order of the coordinates; ties keep input order. The
  // samplers factorize in this order so outputs permute with the sites.
  const std::vector<Eigen::Index>& canonical_order() const { return canonical_; }

  // d sites uniform on the unit square.
  static SiteSet uniform_unit_square(Eigen::Index d, std::uint64_t seed);
  // Regular g x g grid spanning [lo, hi]^2 (row-major).
  static SiteSet regular_grid(Eigen::Index g, double lo = 0.0, double hi = 1.0);

 private:
  Eigen::MatrixXd coordinates_;
  Eigen::MatrixXd distances_;
  std::vector<Eigen::Index> canonical_;
};

// Local equirectangular projection of (lon, lat) degrees to kilometres
// about the centroid of the points.
Eigen::MatrixXd project_local_km(const Eigen::MatrixXd& lon_lat);

double exp_correlation(double distance, double range);
Eigen::MatrixXd exp_correlation(const Eigen::MatrixXd& distances, double range);

// Lower-triangular LMC matrix for two fields with cross-correlation rho:
// [[1, 0], [rho, sqrt(1 - rho^2)]].
Eigen::MatrixXd coregionalization_from_rho(double rho);

struct JitteredCholesky {
  Eigen::MatrixXd lower;  // G with G G^T = A + jitter I
  double jitter = 0.0;
};

// Tries a plain factorization, then diagonal jitter 1e-10, doubling up to
// 1e-6. Throws AssemblyError with the smallest eigenvalue on failure.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a);

// Cross-correlation of the latent Gaussian vector (W'_1, ..., W'_p), ordered
// field-major (index i * d + j), with blocks
//   Sigma_{i1 i2} = sum_{f <= min(i1, i2)} L(i1, f) L(i2, f) c_f(H).
class CovarianceModel {
 public:
  const Eigen::VectorXd& ranges() const { return ranges_; }
  const Eigen::MatrixXd& coregionalization() const { return lmc_; }
  const Eigen::MatrixXd& correlation() const { return sigma_; }
  // Lower Cholesky factor of correlation() + jitter() I.
  const Eigen::MatrixXd& factor() const { return factor_; }
  double jitter() const { return jitter_; }
  double log_determinant() const { return log_det_; }
  Eigen::Index fields() const { return lmc_.rows(); }
  Eigen::Index sites() const { return sites_; }

  friend CovarianceModel assemble_lmc(const Eigen::MatrixXd& distances, std::span<const double> ranges,
                                      const Eigen::MatrixXd& lmc);

 private:
  Eigen::VectorXd ranges_;
  Eigen::MatrixXd lmc_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
  double log_det_ = 0.0;
  Eigen::Index sites_ = 0;
};

// Requires ranges > 0 and unit-norm rows of the lower-triangular lmc.
CovarianceModel assemble_lmc(const Eigen::MatrixXd& distances, std::span<const double> ranges,
                             const Eigen::MatrixXd& lmc);
inline CovarianceModel assemble_lmc(const SiteSet& sites, std::span<const double> ranges,
                                    const Eigen::MatrixXd& lmc) {
  return assemble_lmc(sites.distances(), ranges, lmc);
}

}  // namespace mfcopula

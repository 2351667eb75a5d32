#include "mfcopula/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mfcopula/error.hpp"
#include "mfcopula/rng.hpp"

namespace mfcopula {

SiteSet::SiteSet(Eigen::MatrixXd coordinates) : coordinates_(std::move(coordinates)) {
  if (!coordinates_.allFinite()) throw DomainError("site coordinates must be finite");
  const Eigen::Index d = coordinates_.rows();
  distances_.resize(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    distances_(a, a) = 0.0;
    for (Eigen::Index b = a + 1; b < d; ++b) {
      const double h = (coordinates_.row(a) - coordinates_.row(b)).norm();
      distances_(a, b) = h;
      distances_(b, a) = h;
    }
  }
  canonical_.resize(static_cast<std::size_t>(d));
  std::iota(canonical_.begin(), canonical_.end(), Eigen::Index{0});
  std::stable_sort(canonical_.begin(), canonical_.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < coordinates_.cols(); ++c) {
      if (coordinates_(a, c) != coordinates_(b, c)) return coordinates_(a, c) < coordinates_(b, c);
    }
    return false;
  });
}

SiteSet SiteSet::uniform_unit_square(Eigen::Index d, std::uint64_t seed) {
  Engine rng(substream_seed(seed, 0x517e5));
  Eigen::MatrixXd xy(d, 2);
  for (Eigen::Index j = 0; j < d; ++j) {
    xy(j, 0) = open_uniform(rng);
    xy(j, 1) = open_uniform(rng);
  }
  return SiteSet(std::move(xy));
}

SiteSet SiteSet::regular_grid(Eigen::Index g, double lo, double hi) {
  Eigen::MatrixXd xy(g * g, 2);
  const double step = g > 1 ? (hi - lo) / static_cast<double>(g - 1) : 0.0;
  for (Eigen::Index r = 0; r < g; ++r) {
    for (Eigen::Index c = 0; c < g; ++c) {
      xy(r * g + c, 0) = lo + step * static_cast<double>(c);
      xy(r * g + c, 1) = lo + step * static_cast<double>(r);
    }
  }
  return SiteSet(std::move(xy));
}

Eigen::MatrixXd project_local_km(const Eigen::MatrixXd& lon_lat) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kDeg = M_PI / 180.0;
  if (lon_lat.cols() != 2) throw DomainError("project_local_km: expected (lon, lat) columns");
  const double lon0 = lon_lat.col(0).mean();
  const double lat0 = lon_lat.col(1).mean();
  Eigen::MatrixXd xy(lon_lat.rows(), 2);
  for (Eigen::Index j = 0; j < lon_lat.rows(); ++j) {
    xy(j, 0) = kEarthRadiusKm * (lon_lat(j, 0) - lon0) * kDeg * std::cos(lat0 * kDeg);
    xy(j, 1) = kEarthRadiusKm * (lon_lat(j, 1) - lat0) * kDeg;
  }
  return xy;
}

double exp_correlation(double distance, double range) {
  if (!(range > 0.0)) throw DomainError("exp_correlation: range must be > 0");
  return std::exp(-distance / range);
}

Eigen::MatrixXd exp_correlation(const Eigen::MatrixXd& distances, double range) {
  if (!(range > 0.0)) throw DomainError("exp_correlation: range must be > 0");
  Eigen::MatrixXd c = (-distances.array() / range).exp().matrix();
  c.diagonal().setOnes();
  return c;
}

Eigen::MatrixXd coregionalization_from_rho(double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("coregionalization_from_rho: rho outside [-1, 1]");
  Eigen::MatrixXd lmc(2, 2);
  lmc << 1.0, 0.0, rho, std::sqrt(std::max(0.0, 1.0 - rho * rho));
  return lmc;
}

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  const Eigen::Index n = a.rows();
  for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-12); jitter *= 2.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  os << "correlation matrix (" << n << "x" << n << ") not positive definite after jitter 1e-6; "
     << "smallest eigenvalue " << eig.eigenvalues().minCoeff();
  throw AssemblyError(os.str());
}

CovarianceModel assemble_lmc(const Eigen::MatrixXd& distances, std::span<const double> ranges,
                             const Eigen::MatrixXd& lmc) {
  const auto p = static_cast<Eigen::Index>(ranges.size());
  if (lmc.rows() != p || lmc.cols() != p) throw DomainError("assemble_lmc: LMC matrix must be p x p");
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(ranges[static_cast<std::size_t>(i)] > 0.0)) throw DomainError("assemble_lmc: range must be > 0");
    for (Eigen::Index f = i + 1; f < p; ++f) {
      if (lmc(i, f) != 0.0) throw DomainError("assemble_lmc: LMC matrix must be lower triangular");
    }
    if (std::fabs(lmc.row(i).squaredNorm() - 1.0) > 1e-9) {
      throw DomainError("assemble_lmc: LMC row " + std::to_string(i + 1) + " must have unit norm");
    }
  }
  const Eigen::Index d = distances.rows();

  std::vector<Eigen::MatrixXd> field_corr;
  field_corr.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index f = 0; f < p; ++f) field_corr.push_back(exp_correlation(distances, ranges[f]));

  CovarianceModel model;
  model.ranges_ = Eigen::Map<const Eigen::VectorXd>(ranges.data(), p);
  model.lmc_ = lmc;
  model.sites_ = d;
  model.sigma_.resize(p * d, p * d);
  for (Eigen::Index i1 = 0; i1 < p; ++i1) {
    for (Eigen::Index i2 = 0; i2 <= i1; ++i2) {
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index f = 0; f <= i2; ++f) block += lmc(i1, f) * lmc(i2, f) * field_corr[f];
      model.sigma_.block(i1 * d, i2 * d, d, d) = block;
      if (i1 != i2) model.sigma_.block(i2 * d, i1 * d, d, d) = block.transpose();
    }
  }
  auto chol = cholesky_with_jitter(model.sigma_);
  model.factor_ = std::move(chol.lower);
  model.jitter_ = chol.jitter;
  model.log_det_ = 2.0 * model.factor_.diagonal().array().log().sum();
  return model;
}

}  // namespace mfcopula

#include "mfcopula/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfcopula/error.hpp"
#include "mfcopula/spatial.hpp"

namespace mfcopula {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

ParameterVector ParameterVector::bivariate(double alpha1, double alpha2, double gamma1, double gamma2,
                                           double delta_upper, double delta_lower, double range1,
                                           double range2, double rho) {
  ParameterVector theta;
  theta.alpha = Eigen::Vector2d(alpha1, alpha2);
  theta.gamma = Eigen::Vector2d(gamma1, gamma2);
  theta.delta_upper = delta_upper;
  theta.delta_lower = delta_lower;
  theta.range = Eigen::Vector2d(range1, range2);
  theta.rho = rho;
  return theta;
}

ParameterVector ParameterVector::univariate(double alpha, double gamma, double delta_upper,
                                            double delta_lower, double range) {
  ParameterVector theta;
  theta.alpha = Eigen::VectorXd::Constant(1, alpha);
  theta.gamma = Eigen::VectorXd::Constant(1, gamma);
  theta.delta_upper = delta_upper;
  theta.delta_lower = delta_lower;
  theta.range = Eigen::VectorXd::Constant(1, range);
  theta.lmc = Eigen::MatrixXd::Ones(1, 1);
  return theta;
}

std::size_t ParameterVector::size() const {
  const auto p = static_cast<std::size_t>(fields());
  return 3 * p + 2 + (p == 2 ? 1 : 0);
}

void ParameterVector::fix(std::size_t flat, bool value) {
  if (fixed.empty()) fixed.assign(size(), false);
  fixed.at(flat) = value;
}

ParameterRole ParameterVector::role(std::size_t flat) const {
  const auto p = static_cast<std::size_t>(fields());
  if (flat < p) return ParameterRole::alpha;
  if (flat < 2 * p) return ParameterRole::gamma;
  if (flat == 2 * p) return ParameterRole::delta_upper;
  if (flat == 2 * p + 1) return ParameterRole::delta_lower;
  if (flat < 3 * p + 2) return ParameterRole::range;
  if (flat < size()) return ParameterRole::rho;
  throw std::out_of_range("parameter index out of range");
}

std::string ParameterVector::name(std::size_t flat) const {
  const auto p = static_cast<std::size_t>(fields());
  switch (role(flat)) {
    case ParameterRole::alpha: return "alpha" + std::to_string(flat + 1);
    case ParameterRole::gamma: return "gamma" + std::to_string(flat - p + 1);
    case ParameterRole::delta_upper: return "deltaU";
    case ParameterRole::delta_lower: return "deltaL";
    case ParameterRole::range: return "lambda" + std::to_string(flat - 2 * p - 1);
    case ParameterRole::rho: return "rho12";
  }
  return {};
}

std::vector<std::string> ParameterVector::names() const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < size(); ++k) out.push_back(name(k));
  return out;
}

std::size_t ParameterVector::index_of(const std::string& wanted) const {
  for (std::size_t k = 0; k < size(); ++k) {
    if (name(k) == wanted) return k;
  }
  throw ConfigError("unknown parameter '" + wanted + "'");
}

std::vector<double> ParameterVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (double a : alpha) flat.push_back(a);
  for (double g : gamma) flat.push_back(g);
  flat.push_back(delta_upper);
  flat.push_back(delta_lower);
  for (double l : range) flat.push_back(l);
  if (fields() == 2) flat.push_back(rho);
  return flat;
}

void ParameterVector::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw std::invalid_argument("ParameterVector::assign: size mismatch");
  const auto p = static_cast<std::size_t>(fields());
  for (std::size_t i = 0; i < p; ++i) {
    alpha[static_cast<Eigen::Index>(i)] = flat[i];
    gamma[static_cast<Eigen::Index>(i)] = flat[p + i];
    range[static_cast<Eigen::Index>(i)] = flat[2 * p + 2 + i];
  }
  delta_upper = flat[2 * p];
  delta_lower = flat[2 * p + 1];
  if (p == 2) rho = flat[3 * p + 2];
}

Eigen::MatrixXd ParameterVector::coregionalization() const {
  if (fields() == 2) return coregionalization_from_rho(rho);
  if (lmc.rows() == fields() && lmc.cols() == fields()) return lmc;
  if (fields() == 1) return Eigen::MatrixXd::Ones(1, 1);
  throw DomainError("LMC matrix required for p = " + std::to_string(fields()));
}

BetaCoefficients ParameterVector::betas(int field) const {
  return BetaCoefficients::from_parameters(alpha[field], gamma[field], delta_upper, delta_lower);
}

MarginalSpec ParameterVector::marginal(int field) const { return MarginalSpec(betas(field)); }

void ParameterVector::validate() const {
  const int p = fields();
  if (p < 1) throw DomainError("at least one field required");
  if (gamma.size() != p || range.size() != p) throw DomainError("alpha, gamma and lambda need p entries");
  if (!fixed.empty() && fixed.size() != size()) throw DomainError("fixed mask has wrong length");
  const auto flat = flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double v = flat[k];
    bool ok = std::isfinite(v);
    switch (role(k)) {
      case ParameterRole::alpha:
      case ParameterRole::range: ok = ok && v > 0.0; break;
      case ParameterRole::gamma:
      case ParameterRole::delta_upper:
      case ParameterRole::delta_lower: ok = ok && v >= 0.0 && v <= 1.0; break;
      case ParameterRole::rho: ok = ok && v >= -1.0 && v <= 1.0; break;
    }
    if (!ok) throw DomainError("parameter " + name(k) + " = " + std::to_string(v) + " outside its domain");
  }
  if (p != 2) {
    const auto l = coregionalization();
    for (int i = 0; i < p; ++i) {
      if (std::fabs(l.row(i).squaredNorm() - 1.0) > 1e-9) {
        throw DomainError("LMC row " + std::to_string(i + 1) + " must have unit norm");
      }
    }
  }
}

// ---------------------------------------------------------------- transforms

double to_unconstrained_value(ParameterRole role, double v) {
  switch (role) {
    case ParameterRole::alpha:
    case ParameterRole::range: return std::log(v);
    case ParameterRole::gamma:
    case ParameterRole::delta_upper:
    case ParameterRole::delta_lower: return std::log(v) - std::log1p(-v);
    case ParameterRole::rho: {
      const double s = 0.5 * (v + 1.0);
      return std::log(s) - std::log1p(-s);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double from_unconstrained_value(ParameterRole role, double x) {
  switch (role) {
    case ParameterRole::alpha:
    case ParameterRole::range: return std::exp(x);
    case ParameterRole::gamma:
    case ParameterRole::delta_upper:
    case ParameterRole::delta_lower: return logistic(x);
    case ParameterRole::rho: return 2.0 * logistic(x) - 1.0;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double log_jacobian_value(ParameterRole role, double x) {
  switch (role) {
    case ParameterRole::alpha:
    case ParameterRole::range: return x;
    case ParameterRole::gamma:
    case ParameterRole::delta_upper:
    case ParameterRole::delta_lower: return -softplus(x) - softplus(-x);
    case ParameterRole::rho: return M_LN2 - softplus(x) - softplus(-x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

ParameterTransform::ParameterTransform(ParameterVector reference) : reference_(std::move(reference)) {
  for (std::size_t k = 0; k < reference_.size(); ++k) {
    if (!reference_.is_fixed(k)) free_.push_back(k);
  }
}

Eigen::VectorXd ParameterTransform::to_unconstrained(const ParameterVector& theta) const {
  theta.validate();
  const auto flat = theta.flatten();
  Eigen::VectorXd star(static_cast<Eigen::Index>(free_.size()));
  for (std::size_t m = 0; m < free_.size(); ++m) {
    const std::size_t k = free_[m];
    const auto role = theta.role(k);
    const double v = flat[k];
    const bool boundary = (role == ParameterRole::rho) ? std::fabs(v) >= 1.0
                          : (role == ParameterRole::alpha || role == ParameterRole::range)
                              ? v <= 0.0
                              : (v <= 0.0 || v >= 1.0);
    if (boundary) {
      throw DomainError("parameter " + theta.name(k) + " = " + std::to_string(v) +
                        " lies on its domain boundary and cannot be transformed");
    }
    star[static_cast<Eigen::Index>(m)] = to_unconstrained_value(role, v);
  }
  return star;
}

ParameterVector ParameterTransform::from_unconstrained(const Eigen::VectorXd& theta_star) const {
  if (static_cast<std::size_t>(theta_star.size()) != free_.size()) {
    throw std::invalid_argument("from_unconstrained: dimension mismatch");
  }
  ParameterVector theta = reference_;
  auto flat = theta.flatten();
  for (std::size_t m = 0; m < free_.size(); ++m) {
    const std::size_t k = free_[m];
    flat[k] = from_unconstrained_value(theta.role(k), theta_star[static_cast<Eigen::Index>(m)]);
  }
  theta.assign(flat);
  return theta;
}

double ParameterTransform::log_jacobian(const Eigen::VectorXd& theta_star) const {
  double total = 0.0;
  for (std::size_t m = 0; m < free_.size(); ++m) {
    total += log_jacobian_value(reference_.role(free_[m]), theta_star[static_cast<Eigen::Index>(m)]);
  }
  return total;
}

// ---------------------------------------------------------------- latents

double latent_sum(const BetaCoefficients& b, const Eigen::Ref<const Eigen::VectorXd>& block, int field) {
  return b.upper_shared * block[latent::shared_upper] + b.upper_field * block[latent::field_upper(field)] -
         b.lower_shared * block[latent::shared_lower] - b.lower_field * block[latent::field_lower(field)];
}

// ---------------------------------------------------------------- tails

const char* to_string(TailClass c) {
  switch (c) {
    case TailClass::AD: return "AD";
    case TailClass::AI: return "AI";
    case TailClass::BOUNDARY: return "BOUNDARY";
  }
  return "?";
}

namespace {

constexpr double kBoundaryTolerance = 1e-12;

TailCondition compare(double lhs, double threshold) {
  TailCondition c;
  c.lhs = lhs;
  c.threshold = threshold;
  if (!std::isfinite(threshold)) {
    c.label = TailClass::AI;
    return c;
  }
  if (std::fabs(lhs - threshold) <= kBoundaryTolerance * std::max(std::fabs(lhs), std::fabs(threshold))) {
    c.label = TailClass::BOUNDARY;
  } else {
    c.label = lhs > threshold ? TailClass::AD : TailClass::AI;
  }
  return c;
}

// 1 / weight, infinite when the latent term is absent.
double inverse_weight(double w) {
  return w > 0.0 ? 1.0 / w : std::numeric_limits<double>::infinity();
}

}  // namespace

TailReport classify_tails(const ParameterVector& theta) {
  theta.validate();
  const int p = theta.fields();
  const double du = theta.delta_upper;
  const double dl = theta.delta_lower;
  std::vector<double> inv_upper(static_cast<std::size_t>(p));
  std::vector<double> inv_lower(static_cast<std::size_t>(p));
  TailReport report;
  for (int i = 0; i < p; ++i) {
    inv_upper[i] = inverse_weight(theta.alpha[i] * theta.gamma[i]);
    inv_lower[i] = inverse_weight(theta.alpha[i] * (1.0 - theta.gamma[i]));
    auto up = compare(std::max(du, 1.0 - du), inv_upper[i]);
    auto lo = compare(std::max(dl, 1.0 - dl), inv_lower[i]);
    if (!std::isfinite(inv_upper[i])) up.note = "gamma = 0: upper latent term absent";
    if (!std::isfinite(inv_lower[i])) lo.note = "gamma = 1: lower latent term absent";
    report.upper.push_back(std::move(up));
    report.lower.push_back(std::move(lo));
  }
  for (int a = 0; a < p; ++a) {
    for (int b = a + 1; b < p; ++b) {
      CrossTail cross;
      cross.first = a;
      cross.second = b;
      cross.upper = compare(du, std::max({inv_upper[a], inv_upper[b], 0.5}));
      cross.lower = compare(dl, std::max({inv_lower[a], inv_lower[b], 0.5}));
      if (!std::isfinite(cross.upper.threshold)) cross.upper.note = "upper latent term absent in a field";
      if (!std::isfinite(cross.lower.threshold)) cross.lower.note = "lower latent term absent in a field";
      report.cross.push_back(std::move(cross));
    }
  }
  return report;
}

}  // namespace mfcopula

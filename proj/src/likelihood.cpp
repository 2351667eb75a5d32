#include "mfcopula/likelihood.hpp"

#include <cmath>
#include <limits>

#include "mfcopula/error.hpp"
#include "mfcopula/normal.hpp"

namespace mfcopula {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Phi^{-1}(F_W(w)) using the Laplace tail nearest to w.
double gaussian_score(double w) {
  if (w < 0.0) return normal_quantile(0.5 * std::exp(w));
  return -normal_quantile(0.5 * std::exp(-w));
}

bool same_margin(const ParameterVector& a, const ParameterVector& b, int i) {
  return a.alpha[i] == b.alpha[i] && a.gamma[i] == b.gamma[i] && a.delta_upper == b.delta_upper &&
         a.delta_lower == b.delta_lower;
}

bool same_covariance(const ParameterVector& a, const ParameterVector& b) {
  return a.range == b.range && a.coregionalization() == b.coregionalization();
}

}  // namespace

// ---------------------------------------------------------------- priors

double Prior::log_density(double v) const {
  switch (family) {
    case Family::exponential: return v >= 0.0 ? std::log(a) - a * v : kNegInf;
    case Family::uniform: return (v >= a && v <= b) ? -std::log(b - a) : kNegInf;
    case Family::flat: return 0.0;
  }
  return kNegInf;
}

double Prior::median() const {
  switch (family) {
    case Family::exponential: return M_LN2 / a;
    case Family::uniform: return 0.5 * (a + b);
    case Family::flat: return std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

PriorSpec PriorSpec::defaults(const ParameterVector& theta) {
  PriorSpec spec;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    switch (theta.role(k)) {
      case ParameterRole::alpha:
      case ParameterRole::range: spec.entries.push_back(Prior::exponential(1.0)); break;
      case ParameterRole::rho: spec.entries.push_back(Prior::uniform(-1.0, 1.0)); break;
      default: spec.entries.push_back(Prior::uniform(0.0, 1.0)); break;
    }
  }
  return spec;
}

PriorSpec PriorSpec::flat(const ParameterVector& theta) {
  return PriorSpec{std::vector<Prior>(theta.size(), Prior::flat())};
}

ParameterVector initial_parameters(const ParameterVector& reference, const PriorSpec& priors) {
  if (priors.entries.size() != reference.size()) throw ConfigError("prior spec has wrong length");
  ParameterVector theta = reference;
  auto flat = theta.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (reference.is_fixed(k)) continue;
    const double median = priors.entries[k].median();
    if (std::isfinite(median)) flat[k] = median;
  }
  theta.assign(flat);
  return theta;
}

Eigen::MatrixXd initial_latents(int fields, Eigen::Index replicates) {
  return Eigen::MatrixXd::Ones(latent::block_size(fields), replicates);
}

// ---------------------------------------------------------------- posterior

CopulaPosterior::CopulaPosterior(const Dataset& data, ParameterVector reference, PriorSpec priors,
                                 Execution execution)
    : data_(&data), transform_(std::move(reference)), priors_(std::move(priors)), execution_(execution) {
  data.validate();
  const auto& ref = transform_.reference();
  if (ref.fields() != data.fields()) throw ConfigError("parameter vector and data disagree on p");
  if (priors_.entries.size() != ref.size()) throw ConfigError("prior spec has wrong length");
}

double CopulaPosterior::log_prior(const ParameterVector& theta, const Eigen::VectorXd& theta_star) const {
  const auto flat = theta.flatten();
  double total = transform_.log_jacobian(theta_star);
  for (std::size_t k : transform_.free_indices()) total += priors_.entries[k].log_density(flat[k]);
  return total;
}

ThetaCache CopulaPosterior::prepare(const Eigen::VectorXd& theta_star, const ThetaCache* previous) const {
  ParameterVector theta = transform_.from_unconstrained(theta_star);
  return build(std::move(theta), theta_star, previous);
}

ThetaCache CopulaPosterior::prepare_natural(const ParameterVector& theta, const ThetaCache* previous) const {
  return build(theta, Eigen::VectorXd(), previous);
}

ThetaCache CopulaPosterior::build(ParameterVector theta, Eigen::VectorXd theta_star,
                                  const ThetaCache* previous) const {
  const Dataset& data = *data_;
  const int p = data.fields();
  const Eigen::Index d = data.site_count();
  const Eigen::Index n = data.replicates();

  ThetaCache cache;
  cache.theta = std::move(theta);
  cache.theta_star = std::move(theta_star);
  cache.log_prior = cache.theta_star.size() > 0 || transform_.dimension() == 0
                        ? log_prior(cache.theta, cache.theta_star)
                        : 0.0;
  try {
    cache.theta.validate();
  } catch (const DomainError& e) {
    cache.finite = false;
    cache.failure = e.what();
    return cache;
  }
  if (!std::isfinite(cache.log_prior)) {
    cache.finite = false;
    cache.failure = "prior density is zero";
    return cache;
  }

  // Covariance factor depends on ranges and the LMC only.
  if (previous && previous->covariance && same_covariance(previous->theta, cache.theta)) {
    cache.covariance = previous->covariance;
  } else {
    try {
      const auto ranges = cache.theta.range;
      cache.covariance = std::make_shared<const CovarianceModel>(assemble_lmc(
          data.sites.distances(), std::span<const double>(ranges.data(), static_cast<std::size_t>(p)),
          cache.theta.coregionalization()));
    } catch (const AssemblyError& e) {
      cache.finite = false;
      cache.failure = e.what();
      return cache;
    }
  }

  cache.quantiles.resize(p * d, n);
  Eigen::MatrixXd log_density(p * d, n);
  std::vector<MarginalSpec> margins;
  std::vector<bool> reuse(static_cast<std::size_t>(p), false);
  for (int i = 0; i < p; ++i) {
    cache.betas.push_back(cache.theta.betas(i));
    margins.emplace_back(cache.betas.back());
    reuse[i] = previous && previous->finite && previous->quantiles.rows() == p * d &&
               same_margin(previous->theta, cache.theta, i);
  }

  // Entry e = k * (p d) + r, replicate-major so work splits evenly.
  const Eigen::Index rows = p * d;
  try {
    for_each_index(rows * n, execution_, [&](std::ptrdiff_t e) {
      const Eigen::Index k = e / rows;
      const Eigen::Index r = e % rows;
      const int i = static_cast<int>(r / d);
      if (reuse[i]) {
        cache.quantiles(r, k) = previous->quantiles(r, k);
      } else {
        cache.quantiles(r, k) = marginal_quantile(data.scores(r, k), margins[i]);
      }
      log_density(r, k) = marginal_log_pdf(cache.quantiles(r, k), margins[i]);
    });
  } catch (const InternalError& e) {
    cache.finite = false;
    cache.failure = e.what();
    return cache;
  }
  cache.marginal_log_density.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) s += log_density(r, k);
    cache.marginal_log_density[k] = s;
  }
  if (!std::isfinite(cache.marginal_log_density.sum())) {
    cache.finite = false;
    cache.failure = "marginal density vanishes at a data quantile";
  }
  return cache;
}

LatentEvaluation CopulaPosterior::evaluate(const ThetaCache& cache, const Eigen::MatrixXd& latent_star,
                                           bool with_gradient) const {
  const Dataset& data = *data_;
  const int p = data.fields();
  const Eigen::Index d = data.site_count();
  const Eigen::Index n = data.replicates();
  const Eigen::Index rows = p * d;
  if (latent_star.rows() != latent::block_size(p) || latent_star.cols() != n) {
    throw std::invalid_argument("evaluate: latent matrix must be 2(p+1) x n");
  }

  LatentEvaluation out;
  out.replicate_log_likelihood.resize(n);
  out.replicate_latent_prior.resize(n);
  if (with_gradient) out.gradient.resize(latent_star.rows(), n);

  if (!cache.finite) {
    out.replicate_log_likelihood.setConstant(kNegInf);
    out.replicate_latent_prior.setZero();
    out.log_likelihood = out.log_posterior = kNegInf;
    if (with_gradient) out.gradient.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }

  const auto& factor = cache.covariance->factor();
  const double half_log_det = 0.5 * cache.covariance->log_determinant();

  for_each_index(n, execution_, [&](std::ptrdiff_t k) {
    const Eigen::VectorXd r_star = latent_star.col(k);
    const Eigen::VectorXd r = r_star.unaryExpr([](double v) { return std::exp(v); });
    out.replicate_latent_prior[k] = (r_star - r).sum();

    Eigen::VectorXd w(rows), z(rows);
    double log_fw = 0.0;
    double score_sq = 0.0;
    for (int i = 0; i < p; ++i) {
      const double t = latent_sum(cache.betas[i], r, i);
      for (Eigen::Index j = 0; j < d; ++j) {
        const Eigen::Index row = i * d + j;
        w[row] = cache.quantiles(row, k) - t;
        z[row] = gaussian_score(w[row]);
        log_fw += laplace_log_pdf(w[row]);
        score_sq += z[row] * z[row];
      }
    }
    // y = G^{-1} z, so z' Sigma^{-1} z = y' y.
    Eigen::VectorXd y = factor.triangularView<Eigen::Lower>().solve(z);
    const double quad = y.squaredNorm();
    // -log phi(z) = z^2/2 + log sqrt(2 pi) cancels the constant of phi_pd.
    double ll = -0.5 * quad - half_log_det + 0.5 * score_sq + log_fw - cache.marginal_log_density[k];
    if (!std::isfinite(ll)) ll = kNegInf;
    out.replicate_log_likelihood[k] = ll;

    if (!with_gradient) return;
    auto grad = out.gradient.col(k);
    if (ll == kNegInf) {
      grad.setConstant(std::numeric_limits<double>::quiet_NaN());
      return;
    }
    const Eigen::VectorXd s = factor.transpose().triangularView<Eigen::Upper>().solve(y);  // Sigma^{-1} z
    grad.setZero();
    for (int i = 0; i < p; ++i) {
      double d_t = 0.0;  // d loglik / d T_i
      for (Eigen::Index j = 0; j < d; ++j) {
        const Eigen::Index row = i * d + j;
        const double dz_dw = std::exp(laplace_log_pdf(w[row]) - normal_log_pdf(z[row]));
        const double sign = w[row] > 0.0 ? 1.0 : (w[row] < 0.0 ? -1.0 : 0.0);
        const double d_w = (z[row] - s[row]) * dz_dw - sign;
        d_t -= d_w;
      }
      const auto& b = cache.betas[i];
      grad[latent::shared_upper] += d_t * b.upper_shared;
      grad[latent::shared_lower] -= d_t * b.lower_shared;
      grad[latent::field_upper(i)] += d_t * b.upper_field;
      grad[latent::field_lower(i)] -= d_t * b.lower_field;
    }
    // Chain rule through R = exp(R*), plus the prior term 1 - exp(R*).
    grad = (grad.array() * r.array() + 1.0 - r.array()).matrix();
  });

  for (Eigen::Index k = 0; k < n; ++k) {
    out.log_likelihood += out.replicate_log_likelihood[k];
    out.log_latent_prior += out.replicate_latent_prior[k];
  }
  out.log_posterior = out.log_likelihood + out.log_latent_prior + cache.log_prior;
  if (std::isnan(out.log_posterior)) out.log_posterior = kNegInf;
  return out;
}

double log_likelihood(const Dataset& data, const ParameterVector& theta, const Eigen::MatrixXd& latents,
                      Execution execution) {
  if ((latents.array() <= 0.0).any()) throw DomainError("log_likelihood: latent variables must be positive");
  CopulaPosterior posterior(data, theta, PriorSpec::flat(theta), execution);
  const auto cache = posterior.prepare_natural(theta);
  if (!cache.finite) {
    if (cache.failure.find("positive definite") != std::string::npos) throw AssemblyError(cache.failure);
    return kNegInf;
  }
  const Eigen::MatrixXd latent_star = latents.array().log().matrix();
  return posterior.evaluate(cache, latent_star, false).log_likelihood;
}

double log_posterior(const CopulaPosterior& posterior, const ThetaCache& cache, const Eigen::MatrixXd& latent_star) {
  return posterior.evaluate(cache, latent_star, false).log_posterior;
}

Eigen::MatrixXd grad_latent(const CopulaPosterior& posterior, const ThetaCache& cache,
                            const Eigen::MatrixXd& latent_star) {
  return posterior.evaluate(cache, latent_star, true).gradient;
}

}  // namespace mfcopula

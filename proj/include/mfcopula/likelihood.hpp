#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "mfcopula/dataset.hpp"
#include "mfcopula/execution.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/spatial.hpp"

namespace mfcopula {

struct Prior {
  enum class Family { exponential, uniform, flat };
  Family family = Family::flat;
  double a = 1.0;  // rate, or lower bound
  double b = 1.0;  // upper bound

  static Prior exponential(double rate) { return {Family::exponential, rate, 0.0}; }
  static Prior uniform(double lo, double hi) { return {Family::uniform, lo, hi}; }
  static Prior flat() { return {Family::flat, 0.0, 0.0}; }

  double log_density(double value) const;
  double median() const;
};

// One prior per flat parameter entry.
struct PriorSpec {
  std::vector<Prior> entries;

  // Exp(1) on positive entries, uniform on bounded ones.
  static PriorSpec defaults(const ParameterVector& theta);
  static PriorSpec flat(const ParameterVector& theta);
};

// Prior medians for the free entries; fixed entries (and entries with a
// flat prior) keep the reference value.
ParameterVector initial_parameters(const ParameterVector& reference, const PriorSpec& priors);
// R = 1 for every latent (log-scale zero).
Eigen::MatrixXd initial_latents(int fields, Eigen::Index replicates);

// Everything that depends on theta alone. Built once per theta proposal and
// reused across latent updates.
struct ThetaCache {
  Eigen::VectorXd theta_star;
  ParameterVector theta;
  std::vector<BetaCoefficients> betas;
  Eigen::MatrixXd quantiles;            // (F_i^X)^{-1}(u), field-major x replicate
  Eigen::VectorXd marginal_log_density; // per replicate: sum log f_i^X(quantile)
  std::shared_ptr<const CovarianceModel> covariance;
  double log_prior = 0.0;               // log pi(theta*) including the Jacobian
  bool finite = true;
  std::string failure;                  // why finite == false
};

struct LatentEvaluation {
  double log_likelihood = 0.0;
  double log_latent_prior = 0.0;
  double log_posterior = 0.0;
  Eigen::VectorXd replicate_log_likelihood;
  Eigen::VectorXd replicate_latent_prior;
  Eigen::MatrixXd gradient;  // d log posterior / d R*, shaped like the latents; empty if not requested
};

// Conditional Gaussian-copula posterior over (theta*, R*_1..R*_n), where
// R* = log R componentwise.
class CopulaPosterior {
 public:
  CopulaPosterior(const Dataset& data, ParameterVector reference, PriorSpec priors,
                  Execution execution = Execution::parallel);

  const Dataset& data() const { return *data_; }
  const ParameterTransform& transform() const { return transform_; }
  const PriorSpec& priors() const { return priors_; }
  Execution execution() const { return execution_; }

  // `previous` lets unchanged pieces (covariance factor, per-field
  // quantiles) be reused; results are identical either way.
  ThetaCache prepare(const Eigen::VectorXd& theta_star, const ThetaCache* previous = nullptr) const;
  // Natural-scale entry point; theta_star is left empty and log_prior = 0.
  ThetaCache prepare_natural(const ParameterVector& theta, const ThetaCache* previous = nullptr) const;

  LatentEvaluation evaluate(const ThetaCache& cache, const Eigen::MatrixXd& latent_star,
                            bool with_gradient) const;

  double log_prior(const ParameterVector& theta, const Eigen::VectorXd& theta_star) const;

 private:
  ThetaCache build(ParameterVector theta, Eigen::VectorXd theta_star, const ThetaCache* previous) const;

  const Dataset* data_;
  ParameterTransform transform_;
  PriorSpec priors_;
  Execution execution_;
};

// sum_k [ log phi_pd(z_k; 0, Sigma) + sum_ij ( log f_W(w) - log f_i^X(x) - log phi(z) ) ]
// for natural-scale latents (2(p+1) x n).
double log_likelihood(const Dataset& data, const ParameterVector& theta, const Eigen::MatrixXd& latents,
                      Execution execution = Execution::parallel);

double log_posterior(const CopulaPosterior& posterior, const ThetaCache& cache, const Eigen::MatrixXd& latent_star);

Eigen::MatrixXd grad_latent(const CopulaPosterior& posterior, const ThetaCache& cache,
                            const Eigen::MatrixXd& latent_star);

}  // namespace mfcopula

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mfcopula/dataset.hpp"
#include "mfcopula/execution.hpp"
#include "mfcopula/likelihood.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/rng.hpp"

namespace mfcopula {

enum class LatentBlocking { joint, per_replicate };

struct SamplerConfig {
  std::int64_t iterations = 50000;     // N
  std::int64_t burn_in = 10000;        // N_b
  std::int64_t adapt_interval = 100;   // N_0
  double adapt_scale = 10.0;           // b
  double target_rw = 0.234;
  double target_mala = 0.574;
  double sigma_rw = 0.1;
  double sigma_mala = 0.1;
  std::int64_t thinning = 10;
  std::uint64_t seed = 1;
  bool store_latents = false;
  LatentBlocking blocking = LatentBlocking::joint;

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::int64_t stored_samples() const { return (iterations - burn_in) / thinning; }
};

struct ChainOutput {
  ParameterVector reference;               // fixed mask and fixed values
  std::vector<std::string> names;          // all entries, natural scale
  std::vector<std::string> free_names;
  Eigen::MatrixXd theta;                   // stored samples x reference.size(), natural scale
  Eigen::MatrixXd theta_star;              // stored samples x M
  Eigen::VectorXd log_posterior;           // per stored sample
  std::vector<Eigen::MatrixXd> latents;    // natural scale, only if requested

  // Acceptance rate of each block over consecutive windows of N_0
  // iterations, and the step sizes in force at the end of each window.
  std::vector<double> window_rate_rw;
  std::vector<double> window_rate_mala;
  std::vector<double> window_sigma_rw;
  std::vector<double> window_sigma_mala;

  double sigma_rw_burn_in = 0.0;           // step sizes at t = N_b
  double sigma_mala_burn_in = 0.0;
  double sigma_rw = 0.0;                   // at t = N
  double sigma_mala = 0.0;
  double acceptance_rw = 0.0;              // post burn-in; NaN when M = 0
  double acceptance_mala = 0.0;

  Eigen::VectorXd ess;                     // per free coordinate of theta*
  Eigen::VectorXd split_rhat;

  std::int64_t nonfinite_rw = 0;           // proposals with a non-finite posterior
  std::int64_t nonfinite_mala = 0;         // including non-finite gradients

  ParameterVector final_theta;
  Eigen::MatrixXd final_latents;           // natural scale
  SamplerConfig config;
};

// theta*' = theta* + sigma eps.
Eigen::VectorXd rw_propose(const Eigen::VectorXd& theta_star, double sigma, Engine& rng);

// R*' = R* + (sigma^2 / 2) grad + sigma eps.
Eigen::MatrixXd mala_propose(const Eigen::MatrixXd& current, const Eigen::MatrixXd& gradient, double sigma,
                             Engine& rng);

// log q(to | from) up to the constant shared by forward and backward moves:
// -|to - from - (sigma^2/2) grad(from)|^2 / (2 sigma^2).
double mala_log_proposal_density(const Eigen::Ref<const Eigen::MatrixXd>& to,
                                 const Eigen::Ref<const Eigen::MatrixXd>& from,
                                 const Eigen::Ref<const Eigen::MatrixXd>& gradient_from, double sigma);

// log of the MALA acceptance ratio.
double mala_log_accept_ratio(double log_target_current, double log_target_proposal,
                             const Eigen::Ref<const Eigen::MatrixXd>& current,
                             const Eigen::Ref<const Eigen::MatrixXd>& proposal,
                             const Eigen::Ref<const Eigen::MatrixXd>& gradient_current,
                             const Eigen::Ref<const Eigen::MatrixXd>& gradient_proposal, double sigma);

// Draws U ~ Unif(0, 1) and accepts when log U <= log_ratio. NaN rejects.
bool metropolis_accept(double log_ratio, Engine& rng);

// sigma exp((a0 - target) / b).
double adapt_sigma(double sigma, double observed_rate, double target_rate, double scale);

// Effective sample size by Geyer's initial positive sequence.
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& draws);
// Potential scale reduction from the two halves of one chain.
double split_rhat(const Eigen::Ref<const Eigen::VectorXd>& draws);

// Adaptive RW-MH on theta* with MALA on R*. `initial` carries the fixed
// mask; `latents` are natural scale (2(p+1) x n).
ChainOutput run_chain(const Dataset& data, const ParameterVector& initial, const Eigen::MatrixXd& latents,
                      const PriorSpec& priors, const SamplerConfig& config,
                      Execution execution = Execution::parallel);

// Posterior summaries of stored natural-scale samples.
struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};
std::vector<ParameterSummary> summarize(const ChainOutput& chain);

// Sample quantile with linear interpolation (type 7).
double sample_quantile(std::vector<double> values, double prob);

// Natural-scale parameter vector of stored sample s.
ParameterVector sample_parameters(const ChainOutput& chain, Eigen::Index s);

}  // namespace mfcopula

#include "mfcopula/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfcopula/error.hpp"
#include "mfcopula/simulate.hpp"

namespace mfcopula {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool all_finite(const Eigen::MatrixXd& m) { return m.size() == 0 || m.allFinite(); }

}  // namespace

void SamplerConfig::validate() const {
  if (iterations < 1) throw ConfigError("sampler: iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("sampler: burn_in must satisfy 0 <= N_b < N");
  if (adapt_interval < 1) throw ConfigError("sampler: adapt_interval must be positive");
  if (burn_in > 0 && adapt_interval >= burn_in) throw ConfigError("sampler: adapt_interval must be below burn_in");
  if (!(adapt_scale > 0.0)) throw ConfigError("sampler: adapt_scale must be positive");
  if (!(target_rw > 0.0 && target_rw < 1.0)) throw ConfigError("sampler: target_rw must lie in (0, 1)");
  if (!(target_mala > 0.0 && target_mala < 1.0)) throw ConfigError("sampler: target_mala must lie in (0, 1)");
  if (!(sigma_rw > 0.0)) throw ConfigError("sampler: sigma_rw must be positive");
  if (!(sigma_mala > 0.0)) throw ConfigError("sampler: sigma_mala must be positive");
  if (thinning < 1) throw ConfigError("sampler: thinning must be positive");
}

Eigen::VectorXd rw_propose(const Eigen::VectorXd& theta_star, double sigma, Engine& rng) {
  Eigen::VectorXd out(theta_star.size());
  for (Eigen::Index m = 0; m < out.size(); ++m) out[m] = theta_star[m] + sigma * standard_normal(rng);
  return out;
}

Eigen::MatrixXd mala_propose(const Eigen::MatrixXd& current, const Eigen::MatrixXd& gradient, double sigma,
                             Engine& rng) {
  const double drift = 0.5 * sigma * sigma;
  Eigen::MatrixXd out(current.rows(), current.cols());
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    for (Eigen::Index m = 0; m < out.rows(); ++m) {
      out(m, k) = current(m, k) + drift * gradient(m, k) + sigma * standard_normal(rng);
    }
  }
  return out;
}

double mala_log_proposal_density(const Eigen::Ref<const Eigen::MatrixXd>& to,
                                 const Eigen::Ref<const Eigen::MatrixXd>& from,
                                 const Eigen::Ref<const Eigen::MatrixXd>& gradient_from, double sigma) {
  const double s2 = sigma * sigma;
  return -(to - from - 0.5 * s2 * gradient_from).squaredNorm() / (2.0 * s2);
}

double mala_log_accept_ratio(double log_target_current, double log_target_proposal,
                             const Eigen::Ref<const Eigen::MatrixXd>& current,
                             const Eigen::Ref<const Eigen::MatrixXd>& proposal,
                             const Eigen::Ref<const Eigen::MatrixXd>& gradient_current,
                             const Eigen::Ref<const Eigen::MatrixXd>& gradient_proposal, double sigma) {
  return log_target_proposal - log_target_current +
         mala_log_proposal_density(current, proposal, gradient_proposal, sigma) -
         mala_log_proposal_density(proposal, current, gradient_current, sigma);
}

bool metropolis_accept(double log_ratio, Engine& rng) {
  const double u = open_uniform(rng);
  if (std::isnan(log_ratio)) return false;
  return std::log(u) <= log_ratio;
}

double adapt_sigma(double sigma, double observed_rate, double target_rate, double scale) {
  return sigma * std::exp((observed_rate - target_rate) / scale);
}

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& draws) {
  const Eigen::Index n = draws.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = draws.mean();
  const Eigen::VectorXd c = draws.array() - mean;
  const double var = c.squaredNorm() / static_cast<double>(n);
  if (!(var > 0.0)) return static_cast<double>(n);
  auto autocorr = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / (static_cast<double>(n) * var);
  };
  // Sum of autocorrelation pairs while they stay positive.
  double sum = 0.0;
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    const double pair = autocorr(2 * m) + autocorr(2 * m + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

double split_rhat(const Eigen::Ref<const Eigen::VectorXd>& draws) {
  const Eigen::Index half = draws.size() / 2;
  if (half < 2) return kNaN;
  const Eigen::VectorXd a = draws.head(half);
  const Eigen::VectorXd b = draws.segment(draws.size() - half, half);
  const double n = static_cast<double>(half);
  const double ma = a.mean(), mb = b.mean();
  const double va = (a.array() - ma).square().sum() / (n - 1.0);
  const double vb = (b.array() - mb).square().sum() / (n - 1.0);
  const double w = 0.5 * (va + vb);
  const double m = 0.5 * (ma + mb);
  const double between = n * ((ma - m) * (ma - m) + (mb - m) * (mb - m));
  if (!(w > 0.0)) return kNaN;
  const double var_plus = (n - 1.0) / n * w + between / n;
  return std::sqrt(var_plus / w);
}

ChainOutput run_chain(const Dataset& data, const ParameterVector& initial, const Eigen::MatrixXd& latents,
                      const PriorSpec& priors, const SamplerConfig& config, Execution execution) {
  config.validate();
  const int p = data.fields();
  const Eigen::Index n = data.replicates();
  if (latents.rows() != latent::block_size(p) || latents.cols() != n) {
    throw DomainError("run_chain: initial latents must be 2(p+1) x n");
  }
  if ((latents.array() <= 0.0).any() || !latents.allFinite()) {
    throw DomainError("run_chain: initial latents must be positive and finite");
  }
  initial.validate();

  CopulaPosterior posterior(data, initial, priors, execution);
  const auto& transform = posterior.transform();
  const Eigen::Index M = static_cast<Eigen::Index>(transform.dimension());

  Eigen::VectorXd theta_star = transform.to_unconstrained(initial);
  ThetaCache cache = posterior.prepare(theta_star);
  Eigen::MatrixXd latent_star = latents.array().log().matrix();
  LatentEvaluation current = posterior.evaluate(cache, latent_star, true);
  if (!std::isfinite(current.log_posterior)) {
    throw DomainError("run_chain: initial state has a non-finite log posterior" +
                      (cache.failure.empty() ? std::string() : " (" + cache.failure + ")"));
  }

  ChainOutput out;
  out.config = config;
  out.reference = initial;
  out.names = initial.names();
  for (std::size_t k : transform.free_indices()) out.free_names.push_back(initial.name(k));
  const std::int64_t stored = config.stored_samples();
  out.theta.resize(stored, static_cast<Eigen::Index>(initial.size()));
  out.theta_star.resize(stored, M);
  out.log_posterior.resize(stored);

  Engine rng = make_engine(config.seed, 0);
  double sigma_rw = config.sigma_rw;
  double sigma_mala = config.sigma_mala;
  std::int64_t window_rw = 0, window_mala = 0;
  std::int64_t post_rw = 0, post_mala = 0;
  double window_mala_trials = 0.0, post_mala_trials = 0.0;
  std::int64_t next_store = 0;

  for (std::int64_t t = 1; t <= config.iterations; ++t) {
    // Block 1: random-walk update of theta*.
    if (M > 0) {
      const Eigen::VectorXd proposal = rw_propose(theta_star, sigma_rw, rng);
      ThetaCache proposed_cache = posterior.prepare(proposal, &cache);
      LatentEvaluation proposed = posterior.evaluate(proposed_cache, latent_star, true);
      if (!std::isfinite(proposed.log_posterior)) ++out.nonfinite_rw;
      if (metropolis_accept(proposed.log_posterior - current.log_posterior, rng)) {
        theta_star = proposal;
        cache = std::move(proposed_cache);
        current = std::move(proposed);
        ++window_rw;
        if (t > config.burn_in) ++post_rw;
      }
    }

    // Block 2: MALA update of R*.
    if (!all_finite(current.gradient)) {
      ++out.nonfinite_mala;
      window_mala_trials += config.blocking == LatentBlocking::joint ? 1.0 : static_cast<double>(n);
      if (t > config.burn_in) post_mala_trials += config.blocking == LatentBlocking::joint ? 1.0 : static_cast<double>(n);
    } else {
      const Eigen::MatrixXd proposal = mala_propose(latent_star, current.gradient, sigma_mala, rng);
      LatentEvaluation proposed = posterior.evaluate(cache, proposal, true);
      const bool proposal_finite = std::isfinite(proposed.log_posterior) && all_finite(proposed.gradient);
      if (!proposal_finite) ++out.nonfinite_mala;
      if (config.blocking == LatentBlocking::joint) {
        const double ratio =
            proposal_finite ? mala_log_accept_ratio(current.log_posterior, proposed.log_posterior, latent_star,
                                                    proposal, current.gradient, proposed.gradient, sigma_mala)
                            : -std::numeric_limits<double>::infinity();
        window_mala_trials += 1.0;
        if (t > config.burn_in) post_mala_trials += 1.0;
        if (metropolis_accept(ratio, rng)) {
          latent_star = proposal;
          current = std::move(proposed);
          ++window_mala;
          if (t > config.burn_in) ++post_mala;
        }
      } else {
        // Replicate blocks are conditionally independent given theta, so
        // each column is accepted on its own ratio.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double target_now = current.replicate_log_likelihood[k] + current.replicate_latent_prior[k];
          const double target_new = proposed.replicate_log_likelihood[k] + proposed.replicate_latent_prior[k];
          const bool column_finite = std::isfinite(target_new) && proposed.gradient.col(k).allFinite();
          const double ratio = column_finite
                                   ? mala_log_accept_ratio(target_now, target_new, latent_star.col(k),
                                                           proposal.col(k), current.gradient.col(k),
                                                           proposed.gradient.col(k), sigma_mala)
                                   : -std::numeric_limits<double>::infinity();
          window_mala_trials += 1.0;
          if (t > config.burn_in) post_mala_trials += 1.0;
          if (metropolis_accept(ratio, rng)) {
            latent_star.col(k) = proposal.col(k);
            current.gradient.col(k) = proposed.gradient.col(k);
            current.replicate_log_likelihood[k] = proposed.replicate_log_likelihood[k];
            current.replicate_latent_prior[k] = proposed.replicate_latent_prior[k];
            ++window_mala;
            if (t > config.burn_in) ++post_mala;
          }
        }
        current.log_likelihood = current.replicate_log_likelihood.sum();
        current.log_latent_prior = current.replicate_latent_prior.sum();
        current.log_posterior = current.log_likelihood + current.log_latent_prior + cache.log_prior;
      }
    }

    if (t % config.adapt_interval == 0) {
      const double rate_rw = M > 0 ? static_cast<double>(window_rw) / static_cast<double>(config.adapt_interval) : kNaN;
      const double rate_mala = static_cast<double>(window_mala) / window_mala_trials;
      if (t <= config.burn_in) {
        if (M > 0) sigma_rw = adapt_sigma(sigma_rw, rate_rw, config.target_rw, config.adapt_scale);
        sigma_mala = adapt_sigma(sigma_mala, rate_mala, config.target_mala, config.adapt_scale);
      }
      out.window_rate_rw.push_back(rate_rw);
      out.window_rate_mala.push_back(rate_mala);
      out.window_sigma_rw.push_back(sigma_rw);
      out.window_sigma_mala.push_back(sigma_mala);
      window_rw = window_mala = 0;
      window_mala_trials = 0.0;
    }
    if (t == config.burn_in) {
      out.sigma_rw_burn_in = sigma_rw;
      out.sigma_mala_burn_in = sigma_mala;
    }

    if (t > config.burn_in && (t - config.burn_in) % config.thinning == 0 && next_store < stored) {
      const auto flat = cache.theta.flatten();
      for (std::size_t c = 0; c < flat.size(); ++c) out.theta(next_store, static_cast<Eigen::Index>(c)) = flat[c];
      out.theta_star.row(next_store) = theta_star.transpose();
      out.log_posterior[next_store] = current.log_posterior;
      if (config.store_latents) out.latents.push_back(latent_star.array().exp().matrix());
      ++next_store;
    }
  }
  if (config.burn_in == 0) {
    out.sigma_rw_burn_in = config.sigma_rw;
    out.sigma_mala_burn_in = config.sigma_mala;
  }

  out.sigma_rw = sigma_rw;
  out.sigma_mala = sigma_mala;
  const double post_iterations = static_cast<double>(config.iterations - config.burn_in);
  out.acceptance_rw = M > 0 ? static_cast<double>(post_rw) / post_iterations : kNaN;
  out.acceptance_mala = post_mala_trials > 0.0 ? static_cast<double>(post_mala) / post_mala_trials : kNaN;

  out.ess.resize(M);
  out.split_rhat.resize(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    out.ess[m] = effective_sample_size(out.theta_star.col(m));
    out.split_rhat[m] = split_rhat(out.theta_star.col(m));
  }
  out.final_theta = cache.theta;
  out.final_latents = latent_star.array().exp().matrix();
  return out;
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ParameterSummary> summarize(const ChainOutput& chain) {
  std::vector<ParameterSummary> out;
  for (Eigen::Index c = 0; c < chain.theta.cols(); ++c) {
    ParameterSummary s;
    s.name = chain.names[static_cast<std::size_t>(c)];
    const Eigen::VectorXd col = chain.theta.col(c);
    std::vector<double> v(col.data(), col.data() + col.size());
    if (!v.empty()) {
      s.mean = col.mean();
      s.sd = v.size() > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
    } else {
      s.mean = s.sd = kNaN;
    }
    s.median = sample_quantile(v, 0.5);
    s.lower = sample_quantile(v, 0.025);
    s.upper = sample_quantile(v, 0.975);
    out.push_back(s);
  }
  return out;
}

ParameterVector sample_parameters(const ChainOutput& chain, Eigen::Index s) {
  ParameterVector theta = chain.reference;
  std::vector<double> flat(static_cast<std::size_t>(chain.theta.cols()));
  for (Eigen::Index c = 0; c < chain.theta.cols(); ++c) flat[static_cast<std::size_t>(c)] = chain.theta(s, c);
  theta.assign(flat);
  return theta;
}

}  // namespace mfcopula

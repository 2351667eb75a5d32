#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mfcopula/error.hpp"
#include "mfcopula/margins.hpp"
#include "mfcopula/sampler.hpp"
#include "mfcopula/simulate.hpp"
#include "oracles.hpp"

using namespace mfcopula;

namespace {

SiteSet one_site() { return SiteSet(Eigen::MatrixXd::Zero(1, 2)); }

ParameterVector all_fixed(ParameterVector theta) {
  for (std::size_t k = 0; k < theta.size(); ++k) theta.fix(k);
  return theta;
}

struct Estimate {
  double mean, se;
};

// Posterior mean of one latent coordinate for d = 1, p = 1 given the data
// quantile x: prior Exp(1)^4, likelihood f_W(x - T(R)).
Estimate importance_mean(const BetaCoefficients& b, double x, Eigen::Index coordinate, std::uint64_t seed) {
  Engine rng(seed);
  const int draws = 4000000;
  std::vector<double> w(draws), v(draws);
  double sw = 0.0, swv = 0.0;
  for (int k = 0; k < draws; ++k) {
    Eigen::Vector4d r;
    for (double& e : r) e = standard_exponential(rng);
    w[k] = oracle::laplace_pdf(x - latent_sum(b, r, 0));
    v[k] = r[coordinate];
    sw += w[k];
    swv += w[k] * v[k];
  }
  const double mean = swv / sw;
  double s = 0.0;
  for (int k = 0; k < draws; ++k) s += w[k] * w[k] * (v[k] - mean) * (v[k] - mean);
  return {mean, std::sqrt(s) / sw};
}

}  // namespace

TEST_CASE("adaptation rule") {
  CHECK(adapt_sigma(0.3, 0.574, 0.574, 10) == 0.3);
  CHECK(adapt_sigma(1.0, 1.0, 0.574, 10) == doctest::Approx(1.04352).epsilon(1e-5));
  CHECK(adapt_sigma(1.0, 1.0, 0.574, 10) == doctest::Approx(std::exp(0.0426)).epsilon(1e-15));
  CHECK(adapt_sigma(0.5, 0.1, 0.234, 10) < 0.5);
  CHECK(adapt_sigma(0.5, 0.0, 0.234, 10) == doctest::Approx(0.5 * std::exp(-0.0234)).epsilon(1e-15));
}

TEST_CASE("metropolis acceptance") {
  Engine a(1), b(1);
  CHECK(metropolis_accept(0.0, a));
  CHECK(metropolis_accept(std::numeric_limits<double>::infinity(), a));
  CHECK_FALSE(metropolis_accept(-std::numeric_limits<double>::infinity(), a));
  CHECK_FALSE(metropolis_accept(std::numeric_limits<double>::quiet_NaN(), a));
  for (int k = 0; k < 4; ++k) b();
  CHECK(a() == b());  // one uniform per call, whatever the outcome

  Engine rng(2);
  int accepted = 0;
  for (int k = 0; k < 100000; ++k) accepted += metropolis_accept(std::log(0.3), rng);
  CHECK(accepted / 1e5 == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("random walk proposal") {
  Engine rng(4);
  Eigen::VectorXd theta(3);
  theta << 0.3, -1.2, 2.0;
  CHECK(rw_propose(theta, 1e-300, rng) == theta);

  const double sigma = 0.7;
  const int n = 100000;
  Eigen::MatrixXd draws(n, 3);
  for (int k = 0; k < n; ++k) draws.row(k) = rw_propose(theta, sigma, rng).transpose();
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  for (int m = 0; m < 3; ++m) CHECK(std::abs(mean[m] - theta[m]) < 4 * sigma / std::sqrt(n));
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) {
        CHECK(cov(a, b) == doctest::Approx(sigma * sigma).epsilon(0.02));
      } else {
        CHECK(std::abs(cov(a, b)) < 0.01 * sigma * sigma);
      }
    }
}

TEST_CASE("mala proposal and acceptance ratio") {
  Engine rng(6);
  Eigen::MatrixXd x(3, 2), g(3, 2);
  x << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6;
  g << 1.0, -2.0, 0.5, 0.0, 3.0, 1.0;
  CHECK(mala_propose(x, g, 1e-200, rng) == x);

  // Zero gradient: symmetric kernel, ratio is the target difference.
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::MatrixXd y = mala_propose(x, zero, 0.4, rng);
  CHECK(mala_log_proposal_density(y, x, zero, 0.4) == mala_log_proposal_density(x, y, zero, 0.4));
  CHECK(mala_log_accept_ratio(-1.0, -1.5, x, y, zero, zero, 0.4) == doctest::Approx(-0.5).epsilon(1e-15));

  // Standard Gaussian target: hand-coded ratio.
  for (int rep = 0; rep < 100; ++rep) {
    const double sigma = 0.05 + open_uniform(rng);
    Eigen::MatrixXd cur(4, 3);
    for (Eigen::Index k = 0; k < cur.size(); ++k) cur.data()[k] = 2 * standard_normal(rng);
    const Eigen::MatrixXd prop = mala_propose(cur, -cur, sigma, rng);
    double hand = -0.5 * prop.squaredNorm() + 0.5 * cur.squaredNorm();
    const double c = 1 - sigma * sigma / 2;
    hand += -(cur - c * prop).squaredNorm() / (2 * sigma * sigma) + (prop - c * cur).squaredNorm() / (2 * sigma * sigma);
    const double ours =
        mala_log_accept_ratio(-0.5 * cur.squaredNorm(), -0.5 * prop.squaredNorm(), cur, prop, -cur, -prop, sigma);
    CHECK(std::abs(ours - hand) <= 1e-10 * std::max(1.0, std::abs(hand)));
  }
}

TEST_CASE("both kernels leave a gaussian target invariant") {
  Engine rng(8);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  auto log_target = [](const Eigen::VectorXd& v) { return -0.5 * v.squaredNorm(); };
  const int n = 1000000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sum_sq = Eigen::Vector2d::Zero();
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd y = rw_propose(x, 2.0, rng);
    if (metropolis_accept(log_target(y) - log_target(x), rng)) x = y;
    const Eigen::MatrixXd z = mala_propose(x, -x, 1.2, rng);
    const double r = mala_log_accept_ratio(log_target(x), log_target(z), x, z, -x, -z, 1.2);
    if (metropolis_accept(r, rng)) x = z;
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  const Eigen::Vector2d mean = sum / n;
  const Eigen::Vector2d var = sum_sq / n - mean.cwiseProduct(mean);
  for (int m = 0; m < 2; ++m) {
    CHECK(std::abs(mean[m]) < 0.02);
    CHECK(std::abs(var[m] - 1.0) < 0.05);
  }
}

TEST_CASE("chain diagnostics") {
  Engine rng(10);
  const int n = 20000;
  Eigen::VectorXd iid(n), ar(n);
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    iid[k] = standard_normal(rng);
    prev = 0.9 * prev + std::sqrt(1 - 0.81) * standard_normal(rng);
    ar[k] = prev;
  }
  CHECK(effective_sample_size(iid) == doctest::Approx(n).epsilon(0.15));
  CHECK(effective_sample_size(ar) == doctest::Approx(n * 0.1 / 1.9).epsilon(0.25));
  CHECK(split_rhat(iid) < 1.01);
  Eigen::VectorXd trend = iid + Eigen::VectorXd::LinSpaced(n, 0.0, 5.0);
  CHECK(split_rhat(trend) > 1.1);

  CHECK(sample_quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(sample_quantile({4, 1, 3, 2}, 0.25) == 1.75);
  CHECK(sample_quantile({7}, 0.975) == 7);
}

TEST_CASE("sampler configuration") {
  SamplerConfig c;
  CHECK(c.stored_samples() == 4000);
  c.iterations = 1005;
  c.burn_in = 200;
  c.thinning = 10;
  CHECK(c.stored_samples() == 80);
  c.validate();
  c.burn_in = 1005;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.burn_in = 200;
  c.adapt_interval = 300;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.adapt_interval = 100;
  c.sigma_mala = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("latent chain matches an importance-sampling oracle") {
  const auto theta = all_fixed(ParameterVector::univariate(4, 0.4, 0.8, 0.6, 1.0));
  const auto spec = theta.marginal(0);
  const double u = 0.95;
  Eigen::MatrixXd scores(1, 1);
  scores(0, 0) = u;
  const auto data = Dataset::from_scores(1, one_site(), scores);

  SamplerConfig cfg;
  cfg.iterations = 52000;
  cfg.burn_in = 2000;
  cfg.thinning = 1;
  cfg.seed = 12;
  cfg.store_latents = true;
  const auto chain = run_chain(data, theta, initial_latents(1, 1), PriorSpec::flat(theta), cfg);
  CHECK(std::isnan(chain.acceptance_rw));
  CHECK(chain.acceptance_mala > 0.3);

  const double x = marginal_quantile(u, spec);
  for (Eigen::Index coord : {latent::shared_upper, latent::shared_lower}) {
    Eigen::VectorXd draws(static_cast<Eigen::Index>(chain.latents.size()));
    for (std::size_t s = 0; s < chain.latents.size(); ++s) draws[static_cast<Eigen::Index>(s)] = chain.latents[s](coord, 0);
    const double mean = draws.mean();
    const double sd = std::sqrt((draws.array() - mean).square().sum() / (draws.size() - 1.0));
    const double mcse = sd / std::sqrt(effective_sample_size(draws));
    const auto is = importance_mean(spec.betas(), x, coord, 99);
    CAPTURE(coord);
    CAPTURE(mean);
    CAPTURE(is.mean);
    CHECK(std::abs(mean - is.mean) < 3 * std::hypot(mcse, is.se));
  }
}

TEST_CASE("per-replicate blocks target the same posterior") {
  const auto theta = all_fixed(ParameterVector::univariate(4, 0.4, 0.8, 0.6, 1.0));
  const auto spec = theta.marginal(0);
  Eigen::MatrixXd scores(1, 2);
  scores << 0.95, 0.1;
  const auto data = Dataset::from_scores(1, one_site(), scores);
  SamplerConfig cfg;
  cfg.iterations = 52000;
  cfg.burn_in = 2000;
  cfg.thinning = 1;
  cfg.seed = 13;
  cfg.store_latents = true;
  cfg.blocking = LatentBlocking::per_replicate;
  const auto chain = run_chain(data, theta, initial_latents(1, 2), PriorSpec::flat(theta), cfg);
  CHECK(chain.acceptance_mala == doctest::Approx(0.574).epsilon(0.2));
  for (Eigen::Index k = 0; k < 2; ++k) {
    Eigen::VectorXd draws(static_cast<Eigen::Index>(chain.latents.size()));
    for (std::size_t s = 0; s < chain.latents.size(); ++s) {
      draws[static_cast<Eigen::Index>(s)] = chain.latents[s](latent::shared_lower, k);
    }
    const double mean = draws.mean();
    const double sd = std::sqrt((draws.array() - mean).square().sum() / (draws.size() - 1.0));
    const double mcse = sd / std::sqrt(effective_sample_size(draws));
    const auto is = importance_mean(spec.betas(), marginal_quantile(scores(0, k), spec), latent::shared_lower, 7);
    CHECK(std::abs(mean - is.mean) < 3 * std::hypot(mcse, is.se));
  }
}

TEST_CASE("chain bookkeeping") {
  const auto truth = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  const auto sites = SiteSet::uniform_unit_square(3, 5);
  const auto data = Dataset::from_scores(2, sites, simulate(truth, sites, 10, 5).u);
  auto init = truth;
  init.fix(init.index_of("alpha1"));
  init.fix(init.index_of("alpha2"));
  const auto priors = PriorSpec::defaults(init);
  SamplerConfig cfg;
  cfg.iterations = 1200;
  cfg.burn_in = 400;
  cfg.thinning = 7;
  cfg.seed = 3;
  cfg.store_latents = true;

  const auto a = run_chain(data, init, initial_latents(2, 10), priors, cfg);
  const auto b = run_chain(data, init, initial_latents(2, 10), priors, cfg, Execution::serial);
  CHECK(a.theta.rows() == 114);
  CHECK(a.theta_star.cols() == 7);
  CHECK(a.latents.size() == 114);
  CHECK(a.theta == b.theta);
  CHECK(a.theta_star == b.theta_star);
  CHECK(a.log_posterior == b.log_posterior);
  CHECK(a.final_latents == b.final_latents);
  CHECK(a.window_rate_mala == b.window_rate_mala);
  CHECK(a.sigma_rw_burn_in == a.sigma_rw);
  CHECK(a.sigma_mala_burn_in == a.sigma_mala);
  CHECK(a.window_sigma_rw.size() == 12);
  CHECK(a.window_sigma_rw[3] == a.sigma_rw);   // last adaptation at t = N_b = 400
  CHECK(a.window_sigma_rw[2] != a.sigma_rw);
  for (Eigen::Index s = 0; s < a.theta.rows(); ++s) {
    CHECK(a.theta(s, 0) == 4.0);
    CHECK(a.theta(s, 1) == 4.0);
  }
  const auto summary = summarize(a);
  CHECK(summary.size() == 9);
  CHECK(summary[0].sd == 0.0);
  CHECK(summary[2].lower <= summary[2].median);
  CHECK(summary[2].median <= summary[2].upper);
  const auto s5 = sample_parameters(a, 5);
  CHECK(s5.gamma[0] == a.theta(5, 2));

  auto c = cfg;
  c.seed = 4;
  CHECK(run_chain(data, init, initial_latents(2, 10), priors, c).theta != a.theta);
}

TEST_CASE("rejected proposals leave the state bit-identical") {
  const auto truth = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  const auto sites = SiteSet::uniform_unit_square(3, 8);
  const auto data = Dataset::from_scores(2, sites, simulate(truth, sites, 6, 8).u);
  SamplerConfig cfg;
  cfg.iterations = 300;
  cfg.burn_in = 0;
  cfg.thinning = 1;
  cfg.sigma_rw = 1e3;
  cfg.sigma_mala = 1e3;
  cfg.store_latents = true;
  const auto chain = run_chain(data, truth, initial_latents(2, 6), PriorSpec::defaults(truth), cfg);
  CHECK(chain.acceptance_rw == 0.0);
  CHECK(chain.acceptance_mala == 0.0);
  const Eigen::VectorXd start = ParameterTransform(truth).to_unconstrained(truth);
  for (Eigen::Index s = 0; s < chain.theta_star.rows(); ++s) {
    CHECK(chain.theta_star.row(s) == start.transpose());
    CHECK(chain.latents[static_cast<std::size_t>(s)] == Eigen::MatrixXd::Ones(6, 6));
    CHECK(chain.log_posterior[s] == chain.log_posterior[0]);
  }
}

TEST_CASE("startup errors") {
  const auto truth = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  const auto sites = SiteSet::uniform_unit_square(2, 8);
  const auto data = Dataset::from_scores(2, sites, simulate(truth, sites, 3, 8).u);
  SamplerConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 5;
  cfg.adapt_interval = 2;
  CHECK_THROWS_AS(run_chain(data, truth, Eigen::MatrixXd::Ones(5, 3), PriorSpec::defaults(truth), cfg), DomainError);
  CHECK_THROWS_AS(run_chain(data, truth, -Eigen::MatrixXd::Ones(6, 3), PriorSpec::defaults(truth), cfg), DomainError);
  auto bad_prior = PriorSpec::defaults(truth);
  bad_prior.entries[0] = Prior::uniform(10, 11);  // alpha1 = 4 has zero prior density
  CHECK_THROWS_AS(run_chain(data, truth, initial_latents(2, 3), bad_prior, cfg), DomainError);
}

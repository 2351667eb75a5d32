#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfcopula/error.hpp"
#include "mfcopula/likelihood.hpp"
#include "mfcopula/simulate.hpp"
#include "oracles.hpp"

using namespace mfcopula;

namespace {

ParameterVector random_theta(Engine& rng) {
  auto u = [&] { return open_uniform(rng); };
  return ParameterVector::bivariate(0.3 + 5 * u(), 0.3 + 5 * u(), 0.1 + 0.8 * u(), 0.1 + 0.8 * u(),
                                    0.1 + 0.8 * u(), 0.1 + 0.8 * u(), 0.1 + u(), 0.1 + u(), 1.6 * u() - 0.8);
}

Eigen::MatrixXd random_latents(Engine& rng, int p, Eigen::Index n) {
  Eigen::MatrixXd r(latent::block_size(p), n);
  for (Eigen::Index k = 0; k < r.size(); ++k) r.data()[k] = standard_exponential(rng) + 0.05;
  return r;
}

Dataset simulated_data(int d, Eigen::Index n, std::uint64_t seed) {
  const auto theta = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  const auto sites = SiteSet::uniform_unit_square(d, seed);
  return Dataset::from_scores(2, sites, simulate(theta, sites, n, seed).u);
}

// Laplace value to Gaussian score via boost, using the lower tail
// probability on each side.
double score_oracle(double w) {
  if (w <= 0) return oracle::normal_quantile(0.5 * std::exp(w));
  return -oracle::normal_quantile(0.5 * std::exp(-w));
}

// Brute-force log-likelihood for p = 2 with natural-scale latents.
double brute_log_likelihood(const Dataset& data, const ParameterVector& th, const Eigen::MatrixXd& r) {
  const Eigen::Index d = data.site_count();
  const Eigen::MatrixXd sigma = oracle::bivariate_sigma(data.sites.distances(), th.range[0], th.range[1], th.rho);
  double total = 0.0;
  for (Eigen::Index k = 0; k < data.replicates(); ++k) {
    Eigen::VectorXd z(2 * d);
    double extra = 0.0;
    for (int i = 0; i < 2; ++i) {
      const auto b = oracle::betas(th.alpha[i], th.gamma[i], th.delta_upper, th.delta_lower);
      const double t = b.b0u * r(0, k) + b.bu * r(2 + 2 * i, k) - b.b0l * r(1, k) - b.bl * r(3 + 2 * i, k);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double x = oracle::partial_fraction_quantile(b, data.score(i, j, k));
        const double w = x - t;
        z[i * d + j] = score_oracle(w);
        extra += std::log(oracle::laplace_pdf(w)) - std::log(oracle::partial_fraction_pdf(b, x)) -
                 oracle::normal_log_pdf(z[i * d + j]);
      }
    }
    total += oracle::mvn_log_density(z, sigma) + extra;
  }
  return total;
}

double brute_log_prior(const ParameterVector& th) {
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    lp += -th.alpha[i] + std::log(th.alpha[i]);                    // Exp(1) and log Jacobian
    lp += std::log(th.gamma[i] * (1 - th.gamma[i]));                // U(0,1) and logit Jacobian
    lp += -th.range[i] + std::log(th.range[i]);
  }
  lp += std::log(th.delta_upper * (1 - th.delta_upper)) + std::log(th.delta_lower * (1 - th.delta_lower));
  lp += std::log(0.5) + std::log((1 - th.rho * th.rho) / 2);
  return lp;
}

}  // namespace

TEST_CASE("priors") {
  CHECK(Prior::exponential(1).log_density(0.7) == doctest::Approx(-0.7).epsilon(1e-15));
  CHECK(Prior::exponential(2).log_density(-0.1) == -INFINITY);
  CHECK(Prior::uniform(-1, 1).log_density(0.3) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(Prior::uniform(0, 1).log_density(1.5) == -INFINITY);
  CHECK(Prior::flat().log_density(123.0) == 0.0);
  CHECK(Prior::exponential(1).median() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(Prior::uniform(-1, 1).median() == 0.0);

  auto ref = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  ref.fix(ref.index_of("alpha2"));
  const auto init = initial_parameters(ref, PriorSpec::defaults(ref));
  CHECK(init.alpha[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(init.alpha[1] == 4.0);
  CHECK(init.gamma[0] == 0.5);
  CHECK(init.rho == 0.0);
  CHECK(initial_latents(2, 3).isOnes(0.0));
}

TEST_CASE("single uniform has unit copula density") {
  const auto theta = ParameterVector::univariate(1e-8, 0.4, 0.8, 0.6, 0.5);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 2);
  for (double u : {0.01, 0.3, 0.5, 0.93}) {
    Eigen::MatrixXd scores(1, 1);
    scores(0, 0) = u;
    const auto data = Dataset::from_scores(1, SiteSet(c), scores);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(4, 1, 1.3);
    CHECK(std::abs(log_likelihood(data, theta, r)) < 1e-6);
  }
}

TEST_CASE("log-likelihood matches the brute-force oracle") {
  Engine rng(17);
  const auto data = simulated_data(2, 3, 44);
  for (int rep = 0; rep < 20; ++rep) {
    const auto theta = random_theta(rng);
    const auto r = random_latents(rng, 2, 3);
    const double ours = log_likelihood(data, theta, r);
    const double ref = brute_log_likelihood(data, theta, r);
    CAPTURE(rep);
    CHECK(std::abs(ours - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("log posterior matches the naive decomposition") {
  Engine rng(23);
  const auto data = simulated_data(3, 2, 45);
  for (int rep = 0; rep < 10; ++rep) {
    const auto theta = random_theta(rng);
    const auto r = random_latents(rng, 2, 2);
    const CopulaPosterior post(data, theta, PriorSpec::defaults(theta));
    const Eigen::VectorXd star = post.transform().to_unconstrained(theta);
    const auto cache = post.prepare(star);
    const Eigen::MatrixXd r_star = r.array().log().matrix();
    const double ours = log_posterior(post, cache, r_star);
    const double latent_prior = (r_star - r).sum();
    const double ref = brute_log_likelihood(data, theta, r) + latent_prior + brute_log_prior(theta);
    CHECK(std::abs(ours - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("latent prior at the origin and prior decomposition") {
  const auto data = simulated_data(3, 4, 46);
  auto theta = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  for (std::size_t k = 0; k < theta.size(); ++k) theta.fix(k);
  const CopulaPosterior post(data, theta, PriorSpec::flat(theta));
  const auto cache = post.prepare(Eigen::VectorXd());
  CHECK(cache.log_prior == 0.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(6, 4);
  const auto ev = post.evaluate(cache, zero, false);
  CHECK(ev.log_latent_prior == -24.0);
  CHECK(ev.log_posterior - ev.log_likelihood == doctest::Approx(ev.log_latent_prior).epsilon(1e-13));
  CHECK(ev.log_likelihood == doctest::Approx(log_likelihood(data, theta, Eigen::MatrixXd::Ones(6, 4))).epsilon(1e-14));
}

TEST_CASE("replicates add up and permute") {
  Engine rng(5);
  const auto data = simulated_data(3, 4, 47);
  const auto theta = random_theta(rng);
  const auto r = random_latents(rng, 2, 4);

  Dataset doubled = data;
  doubled.scores.resize(6, 8);
  doubled.scores << data.scores, data.scores;
  doubled.replicate_labels.insert(doubled.replicate_labels.end(), data.replicate_labels.begin(),
                                  data.replicate_labels.end());
  Eigen::MatrixXd r2(6, 8);
  r2 << r, r;
  CHECK(log_likelihood(doubled, theta, r2) == doctest::Approx(2 * log_likelihood(data, theta, r)).epsilon(1e-13));

  const CopulaPosterior a(data, theta, PriorSpec::defaults(theta));
  const auto ca = a.prepare(a.transform().to_unconstrained(theta));
  const auto ea = a.evaluate(ca, r.array().log().matrix(), false);

  const std::vector<Eigen::Index> perm{2, 0, 3, 1};
  Dataset permuted = data;
  Eigen::MatrixXd rp(6, 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    permuted.scores.col(k) = data.scores.col(perm[k]);
    rp.col(k) = r.col(perm[k]);
  }
  const CopulaPosterior b(permuted, theta, PriorSpec::defaults(theta));
  const auto cb = b.prepare(b.transform().to_unconstrained(theta));
  const auto eb = b.evaluate(cb, rp.array().log().matrix(), false);
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(eb.replicate_log_likelihood[k] == ea.replicate_log_likelihood[perm[k]]);
  CHECK(eb.log_posterior == doctest::Approx(ea.log_posterior).epsilon(1e-13));
}

TEST_CASE("cached and fresh evaluations are bit identical") {
  Engine rng(9);
  const auto data = simulated_data(4, 5, 48);
  const auto theta = random_theta(rng);
  const auto r_star = random_latents(rng, 2, 5).array().log().matrix().eval();
  const CopulaPosterior post(data, theta, PriorSpec::defaults(theta));
  Eigen::VectorXd star = post.transform().to_unconstrained(theta);
  const auto first = post.prepare(star);

  // Change only gamma1: covariance and field 2 quantiles are reused.
  star[2] += 0.3;
  const auto reused = post.prepare(star, &first);
  const auto fresh = post.prepare(star);
  CHECK(reused.covariance == first.covariance);
  CHECK(reused.quantiles == fresh.quantiles);
  const auto e1 = post.evaluate(reused, r_star, true);
  const auto e2 = post.evaluate(fresh, r_star, true);
  const auto e3 = post.evaluate(fresh, r_star, true);
  CHECK(e1.log_posterior == e2.log_posterior);
  CHECK(e1.gradient == e2.gradient);
  CHECK(e2.log_posterior == e3.log_posterior);

  // Change only lambda1: quantiles reused, covariance rebuilt.
  star[6] -= 0.2;
  const auto reused2 = post.prepare(star, &reused);
  const auto fresh2 = post.prepare(star);
  CHECK(reused2.covariance != reused.covariance);
  CHECK(post.evaluate(reused2, r_star, false).log_posterior == post.evaluate(fresh2, r_star, false).log_posterior);
}

TEST_CASE("latent gradient matches central differences") {
  Engine rng(31);
  const auto data = simulated_data(5, 3, 49);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto theta = random_theta(rng);
    const Eigen::MatrixXd r_star = random_latents(rng, 2, 3).array().log().matrix();
    const CopulaPosterior post(data, theta, PriorSpec::defaults(theta), Execution::serial);
    const auto cache = post.prepare(post.transform().to_unconstrained(theta));
    const Eigen::MatrixXd g = grad_latent(post, cache, r_star);
    const double h = 1e-6;
    for (Eigen::Index e = 0; e < r_star.size(); ++e) {
      Eigen::MatrixXd up = r_star, down = r_star;
      up.data()[e] += h;
      down.data()[e] -= h;
      const double fd = (log_posterior(post, cache, up) - log_posterior(post, cache, down)) / (2 * h);
      worst = std::max(worst, std::abs(g.data()[e] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("absent shared factor receives only the prior gradient") {
  Engine rng(3);
  const auto data = simulated_data(3, 3, 50);
  auto theta = random_theta(rng);
  theta.delta_upper = 0.0;
  const CopulaPosterior post(data, theta, PriorSpec::flat(theta));
  const auto cache = post.prepare_natural(theta);
  REQUIRE(cache.finite);
  const Eigen::MatrixXd r_star = random_latents(rng, 2, 3).array().log().matrix();
  const Eigen::MatrixXd g = grad_latent(post, cache, r_star);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(g(latent::shared_upper, k) == 1.0 - std::exp(r_star(latent::shared_upper, k)));
  }
}

TEST_CASE("invalid states are reported, not thrown") {
  const auto data = simulated_data(3, 2, 51);
  const auto theta = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);
  const CopulaPosterior post(data, theta, PriorSpec::defaults(theta));
  Eigen::VectorXd star = post.transform().to_unconstrained(theta);
  star[8] = 60.0;  // rho numerically 1: the correlation matrix is singular for jitter only
  const auto cache = post.prepare(star);
  const auto ev = post.evaluate(cache, Eigen::MatrixXd::Zero(6, 2), true);
  CHECK((std::isfinite(ev.log_posterior) || ev.log_posterior == -INFINITY));

  Dataset bad = data;
  bad.scores(0, 0) = 1.0;
  CHECK_THROWS_AS(log_likelihood(bad, theta, Eigen::MatrixXd::Ones(6, 2)), DomainError);
  CHECK_THROWS_AS(log_likelihood(data, theta, -Eigen::MatrixXd::Ones(6, 2)), DomainError);
}

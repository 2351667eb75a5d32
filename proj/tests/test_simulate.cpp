#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mfcopula/error.hpp"
#include "mfcopula/margins.hpp"
#include "mfcopula/simulate.hpp"
#include "oracles.hpp"

using namespace mfcopula;

namespace {

double ks_statistic(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    d = std::max({d, (k + 1) / n - u[k], u[k] - k / n});
  }
  return d;
}

// Asymptotic 1% critical value of the one-sample KS statistic.
double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long long concordant = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      concordant += s > 0 ? 1 : (s < 0 ? -1 : 0);
    }
  return 2.0 * static_cast<double>(concordant) / (static_cast<double>(n) * (n - 1));
}

struct ChiHat {
  double chi, se;
};

ChiHat upper_chi(const Eigen::MatrixXd& u, Eigen::Index r1, Eigen::Index r2, double level) {
  const double n = static_cast<double>(u.cols());
  double joint = 0, first = 0, second = 0;
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    const bool a = u(r1, k) > level, b = u(r2, k) > level;
    joint += a && b;
    first += a;
    second += b;
  }
  const double m = 0.5 * (first + second);
  const double chi = joint / m;
  return {chi, std::sqrt(chi * (1 - chi) / m + 1.0 / n)};
}

SiteSet line_sites(std::vector<double> xs) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), 2);
  for (std::size_t k = 0; k < xs.size(); ++k) c(static_cast<Eigen::Index>(k), 0) = xs[k];
  return SiteSet(c);
}

const ParameterVector kBase = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);

}  // namespace

TEST_CASE("laplace from gaussian score") {
  CHECK(laplace_from_gaussian(0.0) == 0.0);
  for (double z : {-30.0, -5.0, -0.3, 0.4, 6.0, 30.0}) {
    const double w = laplace_from_gaussian(z);
    CHECK(w == doctest::Approx(-laplace_from_gaussian(-z)).epsilon(1e-14));
    if (std::abs(z) < 8) CHECK(oracle::laplace_cdf(w) == doctest::Approx(oracle::normal_cdf(z)).epsilon(1e-13));
  }
  CHECK(std::isfinite(laplace_from_gaussian(38.0)));
}

TEST_CASE("single site single field margins are uniform") {
  const auto theta = ParameterVector::univariate(4, 0.4, 0.8, 0.6, 0.5);
  const std::size_t n = 100000;
  const auto sim = simulate(theta, line_sites({0.0}), static_cast<Eigen::Index>(n), 12);
  std::vector<double> u(sim.u.data(), sim.u.data() + n);
  CHECK(ks_statistic(u) < ks_critical_1pct(n));
}

TEST_CASE("each field is marginally uniform") {
  const std::size_t n = 100000;
  const auto sim = simulate(kBase, line_sites({0.0, 0.3}), static_cast<Eigen::Index>(n), 5);
  for (Eigen::Index row = 0; row < 4; ++row) {
    std::vector<double> u(n);
    for (std::size_t k = 0; k < n; ++k) u[k] = sim.u(row, static_cast<Eigen::Index>(k));
    CAPTURE(row);
    CHECK(ks_statistic(u) < ks_critical_1pct(n));
  }
}

TEST_CASE("uniform scale is the marginal cdf of the model scale") {
  const auto sim = simulate(kBase, SiteSet::uniform_unit_square(4, 1), 200, 3);
  for (int i = 0; i < 2; ++i) {
    const auto spec = kBase.marginal(i);
    for (Eigen::Index j = 0; j < 4; ++j)
      for (Eigen::Index k = 0; k < 200; ++k) {
        const double u = sim.u(i * 4 + j, k);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        CHECK(u == doctest::Approx(marginal_cdf(sim.x(i * 4 + j, k), spec)).epsilon(1e-15));
      }
  }
  // The model scale is assembled from its parts.
  for (Eigen::Index k = 0; k < 200; ++k) {
    const double t = latent_sum(kBase.betas(1), sim.latents.col(k), 1);
    CHECK(sim.x(4 + 2, k) == doctest::Approx(t + laplace_from_gaussian(sim.gaussian(4 + 2, k))).epsilon(1e-14));
  }
}

TEST_CASE("vanishing latent weights give a Gaussian copula") {
  const auto theta = ParameterVector::univariate(1e-8, 0.4, 0.8, 0.6, 0.5);
  const double h = 0.3;
  const std::size_t n = 5000;
  const auto sim = simulate(theta, line_sites({0.0, h}), static_cast<Eigen::Index>(n), 77);
  std::vector<double> a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = sim.u(0, static_cast<Eigen::Index>(k));
    b[k] = sim.u(1, static_cast<Eigen::Index>(k));
  }
  const double tau = kendall_tau(a, b);
  const double expected = 2.0 / M_PI * std::asin(std::exp(-h / 0.5));
  // Null standard deviation of tau is sqrt(4 / (9 n)) ~ 0.0094; 4 sd.
  CHECK(std::abs(tau - expected) < 0.038);
}

TEST_CASE("tail dependence is reproducible across seeds") {
  const auto sites = line_sites({0.0, 0.21});
  const Eigen::Index n = 1000000;
  const auto a = simulate(kBase, sites, n, 101);
  const auto b = simulate(kBase, sites, n, 202);
  const auto ca = upper_chi(a.u, 0, 1, 0.9);
  const auto cb = upper_chi(b.u, 0, 1, 0.9);
  CHECK(std::abs(ca.chi - cb.chi) < 3.0 * std::hypot(ca.se, cb.se));
}

TEST_CASE("within-field tail dependence decays with distance") {
  const auto sites = line_sites({0.0, 0.05, 0.2, 0.5, 1.2});
  const auto sim = simulate(kBase, sites, 1000000, 31);
  std::vector<ChiHat> chis;
  for (Eigen::Index j = 1; j < 5; ++j) chis.push_back(upper_chi(sim.u, 0, j, 0.9));
  for (std::size_t k = 1; k < chis.size(); ++k) {
    CHECK(chis[k].chi <= chis[k - 1].chi + 3.0 * std::hypot(chis[k].se, chis[k - 1].se));
  }
}

TEST_CASE("simulation is deterministic and thread independent") {
  const auto sites = SiteSet::uniform_unit_square(6, 4);
  SimulationOptions serial;
  serial.execution = Execution::serial;
  const auto a = simulate(kBase, sites, 300, 9);
  const auto b = simulate(kBase, sites, 300, 9, serial);
  const auto c = simulate(kBase, sites, 300, 10);
  CHECK(a.u == b.u);
  CHECK(a.x == b.x);
  CHECK(a.latents == b.latents);
  CHECK(a.u != c.u);
  // Replicate k depends only on its own substream.
  const auto short_run = simulate(kBase, sites, 7, 9);
  CHECK(short_run.u == a.u.leftCols(7));
}

TEST_CASE("permuting sites permutes the output") {
  const auto sites = SiteSet::uniform_unit_square(7, 15);
  const std::vector<Eigen::Index> perm{3, 0, 6, 1, 5, 2, 4};
  Eigen::MatrixXd c(7, 2);
  for (Eigen::Index j = 0; j < 7; ++j) c.row(j) = sites.coordinates().row(perm[j]);
  const auto a = simulate(kBase, sites, 50, 4);
  const auto b = simulate(kBase, SiteSet(c), 50, 4);
  for (int i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 7; ++j) CHECK(b.u.row(i * 7 + j) == a.u.row(i * 7 + perm[j]));
}

TEST_CASE("perfectly coregionalized fields share the gaussian component") {
  const auto theta = ParameterVector::bivariate(4, 5, 0.4, 0.3, 0.4, 0.8, 0.5, 0.5, 1.0);
  const auto sim = simulate(theta, SiteSet::uniform_unit_square(5, 2), 100, 6);
  CHECK(sim.gaussian.topRows(5) == sim.gaussian.bottomRows(5));
  CHECK(sim.x.topRows(5) != sim.x.bottomRows(5));
}

TEST_CASE("grid simulation") {
  const auto one = simulate_grid(kBase, line_sites({0.3}), 8);
  const auto full = simulate(kBase, line_sites({0.3}), 1, 8);
  CHECK(one(0, 0) == full.u(0, 0));
  CHECK(one(1, 0) == full.u(1, 0));

  const auto fitted = ParameterVector::bivariate(2, 2, 0.39, 0.60, 0.9, 0.9, 888.8, 868.6, 0.06);
  const auto maps = simulate_grid(fitted, SiteSet::regular_grid(30, 0.0, 1000.0), 3);
  CHECK(maps.rows() == 2);
  CHECK(maps.cols() == 900);
  CHECK(maps.minCoeff() > 0.0);
  CHECK(maps.maxCoeff() < 1.0);

  SimulationOptions capped;
  capped.dense_cap = 100;
  CHECK_THROWS_AS(simulate_grid(kBase, SiteSet::regular_grid(8), 1, capped), SizeError);
  CHECK_THROWS_AS(simulate(kBase, line_sites({0.0}), 0, 1), DomainError);
}

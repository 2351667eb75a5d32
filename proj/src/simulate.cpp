#include "mfcopula/simulate.hpp"

#include <cmath>
#include <limits>

#include "mfcopula/error.hpp"
#include "mfcopula/normal.hpp"

namespace mfcopula {

double standard_normal(Engine& rng) { return normal_quantile(open_uniform(rng)); }

double laplace_from_gaussian(double z) {
  // F_W^{-1}(p) = log(2p) below the median, -log(2(1-p)) above.
  if (z < 0.0) return std::log(2.0 * normal_cdf(z));
  return -std::log(2.0 * normal_sf(z));
}

namespace {

double keep_open(double u) {
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(u, std::numeric_limits<double>::min(), kBelowOne);
}

// Per-field Cholesky factors in canonical site order.
struct FieldFactors {
  std::vector<Eigen::MatrixXd> lower;
  Eigen::MatrixXd lmc;
  std::vector<Eigen::Index> order;
};

FieldFactors factor_fields(const ParameterVector& theta, const SiteSet& sites) {
  const int p = theta.fields();
  const Eigen::Index d = sites.size();
  FieldFactors ff;
  ff.lmc = theta.coregionalization();
  ff.order = sites.canonical_order();
  Eigen::MatrixXd h(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) h(a, b) = sites.distances()(ff.order[a], ff.order[b]);
  }
  for (int f = 0; f < p; ++f) ff.lower.push_back(cholesky_with_jitter(exp_correlation(h, theta.range[f])).lower);
  return ff;
}

}  // namespace

SimulationOutput simulate(const ParameterVector& theta, const SiteSet& sites, Eigen::Index n,
                          std::uint64_t seed, const SimulationOptions& options) {
  theta.validate();
  if (n < 1) throw DomainError("simulate: need at least one replicate");
  const int p = theta.fields();
  const Eigen::Index d = sites.size();
  if (d < 1) throw DomainError("simulate: need at least one site");
  if (p * d > options.dense_cap) {
    throw SizeError("simulate: p*d = " + std::to_string(p * d) + " exceeds the dense Cholesky cap " +
                    std::to_string(options.dense_cap) + "; raise the cap or use fewer sites");
  }

  const FieldFactors ff = factor_fields(theta, sites);
  std::vector<MarginalSpec> margins;
  std::vector<BetaCoefficients> betas;
  for (int i = 0; i < p; ++i) {
    margins.push_back(theta.marginal(i));
    betas.push_back(theta.betas(i));
  }

  SimulationOutput out;
  out.fields = p;
  out.sites = d;
  out.replicates = n;
  out.seed = seed;
  out.x.resize(p * d, n);
  out.u.resize(p * d, n);
  out.gaussian.resize(p * d, n);
  out.latents.resize(latent::block_size(p), n);

  for_each_index(n, options.execution, [&](std::ptrdiff_t k) {
    Engine rng = make_engine(seed, static_cast<std::uint64_t>(k));
    auto block = out.latents.col(k);
    for (Eigen::Index m = 0; m < block.size(); ++m) block[m] = standard_exponential(rng);

    // Independent fields W*_f in canonical order, then mixed through L.
    Eigen::MatrixXd independent(d, p);
    for (int f = 0; f < p; ++f) {
      Eigen::VectorXd eps(d);
      for (Eigen::Index j = 0; j < d; ++j) eps[j] = standard_normal(rng);
      independent.col(f) = ff.lower[f].triangularView<Eigen::Lower>() * eps;
    }
    for (int i = 0; i < p; ++i) {
      const double t = latent_sum(betas[i], block, i);
      for (Eigen::Index a = 0; a < d; ++a) {
        double g = 0.0;
        for (int f = 0; f <= i; ++f) g += ff.lmc(i, f) * independent(a, f);
        const Eigen::Index row = i * d + ff.order[a];
        const double x = t + laplace_from_gaussian(g);
        out.gaussian(row, k) = g;
        out.x(row, k) = x;
        out.u(row, k) = keep_open(marginal_cdf(x, margins[i]));
      }
    }
  });
  return out;
}

Eigen::MatrixXd simulate_grid(const ParameterVector& theta, const SiteSet& grid, std::uint64_t seed,
                              const SimulationOptions& options) {
  const auto sim = simulate(theta, grid, 1, seed, options);
  Eigen::MatrixXd maps(sim.fields, sim.sites);
  for (int i = 0; i < sim.fields; ++i) maps.row(i) = sim.u.col(0).segment(i * sim.sites, sim.sites).transpose();
  return maps;
}

}  // namespace mfcopula

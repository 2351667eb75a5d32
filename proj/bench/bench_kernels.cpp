// Serial reference loops against the OpenMP kernels. The second argument
// of each benchmark selects the path: 0 serial, 1 parallel.
#include <benchmark/benchmark.h>

#include <vector>

#include "mfcopula/diagnostics.hpp"
#include "mfcopula/likelihood.hpp"
#include "mfcopula/margins.hpp"
#include "mfcopula/simulate.hpp"

using namespace mfcopula;

namespace {

const ParameterVector kTheta = ParameterVector::bivariate(4, 4, 0.4, 0.6, 0.8, 0.6, 0.6, 0.3, -0.7);

Execution path(const benchmark::State& state) { return state.range(1) ? Execution::parallel : Execution::serial; }

void BM_Simulate(benchmark::State& state) {
  const auto sites = SiteSet::uniform_unit_square(10, 1);
  SimulationOptions opt;
  opt.execution = path(state);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(kTheta, sites, state.range(0), 7, opt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Likelihood(benchmark::State& state) {
  const auto sites = SiteSet::uniform_unit_square(10, 2);
  const auto sim = simulate(kTheta, sites, state.range(0), 3);
  const auto data = Dataset::from_scores(2, sites, sim.u);
  const CopulaPosterior post(data, kTheta, PriorSpec::defaults(kTheta), path(state));
  const auto cache = post.prepare(post.transform().to_unconstrained(kTheta));
  const Eigen::MatrixXd latent_star = sim.latents.array().log();
  for (auto _ : state) benchmark::DoNotOptimize(post.evaluate(cache, latent_star, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ThetaPrepare(benchmark::State& state) {
  const auto sites = SiteSet::uniform_unit_square(10, 2);
  const auto data = Dataset::from_scores(2, sites, simulate(kTheta, sites, state.range(0), 3).u);
  const CopulaPosterior post(data, kTheta, PriorSpec::defaults(kTheta), path(state));
  const Eigen::VectorXd star = post.transform().to_unconstrained(kTheta);
  for (auto _ : state) benchmark::DoNotOptimize(post.prepare(star));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Quantiles(benchmark::State& state) {
  const MarginalSpec spec = kTheta.marginal(0);
  std::vector<double> u(static_cast<std::size_t>(state.range(0))), out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = (k + 0.5) / u.size();
  for (auto _ : state) {
    marginal_quantiles(u, spec, out, path(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ModelChi(benchmark::State& state) {
  const std::vector<ParameterVector> draws(8, kTheta);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        model_chi_threshold(draws, Tail::upper, {0, 1}, 0.2, {0.9, 0.95}, state.range(0), 5, path(state)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}

}  // namespace

BENCHMARK(BM_Simulate)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Likelihood)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThetaPrepare)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Quantiles)->ArgsProduct({{1000, 100000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelChi)->ArgsProduct({{10000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

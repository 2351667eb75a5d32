#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mfcopula/execution.hpp"
#include "mfcopula/rng.hpp"
#include "mfcopula/model.hpp"
#include "mfcopula/spatial.hpp"

namespace mfcopula {

struct SimulationOptions {
  // Largest p * d handled by the dense factorization.
  Eigen::Index dense_cap = 4000;
  Execution execution = Execution::parallel;
};

// Field-major (row i * d + j) by replicate (column k).
struct SimulationOutput {
  int fields = 0;
  Eigen::Index sites = 0;
  Eigen::Index replicates = 0;
  Eigen::MatrixXd x;        // model scale
  Eigen::MatrixXd u;        // uniform scale, u = F_X(x) kept inside (0, 1)
  Eigen::MatrixXd latents;  // 2(p+1) x n natural-scale R blocks
  Eigen::MatrixXd gaussian; // W' (latent Gaussian field)
  std::uint64_t seed = 0;
};

// Exact draws of the model at the given sites. Replicate k uses substream k
// of `seed`, so the result does not depend on the thread count.
SimulationOutput simulate(const ParameterVector& theta, const SiteSet& sites, Eigen::Index n,
                          std::uint64_t seed, const SimulationOptions& options = {});

// One replicate on a (typically fine) grid, uniform scale, p x g.
Eigen::MatrixXd simulate_grid(const ParameterVector& theta, const SiteSet& grid, std::uint64_t seed,
                              const SimulationOptions& options = {});

// Laplace value whose Gaussian score is z, i.e. F_W^{-1}(Phi(z)), computed
// from the tail nearest to z.
double laplace_from_gaussian(double z);

// Standard normal draw by inversion.
double standard_normal(Engine& rng);

}  // namespace mfcopula

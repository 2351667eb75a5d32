#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mfcopula/margins.hpp"

namespace mfcopula {

enum class ParameterRole { alpha, gamma, delta_upper, delta_lower, range, rho };

// Model hyperparameters for p fields. Flat order:
//   alpha_1..p, gamma_1..p, deltaU, deltaL, lambda_1..p, rho12 (p == 2 only).
// For p != 2 the LMC matrix is given explicitly and never sampled.
struct ParameterVector {
  Eigen::VectorXd alpha;
  Eigen::VectorXd gamma;
  double delta_upper = 0.5;
  double delta_lower = 0.5;
  Eigen::VectorXd range;
  double rho = 0.0;
  Eigen::MatrixXd lmc;             // used when fields() != 2
  std::vector<bool> fixed;         // flat-indexed; empty means nothing fixed

  static ParameterVector bivariate(double alpha1, double alpha2, double gamma1, double gamma2,
                                   double delta_upper, double delta_lower, double range1, double range2,
                                   double rho);
  static ParameterVector univariate(double alpha, double gamma, double delta_upper, double delta_lower,
                                    double range);

  int fields() const { return static_cast<int>(alpha.size()); }
  std::size_t size() const;
  bool is_fixed(std::size_t flat) const { return !fixed.empty() && fixed[flat]; }
  void fix(std::size_t flat, bool value = true);

  ParameterRole role(std::size_t flat) const;
  std::string name(std::size_t flat) const;
  std::vector<std::string> names() const;
  std::size_t index_of(const std::string& name) const;  // throws ConfigError

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  Eigen::MatrixXd coregionalization() const;
  MarginalSpec marginal(int field) const;
  BetaCoefficients betas(int field) const;

  // Throws DomainError naming the first entry outside its domain.
  void validate() const;
};

// Log for positive entries, logit for [0, 1], logit((rho + 1) / 2) for rho.
double to_unconstrained_value(ParameterRole role, double value);
double from_unconstrained_value(ParameterRole role, double value);
// log |d theta / d theta*| for one coordinate.
double log_jacobian_value(ParameterRole role, double value_star);

// Bijection between the free (non-fixed) entries of a template vector and R^M.
class ParameterTransform {
 public:
  explicit ParameterTransform(ParameterVector reference);

  std::size_t dimension() const { return free_.size(); }
  const std::vector<std::size_t>& free_indices() const { return free_; }
  const ParameterVector& reference() const { return reference_; }

  // Domain error names the entry when a free value sits on its boundary.
  Eigen::VectorXd to_unconstrained(const ParameterVector& theta) const;
  ParameterVector from_unconstrained(const Eigen::VectorXd& theta_star) const;
  double log_jacobian(const Eigen::VectorXd& theta_star) const;

 private:
  ParameterVector reference_;
  std::vector<std::size_t> free_;
};

inline Eigen::VectorXd to_unconstrained(const ParameterVector& theta) {
  return ParameterTransform(theta).to_unconstrained(theta);
}
inline double log_jacobian_theta(const ParameterVector& reference, const Eigen::VectorXd& theta_star) {
  return ParameterTransform(reference).log_jacobian(theta_star);
}

// Latent exponentials of one replicate, stored per column of a
// 2(p+1) x n matrix in the order R0U, R0L, R1U, R1L, ..., RpU, RpL.
namespace latent {
inline constexpr Eigen::Index shared_upper = 0;
inline constexpr Eigen::Index shared_lower = 1;
inline constexpr Eigen::Index field_upper(int field) { return 2 + 2 * field; }
inline constexpr Eigen::Index field_lower(int field) { return 3 + 2 * field; }
inline constexpr Eigen::Index block_size(int fields) { return 2 * (fields + 1); }
}  // namespace latent

// T_i for one replicate given natural-scale latents.
double latent_sum(const BetaCoefficients& betas, const Eigen::Ref<const Eigen::VectorXd>& block, int field);

enum class TailClass { AD, AI, BOUNDARY };
const char* to_string(TailClass c);

struct TailCondition {
  TailClass label = TailClass::AI;
  double lhs = 0.0;  // quantity that must exceed the threshold for AD
  double threshold = 0.0;
  std::string note;  // set when a latent term is absent
};

struct CrossTail {
  int first = 0;
  int second = 0;
  TailCondition upper;
  TailCondition lower;
};

struct TailReport {
  std::vector<TailCondition> upper;  // one per field
  std::vector<TailCondition> lower;
  std::vector<CrossTail> cross;      // one per unordered field pair
};

// Asymptotic dependence class of every within-field and cross-field pair.
// Equality within relative 1e-12 is reported as BOUNDARY.
TailReport classify_tails(const ParameterVector& theta);

}  // namespace mfcopula

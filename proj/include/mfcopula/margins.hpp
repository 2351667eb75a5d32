#pragma once

#include <span>
#include <string>
#include <vector>

#include "mfcopula/execution.hpp"

namespace mfcopula {

// Standard Laplace(0, 1) distribution of the W-fields.
double laplace_cdf(double w);
double laplace_sf(double w);
double laplace_log_pdf(double w);
double laplace_quantile(double u);
// Quantile from the lower-tail (lower = true) or upper-tail probability,
// so that values close to one never lose precision.
double laplace_quantile_tail(double prob, bool lower);

// Weights of the four latent exponentials in field i:
//   T_i = upper_shared R0U + upper_field RiU - lower_shared R0L - lower_field RiL.
struct BetaCoefficients {
  double upper_shared = 0.0;  // alpha gamma deltaU
  double upper_field = 0.0;   // alpha gamma (1 - deltaU)
  double lower_shared = 0.0;  // alpha (1 - gamma) deltaL
  double lower_field = 0.0;   // alpha (1 - gamma) (1 - deltaL)

  static BetaCoefficients from_parameters(double alpha, double gamma, double delta_upper,
                                          double delta_lower);
};

// Which generic-case conditions of the closed forms fail (before repair).
struct DegeneracyFlags {
  bool lower_shared_unit = false;   // lower_shared == 1
  bool lower_field_unit = false;    // lower_field == 1
  bool lower_coincide = false;      // lower_shared == lower_field
  bool upper_shared_unit = false;
  bool upper_field_unit = false;
  bool upper_coincide = false;

  bool any() const {
    return lower_shared_unit || lower_field_unit || lower_coincide || upper_shared_unit ||
           upper_field_unit || upper_coincide;
  }
};

// A random variable sum_i s_i E_i - sum_j t_j F_j with independent unit
// exponentials and pairwise distinct scales within each sign. Its CDF is
//   sum_j a_j exp(x / t_j)            for x < 0,
//   1 - sum_i b_i exp(-x / s_i)       for x >= 0,
// with the partial-fraction weights
//   a_j = prod_{k != j} t_j/(t_j - t_k) * prod_i t_j/(t_j + s_i)
// and b_i symmetric. Near-coincident scales make the weights large and of
// alternating sign. Past |weight| 1e4 the sums run in x87 extended precision,
// past 1e8 in quad precision, so the cancellation stays below 1e-11.
class SignedExponentialSum {
 public:
  struct Term {
    double scale;
    double weight;
  };

  SignedExponentialSum() = default;
  // Zero scales are dropped (the term is absent). Scales within a sign must
  // be distinct.
  SignedExponentialSum(std::vector<double> positive_scales, std::vector<double> negative_scales);

  double cdf(double x) const;
  double sf(double x) const;
  double pdf(double x) const;
  double log_pdf(double x) const;

  std::span<const Term> positive() const { return positive_; }
  std::span<const Term> negative() const { return negative_; }
  enum class Precision { plain, extended, quad };
  Precision precision() const { return precision_; }
  bool extended() const { return precision_ != Precision::plain; }

 private:
  template <class Real>
  struct WideTerm {
    Real scale;
    Real weight;
  };

  double left_sum(double x, bool density) const;   // x < 0 branch
  double right_sum(double x, bool density) const;  // x >= 0 branch

  std::vector<Term> positive_;
  std::vector<Term> negative_;
  Precision precision_ = Precision::plain;
  std::vector<WideTerm<long double>> long_positive_;
  std::vector<WideTerm<long double>> long_negative_;
  std::vector<WideTerm<__float128>> wide_positive_;
  std::vector<WideTerm<__float128>> wide_negative_;
};

// Closed-form distribution of one field X_i = T_i + W_i.
class MarginalSpec {
 public:
  // Near-coincident scales (relative tolerance 1e-8) are moved apart by
  // 1e-7 (1 + |coefficient|); flags() records what was found and
  // repaired() whether any coefficient moved.
  explicit MarginalSpec(const BetaCoefficients& betas);
  MarginalSpec(double alpha, double gamma, double delta_upper, double delta_lower)
      : MarginalSpec(BetaCoefficients::from_parameters(alpha, gamma, delta_upper, delta_lower)) {}

  const BetaCoefficients& betas() const { return betas_; }
  const BetaCoefficients& evaluated_betas() const { return evaluated_; }
  const DegeneracyFlags& flags() const { return flags_; }
  bool repaired() const { return repaired_; }
  std::string describe_repair() const;

  const SignedExponentialSum& latent_sum() const { return latent_; }
  const SignedExponentialSum& field() const { return field_; }

 private:
  BetaCoefficients betas_;
  BetaCoefficients evaluated_;
  DegeneracyFlags flags_;
  bool repaired_ = false;
  SignedExponentialSum latent_;
  SignedExponentialSum field_;
};

// F_T: CDF of the latent sum T_i.
double latent_sum_cdf(double t, const MarginalSpec& spec);
// F_X and friends for X_i = T_i + W_i.
double marginal_cdf(double x, const MarginalSpec& spec);
double marginal_sf(double x, const MarginalSpec& spec);
// At x = 0 returns the mean of the one-sided derivatives.
double marginal_pdf(double x, const MarginalSpec& spec);
double marginal_log_pdf(double x, const MarginalSpec& spec);

// Bracketed Brent root of F_X(x) = u. The bracket starts from the dominant
// exponential tail term and expands geometrically. Guarantees
// |F_X(x) - u| < 1e-10.
double marginal_quantile(double u, const MarginalSpec& spec);

// Elementwise marginal_quantile; parallel over entries.
void marginal_quantiles(std::span<const double> u, const MarginalSpec& spec, std::span<double> out,
                        Execution exec = Execution::parallel);

}  // namespace mfcopula

#include "mfcopula/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <quadmath.h>

#include "mfcopula/error.hpp"

namespace mfcopula {

namespace {

constexpr double kCoincidenceTolerance = 1e-8;
constexpr double kRepairStep = 1e-7;
constexpr double kQuantileResidual = 1e-10;
constexpr int kMaxIterations = 200;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite argument");
}

bool coincide(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return false;  // absent terms never collide
  return std::fabs(a - b) <= kCoincidenceTolerance * std::max(a, b);
}

double nudge(double c) { return c + kRepairStep * (1.0 + std::fabs(c)); }

constexpr double kExtendedWeight = 1e4;
constexpr double kQuadWeight = 1e8;
constexpr bool kHasX87 = std::numeric_limits<long double>::digits >= 64;

struct WeightSet {
  std::vector<SignedExponentialSum::Term> terms;
  std::vector<__float128> wide;
};

WeightSet weights_for(const std::vector<double>& same, const std::vector<double>& opposite) {
  WeightSet out;
  for (std::size_t j = 0; j < same.size(); ++j) {
    const __float128 t = same[j];
    __float128 w = 1;
    for (std::size_t k = 0; k < same.size(); ++k) {
      if (k == j) continue;
      if (same[j] == same[k]) {
        throw UnsupportedConfiguration("coincident exponential scales " + std::to_string(same[j]) +
                                       " have no closed form without repair");
      }
      w *= t / (t - same[k]);
    }
    for (double s : opposite) w *= t / (t + s);
    out.terms.push_back({same[j], static_cast<double>(w)});
    out.wide.push_back(w);
  }
  return out;
}

std::vector<double> nonzero(std::vector<double> v) {
  for (double s : v) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw UnsupportedConfiguration("exponential scale must be finite and >= 0, got " + std::to_string(s));
    }
  }
  std::erase_if(v, [](double s) { return s == 0.0; });
  return v;
}

}  // namespace

// ---------------------------------------------------------------- Laplace

double laplace_cdf(double w) {
  require_finite(w, "laplace_cdf");
  return w < 0.0 ? 0.5 * std::exp(w) : 1.0 - 0.5 * std::exp(-w);
}

double laplace_sf(double w) {
  require_finite(w, "laplace_sf");
  return w > 0.0 ? 0.5 * std::exp(-w) : 1.0 - 0.5 * std::exp(w);
}

double laplace_log_pdf(double w) { return -std::fabs(w) - M_LN2; }

double laplace_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("laplace_quantile: u must lie in (0, 1)");
  return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

double laplace_quantile_tail(double prob, bool lower) {
  if (prob <= 0.0) return lower ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
  if (prob >= 1.0) return lower ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
  if (lower) return prob < 0.5 ? std::log(2.0 * prob) : -std::log(2.0 * (1.0 - prob));
  return prob < 0.5 ? -std::log(2.0 * prob) : std::log(2.0 * (1.0 - prob));
}

// ---------------------------------------------------------------- betas

BetaCoefficients BetaCoefficients::from_parameters(double alpha, double gamma, double delta_upper,
                                                   double delta_lower) {
  return {alpha * gamma * delta_upper, alpha * gamma * (1.0 - delta_upper),
          alpha * (1.0 - gamma) * delta_lower, alpha * (1.0 - gamma) * (1.0 - delta_lower)};
}

// ---------------------------------------------------------------- sums

SignedExponentialSum::SignedExponentialSum(std::vector<double> positive_scales,
                                           std::vector<double> negative_scales) {
  positive_scales = nonzero(std::move(positive_scales));
  negative_scales = nonzero(std::move(negative_scales));
  auto pos = weights_for(positive_scales, negative_scales);
  auto neg = weights_for(negative_scales, positive_scales);
  positive_ = std::move(pos.terms);
  negative_ = std::move(neg.terms);
  double largest = 0.0;
  for (const auto* terms : {&positive_, &negative_}) {
    for (const auto& term : *terms) largest = std::max(largest, std::fabs(term.weight));
  }
  if (largest > kQuadWeight || (largest > kExtendedWeight && !kHasX87)) {
    precision_ = Precision::quad;
    for (std::size_t k = 0; k < positive_.size(); ++k) wide_positive_.push_back({positive_[k].scale, pos.wide[k]});
    for (std::size_t k = 0; k < negative_.size(); ++k) wide_negative_.push_back({negative_[k].scale, neg.wide[k]});
  } else if (largest > kExtendedWeight) {
    precision_ = Precision::extended;
    for (std::size_t k = 0; k < positive_.size(); ++k) {
      long_positive_.push_back({positive_[k].scale, static_cast<long double>(pos.wide[k])});
    }
    for (std::size_t k = 0; k < negative_.size(); ++k) {
      long_negative_.push_back({negative_[k].scale, static_cast<long double>(neg.wide[k])});
    }
  }
}

double SignedExponentialSum::left_sum(double x, bool density) const {
  if (precision_ == Precision::extended) {
    long double s = 0;
    for (const auto& term : long_negative_) {
      const long double e = std::exp(x / term.scale) * term.weight;
      s += density ? e / term.scale : e;
    }
    return static_cast<double>(s);
  }
  if (precision_ == Precision::quad) {
    __float128 s = 0;
    for (const auto& term : wide_negative_) {
      const __float128 e = expq(x / term.scale) * term.weight;
      s += density ? e / term.scale : e;
    }
    return static_cast<double>(s);
  }
  double s = 0.0;
  for (const auto& term : negative_) {
    const double e = term.weight * std::exp(x / term.scale);
    s += density ? e / term.scale : e;
  }
  return s;
}

double SignedExponentialSum::right_sum(double x, bool density) const {
  if (precision_ == Precision::extended) {
    long double s = 0;
    for (const auto& term : long_positive_) {
      const long double e = std::exp(-x / term.scale) * term.weight;
      s += density ? e / term.scale : e;
    }
    return static_cast<double>(s);
  }
  if (precision_ == Precision::quad) {
    __float128 s = 0;
    for (const auto& term : wide_positive_) {
      const __float128 e = expq(-x / term.scale) * term.weight;
      s += density ? e / term.scale : e;
    }
    return static_cast<double>(s);
  }
  double s = 0.0;
  for (const auto& term : positive_) {
    const double e = term.weight * std::exp(-x / term.scale);
    s += density ? e / term.scale : e;
  }
  return s;
}

double SignedExponentialSum::cdf(double x) const {
  if (x < 0.0) return std::clamp(left_sum(x, false), 0.0, 1.0);
  return std::clamp(1.0 - sf(x), 0.0, 1.0);
}

double SignedExponentialSum::sf(double x) const {
  if (x < 0.0) return std::clamp(1.0 - cdf(x), 0.0, 1.0);
  return std::clamp(right_sum(x, false), 0.0, 1.0);
}

double SignedExponentialSum::pdf(double x) const {
  double value;
  if (x < 0.0) {
    value = left_sum(x, true);
  } else if (x > 0.0) {
    value = right_sum(x, true);
  } else {
    value = 0.5 * (left_sum(x, true) + right_sum(x, true));
  }
  return std::max(value, 0.0);
}

double SignedExponentialSum::log_pdf(double x) const { return std::log(pdf(x)); }

// ---------------------------------------------------------------- MarginalSpec

MarginalSpec::MarginalSpec(const BetaCoefficients& betas) : betas_(betas), evaluated_(betas) {
  for (double b : {betas.upper_shared, betas.upper_field, betas.lower_shared, betas.lower_field}) {
    if (!std::isfinite(b) || b < 0.0) {
      throw UnsupportedConfiguration("latent weights must be finite and nonnegative");
    }
  }
  auto& e = evaluated_;
  flags_.lower_shared_unit = coincide(e.lower_shared, 1.0);
  flags_.lower_field_unit = coincide(e.lower_field, 1.0);
  flags_.lower_coincide = coincide(e.lower_shared, e.lower_field);
  flags_.upper_shared_unit = coincide(e.upper_shared, 1.0);
  flags_.upper_field_unit = coincide(e.upper_field, 1.0);
  flags_.upper_coincide = coincide(e.upper_shared, e.upper_field);

  // A repair can create a new near-coincidence, so iterate.
  for (int round = 0; round < 8; ++round) {
    bool moved = false;
    if (coincide(e.lower_shared, 1.0)) e.lower_shared = nudge(e.lower_shared), moved = true;
    if (coincide(e.lower_field, 1.0)) e.lower_field = nudge(e.lower_field), moved = true;
    if (coincide(e.lower_shared, e.lower_field)) e.lower_field = nudge(e.lower_field), moved = true;
    if (coincide(e.upper_shared, 1.0)) e.upper_shared = nudge(e.upper_shared), moved = true;
    if (coincide(e.upper_field, 1.0)) e.upper_field = nudge(e.upper_field), moved = true;
    if (coincide(e.upper_shared, e.upper_field)) e.upper_field = nudge(e.upper_field), moved = true;
    if (!moved) break;
    repaired_ = true;
  }

  latent_ = SignedExponentialSum({e.upper_shared, e.upper_field}, {e.lower_shared, e.lower_field});
  field_ = SignedExponentialSum({e.upper_shared, e.upper_field, 1.0}, {e.lower_shared, e.lower_field, 1.0});
}

std::string MarginalSpec::describe_repair() const {
  if (!repaired_) return {};
  std::ostringstream os;
  os.precision(17);
  os << "degenerate latent weights (";
  const char* sep = "";
  auto note = [&](bool flag, const char* name) {
    if (flag) os << sep << name, sep = ", ";
  };
  note(flags_.upper_shared_unit, "upper shared = 1");
  note(flags_.upper_field_unit, "upper field = 1");
  note(flags_.upper_coincide, "upper shared = upper field");
  note(flags_.lower_shared_unit, "lower shared = 1");
  note(flags_.lower_field_unit, "lower field = 1");
  note(flags_.lower_coincide, "lower shared = lower field");
  os << ") perturbed to upper=(" << evaluated_.upper_shared << ", " << evaluated_.upper_field
     << ") lower=(" << evaluated_.lower_shared << ", " << evaluated_.lower_field << ")";
  return os.str();
}

// ---------------------------------------------------------------- evaluation

double latent_sum_cdf(double t, const MarginalSpec& spec) {
  if (std::isnan(t)) throw DomainError("latent_sum_cdf: NaN argument");
  if (t == -std::numeric_limits<double>::infinity()) return 0.0;
  if (t == std::numeric_limits<double>::infinity()) return 1.0;
  return spec.latent_sum().cdf(t);
}

double marginal_cdf(double x, const MarginalSpec& spec) {
  if (std::isnan(x)) throw DomainError("marginal_cdf: NaN argument");
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  return spec.field().cdf(x);
}

double marginal_sf(double x, const MarginalSpec& spec) {
  if (std::isnan(x)) throw DomainError("marginal_sf: NaN argument");
  if (x == -std::numeric_limits<double>::infinity()) return 1.0;
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  return spec.field().sf(x);
}

double marginal_pdf(double x, const MarginalSpec& spec) {
  require_finite(x, "marginal_pdf");
  return spec.field().pdf(x);
}

double marginal_log_pdf(double x, const MarginalSpec& spec) {
  require_finite(x, "marginal_log_pdf");
  return spec.field().log_pdf(x);
}

double marginal_quantile(double u, const MarginalSpec& spec) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("marginal_quantile: u must lie in (0, 1)");
  const auto& dist = spec.field();
  const bool lower = u <= 0.5;
  const double tail_prob = lower ? u : 1.0 - u;

  // Increasing residual; the upper half works on the survival function so
  // that probabilities close to one keep full precision.
  auto residual = [&](double x) { return lower ? dist.cdf(x) - u : tail_prob - dist.sf(x); };

  // Dominant tail term: largest scale on the relevant side.
  const auto terms = lower ? dist.negative() : dist.positive();
  const auto dominant = std::max_element(terms.begin(), terms.end(),
                                         [](const auto& a, const auto& b) { return a.scale < b.scale; });
  double guess = 0.0;
  double step = 1.0;
  if (dominant != terms.end() && dominant->weight > 0.0) {
    const double x = dominant->scale * std::log(tail_prob / dominant->weight);
    guess = lower ? x : -x;
    step = std::max(1.0, dominant->scale);
  }

  double lo = guess;
  double hi = guess;
  double f_lo = residual(lo);
  double f_hi = f_lo;
  int expansions = 0;
  if (f_lo > 0.0) {
    while (f_lo > 0.0) {
      if (++expansions > kMaxIterations) throw InternalError("marginal_quantile: cannot bracket root from below");
      hi = lo, f_hi = f_lo;
      lo -= step, step *= 2.0;
      f_lo = residual(lo);
    }
  } else {
    while (f_hi < 0.0) {
      if (++expansions > kMaxIterations) throw InternalError("marginal_quantile: cannot bracket root from above");
      lo = hi, f_lo = f_hi;
      hi += step, step *= 2.0;
      f_hi = residual(hi);
    }
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;

  // Brent-Dekker zero finder on [lo, hi].
  double a = lo, b = hi, fa = f_lo, fb = f_hi;
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a, fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b, b = c, c = a;
      fa = fb, fb = fc, fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 1e-300;
    const double m = 0.5 * (c - b);
    if (std::fabs(m) <= tol || fb == 0.0) break;
    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = d;
      }
    } else {
      d = m;
      e = d;
    }
    a = b, fa = fb;
    b += std::fabs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = residual(b);
  }
  if (!(std::fabs(fb) < kQuantileResidual)) {
    throw InternalError("marginal_quantile: residual " + std::to_string(fb) + " above tolerance at u=" +
                        std::to_string(u));
  }
  return b;
}

void marginal_quantiles(std::span<const double> u, const MarginalSpec& spec, std::span<double> out,
                        Execution exec) {
  if (u.size() != out.size()) throw std::invalid_argument("marginal_quantiles: size mismatch");
  for_each_index(static_cast<std::ptrdiff_t>(u.size()), exec,
                 [&](std::ptrdiff_t k) { out[k] = marginal_quantile(u[k], spec); });
}

}  // namespace mfcopula

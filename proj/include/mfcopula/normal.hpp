#pragma once

namespace mfcopula {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double z);
// Upper tail 1 - Phi(z) without cancellation.
double normal_sf(double z);
inline double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

// Phi^{-1}(p) for p in (0, 1): Wichura's AS241 (PPND16), relative error
// about 1e-16. Returns -inf/+inf at p = 0/1.
double normal_quantile(double p);

}  // namespace mfcopula

#pragma once

// Short-packet achievable-rate primitives: the Gaussian Q-function and its
// inverse, the per-symbol channel dispersion, and the normal approximation
// Psi = sum log2(1+gamma) - log2(e) * Qinv(eps) * sqrt(sum dispersion).
// Rates are in bits per frame; each (sub-carrier, slot) element is one
// channel use.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace mecopt::fbt {

inline constexpr double kLog2E = 1.4426950408889634074;  // log2(e)

inline double gaussian_q(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }

/// Inverse of the Gaussian Q-function, solved by safeguarded Newton on
/// erfc with a bisection fallback. Accurate to well below 1e-12 in Q-space.
inline double q_inv(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("q_inv: eps must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  double x = 0.0;
  for (int it = 0; it < 200; ++it) {
    double q = gaussian_q(x);
    double err = q - eps;
    if (err > 0)
      lo = x;  // Q decreasing: too large means x is below the root
    else
      hi = x;
    if (std::abs(err) <= 1e-15 * eps || hi - lo <= 1e-15 * (1.0 + std::abs(x))) break;
    double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
    double next = x + err / pdf;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

/// Channel dispersion 1 - (1+gamma)^-2, computed as gamma(2+gamma)/(1+gamma)^2
/// to stay exact near zero.
inline double dispersion(double gamma) {
  if (gamma < 0) throw std::domain_error("dispersion: negative SNR");
  double a = 1.0 + gamma;
  return gamma * (2.0 + gamma) / (a * a);
}

/// Pieces of the normal approximation for one user on one link.
struct RateTerms {
  double shannon_bits = 0;     // sum of per-element capacities
  double dispersion_bits = 0;  // back-off term
  double psi_bits = 0;         // shannon - dispersion
};

/// Exact per-user rate terms over an (M x N) grid of resource elements.
/// Sums run only over allocated elements; requires p = 0 wherever s = 0.
inline RateTerms psi_user(std::span<const std::uint8_t> s, std::span<const double> p,
                          std::span<const double> gain_per_subcarrier, int M, int N, double eps) {
  const std::size_t nel = static_cast<std::size_t>(M) * N;
  if (s.size() != nel || p.size() != nel || gain_per_subcarrier.size() != static_cast<std::size_t>(M))
    throw std::invalid_argument("psi_user: grid shape mismatch");
  double cap = 0, disp = 0;
  bool any = false;
  for (int m = 0; m < M; ++m) {
    double g = gain_per_subcarrier[m];
    for (int n = 0; n < N; ++n) {
      std::size_t i = static_cast<std::size_t>(m) * N + n;
      if (p[i] < 0) throw std::invalid_argument("psi_user: negative power");
      if (!s[i]) {
        if (p[i] != 0) throw std::invalid_argument("psi_user: power on unallocated element");
        continue;
      }
      any = true;
      double gamma = g * p[i];
      cap += std::log2(1.0 + gamma);
      disp += dispersion(gamma);
    }
  }
  RateTerms out;
  if (!any) return out;
  out.shannon_bits = cap;
  out.dispersion_bits = kLog2E * q_inv(eps) * std::sqrt(disp);
  out.psi_bits = out.shannon_bits - out.dispersion_bits;
  return out;
}

/// Upper bound on the dispersion term over all allocations whose per-element
/// power never exceeds `budget_w`: every element at full budget.
inline double v_bar_max(std::span<const double> gain_per_subcarrier, double budget_w, double eps,
                        int M, int N) {
  if (!(budget_w > 0)) throw std::invalid_argument("v_bar_max: budget must be positive");
  double disp = 0;
  for (int m = 0; m < M; ++m) disp += dispersion(gain_per_subcarrier[m] * budget_w);
  return kLog2E * q_inv(eps) * std::sqrt(disp * N);
}

/// Capacity sum over a full grid in the power-only form, where unallocated
/// elements simply carry zero power.
inline double capacity_sum(std::span<const double> p, std::span<const double> gain_per_subcarrier,
                           int M, int N) {
  double cap = 0;
  for (int m = 0; m < M; ++m) {
    double g = gain_per_subcarrier[m];
    for (int n = 0; n < N; ++n) cap += std::log2(1.0 + g * p[static_cast<std::size_t>(m) * N + n]);
  }
  return cap;
}

/// Sum of per-element dispersions in the power-only form (unscaled).
inline double dispersion_sum(std::span<const double> p, std::span<const double> gain_per_subcarrier,
                             int M, int N) {
  double disp = 0;
  for (int m = 0; m < M; ++m) {
    double g = gain_per_subcarrier[m];
    for (int n = 0; n < N; ++n) disp += dispersion(g * p[static_cast<std::size_t>(m) * N + n]);
  }
  return disp;
}

/// Perspective extension s * log2(1 + x / s) of the per-element capacity,
/// with the removable singularity at s = 0 floored away.
inline double perspective_log2(double s, double x) {
  if (s <= 1e-12) return 0.0;
  return s * std::log2(1.0 + x / s);
}

/// High-SNR rate terms: the dispersion of every allocated element is taken
/// as 1, and the capacity uses the jointly concave perspective form. Accepts
/// fractional assignments.
inline RateTerms psi_user_approx(std::span<const double> s, std::span<const double> p_tilde,
                                 std::span<const double> gain_per_subcarrier, int M, int N,
                                 double eps) {
  const std::size_t nel = static_cast<std::size_t>(M) * N;
  if (s.size() != nel || p_tilde.size() != nel ||
      gain_per_subcarrier.size() != static_cast<std::size_t>(M))
    throw std::invalid_argument("psi_user_approx: grid shape mismatch");
  double cap = 0, s_sum = 0;
  for (int m = 0; m < M; ++m) {
    double g = gain_per_subcarrier[m];
    for (int n = 0; n < N; ++n) {
      std::size_t i = static_cast<std::size_t>(m) * N + n;
      if (p_tilde[i] < 0) throw std::invalid_argument("psi_user_approx: negative power");
      cap += perspective_log2(s[i], g * p_tilde[i]);
      s_sum += s[i];
    }
  }
  RateTerms out;
  if (s_sum <= 0) return out;
  out.shannon_bits = cap;
  out.dispersion_bits = kLog2E * q_inv(eps) * std::sqrt(s_sum);
  out.psi_bits = out.shannon_bits - out.dispersion_bits;
  return out;
}

}  // namespace mecopt::fbt

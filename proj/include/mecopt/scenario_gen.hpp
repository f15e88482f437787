#pragma once

// Seeded channel generation: users placed uniformly over an annulus area,
// log-distance path loss, unit-mean Rayleigh fading drawn independently per
// (user, sub-carrier, link). The generator is splitmix64, consumed in a fixed
// documented order (distances, then uplink gains row-major, then downlink),
// so a seed pins the full realization bit-for-bit on any platform.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mecopt/model.hpp"

namespace mecopt::scengen {

/// splitmix64: 64-bit counter-based generator (Steele, Lea, Flood mixing
/// constants). State advances by the golden-gamma increment.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double strictly inside (0, 1).
  double next_unit() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Unit-mean exponential; strictly positive.
  double next_exponential() { return -std::log(next_unit()); }
};

inline double path_loss_db(double distance_m) {
  if (!(distance_m > 0)) throw std::domain_error("path_loss_db: distance must be positive");
  return 35.3 + 37.6 * std::log10(distance_m);
}

inline double noise_power_w(double density_dbm_hz, double bandwidth_hz) {
  if (!(bandwidth_hz > 0)) throw std::invalid_argument("noise_power_w: bandwidth must be positive");
  return dbm_to_watts(density_dbm_hz + 10.0 * std::log10(bandwidth_hz));
}

struct Annulus {
  double r1_m = 0;
  double r2_m = 0;
};

inline constexpr double kNoiseDensityDbmHz = -174.0;

/// Draw one channel realization. Distances are area-uniform over the annulus
/// (inverse CDF d = sqrt(r1^2 + U (r2^2 - r1^2))); gains are
/// |h|^2 10^(-PL/10) / noise with |h|^2 exponential of unit mean.
inline ChannelRealization sample_realization(const Scenario& sc, const Annulus& geom,
                                             std::uint64_t seed,
                                             double noise_density_dbm_hz = kNoiseDensityDbmHz) {
  if (!(geom.r1_m >= 0) || !(geom.r2_m >= geom.r1_m))
    throw std::invalid_argument("sample_realization: need 0 <= r1 <= r2");
  if (!(geom.r1_m > 0)) throw std::invalid_argument("sample_realization: r1 must be positive");

  SplitMix64 rng(seed);
  ChannelRealization ch;
  ch.K = sc.K;
  ch.M_u = sc.M_u;
  ch.M_d = sc.M_d;
  ch.seed = seed;
  ch.rng = "splitmix64";
  ch.distances_m.resize(sc.K);

  const double noise_w = noise_power_w(noise_density_dbm_hz, sc.B_s);
  for (int k = 0; k < sc.K; ++k) {
    double u = rng.next_unit();
    ch.distances_m[k] =
        std::sqrt(geom.r1_m * geom.r1_m + u * (geom.r2_m * geom.r2_m - geom.r1_m * geom.r1_m));
  }
  ch.g_u.resize(static_cast<std::size_t>(sc.K) * sc.M_u);
  ch.g_d.resize(static_cast<std::size_t>(sc.K) * sc.M_d);
  for (int k = 0; k < sc.K; ++k) {
    double atten = std::pow(10.0, -path_loss_db(ch.distances_m[k]) / 10.0) / noise_w;
    for (int m = 0; m < sc.M_u; ++m)
      ch.g_u[static_cast<std::size_t>(k) * sc.M_u + m] = rng.next_exponential() * atten;
  }
  for (int k = 0; k < sc.K; ++k) {
    double atten = std::pow(10.0, -path_loss_db(ch.distances_m[k]) / 10.0) / noise_w;
    for (int m = 0; m < sc.M_d; ++m)
      ch.g_d[static_cast<std::size_t>(k) * sc.M_d + m] = rng.next_exponential() * atten;
  }
  return ch;
}

}  // namespace mecopt::scengen

#pragma once

// Domain types for joint uplink/downlink OFDMA edge-offloading problems:
// static scenario data, per-realization channel gains, decision points, and
// exact power accounting. All powers are stored and accumulated in watts;
// dBm appears only at I/O boundaries.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecopt {

/// Flat K x M x N grid, user-major so each user's M*N block is contiguous.
template <typename T>
struct Grid3 {
  int K = 0, M = 0, N = 0;
  std::vector<T> v;

  Grid3() = default;
  Grid3(int k, int m, int n, T fill = T{})
      : K(k), M(m), N(n), v(static_cast<std::size_t>(k) * m * n, fill) {}

  T& at(int k, int m, int n) { return v[idx(k, m, n)]; }
  const T& at(int k, int m, int n) const { return v[idx(k, m, n)]; }

  std::span<T> user(int k) {
    return std::span<T>(v).subspan(static_cast<std::size_t>(k) * M * N, static_cast<std::size_t>(M) * N);
  }
  std::span<const T> user(int k) const {
    return std::span<const T>(v).subspan(static_cast<std::size_t>(k) * M * N, static_cast<std::size_t>(M) * N);
  }

  std::size_t idx(int k, int m, int n) const {
    return (static_cast<std::size_t>(k) * M + m) * N + n;
  }
  std::size_t size() const { return v.size(); }
};

/// Static problem data. Time slots are 1-indexed in all constraint logic;
/// the frame offset tau shifts the downlink frame by tau slots.
struct Scenario {
  int K = 0;             // user count
  int M_u = 0, M_d = 0;  // sub-carriers per link
  int N_u = 0, N_d = 0;  // time slots per frame
  int tau = 0;           // frame offset in slots
  double B_s = 0;        // sub-carrier bandwidth, Hz

  // per-user task and radio parameters
  std::vector<double> B_k;      // task size, bits
  std::vector<int> D_k;         // deadline, slots
  std::vector<double> Gamma_k;  // download/upload size ratio
  std::vector<double> c_k;      // CPU cycles per bit
  std::vector<double> eps_u_k, eps_d_k;  // packet error probabilities
  std::vector<double> P_k_max;  // uplink power budget, W
  std::vector<double> w_k;      // user weight
  std::vector<double> delta_k;  // user amplifier inefficiency, >= 1

  double P_max = 0;     // BS power budget, W
  double delta_BS = 1;  // BS amplifier inefficiency, >= 1
  double P_cir = 0;     // circuit power, W
  double kappa = 0;     // switched capacitance, F
  double f_max = 0;     // max CPU frequency, Hz

  // T_s is always derived from B_s, never stored, so the two cannot drift.
  double symbol_duration() const { return 1.0 / B_s; }
  int overlap() const { return N_u - tau; }

  /// Minimum CPU frequency that finishes B_k bits within the deadline.
  double forced_cpu_hz(int k) const {
    return c_k[k] * B_k[k] / (symbol_duration() * D_k[k]);
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("Scenario: " + msg); };
    if (K < 1 || M_u < 1 || M_d < 1 || N_u < 1 || N_d < 1) fail("dimensions must be >= 1");
    if (tau < 0 || tau > N_u) fail("tau must satisfy 0 <= tau <= N_u");
    if (!(B_s > 0)) fail("B_s must be positive");
    if (!(P_max > 0) || !(P_cir > 0) || !(kappa > 0) || !(f_max > 0)) fail("P_max, P_cir, kappa, f_max must be positive");
    if (!(delta_BS >= 1)) fail("delta_BS must be >= 1");
    auto need_k = [&](std::size_t n, const char* name) {
      if (n != static_cast<std::size_t>(K)) fail(std::string(name) + " must have K entries");
    };
    need_k(B_k.size(), "B_k");
    need_k(D_k.size(), "D_k");
    need_k(Gamma_k.size(), "Gamma_k");
    need_k(c_k.size(), "c_k");
    need_k(eps_u_k.size(), "eps_u_k");
    need_k(eps_d_k.size(), "eps_d_k");
    need_k(P_k_max.size(), "P_k_max");
    need_k(w_k.size(), "w_k");
    need_k(delta_k.size(), "delta_k");
    for (int k = 0; k < K; ++k) {
      if (!(B_k[k] > 0)) fail("B_k must be positive");
      if (D_k[k] < 1) fail("D_k must be >= 1");
      if (!(Gamma_k[k] > 0)) fail("Gamma_k must be positive");
      if (!(c_k[k] > 0)) fail("c_k must be positive");
      if (!(eps_u_k[k] > 0 && eps_u_k[k] < 0.5)) fail("eps_u_k must lie in (0, 0.5)");
      if (!(eps_d_k[k] > 0 && eps_d_k[k] < 0.5)) fail("eps_d_k must lie in (0, 0.5)");
      if (!(P_k_max[k] > 0)) fail("P_k_max must be positive");
      if (!(w_k[k] >= 1)) fail("w_k must be >= 1");
      if (!(delta_k[k] >= 1)) fail("delta_k must be >= 1");
    }
  }
};

/// Normalized channel gains |h|^2/sigma^2 in 1/W, per user and sub-carrier.
/// Gains are constant across the slots of a frame.
struct ChannelRealization {
  int K = 0, M_u = 0, M_d = 0;
  std::vector<double> g_u;  // K x M_u, row-major
  std::vector<double> g_d;  // K x M_d
  std::uint64_t seed = 0;
  std::vector<double> distances_m;
  std::string rng = "splitmix64";

  double gain_u(int k, int m) const { return g_u[static_cast<std::size_t>(k) * M_u + m]; }
  double gain_d(int k, int m) const { return g_d[static_cast<std::size_t>(k) * M_d + m]; }
  std::span<const double> gains_u(int k) const {
    return std::span<const double>(g_u).subspan(static_cast<std::size_t>(k) * M_u, M_u);
  }
  std::span<const double> gains_d(int k) const {
    return std::span<const double>(g_d).subspan(static_cast<std::size_t>(k) * M_d, M_d);
  }

  void validate() const {
    if (g_u.size() != static_cast<std::size_t>(K) * M_u || g_d.size() != static_cast<std::size_t>(K) * M_d)
      throw std::invalid_argument("ChannelRealization: gain array shape mismatch");
    for (double g : g_u)
      if (!(g > 0) || !std::isfinite(g)) throw std::invalid_argument("ChannelRealization: gains must be positive and finite");
    for (double g : g_d)
      if (!(g > 0) || !std::isfinite(g)) throw std::invalid_argument("ChannelRealization: gains must be positive and finite");
  }
};

/// A full decision point. s and p are stored separately; validation enforces
/// the product identity (s = 0 forces p = 0) since feasibility checks need
/// explicit assignments.
struct Allocation {
  Grid3<std::uint8_t> s_u, s_d;
  Grid3<double> p_u, p_d;
  std::vector<double> f;             // Hz, per user
  std::vector<std::uint8_t> alpha;   // 1 = local computing, 0 = offloading

  static Allocation zeros(const Scenario& sc) {
    Allocation a;
    a.s_u = Grid3<std::uint8_t>(sc.K, sc.M_u, sc.N_u);
    a.s_d = Grid3<std::uint8_t>(sc.K, sc.M_d, sc.N_d);
    a.p_u = Grid3<double>(sc.K, sc.M_u, sc.N_u);
    a.p_d = Grid3<double>(sc.K, sc.M_d, sc.N_d);
    a.f.assign(sc.K, 0.0);
    a.alpha.assign(sc.K, 1);
    return a;
  }

  void validate(const Scenario& sc) const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("Allocation: " + msg); };
    if (s_u.K != sc.K || s_u.M != sc.M_u || s_u.N != sc.N_u) fail("s_u shape mismatch");
    if (s_d.K != sc.K || s_d.M != sc.M_d || s_d.N != sc.N_d) fail("s_d shape mismatch");
    if (p_u.K != sc.K || p_u.M != sc.M_u || p_u.N != sc.N_u) fail("p_u shape mismatch");
    if (p_d.K != sc.K || p_d.M != sc.M_d || p_d.N != sc.N_d) fail("p_d shape mismatch");
    if (f.size() != static_cast<std::size_t>(sc.K) || alpha.size() != static_cast<std::size_t>(sc.K))
      fail("f/alpha length mismatch");
    for (std::size_t i = 0; i < s_u.size(); ++i) {
      if (s_u.v[i] > 1) fail("s_u entries must be binary");
      if (p_u.v[i] < 0) fail("p_u entries must be nonnegative");
      if (s_u.v[i] == 0 && p_u.v[i] != 0) fail("p_u must vanish where s_u = 0");
    }
    for (std::size_t i = 0; i < s_d.size(); ++i) {
      if (s_d.v[i] > 1) fail("s_d entries must be binary");
      if (p_d.v[i] < 0) fail("p_d entries must be nonnegative");
      if (s_d.v[i] == 0 && p_d.v[i] != 0) fail("p_d must vanish where s_d = 0");
    }
    for (int k = 0; k < sc.K; ++k) {
      if (f[k] < 0) fail("f must be nonnegative");
      if (alpha[k] > 1) fail("alpha entries must be binary");
    }
    // exclusive use of each resource element
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        int users = 0;
        for (int k = 0; k < sc.K; ++k) users += s_u.at(k, m, n);
        if (users > 1) fail("uplink element assigned to more than one user");
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        int users = 0;
        for (int k = 0; k < sc.K; ++k) users += s_d.at(k, m, n);
        if (users > 1) fail("downlink element assigned to more than one user");
      }
  }
};

/// Power accounting split into its physical parts. The weighted total is
/// recomputed from the parts, so the two views cannot disagree.
struct PowerBreakdown {
  std::vector<double> local_w;    // per user, kappa f^3
  std::vector<double> uplink_w;   // per user, delta_k * radiated
  std::vector<double> circuit_w;  // per user, (1 - alpha) P_cir
  double bs_downlink_w = 0;
  double weighted_total_w = 0;
};

/// CPU power at frequency f_k: kappa * f^3.
inline double local_power(double f_hz, double kappa) {
  if (f_hz < 0) throw std::domain_error("local_power: negative frequency");
  return kappa * f_hz * f_hz * f_hz;
}

/// Total power drawn by user k: local computing plus amplified radiated
/// uplink power plus circuit power while offloading.
inline double user_power(int k, const Allocation& a, const Scenario& sc) {
  if (k < 0 || k >= sc.K) throw std::out_of_range("user_power: user index");
  double radiated = 0;
  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n) radiated += a.s_u.at(k, m, n) * a.p_u.at(k, m, n);
  return local_power(a.f[k], sc.kappa) + sc.delta_k[k] * radiated + (1 - a.alpha[k]) * sc.P_cir;
}

/// Weighted system power: sum_k w_k * user_power(k) + delta_BS * downlink.
inline PowerBreakdown total_power(const Allocation& a, const Scenario& sc) {
  PowerBreakdown out;
  out.local_w.resize(sc.K);
  out.uplink_w.resize(sc.K);
  out.circuit_w.resize(sc.K);
  double total = 0;
  for (int k = 0; k < sc.K; ++k) {
    double radiated = 0;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) radiated += a.s_u.at(k, m, n) * a.p_u.at(k, m, n);
    out.local_w[k] = local_power(a.f[k], sc.kappa);
    out.uplink_w[k] = sc.delta_k[k] * radiated;
    out.circuit_w[k] = (1 - a.alpha[k]) * sc.P_cir;
    total += sc.w_k[k] * (out.local_w[k] + out.uplink_w[k] + out.circuit_w[k]);
  }
  double down = 0;
  for (int k = 0; k < sc.K; ++k)
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) down += a.s_d.at(k, m, n) * a.p_d.at(k, m, n);
  out.bs_downlink_w = sc.delta_BS * down;
  out.weighted_total_w = total + out.bs_downlink_w;
  return out;
}

inline double watts_to_dbm(double w) {
  if (w <= 0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1000.0 * w);
}

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

}  // namespace mecopt

#pragma once

// Constraint evaluation for the full problem and for its monotonic
// reformulation over the continuous point u = (f, p_u, p_d, zeta_u, zeta_d).
//
// The split rate constraints bound the dispersion term away from its box
// maximum: for each offloading user,
//   capacity(p) + zeta >= vbar + required_bits   (co-normal side, set H)
//   dispersion(p) + zeta <= vbar                 (normal side, part of set G)
// where vbar is the dispersion term with every element at full budget. The
// pair is equivalent to psi >= required_bits once zeta is free.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mecopt/fbt.hpp"
#include "mecopt/model.hpp"

namespace mecopt::constraints {

inline constexpr double kDefaultTol = 1e-9;      // absolute, natural units
inline constexpr double kAssignPowerTol = 1e-9;  // W; above this an element counts as assigned

struct Family {
  std::string name;
  bool ok = true;
  double violation = 0;  // worst violation in the constraint's own units
};

struct ConstraintReport {
  std::vector<Family> families;
  double tolerance = kDefaultTol;

  bool feasible() const {
    for (const auto& f : families)
      if (!f.ok) return false;
    return true;
  }
  const Family& family(const std::string& name) const {
    for (const auto& f : families)
      if (f.name == name) return f;
    throw std::out_of_range("ConstraintReport: no family " + name);
  }
};

namespace detail {
inline Family make(const std::string& name, double violation, double tol) {
  return Family{name, violation <= tol, violation};
}
}  // namespace detail

/// Same-user uplink/downlink overlap: if an overlapping uplink slot tau+o is
/// used, the paired downlink slot o must stay silent. Slots are 1-indexed.
inline Family check_causality(const Grid3<std::uint8_t>& s_u, const Grid3<std::uint8_t>& s_d,
                              const Scenario& sc, double tol = kDefaultTol) {
  double worst = 0;
  for (int k = 0; k < sc.K; ++k)
    for (int o = 1; o <= sc.overlap(); ++o) {
      int up_any = 0, down_any = 0;
      for (int m = 0; m < sc.M_u; ++m) up_any = std::max<int>(up_any, s_u.at(k, m, sc.tau + o - 1));
      for (int m = 0; m < sc.M_d; ++m) down_any = std::max<int>(down_any, s_d.at(k, m, o - 1));
      worst = std::max(worst, double(up_any + down_any - 1));
    }
  return detail::make("C3", worst, tol);
}

/// Downlink must be finished strictly before slot D_k - tau.
inline Family check_delay(const Grid3<std::uint8_t>& s_d, const Scenario& sc,
                          double tol = kDefaultTol) {
  double worst = 0;
  for (int k = 0; k < sc.K; ++k) {
    int first_forbidden = sc.D_k[k] - sc.tau;  // 1-indexed slot
    for (int n = std::max(1, first_forbidden); n <= sc.N_d; ++n)
      for (int m = 0; m < sc.M_d; ++m) worst = std::max(worst, double(s_d.at(k, m, n - 1)));
  }
  return detail::make("C4", worst, tol);
}

/// Required bits through the short-packet rate, per link. Violations are in
/// bits.
inline std::pair<Family, Family> check_rates(const Allocation& a, const ChannelRealization& ch,
                                             const Scenario& sc, double tol = kDefaultTol) {
  double worst_u = 0, worst_d = 0;
  for (int k = 0; k < sc.K; ++k) {
    auto up = fbt::psi_user(a.s_u.user(k), a.p_u.user(k), ch.gains_u(k), sc.M_u, sc.N_u,
                            sc.eps_u_k[k]);
    auto down = fbt::psi_user(a.s_d.user(k), a.p_d.user(k), ch.gains_d(k), sc.M_d, sc.N_d,
                              sc.eps_d_k[k]);
    double need = (1 - a.alpha[k]) * sc.B_k[k];
    worst_u = std::max(worst_u, need - up.psi_bits);
    worst_d = std::max(worst_d, (1 - a.alpha[k]) * sc.Gamma_k[k] * sc.B_k[k] - down.psi_bits);
  }
  return {detail::make("C1", worst_u, tol), detail::make("C2", worst_d, tol)};
}

/// Power budgets (C9-C12) and the local-computing deadline and frequency cap
/// (C13-C15). The deadline check is evaluated in Hz.
inline std::pair<Family, Family> check_budgets_and_local(const Allocation& a, const Scenario& sc,
                                                         double tol = kDefaultTol) {
  double worst_power = 0, worst_local = 0;
  double bs_sum = 0;
  for (int k = 0; k < sc.K; ++k) {
    double up_sum = 0;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        up_sum += a.s_u.at(k, m, n) * a.p_u.at(k, m, n);
        worst_power = std::max(worst_power, -a.p_u.at(k, m, n));
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        bs_sum += a.s_d.at(k, m, n) * a.p_d.at(k, m, n);
        worst_power = std::max(worst_power, -a.p_d.at(k, m, n));
      }
    worst_power = std::max(worst_power, up_sum - sc.P_k_max[k]);
    worst_local = std::max(worst_local, a.alpha[k] * sc.forced_cpu_hz(k) - a.f[k]);
    worst_local = std::max(worst_local, a.f[k] - sc.f_max);
    worst_local = std::max(worst_local, -a.f[k]);
  }
  worst_power = std::max(worst_power, bs_sum - sc.P_max);
  return {detail::make("C9-C12", worst_power, tol), detail::make("C13-C15", worst_local, tol)};
}

/// Exclusive element use and binary indicators (C5-C8).
inline Family check_exclusivity(const Grid3<std::uint8_t>& s_u, const Grid3<std::uint8_t>& s_d,
                                const Scenario& sc, double tol = kDefaultTol) {
  double worst = 0;
  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n) {
      int users = 0;
      for (int k = 0; k < sc.K; ++k) {
        users += s_u.at(k, m, n);
        if (s_u.at(k, m, n) > 1) worst = std::max(worst, double(s_u.at(k, m, n) - 1));
      }
      worst = std::max(worst, double(users - 1));
    }
  for (int m = 0; m < sc.M_d; ++m)
    for (int n = 0; n < sc.N_d; ++n) {
      int users = 0;
      for (int k = 0; k < sc.K; ++k) {
        users += s_d.at(k, m, n);
        if (s_d.at(k, m, n) > 1) worst = std::max(worst, double(s_d.at(k, m, n) - 1));
      }
      worst = std::max(worst, double(users - 1));
    }
  return detail::make("C5-C8", worst, tol);
}

/// Product identity: no power on unassigned elements (C16-C17).
inline Family check_product_identity(const Allocation& a, double tol = kDefaultTol) {
  double worst = 0;
  for (std::size_t i = 0; i < a.s_u.size(); ++i)
    if (!a.s_u.v[i]) worst = std::max(worst, std::abs(a.p_u.v[i]));
  for (std::size_t i = 0; i < a.s_d.size(); ++i)
    if (!a.s_d.v[i]) worst = std::max(worst, std::abs(a.p_d.v[i]));
  return detail::make("C16-C17", worst, tol);
}

/// Evaluate every constraint family of the full problem on an allocation.
inline ConstraintReport check_all(const Allocation& a, const ChannelRealization& ch,
                                  const Scenario& sc, double tol = kDefaultTol) {
  ConstraintReport rep;
  rep.tolerance = tol;
  auto [c1, c2] = check_rates(a, ch, sc, tol);
  rep.families.push_back(c1);
  rep.families.push_back(c2);
  rep.families.push_back(check_causality(a.s_u, a.s_d, sc, tol));
  rep.families.push_back(check_delay(a.s_d, sc, tol));
  rep.families.push_back(check_exclusivity(a.s_u, a.s_d, sc, tol));
  auto [c912, c1315] = check_budgets_and_local(a, sc, tol);
  rep.families.push_back(c912);
  rep.families.push_back(c1315);
  rep.families.push_back(check_product_identity(a, tol));
  return rep;
}

/// Recover assignments from powers: an element is assigned when its power
/// strictly exceeds p_tol; anything at or below snaps to zero.
inline std::pair<Grid3<std::uint8_t>, Grid3<double>> derive_assignment(
    const Grid3<double>& p, double p_tol = kAssignPowerTol) {
  Grid3<std::uint8_t> s(p.K, p.M, p.N);
  Grid3<double> snapped(p.K, p.M, p.N);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.v[i] > p_tol) {
      s.v[i] = 1;
      snapped.v[i] = p.v[i];
    }
  }
  return {std::move(s), std::move(snapped)};
}

/// Coordinate layout of the continuous point u over which the global solver
/// branches: [f | p_u | p_d | zeta_u | zeta_d].
struct PointLayout {
  int K = 0, M_u = 0, N_u = 0, M_d = 0, N_d = 0;

  static PointLayout of(const Scenario& sc) { return {sc.K, sc.M_u, sc.N_u, sc.M_d, sc.N_d}; }

  int size() const { return K + K * M_u * N_u + K * M_d * N_d + 2 * K; }
  int f(int k) const { return k; }
  int pu(int k, int m, int n) const { return K + (k * M_u + m) * N_u + n; }
  int pd(int k, int m, int n) const { return K + K * M_u * N_u + (k * M_d + m) * N_d + n; }
  int pu_begin(int k) const { return K + k * M_u * N_u; }
  int pd_begin(int k) const { return K + K * M_u * N_u + k * M_d * N_d; }
  int zu(int k) const { return K + K * M_u * N_u + K * M_d * N_d + k; }
  int zd(int k) const { return K + K * M_u * N_u + K * M_d * N_d + K + k; }
};

/// Everything the split-form membership tests need but that does not change
/// between calls: the dispersion box bounds and the Q-function inverses.
struct CheckContext {
  PointLayout layout;
  std::vector<double> vbar_u, vbar_d;  // dispersion term at full budget
  std::vector<double> qinv_u, qinv_d;

  static CheckContext make(const Scenario& sc, const ChannelRealization& ch) {
    CheckContext ctx;
    ctx.layout = PointLayout::of(sc);
    ctx.vbar_u.resize(sc.K);
    ctx.vbar_d.resize(sc.K);
    ctx.qinv_u.resize(sc.K);
    ctx.qinv_d.resize(sc.K);
    for (int k = 0; k < sc.K; ++k) {
      ctx.qinv_u[k] = fbt::q_inv(sc.eps_u_k[k]);
      ctx.qinv_d[k] = fbt::q_inv(sc.eps_d_k[k]);
      ctx.vbar_u[k] = fbt::v_bar_max(ch.gains_u(k), sc.P_k_max[k], sc.eps_u_k[k], sc.M_u, sc.N_u);
      ctx.vbar_d[k] = fbt::v_bar_max(ch.gains_d(k), sc.P_max, sc.eps_d_k[k], sc.M_d, sc.N_d);
    }
    return ctx;
  }
};

/// Build the allocation induced by a continuous point: assignments derived
/// from powers, powers snapped, frequencies copied.
inline Allocation induced_allocation(std::span<const double> u,
                                     std::span<const std::uint8_t> alpha_bar,
                                     const Scenario& sc) {
  PointLayout ly = PointLayout::of(sc);
  Allocation a = Allocation::zeros(sc);
  a.alpha.assign(alpha_bar.begin(), alpha_bar.end());
  for (int k = 0; k < sc.K; ++k) a.f[k] = u[ly.f(k)];
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        double p = u[ly.pu(k, m, n)];
        if (p > kAssignPowerTol) {
          a.s_u.at(k, m, n) = 1;
          a.p_u.at(k, m, n) = p;
        }
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        double p = u[ly.pd(k, m, n)];
        if (p > kAssignPowerTol) {
          a.s_d.at(k, m, n) = 1;
          a.p_d.at(k, m, n) = p;
        }
      }
  }
  return a;
}

namespace detail {

// Rate terms of the power-only form on the snapped powers of one user.
struct LinkTerms {
  double capacity = 0, dispersion_term = 0;
};

inline LinkTerms link_terms(std::span<const double> u, int begin, std::span<const double> gains,
                            int M, int N, double qinv) {
  LinkTerms t;
  double disp = 0;
  for (int m = 0; m < M; ++m) {
    double g = gains[m];
    for (int n = 0; n < N; ++n) {
      double p = u[begin + m * N + n];
      if (p <= kAssignPowerTol) continue;  // snapped away
      t.capacity += std::log2(1.0 + g * p);
      disp += fbt::dispersion(g * p);
    }
  }
  t.dispersion_term = qinv * fbt::kLog2E * std::sqrt(disp);
  return t;
}

}  // namespace detail

/// Membership in the normal set G: the split dispersion bounds together with
/// every monotone constraint of the reformulated problem, evaluated with
/// assignments derived from the snapped powers.
inline bool in_normal_set(std::span<const double> u, std::span<const std::uint8_t> alpha_bar,
                          const ChannelRealization& ch, const Scenario& sc,
                          const CheckContext& ctx, double tol = kDefaultTol) {
  const PointLayout& ly = ctx.layout;
  double bs_sum = 0;
  for (int k = 0; k < sc.K; ++k) {
    // C13, C15 with the fixed mode vector. The deadline boundary uses a
    // relative guard so that f pinned exactly at the forced frequency passes.
    double f = u[ly.f(k)];
    if (f < -tol || f > sc.f_max + tol) return false;
    if (alpha_bar[k] && f < sc.forced_cpu_hz(k) * (1.0 - 1e-12) - tol) return false;
    // split dispersion bounds C1b / C2b
    auto up = detail::link_terms(u, ly.pu_begin(k), ch.gains_u(k), sc.M_u, sc.N_u, ctx.qinv_u[k]);
    if (up.dispersion_term + u[ly.zu(k)] > ctx.vbar_u[k] + tol) return false;
    auto down = detail::link_terms(u, ly.pd_begin(k), ch.gains_d(k), sc.M_d, sc.N_d, ctx.qinv_d[k]);
    if (down.dispersion_term + u[ly.zd(k)] > ctx.vbar_d[k] + tol) return false;
    if (u[ly.zu(k)] < -tol || u[ly.zd(k)] < -tol) return false;
    // budgets C9 / C11 on snapped powers
    double up_sum = 0;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        double p = u[ly.pu(k, m, n)];
        if (p < -tol) return false;
        if (p > kAssignPowerTol) up_sum += p;
      }
    if (up_sum > sc.P_k_max[k] + tol) return false;
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        double p = u[ly.pd(k, m, n)];
        if (p < -tol) return false;
        if (p > kAssignPowerTol) bs_sum += p;
      }
  }
  if (bs_sum > sc.P_max + tol) return false;
  // exclusivity C5 / C7 on derived assignments
  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n) {
      int users = 0;
      for (int k = 0; k < sc.K; ++k) users += u[ly.pu(k, m, n)] > kAssignPowerTol;
      if (users > 1) return false;
    }
  for (int m = 0; m < sc.M_d; ++m)
    for (int n = 0; n < sc.N_d; ++n) {
      int users = 0;
      for (int k = 0; k < sc.K; ++k) users += u[ly.pd(k, m, n)] > kAssignPowerTol;
      if (users > 1) return false;
    }
  // causality C3 and deadline C4 on derived assignments
  for (int k = 0; k < sc.K; ++k) {
    for (int o = 1; o <= sc.overlap(); ++o) {
      bool up_used = false, down_used = false;
      for (int m = 0; m < sc.M_u && !up_used; ++m)
        up_used = u[ly.pu(k, m, sc.tau + o - 1)] > kAssignPowerTol;
      for (int m = 0; m < sc.M_d && !down_used; ++m)
        down_used = u[ly.pd(k, m, o - 1)] > kAssignPowerTol;
      if (up_used && down_used) return false;
    }
    for (int n = std::max(1, sc.D_k[k] - sc.tau); n <= sc.N_d; ++n)
      for (int m = 0; m < sc.M_d; ++m)
        if (u[ly.pd(k, m, n - 1)] > kAssignPowerTol) return false;
  }
  return true;
}

/// Membership in the co-normal set H: the capacity side of the split rate
/// constraints.
inline bool in_conormal_set(std::span<const double> u, std::span<const std::uint8_t> alpha_bar,
                            const ChannelRealization& ch, const Scenario& sc,
                            const CheckContext& ctx, double tol = kDefaultTol) {
  const PointLayout& ly = ctx.layout;
  for (int k = 0; k < sc.K; ++k) {
    auto up = detail::link_terms(u, ly.pu_begin(k), ch.gains_u(k), sc.M_u, sc.N_u, ctx.qinv_u[k]);
    double need_u = ctx.vbar_u[k] + (1 - alpha_bar[k]) * sc.B_k[k];
    if (up.capacity + u[ly.zu(k)] < need_u - tol) return false;
    auto down = detail::link_terms(u, ly.pd_begin(k), ch.gains_d(k), sc.M_d, sc.N_d, ctx.qinv_d[k]);
    double need_d = ctx.vbar_d[k] + (1 - alpha_bar[k]) * sc.Gamma_k[k] * sc.B_k[k];
    if (down.capacity + u[ly.zd(k)] < need_d - tol) return false;
  }
  return true;
}

/// Full feasibility of a continuous point for the fixed mode vector: the
/// point must lie in G and in H. A point that passes induces an allocation
/// satisfying every constraint of the original problem.
inline bool feasibility_check(std::span<const double> u, std::span<const std::uint8_t> alpha_bar,
                              const ChannelRealization& ch, const Scenario& sc,
                              const CheckContext& ctx, double tol = kDefaultTol) {
  return in_normal_set(u, alpha_bar, ch, sc, ctx, tol) &&
         in_conormal_set(u, alpha_bar, ch, sc, ctx, tol);
}

inline bool feasibility_check(std::span<const double> u, std::span<const std::uint8_t> alpha_bar,
                              const ChannelRealization& ch, const Scenario& sc,
                              double tol = kDefaultTol) {
  auto ctx = CheckContext::make(sc, ch);
  return feasibility_check(u, alpha_bar, ch, sc, ctx, tol);
}

/// Feasibility of the powers alone, with the split auxiliaries existentially
/// quantified. A zeta value satisfying both split constraints exists exactly
/// when psi(p) covers the required bits, so this collapses to the original
/// rate constraints plus the monotone families. Corner checks in the global
/// solver use this form: demanding the stored zeta itself to sit inside the
/// (arbitrarily narrow) split window would make feasible corners a
/// measure-zero event and stall the search.
inline bool feasibility_check_projected(std::span<const double> u,
                                        std::span<const std::uint8_t> alpha_bar,
                                        const ChannelRealization& ch, const Scenario& sc,
                                        const CheckContext& ctx, double tol = kDefaultTol) {
  if (!in_normal_set(u, alpha_bar, ch, sc, ctx, tol)) return false;
  const PointLayout& ly = ctx.layout;
  for (int k = 0; k < sc.K; ++k) {
    auto up = detail::link_terms(u, ly.pu_begin(k), ch.gains_u(k), sc.M_u, sc.N_u, ctx.qinv_u[k]);
    if (up.capacity - up.dispersion_term < (1 - alpha_bar[k]) * sc.B_k[k] - tol) return false;
    auto down = detail::link_terms(u, ly.pd_begin(k), ch.gains_d(k), sc.M_d, sc.N_d, ctx.qinv_d[k]);
    if (down.capacity - down.dispersion_term <
        (1 - alpha_bar[k]) * sc.Gamma_k[k] * sc.B_k[k] - tol)
      return false;
  }
  return true;
}

}  // namespace mecopt::constraints

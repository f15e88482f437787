#pragma once

// Globally optimal solver. For a fixed mode vector the problem is monotone:
// the objective increases in every coordinate of u = (f, p_u, p_d, zeta),
// the set G cut out by the monotone constraints is downward closed, and the
// set H cut out by the capacity constraints is upward closed. Branch-and-
// bound over boxes then needs only corner evaluations: a box can be
// discarded when its lower corner leaves G or when no point of it can reach
// the capacity requirement, and a feasible lower corner is the best point
// its box contains. The binary modes are handled by enumerating all 2^K
// mode vectors.
//
// Mode-dependent variable pinning: a locally computing user runs its CPU at
// the slowest deadline-feasible frequency and never transmits, so its f is
// fixed there and its powers are fixed at zero with the dispersion auxiliary
// parked at its box top; an offloading user needs no CPU, so its f is fixed
// at zero. Neither pin can exclude an optimum because the objective is
// increasing in f and p and no other constraint wants them larger.
//
// The split auxiliaries zeta are carried in the box but never branched:
// they have no objective coefficient, so both children of a zeta split stay
// in the same bound tier and the live set grows exponentially. Their window
// is instead folded into the bounding machinery in closed form.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mecopt/constraints.hpp"
#include "mecopt/model.hpp"
#include "mecopt/report.hpp"

namespace mecopt::bnb {

/// Axis-aligned box over the continuous point u, with a cached lower bound
/// on the objective over the box.
struct Box {
  std::vector<double> lower, upper;
  double bound = 0;
};

struct BnbOptions {
  double gap_tol = 1e-2;          // relative optimality gap at termination
  long max_iterations = 200000;   // selection/branch steps per mode vector
  double time_budget_s = std::numeric_limits<double>::infinity();
  double tol = constraints::kDefaultTol;
  // called once per iteration with (iteration, incumbent, smallest live bound)
  std::function<void(long, double, double)> on_progress;
};

/// Objective of the reformulated problem at a continuous point (powers enter
/// directly; assignments are implicit).
inline double objective_at(std::span<const double> u, std::span<const std::uint8_t> alpha_bar,
                           const Scenario& sc, const constraints::PointLayout& ly) {
  double total = 0;
  for (int k = 0; k < sc.K; ++k) {
    double up = 0;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) up += u[ly.pu(k, m, n)];
    double f = u[ly.f(k)];
    total += sc.w_k[k] * (sc.kappa * f * f * f + sc.delta_k[k] * up + (1 - alpha_bar[k]) * sc.P_cir);
  }
  double down = 0;
  for (int k = 0; k < sc.K; ++k)
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) down += u[ly.pd(k, m, n)];
  return total + sc.delta_BS * down;
}

inline double lower_bound(const Box& box, const Scenario& sc,
                          std::span<const std::uint8_t> alpha_bar) {
  return objective_at(box.lower, alpha_bar, sc, constraints::PointLayout::of(sc));
}

enum class RootStatus { proceed, infeasible, lower_corner_optimal };

struct RootBox {
  Box box;
  RootStatus status = RootStatus::proceed;
};

/// Build the root box for a mode vector and classify it: proceed, provably
/// infeasible (lower corner outside G, no reachable rate, or a local
/// deadline no frequency can meet), or already optimal at the lower corner.
inline RootBox initial_box(const Scenario& sc, const ChannelRealization& ch,
                           std::span<const std::uint8_t> alpha_bar,
                           const constraints::CheckContext& ctx,
                           double tol = constraints::kDefaultTol) {
  const constraints::PointLayout& ly = ctx.layout;
  RootBox root;
  root.box.lower.assign(ly.size(), 0.0);
  root.box.upper.assign(ly.size(), 0.0);
  for (int k = 0; k < sc.K; ++k) {
    if (alpha_bar[k]) {
      double forced = sc.forced_cpu_hz(k);
      if (forced > sc.f_max) {
        root.status = RootStatus::infeasible;
        return root;
      }
      root.box.lower[ly.f(k)] = root.box.upper[ly.f(k)] = forced;
      // transmit coordinates stay pinned at zero; the auxiliary sits at the
      // box top, the only value compatible with zero capacity
      root.box.lower[ly.zu(k)] = root.box.upper[ly.zu(k)] = ctx.vbar_u[k];
      root.box.lower[ly.zd(k)] = root.box.upper[ly.zd(k)] = ctx.vbar_d[k];
    } else {
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n) root.box.upper[ly.pu(k, m, n)] = sc.P_k_max[k];
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n) root.box.upper[ly.pd(k, m, n)] = sc.P_max;
      root.box.upper[ly.zu(k)] = ctx.vbar_u[k];
      root.box.upper[ly.zd(k)] = ctx.vbar_d[k];
    }
  }
  root.box.bound = objective_at(root.box.lower, alpha_bar, sc, ly);
  if (!constraints::in_normal_set(root.box.lower, alpha_bar, ch, sc, ctx, tol)) {
    root.status = RootStatus::infeasible;
    return root;
  }
  if (constraints::feasibility_check_projected(root.box.lower, alpha_bar, ch, sc, ctx, tol)) {
    root.status = RootStatus::lower_corner_optimal;
    return root;
  }
  if (!constraints::in_conormal_set(root.box.upper, alpha_bar, ch, sc, ctx, tol)) {
    root.status = RootStatus::infeasible;
    return root;
  }
  root.status = RootStatus::proceed;
  return root;
}

/// Bisect the longest edge (ties go to the lowest coordinate index). Returns
/// false when the box is numerically a point and cannot be split. Only the
/// first `branchable` coordinates are considered (everything by default).
inline bool branch(const Box& box, Box& child1, Box& child2, int branchable = -1) {
  std::size_t limit = branchable < 0 ? box.lower.size()
                                     : std::min<std::size_t>(branchable, box.lower.size());
  int j = -1;
  double longest = 0;
  for (std::size_t i = 0; i < limit; ++i) {
    double edge = box.upper[i] - box.lower[i];
    if (edge > longest) {
      longest = edge;
      j = static_cast<int>(i);
    }
  }
  if (j < 0) return false;
  double mid = box.lower[j] + 0.5 * longest;
  if (!(mid > box.lower[j]) || !(mid < box.upper[j])) return false;
  child1 = box;
  child1.upper[j] = mid;
  child2 = box;
  child2.lower[j] = mid;
  return true;
}

namespace detail {

/// Which elements of user k's links a feasible point in the box may load
/// beyond the lower corner. Excluded are: elements whose box top is at the
/// snap tolerance, deadline-forbidden downlink slots, elements another user
/// is already forced onto (exclusivity), and slots whose overlap partner is
/// already forced on the user's own other link (causality).
struct LinkMasks {
  std::vector<std::uint8_t> up, down;
  std::vector<std::uint8_t> up_forced_slot, down_forced_slot;  // 1-indexed slots
};

inline LinkMasks element_masks(const Box& box, int k, const Scenario& sc,
                               const constraints::PointLayout& ly) {
  const double ptol = constraints::kAssignPowerTol;
  LinkMasks mk;
  mk.up.assign(static_cast<std::size_t>(sc.M_u) * sc.N_u, 0);
  mk.down.assign(static_cast<std::size_t>(sc.M_d) * sc.N_d, 0);
  mk.up_forced_slot.assign(sc.N_u + 1, 0);
  mk.down_forced_slot.assign(sc.N_d + 1, 0);
  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n)
      if (box.lower[ly.pu(k, m, n)] > ptol) mk.up_forced_slot[n + 1] = 1;
  for (int m = 0; m < sc.M_d; ++m)
    for (int n = 0; n < sc.N_d; ++n)
      if (box.lower[ly.pd(k, m, n)] > ptol) mk.down_forced_slot[n + 1] = 1;

  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n) {
      if (box.upper[ly.pu(k, m, n)] <= ptol) continue;
      bool taken = false;
      for (int k2 = 0; k2 < sc.K && !taken; ++k2)
        taken = k2 != k && box.lower[ly.pu(k2, m, n)] > ptol;
      if (taken) continue;
      // uplink slot n+1 = tau + o pairs with own downlink slot o
      int o = n + 1 - sc.tau;
      if (o >= 1 && o <= sc.N_d && mk.down_forced_slot[o]) continue;
      mk.up[m * sc.N_u + n] = 1;
    }
  for (int m = 0; m < sc.M_d; ++m)
    for (int n = 0; n < sc.N_d; ++n) {
      if (box.upper[ly.pd(k, m, n)] <= ptol) continue;
      if (n + 1 >= sc.D_k[k] - sc.tau) continue;  // deadline
      bool taken = false;
      for (int k2 = 0; k2 < sc.K && !taken; ++k2)
        taken = k2 != k && box.lower[ly.pd(k2, m, n)] > ptol;
      if (taken) continue;
      int up_slot = sc.tau + n + 1;  // own uplink partner of downlink slot n+1
      if (up_slot <= sc.N_u && mk.up_forced_slot[up_slot]) continue;
      mk.down[m * sc.N_d + n] = 1;
    }
  return mk;
}

/// Least possible per-link dispersion sum over all points whose capacity
/// reaches `capacity_bits`, each element's capacity capped by the box upper.
/// An element carrying c bits has dispersion exactly 1 - 4^-c, a concave
/// increasing function, so the minimum packs the capacity onto as few
/// elements as possible, largest caps first.
inline double packed_min_dispersion(std::vector<double>& caps, double capacity_bits) {
  std::sort(caps.begin(), caps.end(), std::greater<>());
  double remaining = capacity_bits, sum_nu = 0;
  for (double cap : caps) {
    if (remaining <= 0) break;
    double c = std::min(cap, remaining);
    sum_nu += 1.0 - std::exp2(-2.0 * c);
    remaining -= c;
  }
  return sum_nu;
}

/// Self-consistent capacity floor: every point of the box meeting the rate
/// requirement must carry requirement + dispersion-term bits, and the
/// dispersion term itself grows with the capacity carried. Iterating the
/// packed minimum converges from below in a few steps. Masked-out elements
/// contribute only their lower-corner capacity.
inline double capacity_floor(std::span<const double> gains, int M, int N,
                             std::span<const double> lo, std::span<const double> hi,
                             std::span<const std::uint8_t> allowed, double required_bits,
                             double qinv, std::vector<double>& caps) {
  caps.resize(static_cast<std::size_t>(M) * N);
  double disp_low = 0;
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      int j = m * N + n;
      caps[j] = std::log2(1.0 + gains[m] * (allowed[j] ? hi[j] : lo[j]));
      disp_low += fbt::dispersion(gains[m] * lo[j]);
    }
  double floor_bits = required_bits;
  std::vector<double> caps_copy;
  for (int it = 0; it < 6; ++it) {
    caps_copy = caps;
    double disp = std::max(disp_low, packed_min_dispersion(caps_copy, floor_bits));
    double next = required_bits + fbt::kLog2E * qinv * std::sqrt(disp);
    if (next <= floor_bits + 1e-9) break;
    floor_bits = next;
  }
  return floor_bits;
}

/// Minimal total power delivering `capacity_bits` over elements constrained
/// to [lo, hi] (masked-out elements stay at their lower value), by bisection
/// on the water level. Fills `point` with the chosen powers. `round_up`
/// picks the feasible end of the bisection (for candidate points);
/// otherwise the infeasible end is returned, whose cost never exceeds the
/// true minimum (for bounds). Returns infinity when even the allowed upper
/// corner cannot carry the capacity.
inline double waterfill_min_power(std::span<const double> gains, int M, int N,
                                  std::span<const double> lo, std::span<const double> hi,
                                  std::span<const std::uint8_t> allowed, double capacity_bits,
                                  bool round_up, std::vector<double>& point) {
  point.assign(lo.begin(), lo.end());
  auto fill_at = [&](double level) {
    double cap = 0, cost = 0;
    for (int m = 0; m < M; ++m) {
      double g = gains[m];
      for (int n = 0; n < N; ++n) {
        int j = m * N + n;
        double p = lo[j];
        if (allowed[j]) p = std::clamp(level - 1.0 / g, lo[j], hi[j]);
        point[j] = p;
        cap += std::log2(1.0 + g * p);
        cost += p;
      }
    }
    return std::pair{cap, cost};
  };
  double level_hi = 0;
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) level_hi = std::max(level_hi, hi[m * N + n] + 1.0 / gains[m]);
  auto [cap_max, cost_max] = fill_at(level_hi);
  if (cap_max < capacity_bits) return std::numeric_limits<double>::infinity();
  auto [cap_min, cost_min] = fill_at(0.0);
  if (cap_min >= capacity_bits) return cost_min;  // lower corner already delivers
  double level_lo = 0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (level_lo + level_hi);
    if (fill_at(mid).first >= capacity_bits)
      level_hi = mid;
    else
      level_lo = mid;
  }
  return fill_at(round_up ? level_hi : level_lo).second;
}

/// Cheapest radiated power on one link of one user under a fixed
/// allowed-element mask, with the self-consistent capacity floor.
inline double link_min_cost(std::span<const double> gains, int M, int N,
                            std::span<const double> lo, std::span<const double> hi,
                            std::span<const std::uint8_t> allowed, double required_bits,
                            double qinv, std::vector<double>& caps, std::vector<double>& point) {
  double floor_bits = capacity_floor(gains, M, N, lo, hi, allowed, required_bits, qinv, caps);
  return waterfill_min_power(gains, M, N, lo, hi, allowed, floor_bits, false, point);
}

struct HeapEntry {
  double bound;
  std::uint64_t seq;  // insertion order breaks bound ties deterministically
  Box box;
};

struct HeapCmp {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.seq > b.seq;
  }
};

}  // namespace detail

/// Rate-aware lower bound: mode-constant terms plus, per offloading user,
/// the cheapest radiated power that can deliver the required capacity from
/// inside the box. For each user the handful of undecided overlap-slot
/// pairings is enumerated and the cheapest pattern taken, so the bound sees
/// the causality coupling; exclusivity enters through elements other users
/// are forced onto. Returns infinity when some user cannot reach its rate.
inline double rate_aware_bound(const Box& box, std::span<const std::uint8_t> alpha_bar,
                               const ChannelRealization& ch, const Scenario& sc,
                               const constraints::CheckContext& ctx) {
  const constraints::PointLayout& ly = ctx.layout;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> caps, point;
  double total = 0;
  for (int k = 0; k < sc.K; ++k) {
    double f = box.lower[ly.f(k)];
    total += sc.w_k[k] * (sc.kappa * f * f * f + (1 - alpha_bar[k]) * sc.P_cir);
    if (alpha_bar[k]) continue;

    detail::LinkMasks mk = detail::element_masks(box, k, sc, ly);
    const std::size_t Eu = static_cast<std::size_t>(sc.M_u) * sc.N_u;
    const std::size_t Ed = static_cast<std::size_t>(sc.M_d) * sc.N_d;
    auto lo_u = std::span<const double>(box.lower).subspan(ly.pu_begin(k), Eu);
    auto hi_u = std::span<const double>(box.upper).subspan(ly.pu_begin(k), Eu);
    auto lo_d = std::span<const double>(box.lower).subspan(ly.pd_begin(k), Ed);
    auto hi_d = std::span<const double>(box.upper).subspan(ly.pd_begin(k), Ed);

    // overlap pairs where both sides are still open for this user
    std::vector<int> open_pairs;
    for (int o = 1; o <= sc.overlap() && o <= sc.N_d; ++o)
      if (!mk.up_forced_slot[sc.tau + o] && !mk.down_forced_slot[o]) open_pairs.push_back(o);
    const int max_enum = 4;
    int npat = open_pairs.size() <= max_enum ? (1 << open_pairs.size()) : 1;

    double best_cost = inf;
    std::vector<std::uint8_t> mu, md;
    for (int pat = 0; pat < npat; ++pat) {
      mu = mk.up;
      md = mk.down;
      if (npat > 1) {
        for (std::size_t i = 0; i < open_pairs.size(); ++i) {
          int o = open_pairs[i];
          if (pat & (1 << i)) {
            // downlink keeps slot o, uplink loses slot tau+o
            for (int m = 0; m < sc.M_u; ++m) mu[m * sc.N_u + (sc.tau + o - 1)] = 0;
          } else {
            for (int m = 0; m < sc.M_d; ++m) md[m * sc.N_d + (o - 1)] = 0;
          }
        }
      }
      double cu = detail::link_min_cost(ch.gains_u(k), sc.M_u, sc.N_u, lo_u, hi_u, mu, sc.B_k[k],
                                        ctx.qinv_u[k], caps, point);
      if (!std::isfinite(cu)) continue;
      double cd = detail::link_min_cost(ch.gains_d(k), sc.M_d, sc.N_d, lo_d, hi_d, md,
                                        sc.Gamma_k[k] * sc.B_k[k], ctx.qinv_d[k], caps, point);
      if (!std::isfinite(cd)) continue;
      best_cost = std::min(best_cost, sc.w_k[k] * sc.delta_k[k] * cu + sc.delta_BS * cd);
    }
    if (!std::isfinite(best_cost)) return inf;
    total += best_cost;
  }
  return total;
}

/// Reduction step: shrink a box without losing any feasible point. On each
/// link of an offloading user, every feasible p must put at least
/// (2^r - 1)/g_j on element j, where r is what the capacity floor leaves
/// after all other allowed elements contribute their maximum; and the budget
/// caps every element at lower_j plus the budget slack. Returns false when
/// the tightening proves the box empty.
inline bool reduce_box(Box& box, std::span<const std::uint8_t> alpha_bar,
                       const ChannelRealization& ch, const Scenario& sc,
                       const constraints::CheckContext& ctx,
                       double tol = constraints::kDefaultTol) {
  const constraints::PointLayout& ly = ctx.layout;
  std::vector<double> caps;
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = 0; k < sc.K; ++k) {
      if (alpha_bar[k]) continue;
      detail::LinkMasks mk = detail::element_masks(box, k, sc, ly);
      for (int link = 0; link < 2; ++link) {
        const int begin = link == 0 ? ly.pu_begin(k) : ly.pd_begin(k);
        const int M = link == 0 ? sc.M_u : sc.M_d;
        const int N = link == 0 ? sc.N_u : sc.N_d;
        auto gains = link == 0 ? ch.gains_u(k) : ch.gains_d(k);
        const double qinv = link == 0 ? ctx.qinv_u[k] : ctx.qinv_d[k];
        const double need = link == 0 ? sc.B_k[k] : sc.Gamma_k[k] * sc.B_k[k];
        const auto& allowed = link == 0 ? mk.up : mk.down;
        const int E = M * N;

        auto lo = std::span<const double>(box.lower).subspan(begin, E);
        auto hi = std::span<const double>(box.upper).subspan(begin, E);
        const double floor_bits =
            detail::capacity_floor(gains, M, N, lo, hi, allowed, need, qinv, caps);
        double cap_up = 0;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            int j = m * N + n;
            cap_up += std::log2(1.0 + gains[m] * (allowed[j] ? hi[j] : lo[j]));
          }
        if (cap_up < floor_bits - tol) return false;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            int j = m * N + n;
            if (!allowed[j]) continue;
            double r = floor_bits - (cap_up - std::log2(1.0 + gains[m] * hi[j]));
            if (r <= 0) continue;
            double p_min = (std::exp2(r) - 1.0) / gains[m];
            if (p_min > hi[j] + tol) return false;
            box.lower[begin + j] = std::max(box.lower[begin + j], std::min(p_min, hi[j]));
          }
      }
      // uplink budget caps the uppers given the other lowers
      double low_sum = 0;
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n) low_sum += box.lower[ly.pu(k, m, n)];
      if (low_sum > sc.P_k_max[k] + tol) return false;
      double slack = sc.P_k_max[k] - low_sum;
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n) {
          const int j = ly.pu(k, m, n);
          box.upper[j] = std::min(box.upper[j], box.lower[j] + slack);
          if (box.upper[j] < box.lower[j]) return false;
        }
    }
    // BS budget is shared across users
    double low_sum = 0;
    for (int k = 0; k < sc.K; ++k)
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n) low_sum += box.lower[ly.pd(k, m, n)];
    if (low_sum > sc.P_max + tol) return false;
    double slack = sc.P_max - low_sum;
    for (int k = 0; k < sc.K; ++k)
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n) {
          const int j = ly.pd(k, m, n);
          box.upper[j] = std::min(box.upper[j], box.lower[j] + slack);
          if (box.upper[j] < box.lower[j]) return false;
        }
  }
  return true;
}

/// Primal heuristic: water-fill each offloading user's links over a
/// deterministic element partition (highest gain wins, rotating tie-break),
/// honoring the masks, then accept the point only if the exact feasibility
/// check passes. Returns the candidate's objective or infinity.
inline double build_candidate(const Box& box, std::span<const std::uint8_t> alpha_bar,
                              const ChannelRealization& ch, const Scenario& sc,
                              const constraints::CheckContext& ctx, std::vector<double>& point,
                              Allocation& alloc_out, double tol = constraints::kDefaultTol) {
  const constraints::PointLayout& ly = ctx.layout;
  const double inf = std::numeric_limits<double>::infinity();
  point.assign(box.lower.begin(), box.lower.end());

  auto owner_of = [&](bool uplink, int m, int n) {
    double best_g = -1;
    std::vector<int> tied;
    for (int k = 0; k < sc.K; ++k) {
      if (alpha_bar[k]) continue;
      double g = uplink ? ch.gain_u(k, m) : ch.gain_d(k, m);
      if (g > best_g) {
        best_g = g;
        tied.assign(1, k);
      } else if (g == best_g) {
        tied.push_back(k);
      }
    }
    if (tied.empty()) return -1;
    int N = uplink ? sc.N_u : sc.N_d;
    return tied[(static_cast<std::size_t>(m) * N + n) % tied.size()];
  };

  std::vector<double> scratch;
  std::vector<std::vector<std::uint8_t>> uses_up_slot(sc.K,
                                                      std::vector<std::uint8_t>(sc.N_u + 1, 0));
  // uplink first; remember which overlap slots each user ends up occupying
  for (int k = 0; k < sc.K; ++k) {
    if (alpha_bar[k]) continue;
    detail::LinkMasks mk = detail::element_masks(box, k, sc, ly);
    const int E = sc.M_u * sc.N_u;
    std::vector<std::uint8_t> allowed(E, 0);
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        int j = m * sc.N_u + n;
        bool mine = owner_of(true, m, n) == k || box.lower[ly.pu(k, m, n)] > tol;
        allowed[j] = mine && mk.up[j];
      }
    auto lo = std::span<const double>(box.lower).subspan(ly.pu_begin(k), E);
    auto hi = std::span<const double>(box.upper).subspan(ly.pu_begin(k), E);
    // iterate the capacity target since the dispersion grows with the fill
    double target = sc.B_k[k];
    double cost = inf;
    for (int it = 0; it < 12; ++it) {
      cost = detail::waterfill_min_power(ch.gains_u(k), sc.M_u, sc.N_u, lo, hi, allowed, target,
                                         true, scratch);
      if (!std::isfinite(cost)) return inf;
      double disp = fbt::dispersion_sum(scratch, ch.gains_u(k), sc.M_u, sc.N_u);
      double next = sc.B_k[k] + fbt::kLog2E * ctx.qinv_u[k] * std::sqrt(disp) + 1e-6;
      if (next <= target + 1e-8) break;
      target = next;
    }
    if (cost > sc.P_k_max[k] + tol) return inf;
    for (int j = 0; j < E; ++j) {
      point[ly.pu_begin(k) + j] = scratch[j];
      if (scratch[j] > constraints::kAssignPowerTol) uses_up_slot[k][j % sc.N_u + 1] = 1;
    }
  }
  // downlink second, excluding slots paired with the uplink fill
  for (int k = 0; k < sc.K; ++k) {
    if (alpha_bar[k]) continue;
    detail::LinkMasks mk = detail::element_masks(box, k, sc, ly);
    const int E = sc.M_d * sc.N_d;
    std::vector<std::uint8_t> allowed(E, 0);
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        int j = m * sc.N_d + n;
        int o = n + 1;
        if (o <= sc.overlap() && uses_up_slot[k][sc.tau + o]) continue;
        bool mine = owner_of(false, m, n) == k || box.lower[ly.pd(k, m, n)] > tol;
        allowed[j] = mine && mk.down[j];
      }
    auto lo = std::span<const double>(box.lower).subspan(ly.pd_begin(k), E);
    auto hi = std::span<const double>(box.upper).subspan(ly.pd_begin(k), E);
    double target = sc.Gamma_k[k] * sc.B_k[k];
    double cost = inf;
    for (int it = 0; it < 12; ++it) {
      cost = detail::waterfill_min_power(ch.gains_d(k), sc.M_d, sc.N_d, lo, hi, allowed, target,
                                         true, scratch);
      if (!std::isfinite(cost)) return inf;
      double disp = fbt::dispersion_sum(scratch, ch.gains_d(k), sc.M_d, sc.N_d);
      double next =
          sc.Gamma_k[k] * sc.B_k[k] + fbt::kLog2E * ctx.qinv_d[k] * std::sqrt(disp) + 1e-6;
      if (next <= target + 1e-8) break;
      target = next;
    }
    if (!std::isfinite(cost)) return inf;
    for (int j = 0; j < E; ++j) point[ly.pd_begin(k) + j] = scratch[j];
  }

  if (!constraints::feasibility_check_projected(point, alpha_bar, ch, sc, ctx, tol)) return inf;
  alloc_out = constraints::induced_allocation(point, alpha_bar, sc);
  return total_power(alloc_out, sc).weighted_total_w;
}

/// Branch-and-bound for one mode vector.
inline SolveReport solve_fixed_alpha(const Scenario& sc, const ChannelRealization& ch,
                                     std::span<const std::uint8_t> alpha_bar,
                                     const BnbOptions& opts, const constraints::CheckContext& ctx) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const constraints::PointLayout& ly = ctx.layout;

  SolveReport rep;
  rep.algo = "bnb";
  rep.alpha.assign(alpha_bar.begin(), alpha_bar.end());

  auto finish = [&](SolveStatus st) {
    rep.status = st;
    rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return rep;
  };

  RootBox root = initial_box(sc, ch, alpha_bar, ctx, opts.tol);
  if (root.status == RootStatus::infeasible) {
    rep.gap = std::numeric_limits<double>::infinity();
    rep.lower_bound_w = std::numeric_limits<double>::infinity();
    return finish(SolveStatus::infeasible);
  }
  if (root.status == RootStatus::lower_corner_optimal) {
    rep.allocation = constraints::induced_allocation(root.box.lower, alpha_bar, sc);
    rep.has_allocation = true;
    rep.objective_w = total_power(rep.allocation, sc).weighted_total_w;
    rep.gap = 0;
    rep.lower_bound_w = rep.objective_w;
    rep.proven_optimal = true;
    return finish(SolveStatus::optimal);
  }

  std::vector<detail::HeapEntry> live;
  detail::HeapCmp cmp;
  std::uint64_t seq = 0;

  double best = std::numeric_limits<double>::infinity();
  Allocation best_alloc;
  bool have_incumbent = false;
  std::vector<double> cand_point;
  Allocation cand_alloc;
  auto try_candidate = [&](const Box& b) {
    double obj = build_candidate(b, alpha_bar, ch, sc, ctx, cand_point, cand_alloc, opts.tol);
    if (obj < best) {
      best = obj;
      best_alloc = cand_alloc;
      have_incumbent = true;
    }
  };

  if (!reduce_box(root.box, alpha_bar, ch, sc, ctx, opts.tol)) {
    rep.gap = std::numeric_limits<double>::infinity();
    rep.lower_bound_w = std::numeric_limits<double>::infinity();
    return finish(SolveStatus::infeasible);
  }
  try_candidate(root.box);
  root.box.bound = rate_aware_bound(root.box, alpha_bar, ch, sc, ctx);
  if (std::isfinite(root.box.bound)) live.push_back({root.box.bound, seq++, std::move(root.box)});

  double rel_gap = std::numeric_limits<double>::infinity();
  long iter = 0;
  bool budget_out = false;

  Box child1, child2;
  while (!live.empty()) {
    double min_bound = live.front().bound;
    if (have_incumbent) {
      rel_gap = (best - min_bound) / std::max(best, 1e-12);
      if (rel_gap <= opts.gap_tol) break;
    }
    if (iter >= opts.max_iterations ||
        std::chrono::duration<double>(clock::now() - t0).count() > opts.time_budget_s) {
      budget_out = true;
      break;
    }
    ++iter;
    if (opts.on_progress) opts.on_progress(iter, best, min_bound);

    std::pop_heap(live.begin(), live.end(), cmp);
    detail::HeapEntry top = std::move(live.back());
    live.pop_back();
    if (have_incumbent && top.bound > best) continue;  // stale, prune lazily

    const int branchable = ly.K + ly.K * ly.M_u * ly.N_u + ly.K * ly.M_d * ly.N_d;
    if (!branch(top.box, child1, child2, branchable)) continue;  // a point; nothing new inside
    for (Box* child : {&child1, &child2}) {
      if (!reduce_box(*child, alpha_bar, ch, sc, ctx, opts.tol)) continue;
      if (!constraints::in_normal_set(child->lower, alpha_bar, ch, sc, ctx, opts.tol)) continue;
      if (constraints::feasibility_check_projected(child->lower, alpha_bar, ch, sc, ctx,
                                                   opts.tol)) {
        // feasible lower corner: the box cannot contain anything better
        Allocation cand = constraints::induced_allocation(child->lower, alpha_bar, sc);
        double obj = total_power(cand, sc).weighted_total_w;
        if (obj < best) {
          best = obj;
          best_alloc = std::move(cand);
          have_incumbent = true;
        }
        continue;
      }
      child->bound = rate_aware_bound(*child, alpha_bar, ch, sc, ctx);
      if (!std::isfinite(child->bound)) continue;  // no reachable rate in the box
      if (have_incumbent && child->bound >= best) continue;
      try_candidate(*child);
      live.push_back({child->bound, seq++, std::move(*child)});
      std::push_heap(live.begin(), live.end(), cmp);
    }
  }

  rep.iterations = iter;
  double min_live = live.empty() ? std::numeric_limits<double>::infinity() : live.front().bound;
  if (!have_incumbent) {
    rep.gap = std::numeric_limits<double>::infinity();
    rep.lower_bound_w = budget_out ? min_live : std::numeric_limits<double>::infinity();
    return finish(budget_out ? SolveStatus::budget_exhausted : SolveStatus::infeasible);
  }
  rep.objective_w = best;
  rep.allocation = std::move(best_alloc);
  rep.has_allocation = true;
  if (live.empty()) rel_gap = 0;
  rep.gap = std::max(0.0, rel_gap);
  rep.lower_bound_w = std::min(best, min_live);
  rep.proven_optimal = rep.gap <= opts.gap_tol;
  return finish(rep.proven_optimal ? SolveStatus::optimal : SolveStatus::budget_exhausted);
}

inline SolveReport solve_fixed_alpha(const Scenario& sc, const ChannelRealization& ch,
                                     std::span<const std::uint8_t> alpha_bar,
                                     const BnbOptions& opts = {}) {
  auto ctx = constraints::CheckContext::make(sc, ch);
  return solve_fixed_alpha(sc, ch, alpha_bar, opts, ctx);
}

/// Exhaustive enumeration of the 2^K mode vectors. Modes whose local
/// deadline cannot be met by any frequency are screened out up front.
inline SolveReport solve_global(const Scenario& sc, const ChannelRealization& ch,
                                const BnbOptions& opts = {}) {
  if (sc.K > 12) throw std::invalid_argument("solve_global: 2^K enumeration capped at K = 12");
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto ctx = constraints::CheckContext::make(sc, ch);

  SolveReport best;
  best.algo = "bnb";
  best.gap = std::numeric_limits<double>::infinity();
  bool any_feasible = false;
  bool any_budget_out = false;
  double global_min_bound = std::numeric_limits<double>::infinity();
  long total_iters = 0;

  for (std::uint32_t mask = 0; mask < (1u << sc.K); ++mask) {
    std::vector<std::uint8_t> alpha(sc.K);
    bool screened = false;
    for (int k = 0; k < sc.K; ++k) {
      alpha[k] = (mask >> k) & 1u;
      if (alpha[k] && sc.forced_cpu_hz(k) > sc.f_max) screened = true;
    }
    if (screened) continue;
    BnbOptions mode_opts = opts;
    if (std::isfinite(opts.time_budget_s)) {
      double spent = std::chrono::duration<double>(clock::now() - t0).count();
      mode_opts.time_budget_s = std::max(0.0, opts.time_budget_s - spent);
    }
    SolveReport r = solve_fixed_alpha(sc, ch, alpha, mode_opts, ctx);
    total_iters += r.iterations;
    if (r.status == SolveStatus::budget_exhausted) any_budget_out = true;
    global_min_bound = std::min(global_min_bound, r.lower_bound_w);
    if (r.has_allocation && (!any_feasible || r.objective_w < best.objective_w)) {
      best = r;
      any_feasible = true;
    }
  }

  best.iterations = total_iters;
  best.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  if (!any_feasible) {
    best.status = any_budget_out ? SolveStatus::budget_exhausted : SolveStatus::infeasible;
    best.has_allocation = false;
    return best;
  }
  best.gap =
      std::max(0.0, (best.objective_w - global_min_bound) / std::max(best.objective_w, 1e-12));
  best.lower_bound_w = global_min_bound;
  best.proven_optimal = best.gap <= opts.gap_tol;
  best.status = best.proven_optimal ? SolveStatus::optimal : SolveStatus::budget_exhausted;
  return best;
}

}  // namespace mecopt::bnb

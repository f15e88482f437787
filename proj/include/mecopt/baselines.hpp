#pragma once

// The four comparison schemes: local computing only, Shannon-capacity
// planning (an unachievable lower bound), offloading only, and a fixed
// sub-carrier assignment. The latter three reuse the SCA machinery through
// its variant hooks.

#include <chrono>

#include "mecopt/model.hpp"
#include "mecopt/report.hpp"
#include "mecopt/sca.hpp"

namespace mecopt::baselines {

/// Every user computes locally at the slowest deadline-feasible frequency.
/// The whole scheme is infeasible as soon as one task does not fit below
/// f_max: tasks run entirely on one side or the other.
inline SolveReport lc_solve(const Scenario& sc) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  SolveReport rep;
  rep.algo = "lc";
  rep.alpha.assign(sc.K, 1);
  Allocation alloc = Allocation::zeros(sc);
  for (int k = 0; k < sc.K; ++k) {
    double forced = sc.forced_cpu_hz(k);
    if (forced > sc.f_max) {
      rep.status = SolveStatus::infeasible;
      rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      return rep;
    }
    alloc.f[k] = forced;
    alloc.alpha[k] = 1;
  }
  rep.allocation = std::move(alloc);
  rep.has_allocation = true;
  rep.objective_w = total_power(rep.allocation, sc).weighted_total_w;
  rep.lower_bound_w = rep.objective_w;
  rep.gap = 0;
  rep.proven_optimal = true;  // the scheme's own problem is solved in closed form
  rep.status = SolveStatus::optimal;
  rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return rep;
}

/// Shannon-capacity planning: the dispersion back-off is removed from the
/// rate constraints. The result is a lower bound that short-packet
/// transmission cannot promise to achieve.
inline SolveReport sc_solve(const Scenario& sc, const ChannelRealization& ch,
                            const sca::ScaOptions& opts = {}) {
  sca::ScaVariant var;
  var.algo_name = "sc";
  var.shannon_rates = true;
  return sca::solve_variant(sc, ch, opts, var);
}

/// Offloading only: every mode pinned to the edge.
inline SolveReport eo_solve(const Scenario& sc, const ChannelRealization& ch,
                            const sca::ScaOptions& opts = {}) {
  sca::ScaVariant var;
  var.algo_name = "eo";
  var.force_offload = true;
  return sca::solve_variant(sc, ch, opts, var);
}

struct FsaAssignment {
  Grid3<std::uint8_t> s_u, s_d;
  bool feasible = false;
};

/// Deterministic striping: sub-carrier m belongs to user m mod K on both
/// links. Each user takes every deadline-feasible downlink slot, then every
/// uplink slot whose overlap partner it did not claim, earliest first. The
/// construction satisfies exclusivity, the deadline, and the causality
/// pairing by design; it fails when some user ends up without uplink slots
/// or without any allowed downlink slot.
inline FsaAssignment fsa_striping(const Scenario& sc) {
  FsaAssignment out;
  out.s_u = Grid3<std::uint8_t>(sc.K, sc.M_u, sc.N_u);
  out.s_d = Grid3<std::uint8_t>(sc.K, sc.M_d, sc.N_d);
  out.feasible = true;
  for (int k = 0; k < sc.K; ++k) {
    std::vector<std::uint8_t> down_slot(sc.N_d + 1, 0);  // 1-indexed
    int down_count = 0;
    for (int n = sc.N_d; n >= 1; --n) {  // latest allowed first
      if (n >= sc.D_k[k] - sc.tau) continue;
      down_slot[n] = 1;
      ++down_count;
    }
    std::vector<std::uint8_t> up_slot(sc.N_u + 1, 0);
    int up_count = 0;
    for (int n = 1; n <= sc.N_u; ++n) {  // earliest first
      int o = n - sc.tau;                // overlap partner
      if (o >= 1 && o <= sc.N_d && down_slot[o]) continue;
      up_slot[n] = 1;
      ++up_count;
    }
    if (up_count == 0 || down_count == 0) {
      out.feasible = false;
      return out;
    }
    bool has_subcarrier_u = false, has_subcarrier_d = false;
    for (int m = 0; m < sc.M_u; ++m) {
      if (m % sc.K != k) continue;
      has_subcarrier_u = true;
      for (int n = 1; n <= sc.N_u; ++n)
        if (up_slot[n]) out.s_u.at(k, m, n - 1) = 1;
    }
    for (int m = 0; m < sc.M_d; ++m) {
      if (m % sc.K != k) continue;
      has_subcarrier_d = true;
      for (int n = 1; n <= sc.N_d; ++n)
        if (down_slot[n]) out.s_d.at(k, m, n - 1) = 1;
    }
    if (!has_subcarrier_u || !has_subcarrier_d) {
      out.feasible = false;
      return out;
    }
  }
  return out;
}

/// Fixed sub-carrier assignment: freeze the striped indicators and optimize
/// powers and modes only.
inline SolveReport fsa_solve(const Scenario& sc, const ChannelRealization& ch,
                             const sca::ScaOptions& opts = {}) {
  FsaAssignment fixed = fsa_striping(sc);
  if (!fixed.feasible) {
    SolveReport rep;
    rep.algo = "fsa";
    rep.status = SolveStatus::infeasible;
    return rep;
  }
  sca::ScaVariant var;
  var.algo_name = "fsa";
  var.fixed_s_u = &fixed.s_u;
  var.fixed_s_d = &fixed.s_d;
  return sca::solve_variant(sc, ch, opts, var);
}

}  // namespace mecopt::baselines

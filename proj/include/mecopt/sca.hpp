#pragma once

// The two successive-convex-approximation solvers. Scheme 1 relaxes the
// binary indicators, linearizes the concave parts (the dispersion term of
// each rate constraint and the squared terms of the integrality penalty)
// around the previous iterate, and keeps the exact per-element capacities;
// the product of indicator and power is carried as the single radiated-power
// variable, bounded by budget times indicator. Scheme 2 replaces the
// per-element dispersion by its high-SNR limit, which turns the back-off
// into a norm-cone bound on the indicator vector, and uses the jointly
// concave perspective form of the capacity; its subproblems need no rate
// linearization at all. Both minimize the weighted power plus an
// integrality penalty, round the relaxed indicators at the end, and rescale
// the powers so the rounded allocation meets the rate constraints exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mecopt/constraints.hpp"
#include "mecopt/convex_kernel.hpp"
#include "mecopt/model.hpp"
#include "mecopt/report.hpp"
#include "mecopt/scenario_gen.hpp"

namespace mecopt::sca {

struct ScaOptions {
  long max_iterations = 10;
  double stop_tol = 1e-3;    // relative change of the penalized objective
  double kernel_tol = 1e-6;
  double eta1 = 0, eta2 = 0, eta3 = 0;  // 0: defaults 10 K Pk_max and 10 P_max
  std::uint64_t init_seed = 0;          // 0: deterministic default start
  double time_budget_s = std::numeric_limits<double>::infinity();
};

/// Baseline hooks: the comparison schemes reuse the same machinery.
struct ScaVariant {
  bool shannon_rates = false;  // drop the dispersion back-off entirely
  bool force_offload = false;  // pin every alpha at zero
  const Grid3<std::uint8_t>* fixed_s_u = nullptr;  // freeze the assignment
  const Grid3<std::uint8_t>* fixed_s_d = nullptr;
  std::string algo_name;
};

/// One relaxed iterate. Powers are the product variables (radiated power on
/// an element); indicators and modes live in [0, 1].
struct ScaIterate {
  Grid3<double> s_u, s_d;
  Grid3<double> pw_u, pw_d;
  std::vector<double> alpha;
  std::vector<double> f;
  std::vector<double> zeta_cub, theta;  // cubic epigraph auxiliaries
  std::vector<double> z, q;             // norm-cone bounds (scheme 2)
  double penalized_objective = std::numeric_limits<double>::quiet_NaN();
};

inline void default_eta(const Scenario& sc, ScaOptions& opts) {
  double pk = 0;
  for (double p : sc.P_k_max) pk = std::max(pk, p);
  if (opts.eta1 <= 0) opts.eta1 = 10.0 * sc.K * pk;
  if (opts.eta2 <= 0) opts.eta2 = 10.0 * sc.P_max;
  if (opts.eta3 <= 0) opts.eta3 = 10.0 * sc.P_max;
}

/// Integrality penalty: eta1 sum(s - s^2) over the uplink indicators plus
/// the same for downlink and modes. Zero exactly on binary points.
inline double penalty(const Grid3<double>& s_u, const Grid3<double>& s_d,
                      std::span<const double> alpha, double eta1, double eta2, double eta3) {
  double pu = 0, pd = 0, pa = 0;
  for (double s : s_u.v) pu += s - s * s;
  for (double s : s_d.v) pd += s - s * s;
  for (double a : alpha) pa += a - a * a;
  return eta1 * pu + eta2 * pd + eta3 * pa;
}

/// First-order data of the concave dispersion term at an expansion point:
/// value and gradient, so that value + grad . (p - p0) over-estimates the
/// term everywhere.
struct DispersionLinearization {
  double value = 0;
  std::vector<double> grad;  // per element
};

inline DispersionLinearization linearize_dispersion(std::span<const double> p0,
                                                    std::span<const double> gains, int M, int N,
                                                    double qinv) {
  DispersionLinearization out;
  out.grad.assign(static_cast<std::size_t>(M) * N, 0.0);
  double ssum = fbt::dispersion_sum(p0, gains, M, N);
  if (ssum < 1e-30) return out;  // flat at zero power
  out.value = fbt::kLog2E * qinv * std::sqrt(ssum);
  double scale = fbt::kLog2E * qinv / (2.0 * std::sqrt(ssum));
  for (int m = 0; m < M; ++m) {
    double g = gains[m];
    for (int n = 0; n < N; ++n) {
      double gamma = g * p0[m * N + n];
      double a1 = 1.0 + gamma;
      out.grad[m * N + n] = scale * 2.0 / (a1 * a1 * a1) * g;
    }
  }
  return out;
}

/// First-order data of a sum of squares at an expansion point; the affine
/// surrogate value + grad . (x - x0) under-estimates the sum everywhere.
struct SquaresLinearization {
  double value = 0;
  std::vector<double> grad;
};

inline SquaresLinearization linearize_squares(std::span<const double> x0) {
  SquaresLinearization out;
  out.grad.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.value += x0[i] * x0[i];
    out.grad[i] = 2.0 * x0[i];
  }
  return out;
}

namespace detail {

struct ScaLayout {
  int K, Mu, Nu, Md, Nd;
  bool scheme2 = false;
  int su0, sd0, pu0, pd0, a0, f0, zc0, th0, z0, q0, n;

  static ScaLayout of(const Scenario& sc, bool scheme2) {
    ScaLayout ly;
    ly.K = sc.K;
    ly.Mu = sc.M_u;
    ly.Nu = sc.N_u;
    ly.Md = sc.M_d;
    ly.Nd = sc.N_d;
    ly.scheme2 = scheme2;
    int eu = sc.K * sc.M_u * sc.N_u, ed = sc.K * sc.M_d * sc.N_d;
    ly.su0 = 0;
    ly.sd0 = eu;
    ly.pu0 = eu + ed;
    ly.pd0 = 2 * eu + ed;
    ly.a0 = 2 * eu + 2 * ed;
    ly.f0 = ly.a0 + sc.K;
    ly.zc0 = ly.f0 + sc.K;
    ly.th0 = ly.zc0 + sc.K;
    ly.z0 = ly.th0 + sc.K;
    ly.q0 = ly.z0 + (scheme2 ? sc.K : 0);
    ly.n = ly.q0 + (scheme2 ? sc.K : 0);
    return ly;
  }
  int su(int k, int m, int n) const { return su0 + (k * Mu + m) * Nu + n; }
  int sd(int k, int m, int n) const { return sd0 + (k * Md + m) * Nd + n; }
  int pu(int k, int m, int n) const { return pu0 + (k * Mu + m) * Nu + n; }
  int pd(int k, int m, int n) const { return pd0 + (k * Md + m) * Nd + n; }
  int a(int k) const { return a0 + k; }
  int f(int k) const { return f0 + k; }
  int zc(int k) const { return zc0 + k; }
  int th(int k) const { return th0 + k; }
  int z(int k) const { return z0 + k; }
  int q(int k) const { return q0 + k; }
};

/// Shared skeleton: boxes, exclusivity, causality, deadline, budgets,
/// deadline-vs-frequency coupling, cubic epigraph, and the objective without
/// its rate-scheme-specific parts.
inline kernel::StructuredConvexProblem base_problem(const Scenario& sc, const ScaLayout& ly,
                                                    const ScaOptions& opts,
                                                    const ScaVariant& var,
                                                    const ScaIterate& at) {
  kernel::StructuredConvexProblem prob;
  prob.lower.assign(ly.n, 0.0);
  prob.upper.assign(ly.n, 0.0);
  prob.objective.assign(ly.n, 0.0);

  const double T_s = sc.symbol_duration();
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        prob.upper[ly.su(k, m, n)] = 1.0;
        prob.upper[ly.pu(k, m, n)] = sc.P_k_max[k];
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        // deadline-forbidden slots stay fixed at zero
        bool allowed = (n + 1) < sc.D_k[k] - sc.tau;
        prob.upper[ly.sd(k, m, n)] = allowed ? 1.0 : 0.0;
        prob.upper[ly.pd(k, m, n)] = allowed ? sc.P_max : 0.0;
      }
    prob.upper[ly.a(k)] = var.force_offload ? 0.0 : 1.0;
    prob.upper[ly.f(k)] = sc.f_max;
    prob.upper[ly.zc(k)] = sc.f_max * sc.f_max * sc.f_max;
    prob.upper[ly.th(k)] = sc.f_max * sc.f_max;
    if (ly.scheme2) {
      prob.upper[ly.z(k)] = std::sqrt(double(sc.M_u) * sc.N_u) + 1.0;
      prob.upper[ly.q(k)] = std::sqrt(double(sc.M_d) * sc.N_d) + 1.0;
    }
  }
  if (var.fixed_s_u) {
    for (std::size_t i = 0; i < var.fixed_s_u->v.size(); ++i) {
      prob.lower[ly.su0 + i] = prob.upper[ly.su0 + i] = var.fixed_s_u->v[i];
    }
  }
  if (var.fixed_s_d) {
    for (std::size_t i = 0; i < var.fixed_s_d->v.size(); ++i) {
      double v = std::min<double>(var.fixed_s_d->v[i], prob.upper[ly.sd0 + i]);
      prob.lower[ly.sd0 + i] = prob.upper[ly.sd0 + i] = v;
    }
  }
  // an element that can never be assigned cannot carry power either
  for (std::size_t i = 0; i < static_cast<std::size_t>(sc.K) * sc.M_u * sc.N_u; ++i)
    if (prob.upper[ly.su0 + i] <= 0) prob.upper[ly.pu0 + i] = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(sc.K) * sc.M_d * sc.N_d; ++i)
    if (prob.upper[ly.sd0 + i] <= 0) prob.upper[ly.pd0 + i] = 0;

  // exclusivity per element
  for (int m = 0; m < sc.M_u; ++m)
    for (int n = 0; n < sc.N_u; ++n) {
      kernel::AffineConstraint c;
      for (int k = 0; k < sc.K; ++k) c.terms.push_back({ly.su(k, m, n), 1.0});
      c.rhs = 1.0;
      prob.affine.push_back(std::move(c));
    }
  for (int m = 0; m < sc.M_d; ++m)
    for (int n = 0; n < sc.N_d; ++n) {
      kernel::AffineConstraint c;
      for (int k = 0; k < sc.K; ++k) c.terms.push_back({ly.sd(k, m, n), 1.0});
      c.rhs = 1.0;
      prob.affine.push_back(std::move(c));
    }
  // causality pairing on overlapping slots
  for (int k = 0; k < sc.K; ++k)
    for (int o = 1; o <= sc.overlap(); ++o) {
      if (o > sc.N_d) break;
      for (int mu = 0; mu < sc.M_u; ++mu)
        for (int md = 0; md < sc.M_d; ++md) {
          kernel::AffineConstraint c;
          c.terms.push_back({ly.su(k, mu, sc.tau + o - 1), 1.0});
          c.terms.push_back({ly.sd(k, md, o - 1), 1.0});
          c.rhs = 1.0;
          prob.affine.push_back(std::move(c));
        }
    }
  // budgets over the product variables
  for (int k = 0; k < sc.K; ++k) {
    kernel::AffineConstraint c;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) c.terms.push_back({ly.pu(k, m, n), 1.0});
    c.rhs = sc.P_k_max[k];
    prob.affine.push_back(std::move(c));
  }
  {
    kernel::AffineConstraint c;
    for (int k = 0; k < sc.K; ++k)
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n) c.terms.push_back({ly.pd(k, m, n), 1.0});
    c.rhs = sc.P_max;
    prob.affine.push_back(std::move(c));
  }
  // product coupling: radiated power at most budget times indicator
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        kernel::AffineConstraint c;
        c.terms.push_back({ly.pu(k, m, n), 1.0});
        c.terms.push_back({ly.su(k, m, n), -sc.P_k_max[k]});
        c.rhs = 0.0;
        prob.affine.push_back(std::move(c));
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        kernel::AffineConstraint c;
        c.terms.push_back({ly.pd(k, m, n), 1.0});
        c.terms.push_back({ly.sd(k, m, n), -sc.P_max});
        c.rhs = 0.0;
        prob.affine.push_back(std::move(c));
      }
  }
  // local deadline versus frequency, and the cubic epigraph
  for (int k = 0; k < sc.K; ++k) {
    kernel::AffineConstraint c13;
    c13.terms.push_back({ly.a(k), sc.c_k[k] * sc.B_k[k]});
    c13.terms.push_back({ly.f(k), -T_s * sc.D_k[k]});
    c13.rhs = 0.0;
    prob.affine.push_back(std::move(c13));

    const double fm = sc.f_max;
    kernel::Psd2Constraint epi;  // [[zeta, theta], [theta, f]] scaled by congruence
    epi.a = {{{ly.zc(k), 1.0 / (fm * fm * fm)}}, 0.0};
    epi.b = {{{ly.th(k), 1.0 / (fm * fm)}}, 0.0};
    epi.c = {{{ly.f(k), 1.0 / fm}}, 0.0};
    prob.psd2.push_back(std::move(epi));
    kernel::Psd2Constraint sq;  // [[theta, f], [f, 1]]
    sq.a = {{{ly.th(k), 1.0 / (fm * fm)}}, 0.0};
    sq.b = {{{ly.f(k), 1.0 / fm}}, 0.0};
    sq.c = {{}, 1.0};
    prob.psd2.push_back(std::move(sq));
  }

  // objective: weighted power with the cubic epigraph, plus the linearized
  // integrality penalty (the constant parts land in objective_constant)
  double constant = 0;
  for (int k = 0; k < sc.K; ++k) {
    prob.objective[ly.zc(k)] += sc.w_k[k] * sc.kappa;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n)
        prob.objective[ly.pu(k, m, n)] += sc.w_k[k] * sc.delta_k[k];
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) prob.objective[ly.pd(k, m, n)] += sc.delta_BS;
    prob.objective[ly.a(k)] += -sc.w_k[k] * sc.P_cir;
    constant += sc.w_k[k] * sc.P_cir;
  }
  for (std::size_t i = 0; i < at.s_u.v.size(); ++i) {
    prob.objective[ly.su0 + i] += opts.eta1 * (1.0 - 2.0 * at.s_u.v[i]);
    constant += opts.eta1 * at.s_u.v[i] * at.s_u.v[i];
  }
  for (std::size_t i = 0; i < at.s_d.v.size(); ++i) {
    prob.objective[ly.sd0 + i] += opts.eta2 * (1.0 - 2.0 * at.s_d.v[i]);
    constant += opts.eta2 * at.s_d.v[i] * at.s_d.v[i];
  }
  if (!var.force_offload) {
    for (int k = 0; k < sc.K; ++k) {
      prob.objective[ly.a(k)] += opts.eta3 * (1.0 - 2.0 * at.alpha[k]);
      constant += opts.eta3 * at.alpha[k] * at.alpha[k];
    }
  }
  prob.objective_constant = constant;
  return prob;
}

inline void add_rates_scheme1(const Scenario& sc, const ChannelRealization& ch,
                              const ScaLayout& ly, const ScaIterate& at, bool shannon,
                              const constraints::CheckContext& ctx,
                              kernel::StructuredConvexProblem& prob) {
  for (int k = 0; k < sc.K; ++k) {
    for (int link = 0; link < 2; ++link) {
      const int M = link == 0 ? sc.M_u : sc.M_d;
      const int N = link == 0 ? sc.N_u : sc.N_d;
      auto gains = link == 0 ? ch.gains_u(k) : ch.gains_d(k);
      const double need = link == 0 ? sc.B_k[k] : sc.Gamma_k[k] * sc.B_k[k];
      const double qinv = link == 0 ? ctx.qinv_u[k] : ctx.qinv_d[k];
      const auto& p0grid = link == 0 ? at.pw_u : at.pw_d;
      kernel::LogRateConstraint c;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          int pv = link == 0 ? ly.pu(k, m, n) : ly.pd(k, m, n);
          c.logs.push_back({pv, 1.0, gains[m]});
        }
      c.affine.push_back({ly.a(k), need});  // move (1 - alpha) need to the left
      c.min_value = need;
      if (!shannon) {
        auto lin = linearize_dispersion(p0grid.user(k), gains, M, N, qinv);
        double lin_const = lin.value;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            int pv = link == 0 ? ly.pu(k, m, n) : ly.pd(k, m, n);
            c.affine.push_back({pv, -lin.grad[m * N + n]});
            lin_const -= lin.grad[m * N + n] * p0grid.user(k)[m * N + n];
          }
        c.min_value += lin_const;
      }
      prob.rates.push_back(std::move(c));
    }
  }
}

inline void add_rates_scheme2(const Scenario& sc, const ChannelRealization& ch,
                              const ScaLayout& ly, const constraints::CheckContext& ctx,
                              kernel::StructuredConvexProblem& prob) {
  for (int k = 0; k < sc.K; ++k) {
    for (int link = 0; link < 2; ++link) {
      const int M = link == 0 ? sc.M_u : sc.M_d;
      const int N = link == 0 ? sc.N_u : sc.N_d;
      auto gains = link == 0 ? ch.gains_u(k) : ch.gains_d(k);
      const double need = link == 0 ? sc.B_k[k] : sc.Gamma_k[k] * sc.B_k[k];
      const double qinv = link == 0 ? ctx.qinv_u[k] : ctx.qinv_d[k];
      kernel::LogRateConstraint c;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          int sv = link == 0 ? ly.su(k, m, n) : ly.sd(k, m, n);
          int pv = link == 0 ? ly.pu(k, m, n) : ly.pd(k, m, n);
          c.persp.push_back({sv, pv, gains[m]});
        }
      c.affine.push_back({ly.a(k), need});
      c.affine.push_back({link == 0 ? ly.z(k) : ly.q(k), -fbt::kLog2E * qinv});
      c.min_value = need;
      prob.rates.push_back(std::move(c));

      kernel::NormConeConstraint cone;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
          cone.vec_vars.push_back(link == 0 ? ly.su(k, m, n) : ly.sd(k, m, n));
      cone.bound_var = link == 0 ? ly.z(k) : ly.q(k);
      prob.cones.push_back(std::move(cone));
    }
  }
}

inline ScaIterate from_kernel_point(const Scenario& sc, const ScaLayout& ly,
                                    const std::vector<double>& x) {
  ScaIterate it;
  it.s_u = Grid3<double>(sc.K, sc.M_u, sc.N_u);
  it.s_d = Grid3<double>(sc.K, sc.M_d, sc.N_d);
  it.pw_u = Grid3<double>(sc.K, sc.M_u, sc.N_u);
  it.pw_d = Grid3<double>(sc.K, sc.M_d, sc.N_d);
  it.alpha.resize(sc.K);
  it.f.resize(sc.K);
  it.zeta_cub.resize(sc.K);
  it.theta.resize(sc.K);
  if (ly.scheme2) {
    it.z.resize(sc.K);
    it.q.resize(sc.K);
  }
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        it.s_u.at(k, m, n) = x[ly.su(k, m, n)];
        it.pw_u.at(k, m, n) = x[ly.pu(k, m, n)];
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        it.s_d.at(k, m, n) = x[ly.sd(k, m, n)];
        it.pw_d.at(k, m, n) = x[ly.pd(k, m, n)];
      }
    it.alpha[k] = x[ly.a(k)];
    it.f[k] = x[ly.f(k)];
    it.zeta_cub[k] = x[ly.zc(k)];
    it.theta[k] = x[ly.th(k)];
    if (ly.scheme2) {
      it.z[k] = x[ly.z(k)];
      it.q[k] = x[ly.q(k)];
    }
  }
  return it;
}

/// True penalized objective of an iterate (cubic in f, no epigraph).
inline double penalized_objective(const Scenario& sc, const ScaIterate& it,
                                  const ScaOptions& opts, const ScaVariant& var) {
  double total = 0;
  for (int k = 0; k < sc.K; ++k) {
    double up = 0;
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) up += it.pw_u.at(k, m, n);
    total += sc.w_k[k] * (local_power(it.f[k], sc.kappa) + sc.delta_k[k] * up +
                          (1.0 - it.alpha[k]) * sc.P_cir);
  }
  for (int k = 0; k < sc.K; ++k)
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) total += sc.delta_BS * it.pw_d.at(k, m, n);
  double eta3 = var.force_offload ? 0.0 : opts.eta3;
  return total + penalty(it.s_u, it.s_d, it.alpha, opts.eta1, opts.eta2, eta3);
}

}  // namespace detail

/// Deterministic starting iterate: indicators split evenly between users,
/// modes undecided, budgets spread uniformly, CPU at half speed. A nonzero
/// seed perturbs everything by up to ten percent.
inline ScaIterate initial_iterate(const Scenario& sc, std::uint64_t seed = 0,
                                  const ScaVariant& var = {}) {
  ScaIterate it;
  it.s_u = Grid3<double>(sc.K, sc.M_u, sc.N_u, 1.0 / sc.K);
  it.s_d = Grid3<double>(sc.K, sc.M_d, sc.N_d, 1.0 / sc.K);
  it.pw_u = Grid3<double>(sc.K, sc.M_u, sc.N_u);
  it.pw_d = Grid3<double>(sc.K, sc.M_d, sc.N_d);
  it.alpha.assign(sc.K, var.force_offload ? 0.0 : 0.5);
  it.f.assign(sc.K, sc.f_max / 2);
  it.zeta_cub.assign(sc.K, 0.0);
  it.theta.assign(sc.K, 0.0);
  it.z.assign(sc.K, 0.0);
  it.q.assign(sc.K, 0.0);
  for (int k = 0; k < sc.K; ++k) {
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n)
        it.pw_u.at(k, m, n) = sc.P_k_max[k] / (double(sc.M_u) * sc.N_u);
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n)
        it.pw_d.at(k, m, n) = sc.P_max / (double(sc.K) * sc.M_d * sc.N_d);
  }
  if (var.fixed_s_u)
    for (std::size_t i = 0; i < it.s_u.v.size(); ++i) it.s_u.v[i] = var.fixed_s_u->v[i];
  if (var.fixed_s_d)
    for (std::size_t i = 0; i < it.s_d.v.size(); ++i) it.s_d.v[i] = var.fixed_s_d->v[i];
  if (seed != 0) {
    scengen::SplitMix64 rng(seed);
    auto jitter = [&](double v) { return v * (1.0 + 0.1 * (2.0 * rng.next_unit() - 1.0)); };
    for (auto& v : it.s_u.v) v = std::clamp(jitter(v), 0.0, 1.0);
    for (auto& v : it.s_d.v) v = std::clamp(jitter(v), 0.0, 1.0);
    for (auto& v : it.pw_u.v) v = jitter(v);
    for (auto& v : it.pw_d.v) v = jitter(v);
    for (auto& v : it.alpha) v = std::clamp(jitter(v), 0.0, 1.0);
    for (auto& v : it.f) v = std::clamp(jitter(v), 0.0, sc.f_max);
  }
  for (int k = 0; k < sc.K; ++k) {
    it.zeta_cub[k] = it.f[k] * it.f[k] * it.f[k];
    it.theta[k] = it.f[k] * it.f[k];
    double zu = 0, zd = 0;
    for (auto s : it.s_u.user(k)) zu += s * s;
    for (auto s : it.s_d.user(k)) zd += s * s;
    it.z[k] = std::sqrt(zu);
    it.q[k] = std::sqrt(zd);
  }
  return it;
}

namespace detail {

/// Round the relaxed point, resolve conflicts deterministically, rescale the
/// powers to meet the rates exactly, and assemble the final report.
inline SolveReport finish_report(const Scenario& sc, const ChannelRealization& ch,
                                 const ScaIterate& it, const ScaOptions& opts,
                                 const ScaVariant& var, const constraints::CheckContext& ctx,
                                 long iterations, bool converged) {
  SolveReport rep;
  rep.algo = var.algo_name;
  rep.iterations = iterations;
  rep.penalty_final = penalty(it.s_u, it.s_d, it.alpha, opts.eta1, opts.eta2,
                              var.force_offload ? 0.0 : opts.eta3);
  rep.lower_bound_only = var.shannon_rates;

  // residual before any repair
  double res = 0;
  for (double s : it.s_u.v) res = std::max(res, std::abs(s - std::round(s)));
  for (double s : it.s_d.v) res = std::max(res, std::abs(s - std::round(s)));
  for (double a : it.alpha) res = std::max(res, std::abs(a - std::round(a)));
  rep.rounding_residual = res;

  Allocation alloc = Allocation::zeros(sc);
  rep.alpha.resize(sc.K);
  for (int k = 0; k < sc.K; ++k) {
    bool local = !var.force_offload && it.alpha[k] >= 0.5;
    if (local && sc.forced_cpu_hz(k) > sc.f_max) local = false;  // cannot compute in time
    rep.alpha[k] = local ? 1 : 0;
    alloc.alpha[k] = rep.alpha[k];
    alloc.f[k] = local ? sc.forced_cpu_hz(k) : 0.0;
  }

  // An element is used when its indicator rounds up or when it carries
  // power beyond barrier dust: the kernel may park the indicator at the
  // product-coupling boundary p/budget, which is near-binary at zero while
  // the real usage lives in the power variable.
  Grid3<double> su = it.s_u, sd = it.s_d;
  Grid3<double> pu = it.pw_u, pd = it.pw_d;
  for (int k = 0; k < sc.K; ++k)
    if (alloc.alpha[k]) {
      for (auto& v : su.user(k)) v = 0;
      for (auto& v : sd.user(k)) v = 0;
      for (auto& v : pu.user(k)) v = 0;
      for (auto& v : pd.user(k)) v = 0;
    }
  auto round_grid = [&](const Grid3<double>& s, const Grid3<double>& pw,
                        Grid3<std::uint8_t>& out) {
    for (int k = 0; k < sc.K; ++k) {
      double peak = 0;
      for (double v : pw.user(k)) peak = std::max(peak, v);
      double power_floor = std::max(constraints::kAssignPowerTol, 1e-6 * peak);
      auto sk = s.user(k);
      auto pk = pw.user(k);
      auto ok = out.user(k);
      for (std::size_t i = 0; i < sk.size(); ++i)
        ok[i] = (sk[i] >= 0.5 || pk[i] > power_floor) ? 1 : 0;
    }
  };
  round_grid(su, pu, alloc.s_u);
  round_grid(sd, pd, alloc.s_d);
  // exclusivity: keep the user with the larger relaxed claim, power first
  // and share as tie-break, lowest index on exact ties
  auto claim = [](double share, double power) { return power + share * 1e-30; };
  auto resolve_exclusive = [&](Grid3<std::uint8_t>& s, const Grid3<double>& frac,
                               const Grid3<double>& pw, int M, int N) {
    for (int m = 0; m < M; ++m)
      for (int n = 0; n < N; ++n) {
        int winner = -1;
        double best = -1;
        for (int k = 0; k < sc.K; ++k)
          if (s.at(k, m, n) && claim(frac.at(k, m, n), pw.at(k, m, n)) > best) {
            best = claim(frac.at(k, m, n), pw.at(k, m, n));
            winner = k;
          }
        for (int k = 0; k < sc.K; ++k)
          if (s.at(k, m, n) && k != winner) s.at(k, m, n) = 0;
      }
  };
  resolve_exclusive(alloc.s_u, su, pu, sc.M_u, sc.N_u);
  resolve_exclusive(alloc.s_d, sd, pd, sc.M_d, sc.N_d);
  // causality: per user and overlap pair, keep the side carrying the larger
  // claim (uplink on ties), silence the other side's slot
  for (int k = 0; k < sc.K; ++k)
    for (int o = 1; o <= sc.overlap() && o <= sc.N_d; ++o) {
      double up_best = 0, down_best = 0;
      bool up_used = false, down_used = false;
      for (int m = 0; m < sc.M_u; ++m)
        if (alloc.s_u.at(k, m, sc.tau + o - 1)) {
          up_used = true;
          up_best = std::max(up_best, claim(su.at(k, m, sc.tau + o - 1),
                                            pu.at(k, m, sc.tau + o - 1)));
        }
      for (int m = 0; m < sc.M_d; ++m)
        if (alloc.s_d.at(k, m, o - 1)) {
          down_used = true;
          down_best = std::max(down_best, claim(sd.at(k, m, o - 1), pd.at(k, m, o - 1)));
        }
      if (!(up_used && down_used)) continue;
      if (down_best > up_best) {
        for (int m = 0; m < sc.M_u; ++m) alloc.s_u.at(k, m, sc.tau + o - 1) = 0;
      } else {
        for (int m = 0; m < sc.M_d; ++m) alloc.s_d.at(k, m, o - 1) = 0;
      }
    }

  // powers on kept elements, then per-user scaling to hit the rate exactly;
  // when the kernel's profile cannot deliver the bits even at the budget, a
  // uniform profile over the kept elements gets a second try
  auto project_user = [&](int k) {
    for (int link = 0; link < 2; ++link) {
      const int M = link == 0 ? sc.M_u : sc.M_d;
      const int N = link == 0 ? sc.N_u : sc.N_d;
      auto gains = link == 0 ? ch.gains_u(k) : ch.gains_d(k);
      const double need = link == 0 ? sc.B_k[k] : sc.Gamma_k[k] * sc.B_k[k];
      const double eps = link == 0 ? sc.eps_u_k[k] : sc.eps_d_k[k];
      const double budget = link == 0 ? sc.P_k_max[k] : sc.P_max;
      auto& sgrid = link == 0 ? alloc.s_u : alloc.s_d;
      auto& pgrid = link == 0 ? alloc.p_u : alloc.p_d;
      const auto& pw = link == 0 ? it.pw_u : it.pw_d;
      const double qinv = fbt::q_inv(eps);

      int kept = 0;
      double base_sum = 0;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          double p = sgrid.at(k, m, n) ? std::max(pw.at(k, m, n), 1e-15) : 0.0;
          pgrid.at(k, m, n) = p;
          base_sum += p;
          kept += sgrid.at(k, m, n);
        }
      if (kept == 0) return false;
      auto psi_at = [&](double rho) {
        double cap = 0, disp = 0;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n)
            if (sgrid.at(k, m, n)) {
              double gamma = gains[m] * pgrid.at(k, m, n) * rho;
              cap += std::log2(1.0 + gamma);
              disp += fbt::dispersion(gamma);
            }
        if (var.shannon_rates) return cap;
        return cap - fbt::kLog2E * qinv * std::sqrt(disp);
      };
      double rho_max = budget / base_sum;
      if (psi_at(rho_max) < need) {
        // fallback: spread the budget evenly over the kept elements
        base_sum = 0;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            double p = sgrid.at(k, m, n) ? budget / kept : 0.0;
            pgrid.at(k, m, n) = p;
            base_sum += p;
          }
        rho_max = 1.0;
        if (psi_at(rho_max) < need) return false;
      }
      double lo = 0.0, hi = rho_max;
      if (psi_at(1.0) >= need && 1.0 <= rho_max) hi = 1.0;
      for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (psi_at(mid) >= need)
          hi = mid;
        else
          lo = mid;
      }
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) pgrid.at(k, m, n) *= hi;
    }
    return true;
  };

  auto flip_to_local = [&](int k) {
    if (var.force_offload || sc.forced_cpu_hz(k) > sc.f_max) return false;
    alloc.alpha[k] = 1;
    rep.alpha[k] = 1;
    alloc.f[k] = sc.forced_cpu_hz(k);
    for (int m = 0; m < sc.M_u; ++m)
      for (int n = 0; n < sc.N_u; ++n) {
        alloc.s_u.at(k, m, n) = 0;
        alloc.p_u.at(k, m, n) = 0;
      }
    for (int m = 0; m < sc.M_d; ++m)
      for (int n = 0; n < sc.N_d; ++n) {
        alloc.s_d.at(k, m, n) = 0;
        alloc.p_d.at(k, m, n) = 0;
      }
    return true;
  };

  bool feasible = true;
  for (int k = 0; k < sc.K && feasible; ++k) {
    if (alloc.alpha[k]) continue;
    if (!project_user(k)) feasible = flip_to_local(k);
  }
  // mode polish: dropping a user's radio load never hurts anyone else, so an
  // offloading user whose radio share costs more than its own CPU flips
  if (feasible && !var.force_offload) {
    for (int k = 0; k < sc.K; ++k) {
      if (alloc.alpha[k]) continue;
      double forced = sc.forced_cpu_hz(k);
      if (forced > sc.f_max) continue;
      double radio = 0;
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n)
          radio += sc.w_k[k] * sc.delta_k[k] * alloc.s_u.at(k, m, n) * alloc.p_u.at(k, m, n);
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n)
          radio += sc.delta_BS * alloc.s_d.at(k, m, n) * alloc.p_d.at(k, m, n);
      radio += sc.w_k[k] * sc.P_cir;
      double local = sc.w_k[k] * local_power(forced, sc.kappa);
      if (local < radio) flip_to_local(k);
    }
  }

  if (!feasible) {
    rep.status = SolveStatus::infeasible;
    return rep;
  }

  // exact verification; the Shannon baseline checks its own rate notion
  auto verify = constraints::check_all(alloc, ch, sc);
  bool ok = true;
  for (const auto& fam : verify.families) {
    if (var.shannon_rates && (fam.name == "C1" || fam.name == "C2")) continue;
    ok = ok && fam.ok;
  }
  if (var.shannon_rates) {
    for (int k = 0; k < sc.K && ok; ++k) {
      if (alloc.alpha[k]) continue;
      double cap_u = 0, cap_d = 0;
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n)
          if (alloc.s_u.at(k, m, n))
            cap_u += std::log2(1.0 + ch.gain_u(k, m) * alloc.p_u.at(k, m, n));
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 0; n < sc.N_d; ++n)
          if (alloc.s_d.at(k, m, n))
            cap_d += std::log2(1.0 + ch.gain_d(k, m) * alloc.p_d.at(k, m, n));
      ok = cap_u >= sc.B_k[k] - 1e-6 && cap_d >= sc.Gamma_k[k] * sc.B_k[k] - 1e-6;
    }
  }
  if (!ok) {
    rep.status = SolveStatus::infeasible;
    return rep;
  }
  rep.allocation = std::move(alloc);
  rep.has_allocation = true;
  rep.objective_w = total_power(rep.allocation, sc).weighted_total_w;
  rep.status = converged ? SolveStatus::optimal : SolveStatus::feasible;
  return rep;
}

inline SolveReport sca_solve(const Scenario& sc, const ChannelRealization& ch,
                             const ScaIterate& init, ScaOptions opts, const ScaVariant& var,
                             bool scheme2) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  default_eta(sc, opts);
  auto ctx = constraints::CheckContext::make(sc, ch);
  ScaLayout ly = ScaLayout::of(sc, scheme2);

  ScaIterate cur = init;
  std::vector<double> warm;
  double prev_pen = std::numeric_limits<double>::quiet_NaN();
  long iters = 0;
  bool converged = false;
  for (long it = 0; it < opts.max_iterations; ++it) {
    kernel::StructuredConvexProblem prob = base_problem(sc, ly, opts, var, cur);
    if (scheme2)
      add_rates_scheme2(sc, ch, ly, ctx, prob);
    else
      add_rates_scheme1(sc, ch, ly, cur, var.shannon_rates, ctx, prob);

    auto ks = kernel::solve(prob, opts.kernel_tol, warm.empty() ? nullptr : &warm);
    if (ks.status == kernel::KernelStatus::infeasible) {
      if (it == 0) {
        SolveReport rep;
        rep.algo = var.algo_name;
        rep.status = SolveStatus::infeasible;
        rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        return rep;
      }
      break;  // keep the previous iterate
    }
    warm = ks.x;
    cur = from_kernel_point(sc, ly, ks.x);
    ++iters;
    double pen = penalized_objective(sc, cur, opts, var);
    cur.penalized_objective = pen;
    bool time_out =
        std::chrono::duration<double>(clock::now() - t0).count() > opts.time_budget_s;
    if (it > 0 && std::abs(pen - prev_pen) <= opts.stop_tol * std::max(1.0, std::abs(prev_pen))) {
      converged = true;
      break;
    }
    prev_pen = pen;
    if (time_out) break;
  }

  SolveReport rep = finish_report(sc, ch, cur, opts, var, ctx, iters, converged);
  rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return rep;
}

}  // namespace detail

inline SolveReport sca1_solve(const Scenario& sc, const ChannelRealization& ch,
                              const ScaIterate& init, const ScaOptions& opts = {}) {
  ScaVariant var;
  var.algo_name = "sca1";
  return detail::sca_solve(sc, ch, init, opts, var, false);
}

inline SolveReport sca1_solve(const Scenario& sc, const ChannelRealization& ch,
                              const ScaOptions& opts = {}) {
  return sca1_solve(sc, ch, initial_iterate(sc, opts.init_seed), opts);
}

inline SolveReport sca2_solve(const Scenario& sc, const ChannelRealization& ch,
                              const ScaIterate& init, const ScaOptions& opts = {}) {
  ScaVariant var;
  var.algo_name = "sca2";
  return detail::sca_solve(sc, ch, init, opts, var, true);
}

inline SolveReport sca2_solve(const Scenario& sc, const ChannelRealization& ch,
                              const ScaOptions& opts = {}) {
  return sca2_solve(sc, ch, initial_iterate(sc, opts.init_seed), opts);
}

/// Shared entry for the baseline variants.
inline SolveReport solve_variant(const Scenario& sc, const ChannelRealization& ch,
                                 const ScaOptions& opts, const ScaVariant& var) {
  return detail::sca_solve(sc, ch, initial_iterate(sc, opts.init_seed, var), opts, var, false);
}

}  // namespace mecopt::sca

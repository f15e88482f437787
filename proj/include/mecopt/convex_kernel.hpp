#pragma once

// Self-contained solver for the structured convex subproblems of the SCA
// schemes: linear objective over box-bounded variables with affine rows,
// concave log-rate rows (sums of per-variable logs, perspective pairs, and
// an affine part), second-order cones, and 2x2 semidefinite blocks.
//
// Method: logarithmic-barrier interior point. Every constraint class has a
// smooth convex barrier; the centering problems are solved by damped Newton
// with backtracking line search, the barrier weight grows geometrically, and
// the Newton systems go through a sparse LDLT after diagonal scaling by the
// box widths. A strictly feasible start is found by a phase-I problem that
// minimizes one slack added to all inequalities. Variables whose box is a
// single point are treated as constants throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace mecopt::kernel {

struct LinearTerm {
  int var;
  double coef;
};

/// sum coef * x <= rhs
struct AffineConstraint {
  std::vector<LinearTerm> terms;
  double rhs = 0;
};

/// weight * log2(1 + slope * x); weight and slope must be nonnegative
struct LogTerm {
  int var;
  double weight = 1;
  double slope = 1;
};

/// s * log2(1 + slope * p / s), jointly concave in (s, p)
struct PerspectiveTerm {
  int s_var;
  int p_var;
  double slope = 1;
};

/// logs + perspectives + sum coef * x >= min_value
struct LogRateConstraint {
  std::vector<LogTerm> logs;
  std::vector<PerspectiveTerm> persp;
  std::vector<LinearTerm> affine;
  double min_value = 0;
};

/// || x_vec ||_2 <= x_bound
struct NormConeConstraint {
  std::vector<int> vec_vars;
  int bound_var = -1;
};

struct AffineExpr {
  std::vector<LinearTerm> terms;
  double constant = 0;
};

/// [[a, b], [b, c]] positive semidefinite, entries affine in x
struct Psd2Constraint {
  AffineExpr a, b, c;
};

struct StructuredConvexProblem {
  std::vector<double> lower, upper;  // finite boxes; lower == upper fixes the variable
  std::vector<double> objective;     // linear coefficients
  double objective_constant = 0;
  std::vector<AffineConstraint> affine;
  std::vector<LogRateConstraint> rates;
  std::vector<NormConeConstraint> cones;
  std::vector<Psd2Constraint> psd2;

  int num_vars() const { return static_cast<int>(lower.size()); }
};

enum class KernelStatus { optimal, max_iter, infeasible };

struct KernelSolution {
  KernelStatus status = KernelStatus::max_iter;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double duality_measure = std::numeric_limits<double>::infinity();  // relative
  double primal_residual = std::numeric_limits<double>::infinity();  // worst violation
  double stationarity = std::numeric_limits<double>::infinity();     // final Newton decrement
  int newton_steps = 0;
  std::vector<double> stage_objectives;  // centered objective after each barrier stage
};

namespace detail {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kPerspectiveFloor = 1e-12;

struct Workspace {
  const StructuredConvexProblem* prob = nullptr;
  std::vector<int> free_of;        // var -> free index or -1
  std::vector<int> var_of;         // free index -> var
  std::vector<double> scale;       // per free var, box width
  double obj_scale = 1;
  int slack_var = -1;              // phase-I slack, as a problem variable index
  int m_total = 0;                 // sum of barrier parameters

  int nfree() const { return static_cast<int>(var_of.size()); }
};

inline double log_rate_value(const LogRateConstraint& c, const std::vector<double>& x) {
  double v = 0;
  for (const auto& lt : c.logs) v += lt.weight * std::log2(1.0 + lt.slope * x[lt.var]);
  for (const auto& pt : c.persp) {
    double s = std::max(x[pt.s_var], kPerspectiveFloor);
    if (x[pt.s_var] <= kPerspectiveFloor && x[pt.p_var] <= kPerspectiveFloor) continue;
    v += s * std::log2(1.0 + pt.slope * x[pt.p_var] / s);
  }
  for (const auto& lt : c.affine) v += lt.coef * x[lt.var];
  return v;
}

inline double affine_expr_value(const AffineExpr& e, const std::vector<double>& x) {
  double v = e.constant;
  for (const auto& lt : e.terms) v += lt.coef * x[lt.var];
  return v;
}

/// Margins of every barrier term at x; empty optional-style flag via the
/// return value: false when x is outside some domain (line search rejects).
inline bool margins_valid(const Workspace& ws, const std::vector<double>& x) {
  const auto& p = *ws.prob;
  const double slack_shift = ws.slack_var >= 0 ? x[ws.slack_var] : 0.0;
  for (int i = 0; i < ws.nfree(); ++i) {
    int v = ws.var_of[i];
    if (!(x[v] > p.lower[v] && x[v] < p.upper[v])) return false;
  }
  for (const auto& c : p.affine) {
    double r = c.rhs + slack_shift;
    for (const auto& lt : c.terms) r -= lt.coef * x[lt.var];
    if (!(r > 0)) return false;
  }
  for (const auto& c : p.rates) {
    if (!(log_rate_value(c, x) + slack_shift - c.min_value > 0)) return false;
  }
  for (const auto& c : p.cones) {
    double t = x[c.bound_var] + slack_shift;
    if (!(t > 0)) return false;
    double s2 = 0;
    for (int v : c.vec_vars) s2 += x[v] * x[v];
    if (!(t * t - s2 > 0)) return false;
  }
  for (const auto& c : p.psd2) {
    double a = affine_expr_value(c.a, x) + slack_shift;
    double cc = affine_expr_value(c.c, x) + slack_shift;
    double b = affine_expr_value(c.b, x);
    if (!(a > 0 && cc > 0 && a * cc - b * b > 0)) return false;
  }
  return true;
}

/// Barrier value at a valid point.
inline double barrier_value(const Workspace& ws, const std::vector<double>& x) {
  const auto& p = *ws.prob;
  const double slack_shift = ws.slack_var >= 0 ? x[ws.slack_var] : 0.0;
  double phi = 0;
  for (int i = 0; i < ws.nfree(); ++i) {
    int v = ws.var_of[i];
    phi -= std::log(x[v] - p.lower[v]) + std::log(p.upper[v] - x[v]);
  }
  for (const auto& c : p.affine) {
    double r = c.rhs + slack_shift;
    for (const auto& lt : c.terms) r -= lt.coef * x[lt.var];
    phi -= std::log(r);
  }
  for (const auto& c : p.rates) phi -= std::log(log_rate_value(c, x) + slack_shift - c.min_value);
  for (const auto& c : p.cones) {
    double t = x[c.bound_var] + slack_shift;
    double s2 = 0;
    for (int v : c.vec_vars) s2 += x[v] * x[v];
    phi -= std::log(t * t - s2);
  }
  for (const auto& c : p.psd2) {
    double a = affine_expr_value(c.a, x) + slack_shift;
    double cc = affine_expr_value(c.c, x) + slack_shift;
    double b = affine_expr_value(c.b, x);
    phi -= std::log(a * cc - b * b);
  }
  return phi;
}

/// Gradient and Hessian of the barrier at a valid point, over free
/// variables. The slack shift is itself a problem variable when phase-I
/// runs, so its derivatives flow through the generic accumulation.
struct NewtonSystem {
  Eigen::VectorXd grad;
  std::vector<Eigen::Triplet<double>> hess;
};

inline void accumulate_rank1(const Workspace& ws, const std::vector<int>& vars,
                             const std::vector<double>& coefs, double factor,
                             NewtonSystem& sys) {
  // factor * v v^T restricted to free variables
  for (std::size_t i = 0; i < vars.size(); ++i) {
    int fi = ws.free_of[vars[i]];
    if (fi < 0) continue;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      int fj = ws.free_of[vars[j]];
      if (fj < 0) continue;
      sys.hess.emplace_back(fi, fj, factor * coefs[i] * coefs[j]);
    }
  }
}

inline void build_newton(const Workspace& ws, const std::vector<double>& x, NewtonSystem& sys) {
  const auto& p = *ws.prob;
  const double slack_shift = ws.slack_var >= 0 ? x[ws.slack_var] : 0.0;
  const int nf = ws.nfree();
  sys.grad.setZero(nf);
  sys.hess.clear();

  auto add_grad = [&](int var, double g) {
    int f = ws.free_of[var];
    if (f >= 0) sys.grad[f] += g;
  };
  auto add_hess = [&](int vi, int vj, double h) {
    int fi = ws.free_of[vi], fj = ws.free_of[vj];
    if (fi >= 0 && fj >= 0) sys.hess.emplace_back(fi, fj, h);
  };

  for (int i = 0; i < nf; ++i) {
    int v = ws.var_of[i];
    double dlo = x[v] - p.lower[v], dhi = p.upper[v] - x[v];
    sys.grad[i] += -1.0 / dlo + 1.0 / dhi;
    sys.hess.emplace_back(i, i, 1.0 / (dlo * dlo) + 1.0 / (dhi * dhi));
  }

  std::vector<int> vars;
  std::vector<double> coefs;
  for (const auto& c : p.affine) {
    double r = c.rhs + slack_shift;
    vars.clear();
    coefs.clear();
    for (const auto& lt : c.terms) {
      r -= lt.coef * x[lt.var];
      vars.push_back(lt.var);
      coefs.push_back(lt.coef);
    }
    if (ws.slack_var >= 0) {
      vars.push_back(ws.slack_var);
      coefs.push_back(-1.0);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) add_grad(vars[i], coefs[i] / r);
    accumulate_rank1(ws, vars, coefs, 1.0 / (r * r), sys);
  }

  for (const auto& c : p.rates) {
    double r = log_rate_value(c, x) + slack_shift - c.min_value;
    vars.clear();
    coefs.clear();
    // gradient of the rate value; curvature terms go straight into the
    // Hessian with weight 1/r (as -curvature/r, curvature being negative)
    for (const auto& lt : c.logs) {
      double denom = 1.0 + lt.slope * x[lt.var];
      double g = lt.weight * lt.slope / (kLn2 * denom);
      vars.push_back(lt.var);
      coefs.push_back(g);
      add_hess(lt.var, lt.var, lt.weight * lt.slope * lt.slope / (kLn2 * denom * denom) / r);
    }
    for (const auto& pt : c.persp) {
      double s = std::max(x[pt.s_var], kPerspectiveFloor);
      double dp = pt.slope * x[pt.p_var];
      double t = dp / s;
      double gs = (std::log1p(t) - t / (1.0 + t)) / kLn2;
      double gp = pt.slope / (kLn2 * (1.0 + t));
      vars.push_back(pt.s_var);
      coefs.push_back(gs);
      vars.push_back(pt.p_var);
      coefs.push_back(gp);
      // -hess(w) = (slope^2/(ln2 s (s+dp)^2)) [s,-p][s,-p]^T in (p, s)
      double denom = s + dp;
      double factor = pt.slope * pt.slope / (kLn2 * s * denom * denom) / r;
      double vp = s, vs = -x[pt.p_var];
      add_hess(pt.p_var, pt.p_var, factor * vp * vp);
      add_hess(pt.p_var, pt.s_var, factor * vp * vs);
      add_hess(pt.s_var, pt.p_var, factor * vs * vp);
      add_hess(pt.s_var, pt.s_var, factor * vs * vs);
    }
    for (const auto& lt : c.affine) {
      vars.push_back(lt.var);
      coefs.push_back(lt.coef);
    }
    if (ws.slack_var >= 0) {
      vars.push_back(ws.slack_var);
      coefs.push_back(1.0);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) add_grad(vars[i], -coefs[i] / r);
    accumulate_rank1(ws, vars, coefs, 1.0 / (r * r), sys);
  }

  for (const auto& c : p.cones) {
    double t = x[c.bound_var] + slack_shift;
    double s2 = 0;
    for (int v : c.vec_vars) s2 += x[v] * x[v];
    double r = t * t - s2;
    vars.clear();
    coefs.clear();
    for (int v : c.vec_vars) {
      vars.push_back(v);
      coefs.push_back(-2.0 * x[v]);
      add_hess(v, v, 2.0 / r);
    }
    vars.push_back(c.bound_var);
    coefs.push_back(2.0 * t);
    if (ws.slack_var >= 0) {
      vars.push_back(ws.slack_var);
      coefs.push_back(2.0 * t);
    }
    add_hess(c.bound_var, c.bound_var, -2.0 / r);
    if (ws.slack_var >= 0) {
      add_hess(ws.slack_var, ws.slack_var, -2.0 / r);
      add_hess(c.bound_var, ws.slack_var, -2.0 / r);
      add_hess(ws.slack_var, c.bound_var, -2.0 / r);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) add_grad(vars[i], -coefs[i] / r);
    accumulate_rank1(ws, vars, coefs, 1.0 / (r * r), sys);
  }

  for (const auto& c : p.psd2) {
    double a = affine_expr_value(c.a, x) + slack_shift;
    double cc = affine_expr_value(c.c, x) + slack_shift;
    double b = affine_expr_value(c.b, x);
    double det = a * cc - b * b;
    // grad(det) = cc*grad(a) + a*grad(cc) - 2b*grad(b)
    vars.clear();
    coefs.clear();
    auto push_expr = [&](const AffineExpr& e, double w, bool with_slack) {
      for (const auto& lt : e.terms) {
        vars.push_back(lt.var);
        coefs.push_back(w * lt.coef);
      }
      if (with_slack && ws.slack_var >= 0) {
        vars.push_back(ws.slack_var);
        coefs.push_back(w);
      }
    };
    push_expr(c.a, cc, true);
    push_expr(c.c, a, true);
    push_expr(c.b, -2.0 * b, false);
    for (std::size_t i = 0; i < vars.size(); ++i) add_grad(vars[i], -coefs[i] / det);
    accumulate_rank1(ws, vars, coefs, 1.0 / (det * det), sys);
    // -hess(det)/det = (2 grad(b) grad(b)^T - grad(a) grad(cc)^T - grad(cc) grad(a)^T)/det
    auto cross = [&](const AffineExpr& ea, bool sa, const AffineExpr& eb, bool sb, double w) {
      std::vector<std::pair<int, double>> ta, tb;
      for (const auto& lt : ea.terms) ta.emplace_back(lt.var, lt.coef);
      if (sa && ws.slack_var >= 0) ta.emplace_back(ws.slack_var, 1.0);
      for (const auto& lt : eb.terms) tb.emplace_back(lt.var, lt.coef);
      if (sb && ws.slack_var >= 0) tb.emplace_back(ws.slack_var, 1.0);
      for (auto& [vi, ci] : ta)
        for (auto& [vj, cj] : tb) {
          add_hess(vi, vj, w * ci * cj);
          add_hess(vj, vi, w * ci * cj);
        }
    };
    cross(c.b, false, c.b, false, 1.0 / det);  // symmetrized loop doubles it
    cross(c.a, true, c.c, true, -1.0 / det);
  }
}

struct BarrierResult {
  bool centered = false;
  double decrement = std::numeric_limits<double>::infinity();
  int steps = 0;
};

/// Damped Newton to the central point of t * obj + barrier.
inline BarrierResult center(const Workspace& ws, std::vector<double>& x, double t,
                            const std::vector<double>& cost, int max_steps, int& total_steps,
                            int total_cap) {
  BarrierResult res;
  NewtonSystem sys;
  Eigen::SparseMatrix<double> H(ws.nfree(), ws.nfree());
  Eigen::VectorXd rhs(ws.nfree()), step(ws.nfree());
  for (int it = 0; it < max_steps; ++it) {
    if (total_steps >= total_cap) return res;
    build_newton(ws, x, sys);
    for (int i = 0; i < ws.nfree(); ++i) sys.grad[i] += t * cost[ws.var_of[i]];
    // diagonal scaling by box widths
    for (auto& tr : sys.hess)
      tr = {tr.row(), tr.col(), tr.value() * ws.scale[tr.row()] * ws.scale[tr.col()]};
    H.setFromTriplets(sys.hess.begin(), sys.hess.end());
    for (int i = 0; i < ws.nfree(); ++i) rhs[i] = -sys.grad[i] * ws.scale[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(H);
    if (ldlt.info() != Eigen::Success) {
      // tiny diagonal lift and retry once
      Eigen::SparseMatrix<double> I(ws.nfree(), ws.nfree());
      I.setIdentity();
      H = H + 1e-10 * I;
      ldlt.compute(H);
      if (ldlt.info() != Eigen::Success) return res;
    }
    step = ldlt.solve(rhs);
    double lambda2 = rhs.dot(step);  // grad^T H^-1 grad in scaled space
    res.decrement = lambda2 / 2.0;
    ++total_steps;
    ++res.steps;
    if (res.decrement < 1e-9) {
      res.centered = true;
      return res;
    }
    // backtracking line search on t*obj + barrier
    double fx = barrier_value(ws, x);
    for (int i = 0; i < ws.nfree(); ++i) fx += t * cost[ws.var_of[i]] * x[ws.var_of[i]];
    double gTd = -lambda2;
    std::vector<double> trial = x;
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < ws.nfree(); ++i)
        trial[ws.var_of[i]] = x[ws.var_of[i]] + alpha * step[i] * ws.scale[i];
      if (margins_valid(ws, trial)) {
        double ft = barrier_value(ws, trial);
        for (int i = 0; i < ws.nfree(); ++i) ft += t * cost[ws.var_of[i]] * trial[ws.var_of[i]];
        if (ft <= fx + 0.25 * alpha * gTd) {
          x = trial;
          moved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!moved) {
      res.centered = res.decrement < 1e-6;  // stuck at numerical precision
      return res;
    }
  }
  return res;
}

}  // namespace detail

/// Solve the structured problem to the given relative tolerance. An optional
/// warm start is used when it is strictly feasible; otherwise a phase-I
/// search runs first. Constraints that involve no free variable are checked
/// against the fixed values and dropped; a violated one makes the problem
/// infeasible outright.
inline KernelSolution solve(const StructuredConvexProblem& input, double tol = 1e-6,
                            const std::vector<double>* warm_start = nullptr,
                            int max_newton_steps = 2000) {
  const int n = input.num_vars();
  if (static_cast<int>(input.upper.size()) != n ||
      static_cast<int>(input.objective.size()) != n)
    throw std::invalid_argument("kernel::solve: inconsistent problem arrays");
  for (int i = 0; i < n; ++i) {
    if (!(input.lower[i] <= input.upper[i]) || !std::isfinite(input.lower[i]) ||
        !std::isfinite(input.upper[i]))
      throw std::invalid_argument("kernel::solve: boxes must be finite with lower <= upper");
  }

  KernelSolution sol;
  sol.x.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    sol.x[i] = input.lower[i] == input.upper[i] ? input.lower[i]
                                                : 0.5 * (input.lower[i] + input.upper[i]);

  auto is_free = [&](int v) { return input.lower[v] < input.upper[v]; };
  StructuredConvexProblem prob = input;
  bool constant_violation = false;
  std::erase_if(prob.affine, [&](const AffineConstraint& c) {
    for (const auto& lt : c.terms)
      if (is_free(lt.var)) return false;
    double v = 0;
    for (const auto& lt : c.terms) v += lt.coef * sol.x[lt.var];
    if (v > c.rhs + 1e-9 * std::max(1.0, std::abs(c.rhs))) constant_violation = true;
    return true;
  });
  std::erase_if(prob.rates, [&](const LogRateConstraint& c) {
    for (const auto& lt : c.logs)
      if (is_free(lt.var)) return false;
    for (const auto& pt : c.persp)
      if (is_free(pt.s_var) || is_free(pt.p_var)) return false;
    for (const auto& lt : c.affine)
      if (is_free(lt.var)) return false;
    if (detail::log_rate_value(c, sol.x) <
        c.min_value - 1e-9 * std::max(1.0, std::abs(c.min_value)))
      constant_violation = true;
    return true;
  });
  std::erase_if(prob.cones, [&](const NormConeConstraint& c) {
    if (is_free(c.bound_var)) return false;
    for (int v : c.vec_vars)
      if (is_free(v)) return false;
    double s2 = 0;
    for (int v : c.vec_vars) s2 += sol.x[v] * sol.x[v];
    if (std::sqrt(s2) > sol.x[c.bound_var] + 1e-9) constant_violation = true;
    return true;
  });
  std::erase_if(prob.psd2, [&](const Psd2Constraint& c) {
    for (const auto* e : {&c.a, &c.b, &c.c})
      for (const auto& lt : e->terms)
        if (is_free(lt.var)) return false;
    double a = detail::affine_expr_value(c.a, sol.x);
    double cc = detail::affine_expr_value(c.c, sol.x);
    double b = detail::affine_expr_value(c.b, sol.x);
    double lmin = 0.5 * (a + cc) - std::sqrt(0.25 * (a - cc) * (a - cc) + b * b);
    if (lmin < -1e-9) constant_violation = true;
    return true;
  });
  if (constant_violation) {
    sol.status = KernelStatus::infeasible;
    return sol;
  }

  detail::Workspace ws;
  ws.prob = &prob;
  ws.free_of.assign(n, -1);
  for (int i = 0; i < n; ++i)
    if (prob.lower[i] < prob.upper[i]) {
      ws.free_of[i] = static_cast<int>(ws.var_of.size());
      ws.var_of.push_back(i);
      ws.scale.push_back(prob.upper[i] - prob.lower[i]);
    }
  ws.m_total = 2 * ws.nfree() + static_cast<int>(prob.affine.size() + prob.rates.size()) +
               2 * static_cast<int>(prob.cones.size() + prob.psd2.size());

  auto objective_of = [&](const std::vector<double>& x) {
    double v = prob.objective_constant;
    for (int i = 0; i < n; ++i) v += prob.objective[i] * x[i];
    return v;
  };
  auto worst_violation = [&](const std::vector<double>& x) {
    double worst = 0;
    for (const auto& c : prob.affine) {
      double r = c.rhs;
      for (const auto& lt : c.terms) r -= lt.coef * x[lt.var];
      worst = std::max(worst, -r);
    }
    for (const auto& c : prob.rates)
      worst = std::max(worst, c.min_value - detail::log_rate_value(c, x));
    for (const auto& c : prob.cones) {
      double s2 = 0;
      for (int v : c.vec_vars) s2 += x[v] * x[v];
      worst = std::max(worst, std::sqrt(s2) - x[c.bound_var]);
    }
    for (const auto& c : prob.psd2) {
      double a = detail::affine_expr_value(c.a, x);
      double cc = detail::affine_expr_value(c.c, x);
      double b = detail::affine_expr_value(c.b, x);
      double lmin = 0.5 * (a + cc) - std::sqrt(0.25 * (a - cc) * (a - cc) + b * b);
      worst = std::max(worst, -lmin);
    }
    return worst;
  };

  // no free variables: everything is decided by the fixed values
  if (ws.nfree() == 0) {
    sol.objective = objective_of(sol.x);
    sol.primal_residual = worst_violation(sol.x);
    sol.duality_measure = 0;
    sol.stationarity = 0;
    sol.status = sol.primal_residual <= 1e-9 ? KernelStatus::optimal : KernelStatus::infeasible;
    return sol;
  }

  // objective scale so the barrier weight has a uniform meaning
  ws.obj_scale = 0;
  for (int i = 0; i < ws.nfree(); ++i)
    ws.obj_scale = std::max(ws.obj_scale, std::abs(prob.objective[ws.var_of[i]]) * ws.scale[i]);
  if (ws.obj_scale <= 0) ws.obj_scale = 1;
  std::vector<double> cost(n, 0.0);
  for (int i = 0; i < n; ++i) cost[i] = prob.objective[i] / ws.obj_scale;

  if (warm_start && static_cast<int>(warm_start->size()) == n) {
    std::vector<double> cand = *warm_start;
    for (int i = 0; i < n; ++i)
      if (ws.free_of[i] < 0) cand[i] = prob.lower[i];
    if (detail::margins_valid(ws, cand)) sol.x = cand;
  }

  int total_steps = 0;

  // phase-I when the start is not strictly feasible
  if (!detail::margins_valid(ws, sol.x)) {
    StructuredConvexProblem p1 = prob;
    const int sv = n;
    double viol = worst_violation(sol.x);
    double sigma0 = std::max(1.0, 2.0 * viol);
    p1.lower.push_back(-2.0 * sigma0 - 1.0);
    p1.upper.push_back(2.0 * sigma0 + 1.0);
    p1.objective.assign(n + 1, 0.0);
    p1.objective[sv] = 1.0;

    detail::Workspace w1;
    w1.prob = &p1;
    w1.free_of.assign(n + 1, -1);
    for (int i = 0; i < n; ++i)
      if (p1.lower[i] < p1.upper[i]) {
        w1.free_of[i] = static_cast<int>(w1.var_of.size());
        w1.var_of.push_back(i);
        w1.scale.push_back(p1.upper[i] - p1.lower[i]);
      }
    w1.free_of[sv] = static_cast<int>(w1.var_of.size());
    w1.var_of.push_back(sv);
    w1.scale.push_back(p1.upper[sv] - p1.lower[sv]);
    w1.slack_var = sv;
    w1.m_total = ws.m_total + 2;

    std::vector<double> x1 = sol.x;
    x1.push_back(sigma0);
    if (!detail::margins_valid(w1, x1)) {
      // push the slack further out until valid (cones and psd2 need margin)
      for (int tries = 0; tries < 60 && !detail::margins_valid(w1, x1); ++tries) {
        x1[sv] = x1[sv] * 2.0 + 1.0;
        if (x1[sv] >= p1.upper[sv]) {
          p1.upper[sv] = x1[sv] * 2.0;
          w1.scale.back() = p1.upper[sv] - p1.lower[sv];
        }
      }
      if (!detail::margins_valid(w1, x1)) {
        sol.status = KernelStatus::infeasible;
        return sol;
      }
    }

    std::vector<double> cost1(n + 1, 0.0);
    cost1[sv] = 1.0 / std::max(1.0, sigma0);
    bool feasible_found = false;
    double t = 1.0;
    for (int stage = 0; stage < 60; ++stage) {
      detail::center(w1, x1, t, cost1, 60, total_steps, max_newton_steps);
      std::vector<double> xmain(x1.begin(), x1.begin() + n);
      if (x1[sv] < 0 && detail::margins_valid(ws, xmain)) {
        sol.x = xmain;
        feasible_found = true;
        break;
      }
      // certified infeasibility: sigma* >= sigma - gap > 0
      double gap = w1.m_total / t / cost1[sv];
      if (x1[sv] - gap > 1e-12 && stage > 4) {
        sol.status = KernelStatus::infeasible;
        sol.primal_residual = worst_violation(xmain);
        return sol;
      }
      if (total_steps >= max_newton_steps) break;
      t *= 10.0;
    }
    if (!feasible_found) {
      sol.status = total_steps >= max_newton_steps ? KernelStatus::max_iter
                                                   : KernelStatus::infeasible;
      std::vector<double> xmain(x1.begin(), x1.begin() + n);
      sol.primal_residual = worst_violation(xmain);
      sol.newton_steps = total_steps;
      return sol;
    }
  }

  // main barrier path
  double t = 1.0;
  double decrement = std::numeric_limits<double>::infinity();
  for (int stage = 0; stage < 60; ++stage) {
    auto res = detail::center(ws, sol.x, t, cost, 60, total_steps, max_newton_steps);
    decrement = res.decrement;
    sol.stage_objectives.push_back(objective_of(sol.x));
    double scaled_obj = std::abs(objective_of(sol.x)) / ws.obj_scale;
    if (ws.m_total / t <= tol * std::max(1.0, scaled_obj)) break;
    if (total_steps >= max_newton_steps) break;
    t *= 10.0;
  }

  sol.objective = objective_of(sol.x);
  sol.newton_steps = total_steps;
  sol.primal_residual = std::max(0.0, worst_violation(sol.x));
  double scaled_obj = std::abs(sol.objective) / ws.obj_scale;
  sol.duality_measure = (ws.m_total / t) / std::max(1.0, scaled_obj);
  sol.stationarity = decrement;
  sol.status = (sol.duality_measure <= tol && sol.primal_residual <= 1e-9)
                   ? KernelStatus::optimal
                   : KernelStatus::max_iter;
  return sol;
}

}  // namespace mecopt::kernel

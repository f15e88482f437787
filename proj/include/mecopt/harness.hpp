#pragma once

// Experiment runner: seeded parameter sweeps over channel realizations with
// a fixed CSV row contract. Averaging is left to downstream tools; the
// harness only emits per-run rows, including failed runs, and never aborts a
// sweep because one solve came back infeasible.

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mecopt/baselines.hpp"
#include "mecopt/bnb.hpp"
#include "mecopt/model.hpp"
#include "mecopt/report.hpp"
#include "mecopt/sca.hpp"
#include "mecopt/scenario_gen.hpp"

namespace mecopt::harness {

enum class Algo { bnb, sca1, sca2, sc, lc, eo, fsa };

inline const char* to_string(Algo a) {
  switch (a) {
    case Algo::bnb: return "bnb";
    case Algo::sca1: return "sca1";
    case Algo::sca2: return "sca2";
    case Algo::sc: return "sc";
    case Algo::lc: return "lc";
    case Algo::eo: return "eo";
    case Algo::fsa: return "fsa";
  }
  return "unknown";
}

inline Algo algo_from_string(const std::string& s) {
  for (Algo a : {Algo::bnb, Algo::sca1, Algo::sca2, Algo::sc, Algo::lc, Algo::eo, Algo::fsa})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

struct SolverSettings {
  bnb::BnbOptions bnb;
  sca::ScaOptions sca;
};

inline SolveReport run_algo(Algo algo, const Scenario& sc, const ChannelRealization& ch,
                            const SolverSettings& settings = {}) {
  switch (algo) {
    case Algo::bnb: return bnb::solve_global(sc, ch, settings.bnb);
    case Algo::sca1: return sca::sca1_solve(sc, ch, settings.sca);
    case Algo::sca2: return sca::sca2_solve(sc, ch, settings.sca);
    case Algo::sc: return baselines::sc_solve(sc, ch, settings.sca);
    case Algo::lc: return baselines::lc_solve(sc);
    case Algo::eo: return baselines::eo_solve(sc, ch, settings.sca);
    case Algo::fsa: return baselines::fsa_solve(sc, ch, settings.sca);
  }
  throw std::logic_error("unreachable");
}

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"task_bits", "r2",    "delay",
                                              "tau",       "gamma", "cycles"};
  return names;
}

/// Apply one sweep parameter value to a scenario/geometry pair.
inline void apply_parameter(const std::string& name, double value, Scenario& sc,
                            scengen::Annulus& geom) {
  if (name == "task_bits") {
    sc.B_k.assign(sc.K, value);
  } else if (name == "r2") {
    geom.r2_m = value;
  } else if (name == "delay") {
    sc.D_k.assign(sc.K, static_cast<int>(value));
  } else if (name == "tau") {
    sc.tau = static_cast<int>(value);
  } else if (name == "gamma") {
    sc.Gamma_k.assign(sc.K, value);
  } else if (name == "cycles") {
    sc.c_k.assign(sc.K, value);
  } else {
    throw std::invalid_argument("unknown sweep parameter '" + name + "'");
  }
  sc.validate();
}

struct SweepSpec {
  Scenario base;
  scengen::Annulus geom;
  std::string param;
  std::vector<double> values;
  int realizations = 1;
  std::uint64_t seed = 1;
  std::vector<Algo> algos;
  SolverSettings settings;
};

struct SweepRow {
  int realization_id = 0;
  std::uint64_t seed = 0;
  Algo algo = Algo::sca1;
  std::string param_name;
  double param_value = 0;
  SolveReport report;
};

/// Run the sweep over (value, realization, algo) tasks. Realizations use
/// seeds base_seed + index, so any row can be reproduced in isolation. Rows
/// come back in deterministic order regardless of the thread count.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, int threads = 0) {
  struct Task {
    int value_idx, realization, algo_idx;
  };
  std::vector<Task> tasks;
  for (std::size_t v = 0; v < spec.values.size(); ++v)
    for (int r = 0; r < spec.realizations; ++r)
      for (std::size_t a = 0; a < spec.algos.size(); ++a)
        tasks.push_back({static_cast<int>(v), r, static_cast<int>(a)});

  std::vector<SweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      SweepRow& row = rows[i];
      row.realization_id = t.realization;
      row.seed = spec.seed + static_cast<std::uint64_t>(t.realization);
      row.algo = spec.algos[t.algo_idx];
      row.param_name = spec.param;
      row.param_value = spec.values[t.value_idx];
      try {
        Scenario sc = spec.base;
        scengen::Annulus geom = spec.geom;
        apply_parameter(spec.param, row.param_value, sc, geom);
        auto ch = scengen::sample_realization(sc, geom, row.seed);
        row.report = run_algo(row.algo, sc, ch, spec.settings);
      } catch (const std::exception&) {
        row.report = SolveReport{};
        row.report.algo = to_string(row.algo);
        row.report.status = SolveStatus::infeasible;
      }
    }
  };

  if (threads <= 0) {
    if (const char* env = std::getenv("MECOPT_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return rows;
}

inline constexpr const char* kCsvHeader =
    "realization_id,seed,algo,param_name,param_value,total_power_w,total_power_dbm,feasible,"
    "proven_optimal,gap,iterations,offload_count,wall_ms";

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvHeader << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    const SolveReport& r = row.report;
    bool ok = r.is_feasible();
    out << row.realization_id << ',' << row.seed << ',' << to_string(row.algo) << ','
        << row.param_name << ',' << num(row.param_value) << ','
        << num(ok ? r.objective_w : std::numeric_limits<double>::quiet_NaN()) << ','
        << num(ok ? watts_to_dbm(r.objective_w) : std::numeric_limits<double>::quiet_NaN())
        << ',' << (ok ? "true" : "false") << ',' << (r.proven_optimal ? "true" : "false") << ','
        << num(r.gap) << ',' << r.iterations << ',' << (ok ? r.offload_count() : 0) << ','
        << num(r.wall_ms) << "\n";
  }
}

}  // namespace mecopt::harness

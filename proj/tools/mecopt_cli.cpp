// Command line front end: scenario generation, single solves, and seeded
// parameter sweeps with CSV output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mecopt/harness.hpp"
#include "mecopt/io.hpp"

using namespace mecopt;

namespace {

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<double> parse_list(const std::string& text, int k, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.size() == 1) out.assign(k, out[0]);
  if (out.size() != static_cast<std::size_t>(k))
    throw CLI::ValidationError(what + " needs 1 or K comma-separated values");
  return out;
}

struct GenFlags {
  int k = 4, mu = 16, md = 16, nu = 4, nd = 4, tau = 3;
  double r1 = 20.0, r2 = 75.0;
  std::string bits = "160", delay = "7", gamma = "1", cycles = "1000";
  std::string eps_u = "1e-6", eps_d = "1e-6";
  double pkmax_dbm = 25.0, pmax_dbm = 45.0, pcir = 0.05, kappa = 1e-27;
  double fmax = 2.7e9, bs = 30e3, weight = 1.0, delta = 1.0, delta_bs = 1.0;

  void attach(CLI::App* app) {
    app->add_option("--k", k, "number of users");
    app->add_option("--mu", mu, "uplink sub-carriers");
    app->add_option("--md", md, "downlink sub-carriers");
    app->add_option("--nu", nu, "uplink time slots");
    app->add_option("--nd", nd, "downlink time slots");
    app->add_option("--tau", tau, "frame offset in slots");
    app->add_option("--r1", r1, "inner cell radius, m");
    app->add_option("--r2", r2, "outer cell radius, m");
    app->add_option("--bits", bits, "task size in bits (scalar or comma list)");
    app->add_option("--delay", delay, "deadline in slots (scalar or comma list)");
    app->add_option("--gamma", gamma, "result/task size ratio (scalar or comma list)");
    app->add_option("--cycles", cycles, "CPU cycles per bit (scalar or comma list)");
    app->add_option("--eps", eps_u, "uplink packet error probability");
    app->add_option("--eps-d", eps_d, "downlink packet error probability");
    app->add_option("--pkmax-dbm", pkmax_dbm, "user power budget, dBm");
    app->add_option("--pmax-dbm", pmax_dbm, "BS power budget, dBm");
    app->add_option("--pcir", pcir, "circuit power, W");
    app->add_option("--kappa", kappa, "switched capacitance, F");
    app->add_option("--fmax", fmax, "max CPU frequency, Hz");
    app->add_option("--bs", bs, "sub-carrier bandwidth, Hz");
    app->add_option("--weight", weight, "user weight");
    app->add_option("--delta", delta, "user amplifier inefficiency");
    app->add_option("--delta-bs", delta_bs, "BS amplifier inefficiency");
  }

  Scenario scenario() const {
    Scenario sc;
    sc.K = k;
    sc.M_u = mu;
    sc.M_d = md;
    sc.N_u = nu;
    sc.N_d = nd;
    sc.tau = tau;
    sc.B_s = bs;
    sc.B_k = parse_list(bits, k, "--bits");
    auto d = parse_list(delay, k, "--delay");
    sc.D_k.assign(d.begin(), d.end());
    sc.Gamma_k = parse_list(gamma, k, "--gamma");
    sc.c_k = parse_list(cycles, k, "--cycles");
    sc.eps_u_k = parse_list(eps_u, k, "--eps");
    sc.eps_d_k = parse_list(eps_d, k, "--eps-d");
    sc.P_k_max.assign(k, dbm_to_watts(pkmax_dbm));
    sc.w_k.assign(k, weight);
    sc.delta_k.assign(k, delta);
    sc.P_max = dbm_to_watts(pmax_dbm);
    sc.delta_BS = delta_bs;
    sc.P_cir = pcir;
    sc.kappa = kappa;
    sc.f_max = fmax;
    sc.validate();
    if (!(r1 > 0) || !(r2 >= r1)) throw CLI::ValidationError("need 0 < --r1 <= --r2");
    return sc;
  }
};

std::string default_channel_path(const std::string& scenario_path) {
  std::filesystem::path p(scenario_path);
  auto stem = p.stem().string();
  auto parent = p.parent_path();
  return (parent / (stem + ".channel.json")).string();
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

int status_exit_code(SolveStatus st) {
  switch (st) {
    case SolveStatus::optimal:
    case SolveStatus::feasible: return 0;
    case SolveStatus::infeasible: return 2;
    case SolveStatus::budget_exhausted: return 3;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solvers and experiment harness for joint uplink/downlink MEC allocation"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write scenario and channel realization files");
  GenFlags gf;
  gf.attach(gen);
  std::string gen_out = "scenario.json", gen_channel_out;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("-o,--out", gen_out, "scenario output path");
  gen->add_option("--channel-out", gen_channel_out, "channel output path");
  gen->add_option("--seed", gen_seed, "realization seed (default: from entropy)")
      ->each([&](const std::string&) { gen_seed_set = true; });

  // solve
  auto* solve = app.add_subcommand("solve", "run one solver on a scenario/channel pair");
  std::string algo_name = "sca1", scen_path, chan_path, report_out;
  double gap_tol = 1e-2, kernel_tol = 1e-6, stop_tol = 1e-3, time_budget = 0;
  long imax = 0;
  std::uint64_t solve_seed = 0;
  bool dump_alloc = false;
  solve->add_option("--algo", algo_name, "bnb|sca1|sca2|sc|lc|eo|fsa")->required();
  solve->add_option("--scenario", scen_path, "scenario JSON")->required();
  solve->add_option("--channel", chan_path, "channel JSON");
  solve->add_option("--gap-tol", gap_tol, "relative optimality gap (bnb)");
  solve->add_option("--imax", imax, "iteration budget (bnb boxes / SCA rounds)");
  solve->add_option("--kernel-tol", kernel_tol, "convex kernel tolerance");
  solve->add_option("--stop-tol", stop_tol, "SCA relative objective change");
  solve->add_option("--time-budget", time_budget, "wall clock budget, seconds");
  solve->add_option("--seed", solve_seed, "SCA initialization jitter seed");
  solve->add_option("-o,--out", report_out, "also write the report to this path");
  solve->add_flag("--dump-alloc", dump_alloc, "embed the full allocation in the report");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "seeded parameter sweep with CSV output");
  GenFlags sf;
  sf.attach(sweep);
  std::string param = "task_bits", values_text = "160", algos_text = "sca1";
  int realizations = 1, threads = 0;
  std::uint64_t sweep_seed = 1;
  std::string csv_out = "sweep.csv", sweep_dump_dir;
  double s_gap_tol = 1e-2, s_kernel_tol = 1e-6, s_stop_tol = 1e-3;
  long s_imax = 0;
  sweep->add_option("--param", param, "task_bits|r2|delay|tau|gamma|cycles")->required();
  sweep->add_option("--values", values_text, "comma-separated parameter values")->required();
  sweep->add_option("--realizations", realizations, "channel realizations per value");
  sweep->add_option("--algos", algos_text, "comma-separated solver list");
  sweep->add_option("--seed", sweep_seed, "base seed; realization i uses seed+i");
  sweep->add_option("-o,--out", csv_out, "CSV output path");
  sweep->add_option("--dump-alloc", sweep_dump_dir, "directory for per-run reports");
  sweep->add_option("--threads", threads, "worker threads (or MECOPT_THREADS)");
  sweep->add_option("--gap-tol", s_gap_tol, "relative optimality gap (bnb)");
  sweep->add_option("--imax", s_imax, "iteration budget");
  sweep->add_option("--kernel-tol", s_kernel_tol, "convex kernel tolerance");
  sweep->add_option("--stop-tol", s_stop_tol, "SCA relative objective change");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Scenario sc = gf.scenario();
      std::uint64_t seed = gen_seed_set ? gen_seed : entropy_seed();
      auto ch = scengen::sample_realization(sc, {gf.r1, gf.r2}, seed);
      io::save_json(gen_out, io::to_json(sc));
      std::string chan_out = gen_channel_out.empty() ? default_channel_path(gen_out)
                                                     : gen_channel_out;
      io::save_json(chan_out, io::to_json(ch));
      std::cout << "seed " << seed << "\n";
      std::cout << "wrote " << gen_out << " and " << chan_out << "\n";
      return 0;
    }

    if (*solve) {
      harness::Algo algo = harness::algo_from_string(algo_name);
      Scenario sc = io::scenario_from_json(io::load_json(scen_path));
      ChannelRealization ch;
      if (algo != harness::Algo::lc) {
        if (chan_path.empty()) chan_path = default_channel_path(scen_path);
        ch = io::channel_from_json(io::load_json(chan_path));
        if (ch.K != sc.K || ch.M_u != sc.M_u || ch.M_d != sc.M_d)
          throw std::invalid_argument("channel shape does not match the scenario");
      }
      harness::SolverSettings settings;
      settings.bnb.gap_tol = gap_tol;
      if (imax > 0) settings.bnb.max_iterations = imax;
      if (imax > 0) settings.sca.max_iterations = imax;
      settings.sca.kernel_tol = kernel_tol;
      settings.sca.stop_tol = stop_tol;
      settings.sca.init_seed = solve_seed;
      if (time_budget > 0) {
        settings.bnb.time_budget_s = time_budget;
        settings.sca.time_budget_s = time_budget;
      }
      SolveReport rep = harness::run_algo(algo, sc, ch, settings);
      if (!dump_alloc) rep.has_allocation = false;
      auto j = io::to_json(rep);
      j.erase("wall_ms");  // keep repeated runs byte-identical
      std::cout << j.dump(2) << "\n";
      if (!report_out.empty()) io::save_json(report_out, j);
      return status_exit_code(rep.status);
    }

    if (*sweep) {
      harness::SweepSpec spec;
      spec.base = sf.scenario();
      spec.geom = {sf.r1, sf.r2};
      spec.param = param;
      spec.values = split_doubles(values_text);
      if (spec.values.empty()) throw CLI::ValidationError("--values must be nonempty");
      spec.realizations = realizations;
      spec.seed = sweep_seed;
      {
        std::stringstream ss(algos_text);
        std::string item;
        while (std::getline(ss, item, ',')) spec.algos.push_back(harness::algo_from_string(item));
      }
      spec.settings.bnb.gap_tol = s_gap_tol;
      if (s_imax > 0) spec.settings.bnb.max_iterations = s_imax;
      if (s_imax > 0) spec.settings.sca.max_iterations = s_imax;
      spec.settings.sca.kernel_tol = s_kernel_tol;
      spec.settings.sca.stop_tol = s_stop_tol;

      auto rows = harness::run_sweep(spec, threads);
      std::ofstream out(csv_out);
      if (!out) throw std::runtime_error("cannot write " + csv_out);
      harness::write_csv(out, rows);
      if (!sweep_dump_dir.empty()) {
        std::filesystem::create_directories(sweep_dump_dir);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          auto j = io::to_json(rows[i].report);
          j.erase("wall_ms");
          j["realization_id"] = rows[i].realization_id;
          j["seed"] = rows[i].seed;
          j["param_name"] = rows[i].param_name;
          j["param_value"] = rows[i].param_value;
          io::save_json(sweep_dump_dir + "/row_" + std::to_string(i) + ".json", j);
        }
      }
      std::cout << "wrote " << rows.size() << " rows to " << csv_out << "\n";
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

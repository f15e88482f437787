#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mecopt/constraints.hpp"
#include "mecopt/harness.hpp"
#include "mecopt/io.hpp"
#include "mecopt/scenario_gen.hpp"

namespace fs = std::filesystem;
using namespace mecopt;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  fs::path out = dir / "stdout.txt";
  std::string cmd = std::string(MECOPT_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  res.stdout_text = ss.str();
  return res;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mecopt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kTinyFlags =
    "--k 2 --mu 2 --md 2 --nu 2 --nd 2 --tau 1 --r1 10 --r2 30 --bits 20 --delay 4 "
    "--cycles 1500,4000";

}  // namespace

TEST_CASE("generate writes both documents and echoes the seed", "[cli]") {
  auto dir = fresh_dir("generate");
  auto sc_path = (dir / "sc.json").string();
  auto res = run_cli("generate " + kTinyFlags + " --seed 42 -o " + sc_path, dir);
  REQUIRE(res.exit_code == 0);
  CHECK(res.stdout_text.find("seed 42") != std::string::npos);
  REQUIRE(fs::exists(dir / "sc.json"));
  REQUIRE(fs::exists(dir / "sc.channel.json"));
  auto sc = io::scenario_from_json(io::load_json(sc_path));
  CHECK(sc.K == 2);
  auto ch = io::channel_from_json(io::load_json((dir / "sc.channel.json").string()));
  CHECK(ch.seed == 42);
  // matches an in-process draw bit for bit
  auto expect = scengen::sample_realization(sc, {10.0, 30.0}, 42);
  CHECK(ch.g_u == expect.g_u);

  SECTION("omitted seed is drawn from entropy and printed") {
    auto r2 = run_cli("generate " + kTinyFlags + " -o " + (dir / "sc2.json").string(), dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(r2.stdout_text.find("seed ") != std::string::npos);
  }
  SECTION("inverted radii are rejected") {
    auto r3 = run_cli("generate --k 2 --r1 80 --r2 20 -o " + (dir / "bad.json").string(), dir);
    CHECK(r3.exit_code != 0);
  }
}

TEST_CASE("solve runs, reports, and exits by status", "[cli]") {
  auto dir = fresh_dir("solve");
  auto sc_path = (dir / "sc.json").string();
  REQUIRE(run_cli("generate " + kTinyFlags + " --seed 23 -o " + sc_path, dir).exit_code == 0);

  SECTION("unknown algorithm") {
    auto res = run_cli("solve --algo magic --scenario " + sc_path, dir);
    CHECK(res.exit_code != 0);
  }
  SECTION("global solver proves its gap on a tiny instance") {
    auto res = run_cli("solve --algo bnb --scenario " + sc_path + " -o " +
                           (dir / "rep.json").string(),
                       dir);
    REQUIRE(res.exit_code == 0);
    auto j = io::load_json((dir / "rep.json").string());
    CHECK(j.at("proven_optimal").get<bool>());
    CHECK(j.at("gap").get<double>() <= 1e-2);
    CHECK_FALSE(j.contains("wall_ms"));
  }
  SECTION("repeated runs are byte-identical") {
    auto a = run_cli("solve --algo sca2 --scenario " + sc_path, dir);
    auto b = run_cli("solve --algo sca2 --scenario " + sc_path, dir);
    REQUIRE(a.exit_code == 0);
    CHECK(a.stdout_text == b.stdout_text);
  }
  SECTION("infeasible local computing exits with 2") {
    auto big = (dir / "big.json").string();
    REQUIRE(run_cli("generate --k 1 --mu 2 --md 2 --nu 2 --nd 2 --tau 1 --r1 10 --r2 30 "
                    "--bits 400 --delay 5 --cycles 5000 --seed 1 -o " + big,
                    dir).exit_code == 0);
    auto res = run_cli("solve --algo lc --scenario " + big, dir);
    CHECK(res.exit_code == 2);
  }
}

TEST_CASE("sweep emits the CSV contract and reproducible allocations", "[cli]") {
  auto dir = fresh_dir("sweep");
  auto csv = (dir / "out.csv").string();
  auto dump = (dir / "allocs").string();
  auto res = run_cli("sweep " + kTinyFlags +
                         " --param task_bits --values 12,20 --realizations 2 "
                         "--algos sca1,lc --seed 5 --dump-alloc " + dump + " -o " + csv,
                     dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == harness::kCsvHeader);
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 2 * 2);

  // dumped allocations re-validate against the exact constraint suite
  int checked = 0;
  for (int i = 0; i < rows; ++i) {
    fs::path p = fs::path(dump) / ("row_" + std::to_string(i) + ".json");
    REQUIRE(fs::exists(p));
    auto j = io::load_json(p.string());
    if (!j.contains("allocation")) continue;
    // rebuild the swept scenario from the same flags the command used
    Scenario sc;
    sc.K = 2;
    sc.M_u = sc.M_d = sc.N_u = sc.N_d = 2;
    sc.tau = 1;
    sc.B_s = 30e3;
    sc.B_k = {20.0, 20.0};
    sc.D_k = {4, 4};
    sc.Gamma_k = {1.0, 1.0};
    sc.c_k = {1500.0, 4000.0};
    sc.eps_u_k = sc.eps_d_k = {1e-6, 1e-6};
    sc.P_k_max = {dbm_to_watts(25.0), dbm_to_watts(25.0)};
    sc.w_k = {1.0, 1.0};
    sc.delta_k = {1.0, 1.0};
    sc.P_max = dbm_to_watts(45.0);
    sc.delta_BS = 1.0;
    sc.P_cir = 0.05;
    sc.kappa = 1e-27;
    sc.f_max = 2.7e9;
    scengen::Annulus geom{10.0, 30.0};
    harness::apply_parameter(j.at("param_name").get<std::string>(),
                             j.at("param_value").get<double>(), sc, geom);
    auto ch = scengen::sample_realization(sc, geom, j.at("seed").get<std::uint64_t>());
    Allocation alloc = io::allocation_from_json(j.at("allocation"), sc);
    auto verify = constraints::check_all(alloc, ch, sc);
    CAPTURE(i);
    CHECK(verify.feasible());
    ++checked;
  }
  CHECK(checked >= 4);  // at least the feasible sca1 rows carry allocations
}

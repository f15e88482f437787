#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mecopt/bnb.hpp"
#include "mecopt/sca.hpp"
#include "mecopt/scenario_gen.hpp"
#include "test_fixtures.hpp"

using namespace mecopt;

TEST_CASE("integrality penalty", "[sca]") {
  Grid3<double> su(1, 2, 1), sd(1, 2, 1);
  std::vector<double> alpha{0.0};
  SECTION("binary points cost nothing") {
    su.v = {1.0, 0.0};
    sd.v = {0.0, 1.0};
    alpha[0] = 1.0;
    CHECK(sca::penalty(su, sd, alpha, 4.0, 5.0, 6.0) == 0.0);
  }
  SECTION("half-way share") {
    su.v = {0.5, 0.0};
    CHECK(sca::penalty(su, sd, alpha, 4.0, 0.0, 0.0) == Catch::Approx(1.0));
  }
  SECTION("never negative") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
      for (auto& v : su.v) v = unif(rng);
      for (auto& v : sd.v) v = unif(rng);
      alpha[0] = unif(rng);
      REQUIRE(sca::penalty(su, sd, alpha, 1.0, 2.0, 3.0) >= 0.0);
    }
  }
}

TEST_CASE("linearizations bound their originals", "[sca]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int M = 2, N = 2;
  std::vector<double> gains{3e6, 4e7};
  double qinv = fbt::q_inv(1e-6);

  SECTION("surrogate equals the original at the expansion point") {
    std::vector<double> p0{1e-4, 2e-4, 0.0, 5e-5};
    auto lin = sca::linearize_dispersion(p0, gains, M, N, qinv);
    double exact = fbt::kLog2E * qinv * std::sqrt(fbt::dispersion_sum(p0, gains, M, N));
    CHECK(lin.value == Catch::Approx(exact).epsilon(1e-12));
    auto sq = sca::linearize_squares(p0);
    double s2 = 0;
    for (double v : p0) s2 += v * v;
    CHECK(sq.value == Catch::Approx(s2).epsilon(1e-12));
  }
  SECTION("dispersion surrogate over-estimates at 1000 random points") {
    std::vector<double> p0(M * N);
    for (auto& v : p0) v = unif(rng) * 1e-3 + 1e-6;
    auto lin = sca::linearize_dispersion(p0, gains, M, N, qinv);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> p(M * N);
      for (auto& v : p) v = unif(rng) * 2e-3;
      double surrogate = lin.value;
      for (int j = 0; j < M * N; ++j) surrogate += lin.grad[j] * (p[j] - p0[j]);
      double exact = fbt::kLog2E * qinv * std::sqrt(fbt::dispersion_sum(p, gains, M, N));
      REQUIRE(surrogate >= exact - 1e-9);
    }
  }
  SECTION("squares surrogate under-estimates at 1000 random points") {
    std::vector<double> x0(6);
    for (auto& v : x0) v = unif(rng);
    auto sq = sca::linearize_squares(x0);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(6);
      double exact = 0, surrogate = sq.value;
      for (int j = 0; j < 6; ++j) {
        x[j] = unif(rng);
        exact += x[j] * x[j];
        surrogate += sq.grad[j] * (x[j] - x0[j]);
      }
      REQUIRE(surrogate <= exact + 1e-12);
    }
  }
}

namespace {

Scenario easy_scenario() {
  // single user, strong gains, small task: offloading is clearly best
  Scenario sc = testing::tiny_scenario(1, 2, 2, 1);
  sc.B_k[0] = 24.0;
  sc.D_k[0] = 4;
  sc.c_k[0] = 4000.0;
  return sc;
}

}  // namespace

TEST_CASE("scheme 1 solves a small instance quickly and exactly", "[sca]") {
  Scenario sc = easy_scenario();
  ChannelRealization ch = testing::flat_channel(sc, 3e7, 3e8);
  sca::ScaOptions opts;
  auto rep = sca::sca1_solve(sc, ch, opts);
  REQUIRE(rep.is_feasible());
  CHECK(rep.iterations <= 4);
  CHECK(rep.rounding_residual <= 1e-3);
  auto verify = constraints::check_all(rep.allocation, ch, sc);
  CAPTURE(verify.families[0].violation, verify.families[2].violation);
  CHECK(verify.feasible());
  CHECK(rep.alpha == std::vector<std::uint8_t>{0});
}

TEST_CASE("scheme 2 converges fast and stays feasible", "[sca]") {
  Scenario sc = easy_scenario();
  ChannelRealization ch = testing::flat_channel(sc, 3e7, 3e8);
  sca::ScaOptions opts;
  auto rep = sca::sca2_solve(sc, ch, opts);
  REQUIRE(rep.is_feasible());
  CHECK(rep.iterations <= 3);
  CHECK(rep.rounding_residual <= 1e-3);
  // the high-SNR back-off dominates the true one, so the output satisfies
  // the exact rate constraints with room to spare
  auto verify = constraints::check_all(rep.allocation, ch, sc);
  CHECK(verify.feasible());
}

TEST_CASE("penalized objective descends across iterations", "[sca]") {
  Scenario sc = testing::tiny_scenario(2, 2, 2, 1);
  sc.B_k = {20.0, 20.0};
  sc.D_k = {4, 4};
  sc.c_k = {1500.0, 4000.0};
  auto ch = scengen::sample_realization(sc, {10.0, 30.0}, 21);

  // re-run the iteration by hand through the public pieces to observe the
  // penalized objective sequence
  sca::ScaOptions opts;
  sca::default_eta(sc, opts);
  opts.stop_tol = 0.0;  // run all iterations
  opts.max_iterations = 6;
  sca::ScaVariant var;
  var.algo_name = "sca1";
  auto ctx = constraints::CheckContext::make(sc, ch);
  auto ly = sca::detail::ScaLayout::of(sc, false);
  sca::ScaIterate cur = sca::initial_iterate(sc);
  std::vector<double> pens;
  std::vector<double> warm;
  for (int it = 0; it < 6; ++it) {
    auto prob = sca::detail::base_problem(sc, ly, opts, var, cur);
    sca::detail::add_rates_scheme1(sc, ch, ly, cur, false, ctx, prob);
    auto ks = kernel::solve(prob, opts.kernel_tol, warm.empty() ? nullptr : &warm);
    REQUIRE(ks.status != kernel::KernelStatus::infeasible);
    warm = ks.x;
    cur = sca::detail::from_kernel_point(sc, ly, ks.x);
    pens.push_back(sca::detail::penalized_objective(sc, cur, opts, var));
  }
  for (std::size_t i = 1; i < pens.size(); ++i) REQUIRE(pens[i] <= pens[i - 1] + 1e-6);
}

TEST_CASE("two-user instance lands near the global optimum", "[sca]") {
  Scenario sc = testing::tiny_scenario(2, 2, 2, 1);
  sc.B_k = {20.0, 20.0};
  sc.D_k = {4, 4};
  sc.c_k = {1500.0, 4000.0};
  auto ch = scengen::sample_realization(sc, {10.0, 30.0}, 23);

  auto global = bnb::solve_global(sc, ch, {});
  REQUIRE(global.status == SolveStatus::optimal);

  auto r1 = sca::sca1_solve(sc, ch, sca::ScaOptions{});
  auto r2 = sca::sca2_solve(sc, ch, sca::ScaOptions{});
  REQUIRE(r1.is_feasible());
  REQUIRE(r2.is_feasible());
  // sandwich: the global optimum is below both, and scheme 1 is close
  CHECK(global.objective_w <= r1.objective_w + 1e-6);
  CHECK(global.objective_w <= r2.objective_w + 1e-6);
  CHECK(r1.objective_w <= global.objective_w * 1.10);
}

TEST_CASE("scheme 2 averages at or above scheme 1 at low SNR", "[sca]") {
  // the unit-dispersion back-off charges scheme 2 for every extra element,
  // so it concentrates power and pays more on average when links are weak;
  // per-instance ordering is not guaranteed
  double sum1 = 0, sum2 = 0;
  int counted = 0;
  for (std::uint64_t seed = 31; seed <= 40; ++seed) {
    Scenario sc = testing::tiny_scenario(2, 2, 2, 1);
    sc.B_k = {32.0, 32.0};
    sc.D_k = {4, 4};
    sc.c_k = {1500.0, 4000.0};
    auto ch = scengen::sample_realization(sc, {10.0, 40.0}, seed);
    auto r1 = sca::sca1_solve(sc, ch, sca::ScaOptions{});
    auto r2 = sca::sca2_solve(sc, ch, sca::ScaOptions{});
    if (!r1.is_feasible() || !r2.is_feasible()) continue;
    sum1 += r1.objective_w;
    sum2 += r2.objective_w;
    ++counted;
  }
  REQUIRE(counted >= 5);
  CHECK(sum2 >= sum1 - 1e-9);
}

TEST_CASE("deterministic default start and seeded jitter", "[sca]") {
  Scenario sc = easy_scenario();
  ChannelRealization ch = testing::flat_channel(sc, 3e7, 3e8);
  auto a = sca::sca1_solve(sc, ch, sca::ScaOptions{});
  auto b = sca::sca1_solve(sc, ch, sca::ScaOptions{});
  REQUIRE(a.is_feasible());
  CHECK(a.objective_w == b.objective_w);
  sca::ScaOptions seeded;
  seeded.init_seed = 7;
  auto c = sca::sca1_solve(sc, ch, seeded);
  REQUIRE(c.is_feasible());
  // a different start may move the answer a little, never break feasibility
  CHECK(constraints::check_all(c.allocation, ch, sc).feasible());
}

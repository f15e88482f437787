#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mecopt/constraints.hpp"
#include "oracles.hpp"
#include "test_fixtures.hpp"

using namespace mecopt;
namespace cons = mecopt::constraints;

TEST_CASE("causality pairs overlapping slots", "[constraints]") {
  SECTION("no overlap means no constraint") {
    Scenario sc = testing::tiny_scenario(1, 1, 2, /*tau=*/2);
    Allocation a = Allocation::zeros(sc);
    a.s_u.at(0, 0, 1) = 1;
    a.s_d.at(0, 0, 0) = 1;
    CHECK(cons::check_causality(a.s_u, a.s_d, sc).ok);
  }
  SECTION("uplink slot tau+1 blocks downlink slot 1") {
    Scenario sc = testing::tiny_scenario(1, 1, 2, /*tau=*/1);
    Allocation a = Allocation::zeros(sc);
    a.s_u.at(0, 0, 1) = 1;  // slot 2 = tau + 1
    a.s_d.at(0, 0, 0) = 1;  // slot 1
    auto fam = cons::check_causality(a.s_u, a.s_d, sc);
    CHECK_FALSE(fam.ok);
    CHECK(fam.violation == 1.0);
    a.s_d.at(0, 0, 0) = 0;
    CHECK(cons::check_causality(a.s_u, a.s_d, sc).ok);
  }
}

TEST_CASE("deadline zeroes late downlink slots", "[constraints]") {
  Scenario sc = testing::tiny_scenario(1, 1, 2, /*tau=*/1);
  SECTION("vacuous when the window exceeds the frame") {
    sc.D_k[0] = 10;  // D - tau > N_d
    Allocation a = Allocation::zeros(sc);
    a.s_d.at(0, 0, 1) = 1;
    CHECK(cons::check_delay(a.s_d, sc).ok);
  }
  SECTION("slot at the boundary is forbidden") {
    sc.D_k[0] = 3;  // first forbidden slot is 2
    Allocation a = Allocation::zeros(sc);
    a.s_d.at(0, 0, 1) = 1;
    CHECK_FALSE(cons::check_delay(a.s_d, sc).ok);
    a.s_d.at(0, 0, 1) = 0;
    a.s_d.at(0, 0, 0) = 1;
    CHECK(cons::check_delay(a.s_d, sc).ok);
  }
}

TEST_CASE("rate constraints", "[constraints]") {
  Scenario sc = testing::tiny_scenario(1, 1, 1, 1);
  sc.B_k[0] = 12.0;  // what a single element can carry at these gains
  sc.D_k[0] = 4;
  ChannelRealization ch = testing::flat_channel(sc, 3e7, 3e8);

  SECTION("local mode needs no rate") {
    Allocation a = Allocation::zeros(sc);
    a.alpha[0] = 1;
    auto [c1, c2] = cons::check_rates(a, ch, sc);
    CHECK(c1.ok);
    CHECK(c2.ok);
  }
  SECTION("offloading with empty allocation misses by B") {
    Allocation a = Allocation::zeros(sc);
    a.alpha[0] = 0;
    auto [c1, c2] = cons::check_rates(a, ch, sc);
    CHECK_FALSE(c1.ok);
    CHECK(c1.violation == Catch::Approx(sc.B_k[0]));
    CHECK_FALSE(c2.ok);
  }
  SECTION("bisection oracle power meets the rate exactly") {
    Allocation a = Allocation::zeros(sc);
    a.alpha[0] = 0;
    double pu = testing::oracle_min_power_single(ch.gain_u(0, 0), sc.B_k[0], sc.eps_u_k[0],
                                                 sc.P_k_max[0], 1e-4, false);
    double pd = testing::oracle_min_power_single(ch.gain_d(0, 0), sc.B_k[0], sc.eps_d_k[0],
                                                 sc.P_max, 1e-4, false);
    REQUIRE(pu > 0);
    REQUIRE(pd > 0);
    a.s_u.at(0, 0, 0) = 1;
    a.p_u.at(0, 0, 0) = pu;
    a.s_d.at(0, 0, 0) = 1;
    a.p_d.at(0, 0, 0) = pd;
    auto [c1, c2] = cons::check_rates(a, ch, sc);
    CHECK(c1.ok);
    CHECK(c2.ok);
    // met with essentially zero slack
    auto up = fbt::psi_user(a.s_u.user(0), a.p_u.user(0), ch.gains_u(0), 1, 1, sc.eps_u_k[0]);
    CHECK(up.psi_bits - sc.B_k[0] >= 0.0);
    CHECK(up.psi_bits - sc.B_k[0] <= 1e-9);
  }
}

TEST_CASE("budgets and local computing", "[constraints]") {
  Scenario sc = testing::tiny_scenario(2);
  SECTION("zero allocation, all offloading") {
    Allocation a = Allocation::zeros(sc);
    a.alpha.assign(2, 0);
    auto [c912, c1315] = cons::check_budgets_and_local(a, sc);
    CHECK(c912.ok);
    CHECK(c1315.ok);
  }
  SECTION("deadline boundary is tight but satisfied") {
    Allocation a = Allocation::zeros(sc);
    a.alpha.assign(2, 1);
    a.f[0] = sc.forced_cpu_hz(0);
    a.f[1] = sc.forced_cpu_hz(1);
    auto [c912, c1315] = cons::check_budgets_and_local(a, sc);
    CHECK(c912.ok);
    CHECK(c1315.ok);
    a.f[1] = sc.forced_cpu_hz(1) - 1.0;  // any shortfall breaks it
    auto fam = cons::check_budgets_and_local(a, sc).second;
    CHECK_FALSE(fam.ok);
  }
  SECTION("uplink budget") {
    Allocation a = Allocation::zeros(sc);
    a.alpha.assign(2, 0);
    a.s_u.at(0, 0, 0) = 1;
    a.p_u.at(0, 0, 0) = sc.P_k_max[0] + 0.01;
    auto fam = cons::check_budgets_and_local(a, sc).first;
    CHECK_FALSE(fam.ok);
    CHECK(fam.violation == Catch::Approx(0.01).margin(1e-12));
  }
}

TEST_CASE("derive_assignment thresholding", "[constraints]") {
  Grid3<double> p(1, 3, 1);
  SECTION("all zero") {
    auto [s, snapped] = cons::derive_assignment(p);
    CHECK(s.v == std::vector<std::uint8_t>{0, 0, 0});
  }
  SECTION("strictly above the tolerance") {
    p.at(0, 1, 0) = 2e-6;
    auto [s, snapped] = cons::derive_assignment(p, 1e-6);
    CHECK(s.v == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(snapped.at(0, 1, 0) == 2e-6);
  }
  SECTION("exactly at the tolerance snaps to zero") {
    p.at(0, 1, 0) = 1e-6;
    auto [s, snapped] = cons::derive_assignment(p, 1e-6);
    CHECK(s.v == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(snapped.at(0, 1, 0) == 0.0);
  }
}

TEST_CASE("feasibility of continuous points", "[constraints]") {
  Scenario sc = testing::tiny_scenario(1, 1, 1, 1);
  sc.B_k[0] = 12.0;
  sc.c_k[0] = 4000.0;  // makes local computing cost more than offloading
  sc.D_k[0] = 3;
  ChannelRealization ch = testing::flat_channel(sc, 3e7, 3e8);
  auto ctx = cons::CheckContext::make(sc, ch);
  cons::PointLayout ly = ctx.layout;
  std::vector<double> u(ly.size(), 0.0);

  SECTION("origin fails the deadline when computing locally") {
    std::vector<std::uint8_t> alpha{1};
    CHECK_FALSE(cons::feasibility_check(u, alpha, ch, sc, ctx));
  }
  SECTION("origin fails the capacity side when offloading") {
    std::vector<std::uint8_t> alpha{0};
    CHECK(cons::in_normal_set(u, alpha, ch, sc, ctx));
    CHECK_FALSE(cons::in_conormal_set(u, alpha, ch, sc, ctx));
  }
  SECTION("oracle optimum with matched auxiliaries is feasible") {
    auto opt = testing::tiny_oracle(sc, ch);
    REQUIRE(opt.feasible);
    REQUIRE(opt.alpha == 0);  // offloading should win at these gains
    std::vector<std::uint8_t> alpha{0};
    u[ly.pu(0, 0, 0)] = opt.p_u;
    u[ly.pd(0, 0, 0)] = opt.p_d;
    double vu = fbt::kLog2E * ctx.qinv_u[0] * std::sqrt(fbt::dispersion(ch.gain_u(0, 0) * opt.p_u));
    double vd = fbt::kLog2E * ctx.qinv_d[0] * std::sqrt(fbt::dispersion(ch.gain_d(0, 0) * opt.p_d));
    u[ly.zu(0)] = ctx.vbar_u[0] - vu;
    u[ly.zd(0)] = ctx.vbar_d[0] - vd;
    CHECK(cons::feasibility_check(u, alpha, ch, sc, ctx));
    // a feasible point induces an allocation passing the exact suite
    Allocation a = cons::induced_allocation(u, alpha, sc);
    auto rep = cons::check_all(a, ch, sc);
    CAPTURE(rep.families[0].violation, rep.families[1].violation);
    CHECK(rep.feasible());
  }
}

TEST_CASE("normal and co-normal set closure properties", "[constraints]") {
  Scenario sc = testing::tiny_scenario(2, 2, 2, 1);
  sc.B_k = {12.0, 12.0};
  sc.D_k = {4, 4};
  ChannelRealization ch = testing::flat_channel(sc, 1e7, 1e8);
  auto ctx = cons::CheckContext::make(sc, ch);
  cons::PointLayout ly = ctx.layout;
  std::vector<std::uint8_t> alpha{0, 0};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  int tested_g = 0, tested_h = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<double> u(ly.size());
    for (int k = 0; k < sc.K; ++k) {
      u[ly.f(k)] = 0.0;
      // partition elements between users and keep downlink off the paired
      // overlap slot so causality and exclusivity admit most draws
      for (int m = 0; m < sc.M_u; ++m)
        for (int n = 0; n < sc.N_u; ++n)
          if ((m + n) % sc.K == k && unif(rng) < 0.7)
            u[ly.pu(k, m, n)] = unif(rng) * sc.P_k_max[k] / 4;
      for (int m = 0; m < sc.M_d; ++m)
        for (int n = 1; n < sc.N_d; ++n)
          if ((m + n) % sc.K == k && unif(rng) < 0.7)
            u[ly.pd(k, m, n)] = unif(rng) * sc.P_max / 8;
      auto vterm = [&](int begin, std::span<const double> g, int M, int N, double qinv) {
        std::span<const double> pw(u.data() + begin, static_cast<std::size_t>(M) * N);
        return fbt::kLog2E * qinv * std::sqrt(fbt::dispersion_sum(pw, g, M, N));
      };
      double slack_u = ctx.vbar_u[k] - vterm(ly.pu_begin(k), ch.gains_u(k), sc.M_u, sc.N_u, ctx.qinv_u[k]);
      double slack_d = ctx.vbar_d[k] - vterm(ly.pd_begin(k), ch.gains_d(k), sc.M_d, sc.N_d, ctx.qinv_d[k]);
      u[ly.zu(k)] = unif(rng) * std::max(0.0, slack_u) * 0.999;
      u[ly.zd(k)] = unif(rng) * std::max(0.0, slack_d) * 0.999;
    }
    // shrink toward the origin; derived assignments can only lose elements
    std::vector<double> v = u;
    double shrink = unif(rng);
    for (auto& x : v) x *= shrink;
    if (cons::in_normal_set(u, alpha, ch, sc, ctx)) {
      ++tested_g;
      CHECK(cons::in_normal_set(v, alpha, ch, sc, ctx));
    }
    // grow toward the box top; the capacity side can only improve
    std::vector<double> h = u;
    for (int k = 0; k < sc.K; ++k) {
      h[ly.zu(k)] = 0.999 * ctx.vbar_u[k];
      h[ly.zd(k)] = 0.999 * ctx.vbar_d[k];
    }
    if (cons::in_conormal_set(h, alpha, ch, sc, ctx)) {
      ++tested_h;
      std::vector<double> w = h;
      for (int i = 0; i < ly.size(); ++i) w[i] = h[i] * (1.0 + unif(rng));
      CHECK(cons::in_conormal_set(w, alpha, ch, sc, ctx));
    }
  }
  CHECK(tested_g > 50);
  CHECK(tested_h > 20);
}

#include <doctest.h>

#include <cmath>

#include "ca/experiment.hpp"
#include "ca/fcra.hpp"
#include "ca/lp.hpp"
#include "ca/oracles.hpp"
#include "support.hpp"

using namespace ca;
using test::unit_demand_instance;
using test::xos_instance;

TEST_SUITE("lp_fcra") {

TEST_CASE("lp relaxation basics") {
  SUBCASE("single bidder, single item: integral optimum") {
    const AuctionInstance inst = xos_instance(1, 1, {}, {{{5}}});
    const LpSolution sol = solve_lpr(inst, full_mask(1));
    CHECK(sol.objective == doctest::Approx(5.0));
    CHECK(sol.x.at({0, 1}) == doctest::Approx(1.0));
    CHECK(sol.per_bidder[0] == doctest::Approx(5.0));
  }
  SUBCASE("identical unit-demand bidders split one item") {
    const AuctionInstance inst = unit_demand_instance(2, {1, 1}, {1.0}, {});
    const LpSolution sol = solve_lpr(inst, full_mask(2));
    CHECK(sol.objective == doctest::Approx(1.0));
  }
  SUBCASE("relaxation dominates the integral optimum on conflict-free instances") {
    for (int t = 0; t < 10; ++t) {
      GeneratorSpec spec;
      spec.n = 3 + (t % 3);
      spec.m = 2 + (t % 2);
      spec.delta = 0;
      Rng rng(mix_seed(11, t));
      const AuctionInstance inst = generate_instance(spec, rng);
      const LpSolution sol = solve_lpr(inst, full_mask(inst.n));
      CHECK(sol.objective >= exact_optimum(inst).welfare - 1e-7);
      CHECK(sol.max_violation(inst.n, inst.m) <= 1e-9);
    }
  }
  SUBCASE("bidder-set restriction only prices the kept bidders") {
    const AuctionInstance inst = xos_instance(2, 1, {}, {{{5}}, {{9}}});
    const LpSolution sol = solve_lpr(inst, bit(0));
    CHECK(sol.objective == doctest::Approx(5.0));
    CHECK(sol.per_bidder[1] == 0.0);
  }
  SUBCASE("explicit formulation bails beyond m = 12") {
    AuctionInstance inst;
    inst.n = 1;
    inst.m = 13;
    inst.bidder_graph = ConflictGraph(1, {});
    inst.valuations.push_back(Valuation::zero(13));
    CHECK_THROWS_AS(solve_lpr(inst, 1), SizeLimit);
  }
}

TEST_CASE("fcra ownership distribution") {
  SUBCASE("sole contender always wins") {
    const std::vector<double> prob = fcra_ownership({0.7, 0.2}, bit(0));
    REQUIRE(prob.size() == 1);
    CHECK(prob[0] == 1.0);
  }
  SUBCASE("symmetric halves") {
    const std::vector<double> prob = fcra_ownership({0.5, 0.5}, bit(0) | bit(1));
    CHECK(prob[0] == doctest::Approx(0.5));
    CHECK(prob[1] == doctest::Approx(0.5));
  }
  SUBCASE("probabilities over the contenders always sum to one") {
    Rng rng(1234);
    for (int t = 0; t < 1000; ++t) {
      const int n = 2 + static_cast<int>(rng.next_below(5));
      std::vector<double> mass(n);
      for (double& p : mass) p = rng.next_double();
      Mask contenders = 1 + rng.next_below(full_mask(n));
      if (popcount(contenders) < 2) contenders |= bit(0) | bit(1);
      const std::vector<double> prob = fcra_ownership(mass, contenders);
      double sum = 0.0;
      for (double p : prob) {
        CHECK(p >= -1e-15);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("fcra rounding mechanics") {
  SUBCASE("uncontended full density is deterministic") {
    const AuctionInstance inst = xos_instance(1, 1, {}, {{{5}}});
    FcraDensities d;
    d.per_bidder = {{{Mask{1}, 1.0}}};
    Rng rng(9);
    for (int t = 0; t < 25; ++t) {
      const Allocation a = fcra_round(inst, d, rng);
      CHECK(a.assigned[0] == 1);
    }
  }
  SUBCASE("outputs are disjoint subsets of the stage-one samples") {
    for (int t = 0; t < 10; ++t) {
      GeneratorSpec spec;
      spec.n = 3 + (t % 2);
      spec.m = 3;
      spec.delta = 1;
      Rng rng(mix_seed(13, t));
      const AuctionInstance inst = generate_instance(spec, rng);
      const LpSolution sol = solve_lpr(inst, full_mask(inst.n));
      const FcraDensities d = FcraDensities::from_lp(sol, inst.n);
      Rng rrng(mix_seed(14, t));
      for (int round = 0; round < 50; ++round) {
        std::vector<Mask> sampled;
        const Allocation a = fcra_round(inst, d, rrng, &sampled);
        CHECK(a.disjoint());
        for (int i = 0; i < inst.n; ++i) CHECK((a.assigned[i] & ~sampled[i]) == 0);
      }
    }
  }
  SUBCASE("infeasible densities are rejected") {
    const AuctionInstance inst = xos_instance(2, 1, {}, {{{1}}, {{1}}});
    FcraDensities d;
    d.per_bidder = {{{Mask{1}, 0.8}}, {{Mask{1}, 0.8}}};  // item mass 1.6
    Rng rng(1);
    CHECK_THROWS_AS(fcra_round(inst, d, rng), InfeasiblePoint);
  }
}

TEST_CASE("per-bidder value holds the (1 - 1/e) fraction") {
  // Monte-Carlo at reduced volume; the acceptance suite runs the full
  // 1e5-trial version on twenty instances.
  const int trials = 20000;
  for (int t = 0; t < 4; ++t) {
    GeneratorSpec spec;
    spec.n = 2 + (t % 3);
    spec.m = 2 + (t % 3);
    spec.delta = 1;
    Rng rng(mix_seed(15, t));
    const AuctionInstance inst = generate_instance(spec, rng);
    const LpSolution sol = solve_lpr(inst, full_mask(inst.n));
    const FcraDensities d = FcraDensities::from_lp(sol, inst.n);

    std::vector<double> sum(inst.n, 0.0), sumsq(inst.n, 0.0);
    Rng rrng(mix_seed(16, t));
    for (int round = 0; round < trials; ++round) {
      const Allocation a = fcra_round(inst, d, rrng);
      for (int i = 0; i < inst.n; ++i) {
        const double v = inst.value(i, a.assigned[i]);
        sum[i] += v;
        sumsq[i] += v * v;
      }
    }
    for (int i = 0; i < inst.n; ++i) {
      const double mean = sum[i] / trials;
      const double var = std::max(0.0, sumsq[i] / trials - mean * mean);
      const double se = std::sqrt(var / trials);
      CHECK(mean >= (1.0 - 1.0 / std::exp(1.0)) * sol.per_bidder[i] - 3.0 * se);
    }
  }
}

TEST_CASE("conditional monotonicity under rival competition") {
  // Bidder 0 conflicts with bidder 1; bidder 2's sample is held fixed.
  // Enumerate the resolution distribution exactly and compare
  // Pr[item in T_0 | rival empty] against the complement.
  const std::vector<std::pair<Mask, double>> draws0 = {{bit(0), 0.5}, {bit(0) | bit(1), 0.3}};
  const std::vector<std::pair<Mask, double>> draws1 = {{bit(0), 0.4}};
  const Mask fixed2 = bit(0);
  const std::vector<double> mass = {0.8, 0.4, 0.6};  // p_i(item 0)

  auto own_prob = [&](Mask s0, Mask s1) {
    Mask contenders = 0;
    if (contains(s0, 0)) contenders |= bit(0);
    if (contains(s1, 0)) contenders |= bit(1);
    if (contains(fixed2, 0)) contenders |= bit(2);
    if (!contains(contenders, 0)) return 0.0;
    const std::vector<double> prob = fcra_ownership(mass, contenders);
    int slot = 0;
    for (int i = 0; i < 3; ++i) {
      if (!contains(contenders, i)) continue;
      if (i == 0) return prob[slot];
      ++slot;
    }
    return 0.0;
  };

  auto enumerate = [&](bool rival_empty) {
    double total_pr = 0.0, win_pr = 0.0;
    for (int c0 = 0; c0 <= static_cast<int>(draws0.size()); ++c0) {
      const Mask s0 = c0 < static_cast<int>(draws0.size()) ? draws0[c0].first : 0;
      double p0 = c0 < static_cast<int>(draws0.size()) ? draws0[c0].second : 0.2;
      for (int c1 = 0; c1 <= static_cast<int>(draws1.size()); ++c1) {
        const Mask s1 = c1 < static_cast<int>(draws1.size()) ? draws1[c1].first : 0;
        double p1 = c1 < static_cast<int>(draws1.size()) ? draws1[c1].second : 0.6;
        if ((s1 == 0) != rival_empty) continue;
        total_pr += p0 * p1;
        win_pr += p0 * p1 * own_prob(s0, s1);
      }
    }
    return win_pr / total_pr;
  };

  CHECK(enumerate(true) >= enumerate(false) - 1e-12);
  CHECK(enumerate(true) > enumerate(false));  // strictly better here
}

}  // TEST_SUITE

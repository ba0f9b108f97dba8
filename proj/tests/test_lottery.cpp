#include <doctest.h>

#include <map>

#include "ca/experiment.hpp"
#include "ca/lottery.hpp"
#include "ca/oracles.hpp"
#include "support.hpp"

using namespace ca;
using test::unit_demand_instance;
using test::xos_instance;

namespace {

const Subsolver kExact = [](const AuctionInstance& inst) { return exact_optimum(inst); };

// Exact per-bidder inclusion counts of the filtered set over the whole
// hash-family domain.
std::vector<std::uint64_t> kept_counts(const ConflictGraph& g, const PairwiseFamily& fam) {
  std::vector<std::uint64_t> counts(g.node_count(), 0);
  for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
    const Mask kept = family_draw(g, fam, idx).kept;
    for (int i = 0; i < g.node_count(); ++i)
      if (contains(kept, i)) ++counts[i];
  }
  return counts;
}

}  // namespace

TEST_SUITE("lottery") {

TEST_CASE("pairwise family marginals are exactly q") {
  SUBCASE("delta 1 gives q = 1/2") {
    const PairwiseFamily fam(6, 1);
    CHECK(fam.inclusion_probability() == 0.5);
    std::vector<std::uint64_t> singles(6, 0);
    for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
      const Mask s = fam.subset(idx);
      for (int i = 0; i < 6; ++i)
        if (contains(s, i)) ++singles[i];
    }
    for (int i = 0; i < 6; ++i) CHECK(2 * singles[i] == fam.domain_size());
  }
  SUBCASE("single element universe") {
    const PairwiseFamily fam(1, 1);
    std::uint64_t count = 0;
    for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx)
      if (fam.subset(idx) & 1) ++count;
    CHECK(2 * count == fam.domain_size());
  }
  SUBCASE("pair frequencies are exactly q^2") {
    // q = 1/2^(ceil(log2 2)+1) = 1/4, so joint frequencies are 1/16
    const PairwiseFamily fam(4, 2);
    CHECK(fam.inclusion_probability() == 0.25);
    std::vector<std::vector<std::uint64_t>> pairs(4, std::vector<std::uint64_t>(4, 0));
    for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
      const Mask s = fam.subset(idx);
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
          if (contains(s, i) && contains(s, j)) ++pairs[i][j];
    }
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) CHECK(16 * pairs[i][j] == fam.domain_size());
  }
  SUBCASE("domain is quadratic") {
    const PairwiseFamily fam(16, 3);
    CHECK(fam.domain_size() <= 64ull * 16 * 16);
  }
  SUBCASE("invalid delta") {
    CHECK_THROWS_AS(PairwiseFamily(4, 0), std::invalid_argument);
    CHECK_THROWS_AS(PairwiseFamily(4, 5), std::invalid_argument);
  }
}

TEST_CASE("conflict-free sampling") {
  SUBCASE("no edges keeps the whole sample") {
    const ConflictGraph g(5, {});
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
      const ConflictFreeDraw d = sample_conflict_free(g, rng);
      CHECK(d.kept == d.sampled);
    }
  }
  SUBCASE("two bidders, one edge: exact probabilities") {
    // q = 1/2; Pr[0 kept] = q(1-q) = 1/4, Pr[1 kept] = q = 1/2
    const ConflictGraph g(2, {{0, 1}});
    const double q = lemma3_probability(g);
    double p0 = 0.0, p1 = 0.0;
    for (Mask sampled = 0; sampled < 4; ++sampled) {
      double pr = 1.0;
      for (int i = 0; i < 2; ++i) pr *= contains(sampled, i) ? q : 1.0 - q;
      const Mask kept = filter_conflicts(g, sampled);
      if (contains(kept, 0)) p0 += pr;
      if (contains(kept, 1)) p1 += pr;
    }
    CHECK(p0 == doctest::Approx(0.25));
    CHECK(p1 == doctest::Approx(0.5));
  }
  SUBCASE("kept bidders never have a sampled out-neighbor") {
    Rng rng(8);
    for (int t = 0; t < 40; ++t) {
      GeneratorSpec spec;
      spec.n = 4 + (t % 6);
      spec.m = 1;
      spec.delta = std::min(spec.n - 1, 1 + (t % 3));
      Rng grng(mix_seed(8, t));
      const ConflictGraph g = generate_instance(spec, grng).bidder_graph;
      const ConflictFreeDraw d = sample_conflict_free(g, rng);
      for (int i = 0; i < g.node_count(); ++i)
        if (contains(d.kept, i)) CHECK((g.out_neighbors(i) & d.sampled) == 0);
      CHECK((d.kept & ~d.sampled) == 0);
    }
  }
  SUBCASE("derandomized inclusion frequency is at least 3/(16 delta)") {
    for (int t = 0; t < 12; ++t) {
      GeneratorSpec spec;
      spec.n = 4 + (t % 6);
      spec.m = 1;
      spec.delta = std::min(spec.n - 1, 1 + (t % 3));
      Rng grng(mix_seed(9, t));
      const ConflictGraph g = generate_instance(spec, grng).bidder_graph;
      const int delta = std::max(1, g.max_out_degree());
      const PairwiseFamily fam(g.node_count(), delta);
      const auto counts = kept_counts(g, fam);
      for (int i = 0; i < g.node_count(); ++i)
        CHECK(16ull * delta * counts[i] >= 3ull * fam.domain_size());
    }
  }
}

TEST_CASE("lottery reduction expectations") {
  SUBCASE("no conflicts: E[SW] >= q * OPT") {
    const AuctionInstance inst =
        xos_instance(3, 2, {}, {{{2, 0}}, {{0, 3}}, {{1, 1}}});
    const double q = lemma3_probability(inst.bidder_graph);
    const double esw = test::lottery_exact_expectation(inst, LotteryMode::Bidders);
    CHECK(esw >= q * exact_optimum(inst).welfare - 1e-9);
  }
  SUBCASE("mutual conflict pair: closed-form expectation") {
    const AuctionInstance inst = unit_demand_instance(2, {3, 2}, {1.0}, {{0, 1}, {1, 0}});
    // Pr[0 kept] = q(1-q); bidder 1 wins only when kept and 0 is not
    const double q = lemma3_probability(inst.bidder_graph);
    const double expected = 3.0 * q * (1 - q) + 2.0 * (1 - q) * q;
    CHECK(test::lottery_exact_expectation(inst, LotteryMode::Bidders) ==
          doctest::Approx(expected));
  }
  SUBCASE("E[SW] >= OPT/(4 delta) on random instances") {
    for (int t = 0; t < 10; ++t) {
      GeneratorSpec spec;
      spec.n = 4 + (t % 4);
      spec.m = 1 + (t % 2);
      spec.delta = std::min(spec.n - 1, 1 + (t % 3));
      Rng rng(mix_seed(21, t));
      const AuctionInstance inst = generate_instance(spec, rng);
      const int delta = std::max(1, inst.max_out_degree());
      const double esw = test::lottery_exact_expectation(inst, LotteryMode::Bidders);
      CHECK(esw >= exact_optimum(inst).welfare / (4.0 * delta) - 1e-9);
    }
  }
  SUBCASE("sampled run returns a feasible embedded allocation") {
    const AuctionInstance inst =
        xos_instance(4, 2, {{0, 1}, {2, 3}}, {{{2, 0}}, {{0, 3}}, {{1, 1}}, {{2, 2}}});
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      const Allocation a = lottery_reduce(inst, kExact, LotteryMode::Bidders, rng);
      CHECK(a.disjoint());
    }
  }
}

TEST_CASE("item-side lottery") {
  AuctionInstance inst = xos_instance(2, 3, {{0, 1}, {1, 0}},
                                      {{{2, 1, 0}}, {{0, 1, 2}}});
  inst.item_graph = ConflictGraph(3, {{0, 1}, {1, 2}});
  SUBCASE("expectation beats OPT/(4 delta_I)") {
    const int delta_i = inst.item_graph->max_out_degree();
    const double esw = test::lottery_exact_expectation(inst, LotteryMode::Items);
    CHECK(esw >= exact_optimum(inst).welfare / (4.0 * delta_i) - 1e-9);
  }
  SUBCASE("unit-demand valuations are rejected in item mode") {
    AuctionInstance ud = unit_demand_instance(2, {1, 2}, {1.0, 0.5}, {});
    ud.item_graph = ConflictGraph(2, {{0, 1}});
    Rng rng(1);
    CHECK_THROWS_AS(lottery_reduce(ud, kExact, LotteryMode::Items, rng), ModelMismatch);
  }
  SUBCASE("derandomized item range beats (3/16 delta_I) OPT") {
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Items);
    const int delta_i = std::max(1, inst.item_graph->max_out_degree());
    CHECK(out.welfare >=
          3.0 / (16.0 * delta_i) * exact_optimum(inst).welfare - 1e-9);
    CHECK(out.alloc.disjoint());
  }
}

TEST_CASE("derandomized maximal-in-range wrapper") {
  SUBCASE("single bidder wins its optimum") {
    const AuctionInstance inst = xos_instance(1, 2, {}, {{{2, 3}}});
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    CHECK(out.welfare == doctest::Approx(5.0));
    CHECK(out.payments[0] == doctest::Approx(0.0));
  }
  SUBCASE("no conflicts: welfare >= max(q, 3/16) OPT") {
    const AuctionInstance inst = xos_instance(3, 2, {}, {{{2, 0}}, {{0, 3}}, {{1, 1}}});
    const double opt = exact_optimum(inst).welfare;
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    CHECK(out.welfare >= (3.0 / 16.0) * opt - 1e-9);
    CHECK(out.welfare >= lemma3_probability(inst.bidder_graph) * opt - 1e-9);
  }
  SUBCASE("three-bidder path stays within the 16 delta / 3 ratio") {
    const AuctionInstance inst =
        unit_demand_instance(3, {3, 2, 1}, {1.0, 0.6}, {{0, 1}, {1, 2}});
    const double opt = exact_optimum(inst).welfare;
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    const int delta = std::max(1, inst.max_out_degree());
    CHECK(opt / out.welfare <= 16.0 * delta / 3.0 + 1e-9);
  }
  SUBCASE("welfare equals the maximum over the whole restricted range") {
    const AuctionInstance inst =
        unit_demand_instance(4, {4, 3, 2, 1}, {1.0}, {{0, 1}, {1, 0}, {2, 3}});
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    const ConflictGraph& g = inst.bidder_graph;
    const PairwiseFamily fam(g.node_count(), std::max(1, g.max_out_degree()));
    double best = 0.0;
    for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
      const Mask kept = family_draw(g, fam, idx).kept;
      best = std::max(best, exact_optimum(restrict_bidders(inst, kept)).welfare);
    }
    CHECK(out.welfare == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("vcg over the range") {
  SUBCASE("direct formula") {
    const std::vector<double> p = vcg_over_range({5.0, 2.0}, {3.0, 2.0});
    CHECK(p[0] == doctest::Approx(2.0));
    CHECK(p[1] == doctest::Approx(0.0));
  }
  SUBCASE("two conflict-free bidders with disjoint demands pay nothing") {
    const AuctionInstance inst = xos_instance(2, 2, {}, {{{4, 0}}, {{0, 3}}});
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    CHECK(out.payments[0] == doctest::Approx(0.0));
    CHECK(out.payments[1] == doctest::Approx(0.0));
  }
  SUBCASE("mutual conflict over one item: winner pays the displaced value") {
    const AuctionInstance inst = unit_demand_instance(2, {3, 2}, {1.0}, {{0, 1}, {1, 0}});
    const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
    CHECK(out.welfare == doctest::Approx(3.0));
    CHECK(out.payments[0] == doctest::Approx(2.0));
    CHECK(out.payments[1] == doctest::Approx(0.0));
  }
  SUBCASE("payments are nonnegative") {
    Rng rng(61);
    for (int t = 0; t < 5; ++t) {
      GeneratorSpec spec;
      spec.n = 4;
      spec.m = 2;
      spec.delta = 1 + (t % 2);
      Rng grng(mix_seed(61, t));
      const AuctionInstance inst = generate_instance(spec, grng);
      const RangeOutcome out = mir_derandomized(inst, kExact, LotteryMode::Bidders);
      for (double p : out.payments) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("mir with vcg payments is truthful on the deviation grid") {
  for (int t = 0; t < 4; ++t) {
    GeneratorSpec spec;
    spec.n = 3 + (t % 2);
    spec.m = 2;
    spec.delta = 1 + (t % 2);
    Rng rng(mix_seed(71, t));
    const AuctionInstance inst = generate_instance(spec, rng);
    for (int b = 0; b < inst.n; ++b) {
      const TruthfulnessReport rep =
          mir_truthfulness(inst, b, default_bid_grid(), LotteryMode::Bidders);
      CHECK(rep.max_violation <= 1e-9);
    }
  }
}

}  // TEST_SUITE

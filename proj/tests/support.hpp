#pragma once

// Shared test fixtures and independent oracles. Everything here is
// deliberately brute force; the library must never call into it.

#include <map>
#include <vector>

#include "ca/lottery.hpp"
#include "ca/model.hpp"
#include "ca/oracles.hpp"

namespace ca::test {

inline AuctionInstance xos_instance(int n, int m, std::vector<std::pair<int, int>> edges,
                                    std::vector<std::vector<std::vector<double>>> clauses) {
  AuctionInstance inst;
  inst.n = n;
  inst.m = m;
  inst.bidder_graph = ConflictGraph(n, std::move(edges));
  for (auto& c : clauses) inst.valuations.push_back(Valuation::xos(std::move(c)));
  inst.validate();
  return inst;
}

inline AuctionInstance unit_demand_instance(int n, std::vector<double> values,
                                            std::vector<double> ctrs,
                                            std::vector<std::pair<int, int>> edges) {
  AuctionInstance inst;
  inst.n = n;
  inst.m = static_cast<int>(ctrs.size());
  inst.bidder_graph = ConflictGraph(n, std::move(edges));
  inst.slots = SlotMarket(std::move(ctrs));
  for (double v : values) inst.valuations.push_back(Valuation::unit_demand(v));
  inst.validate();
  return inst;
}

// Exhaustive welfare maximum by direct scan over every (n+1)^m assignment,
// tracked independently of exact_optimum's odometer.
inline double brute_force_welfare(const AuctionInstance& inst) {
  double best = 0.0;
  std::vector<int> owner(inst.m, 0);
  const int base = inst.n + 1;
  std::uint64_t total = 1;
  for (int k = 0; k < inst.m; ++k) total *= base;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    Allocation a(inst.n);
    for (int k = 0; k < inst.m; ++k) {
      const int o = static_cast<int>(c % base);
      c /= base;
      if (o > 0) a.assigned[o - 1] |= bit(k);
    }
    best = std::max(best, externality_welfare(inst, a).total);
  }
  return best;
}

// Exact E[welfare of the exact-subsolver lottery] over all 2^n (or 2^m)
// coin patterns of the independent-coins variant.
inline double lottery_exact_expectation(const AuctionInstance& inst, LotteryMode mode,
                                        std::uint64_t budget = 10'000'000) {
  const bool items = (mode == LotteryMode::Items);
  const ConflictGraph& g = items ? *inst.item_graph : inst.bidder_graph;
  const int n = g.node_count();
  const double q = lemma3_probability(g);
  std::map<Mask, double> memo;
  double expectation = 0.0;
  for (Mask sampled = 0; sampled < (Mask{1} << n); ++sampled) {
    double pr = 1.0;
    for (int i = 0; i < n; ++i) pr *= contains(sampled, i) ? q : (1.0 - q);
    const Mask kept = filter_conflicts(g, sampled);
    auto it = memo.find(kept);
    double w;
    if (it != memo.end()) {
      w = it->second;
    } else {
      const AuctionInstance restricted =
          items ? restrict_items(inst, kept) : restrict_bidders(inst, kept);
      w = exact_optimum(restricted, budget).welfare;
      memo.emplace(kept, w);
    }
    expectation += pr * w;
  }
  return expectation;
}

}  // namespace ca::test

#include "ca/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace ca {

DemandResult demand_query(const Valuation& val, const PriceVector& p, const SlotMarket* slots) {
  for (double x : p.prices)
    if (x < 0.0) throw std::invalid_argument("negative price");

  DemandResult best;  // empty set, utility 0
  if (val.kind() == Valuation::Kind::UnitDemand) {
    if (!slots) throw ModelMismatch("unit-demand demand query without a slot market");
    const int m = static_cast<int>(p.prices.size());
    for (int k = 0; k < m && k < slots->slot_count(); ++k) {
      const double u = val.per_click() * slots->ctr(k) - p.prices[k];
      if (u > best.utility) {
        best.utility = u;
        best.bundle = bit(k);
      }
    }
    return best;
  }

  for (const auto& clause : val.clauses()) {
    Mask s = 0;
    double u = 0.0;
    for (std::size_t k = 0; k < clause.size(); ++k) {
      const double gain = clause[k] - p.prices[k];
      if (gain > 0.0) {
        s |= bit(static_cast<int>(k));
        u += gain;
      }
    }
    if (u > best.utility) {
      best.utility = u;
      best.bundle = s;
    }
  }
  return best;
}

DemandResult demand_query_nonempty(const Valuation& val, const PriceVector& p,
                                   const SlotMarket* slots) {
  const int m = static_cast<int>(p.prices.size());
  DemandResult best;
  best.utility = -std::numeric_limits<double>::infinity();
  if (m == 0) return best;

  if (val.kind() == Valuation::Kind::UnitDemand) {
    if (!slots) throw ModelMismatch("unit-demand demand query without a slot market");
    for (int k = 0; k < m; ++k) {
      const double ctr = k < slots->slot_count() ? slots->ctr(k) : 0.0;
      const double u = val.per_click() * ctr - p.prices[k];
      if (u > best.utility) {
        best.utility = u;
        best.bundle = bit(k);
      }
    }
    return best;
  }

  for (const auto& clause : val.clauses()) {
    Mask s = 0;
    double u = 0.0;
    for (std::size_t k = 0; k < clause.size(); ++k) {
      const double gain = clause[k] - p.prices[k];
      if (gain > 0.0) {
        s |= bit(static_cast<int>(k));
        u += gain;
      }
    }
    if (s == 0) {
      // all gains nonpositive: the best nonempty bundle is a single item
      int arg = 0;
      double g = clause.empty() ? -p.prices[0] : clause[0] - p.prices[0];
      for (std::size_t k = 1; k < clause.size(); ++k)
        if (clause[k] - p.prices[k] > g) g = clause[k] - p.prices[k], arg = static_cast<int>(k);
      s = bit(arg);
      u = g;
    }
    if (u > best.utility) {
      best.utility = u;
      best.bundle = s;
    }
  }
  return best;
}

OptimumResult exact_optimum(const AuctionInstance& inst, std::uint64_t budget) {
  double combos = std::pow(static_cast<double>(inst.n) + 1.0, inst.m);
  if (combos > static_cast<double>(budget))
    throw BudgetExceeded("exact_optimum: (n+1)^m exceeds enumeration budget");

  // Owner digit per item: 0 = unassigned, b+1 = bidder b. Counting up from
  // all-zero and replacing only on strict improvement yields the
  // lexicographically smallest maximizer.
  std::vector<int> owner(inst.m, 0);
  OptimumResult best;
  best.alloc = Allocation(inst.n);
  best.welfare = externality_welfare(inst, best.alloc).total;

  Allocation cur(inst.n);
  for (;;) {
    // advance odometer
    int pos = inst.m - 1;
    while (pos >= 0 && owner[pos] == inst.n) {
      owner[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++owner[pos];

    for (auto& s : cur.assigned) s = 0;
    for (int k = 0; k < inst.m; ++k)
      if (owner[k] > 0) cur.assigned[owner[k] - 1] |= bit(k);
    const double w = externality_welfare(inst, cur).total;
    if (w > best.welfare + 1e-12) {
      best.welfare = w;
      best.alloc = cur;
    }
  }
  return best;
}

namespace {

void wis_recurse(const ConflictGraph& g, const std::vector<double>& weights, int v, Mask chosen,
                 Mask banned, double weight, WisResult& best) {
  const int n = g.node_count();
  if (v == n) {
    if (weight > best.weight + 1e-15) {
      best.weight = weight;
      best.vertices = chosen;
    }
    return;
  }
  if (!contains(banned, v))
    wis_recurse(g, weights, v + 1, chosen | bit(v), banned | g.neighbors(v), weight + weights[v],
                best);
  wis_recurse(g, weights, v + 1, chosen, banned, weight, best);
}

}  // namespace

WisResult exact_wis(const ConflictGraph& g, const std::vector<double>& weights) {
  if (g.node_count() > 24) throw BudgetExceeded("exact_wis: more than 24 vertices");
  if (static_cast<int>(weights.size()) != g.node_count())
    throw std::invalid_argument("weight vector size mismatch");
  WisResult best;
  best.weight = 0.0;
  best.vertices = 0;
  wis_recurse(g, weights, 0, 0, 0, 0.0, best);
  return best;
}

const std::vector<double>& default_bid_grid() {
  static const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 4.0};
  return grid;
}

TruthfulnessReport deviation_sweep(int bidder, std::uint64_t coin_seed,
                                   const std::vector<double>& grid,
                                   const std::function<double(double)>& utility_at) {
  TruthfulnessReport report;
  report.bidder = bidder;
  report.coin_seed = coin_seed;
  const double truthful = utility_at(1.0);
  for (double f : grid) {
    DeviationPoint pt;
    pt.bid_factor = f;
    pt.utility_delta = utility_at(f) - truthful;
    report.grid.push_back(pt);
    report.max_violation = std::max(report.max_violation, pt.utility_delta);
  }
  return report;
}

}  // namespace ca

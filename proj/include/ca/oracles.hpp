#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ca/model.hpp"

namespace ca {

struct PriceVector {
  std::vector<double> prices;  // length m, nonnegative
};

struct DemandResult {
  Mask bundle = 0;
  double utility = 0.0;  // >= 0; the empty set is always admissible
};

// Exact demand oracle: a bundle maximizing v(S) - p(S). For XOS this is
// computed clause-wise in O(#clauses * m); for unit-demand it is the best
// single slot (or nothing).
DemandResult demand_query(const Valuation& val, const PriceVector& p, const SlotMarket* slots);

// Same maximization restricted to nonempty bundles; the utility can be
// negative. This is the constraint family of the cone-program dual, whose
// primal has no empty-bundle variable.
DemandResult demand_query_nonempty(const Valuation& val, const PriceVector& p,
                                   const SlotMarket* slots);

struct OptimumResult {
  Allocation alloc;
  double welfare = 0.0;
};

// Brute-force welfare maximizer over all (n+1)^m assignments. Ties break
// toward the lexicographically smallest assignment vector (items in
// order, "unassigned" sorting before bidder 0).
OptimumResult exact_optimum(const AuctionInstance& inst, std::uint64_t budget = 10'000'000);

struct WisResult {
  Mask vertices = 0;
  double weight = 0.0;
};

// Maximum-weight independent set, directed edges treated as undirected
// adjacency. node_count <= 24.
WisResult exact_wis(const ConflictGraph& g, const std::vector<double>& weights);

// One grid point of a deviation sweep.
struct DeviationPoint {
  double bid_factor = 1.0;
  double utility_delta = 0.0;  // utility(deviation) - utility(truthful)
};

struct TruthfulnessReport {
  int bidder = -1;
  std::uint64_t coin_seed = 0;
  std::vector<DeviationPoint> grid;
  double max_violation = 0.0;
};

// Multiplicative deviation grid for scalar-bid mechanisms (XOS deviations
// scale whole clauses by the same factors).
const std::vector<double>& default_bid_grid();

// Runs `utility_at(factor)` across the grid under externally fixed coins;
// factor 1.0 is the truthful bid. `utility_at` must evaluate the bidder's
// quasilinear utility v_i^c(outcome) - payment under the *true* valuation.
TruthfulnessReport deviation_sweep(int bidder, std::uint64_t coin_seed,
                                   const std::vector<double>& grid,
                                   const std::function<double(double)>& utility_at);

}  // namespace ca

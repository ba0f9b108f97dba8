#pragma once

#include <utility>
#include <vector>

#include "ca/lp.hpp"
#include "ca/model.hpp"
#include "ca/rng.hpp"

namespace ca {

// Per-bidder sparse bundle densities (the empty set takes the residual
// probability). Order within a bidder is fixed at construction so the
// inverse-CDF draws are reproducible under a fixed seed.
struct FcraDensities {
  std::vector<std::vector<std::pair<Mask, double>>> per_bidder;

  static FcraDensities from_lp(const LpSolution& sol, int n);
  // x_{i,S} scaled by `factor` for bidders in `keep`, everyone else empty.
  static FcraDensities from_lp_scaled(const LpSolution& sol, int n, Mask keep, double factor);

  int bidders() const { return static_cast<int>(per_bidder.size()); }
  // p_i(k) = sum_{S contains k} x_{i,S}
  double item_mass(int bidder, int item) const;
  double bidder_mass(int bidder) const;
};

// Throws InfeasiblePoint unless the densities are feasible for LPR within
// `tol` (per-bidder mass, per-item mass, nonnegativity).
void check_fcra_feasible(const FcraDensities& d, int m, double tol = 1e-6);

// Ownership distribution of one contended item under fair contention
// resolution: `mass[i]` is p_i(k) over every bidder of the call, and
// `contenders` the set A(k) that sampled the item. Returns one probability
// per set bit of `contenders`, in index order; they sum to 1.
std::vector<double> fcra_ownership(const std::vector<double>& mass, Mask contenders);

// Fair contention resolution: samples S_i from the densities, then awards
// each contended item independently by the ownership distribution above.
// Output bundles are disjoint with T_i subset of S_i; each bidder keeps
// expected value at least (1-1/e) of its fractional share. `sampled_out`
// receives the stage-one draws when non-null.
Allocation fcra_round(const AuctionInstance& inst, const FcraDensities& densities, Rng& rng,
                      std::vector<Mask>* sampled_out = nullptr);

}  // namespace ca

#pragma once

#include <map>
#include <utility>
#include <vector>

#include "ca/model.hpp"

namespace ca {

struct LpColumn {
  int bidder = 0;
  Mask bundle = 0;  // nonempty
  double value = 0.0;
};

// Fractional solution of LPR(B'): sparse densities x_{i,S}, the objective
// L* and the per-bidder contributions L_i.
struct LpSolution {
  std::map<std::pair<int, Mask>, double> x;
  double objective = 0.0;
  std::vector<double> per_bidder;

  // Constraint residuals against (i) sum_S x_{i,S} <= 1 and
  // (ii) sum_{S contains k} sum_i x_{i,S} <= 1.
  double max_violation(int n, int m) const;
};

// Explicit column set: every nonempty bundle of every bidder in `bidders`
// whose value is positive. Requires m <= 12.
std::vector<LpColumn> full_columns(const AuctionInstance& inst, Mask bidders);

// Solve LPR(B') on the explicit column set with a dense primal simplex
// (Bland's rule, deterministic). Column generation via demand oracles is
// not needed at this scale.
LpSolution solve_lpr(const AuctionInstance& inst, Mask bidders);

// Same, on a caller-supplied column set (used when the natural support is
// known, e.g. one singleton bundle per bidder).
LpSolution solve_lpr_columns(const AuctionInstance& inst, std::vector<LpColumn> columns);

}  // namespace ca

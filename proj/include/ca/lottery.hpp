#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ca/model.hpp"
#include "ca/oracles.hpp"
#include "ca/rng.hpp"

namespace ca {

// Pairwise independent distribution over subsets of [n] with inclusion
// probability q = 1/2^(ceil(log2 delta)+1), realized as the affine hash
// family h_{a,b}(x) = a*x + b over GF(2^s) with 2^s >= max(n, 1/q); a
// subset is the preimage of the all-zero low bits. Over a binary field the
// marginals are exactly q and pairs exactly q^2, which the prime-field
// variant of the construction cannot achieve.
class PairwiseFamily {
 public:
  PairwiseFamily(int n, int delta);

  int universe() const { return n_; }
  int delta() const { return delta_; }
  int range_bits() const { return k_; }
  double inclusion_probability() const { return prob_; }

  // |domain| = 2^(2s), in O(n^2).
  std::uint64_t domain_size() const { return std::uint64_t{1} << (2 * field_bits_); }
  Mask subset(std::uint64_t index) const;

 private:
  std::uint32_t gf_mul(std::uint32_t a, std::uint32_t b) const;

  int n_ = 0;
  int delta_ = 0;
  int k_ = 0;           // range = 2^k values, q = 2^-k
  int field_bits_ = 0;  // s
  std::uint32_t poly_ = 0;
  double prob_ = 0.0;
};

// Line 3 of the conflict-free sampling: drop every i whose out-neighbor
// was sampled. The result never keeps an edge in either role.
Mask filter_conflicts(const ConflictGraph& g, Mask sampled);

struct ConflictFreeDraw {
  Mask sampled = 0;  // B^R
  Mask kept = 0;     // B^c
};

// Inclusion probability used by the fully-independent-coins variant.
double lemma3_probability(const ConflictGraph& g);

// Conflict-free random set with independent coins, q = 1/(2*Delta).
ConflictFreeDraw sample_conflict_free(const ConflictGraph& g, Rng& rng);

// Derandomized variant: one member of the hash-family domain.
ConflictFreeDraw family_draw(const ConflictGraph& g, const PairwiseFamily& fam,
                             std::uint64_t index);

using Subsolver = std::function<OptimumResult(const AuctionInstance&)>;

enum class LotteryMode { Bidders, Items };

// Randomized lottery reduction: sample a conflict-free bidder (or item)
// set, restrict, run the conflict-free subsolver, embed the result.
// Item mode requires fractionally sub-additive (XOS) valuations.
Allocation lottery_reduce(const AuctionInstance& inst, const Subsolver& f, LotteryMode mode,
                          Rng& rng);

struct RangeOutcome {
  LotteryMode mode = LotteryMode::Bidders;
  Mask winning_restriction = 0;       // B* or I*
  std::uint64_t winning_index = 0;    // earliest domain index among maximizers
  Allocation alloc;
  double welfare = 0.0;
  std::vector<double> payments;
};

// Maximal-in-range wrapper: iterates the whole hash-family domain, keeps
// the best restriction, prices the outcome with VCG over the induced
// range. The subsolver must itself be maximal-in-range (exact_optimum
// qualifies, with range = all allocations).
RangeOutcome mir_derandomized(const AuctionInstance& inst, const Subsolver& f, LotteryMode mode);

// p_i = max over range of sum_{j != i} v_j  -  sum_{j != i} v_j(chosen).
// `excluded_optima[i]` is the first term, `chosen_others[i]` the second.
std::vector<double> vcg_over_range(const std::vector<double>& excluded_optima,
                                   const std::vector<double>& chosen_others);

// Deviation sweep against the derandomized MIR mechanism with the exact
// subsolver; XOS deviations scale whole clauses by the grid factor.
TruthfulnessReport mir_truthfulness(const AuctionInstance& inst, int bidder,
                                    const std::vector<double>& grid, LotteryMode mode);

}  // namespace ca

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ca/model.hpp"
#include "ca/oracles.hpp"
#include "ca/rng.hpp"

namespace ca {

// The uniform-value greedy cannot fill all slots on graphs where the
// out-degree bound does not control the independence number.
struct GreedyStalled : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unit-demand sponsored-search instance. Bidder order is fixed for the
// run; every rank computation sorts by (value desc, index asc).
struct SsInstance {
  std::vector<double> values;
  SlotMarket slots;
  ConflictGraph bidder_graph;
  std::optional<ConflictGraph> slot_graph;

  int bidders() const { return static_cast<int>(values.size()); }
  int slot_count() const { return slots.slot_count(); }
  AuctionInstance to_auction() const;
};

// Serialized record of all random draws, fixed before bids are read.
struct CoinTranscript {
  std::vector<std::uint8_t> halving;  // per-bidder bit, 1 => B1
  int q = 1;
  std::uint64_t gaussian_seed = 0;  // rounding / class-draw stream
  std::uint64_t perm_seed = 0;      // random-order stream

  static CoinTranscript draw(int bidders, int q_lo, int q_hi, Rng& rng);
};

struct MechanismOutcome {
  Allocation alloc;  // real bidders only, slot masks
  std::vector<double> payments;
  double welfare = 0.0;  // real bidders, dummies excluded
  CoinTranscript coins;
};

// R(Delta) = sqrt(log log Delta / log Delta), clamped to 1 below e^e.
double ss_ratio(int delta);

// Exact binomial tail Pr[t <= m+1] = 1 - 2^-(m+1) * sum_{l <= ceil(m/4)} C(m+1,l).
double threshold_tail(int m);
// Integer-exact check that the tail is at least 3/4.
bool threshold_tail_at_least_three_quarters(int m);

// Intermediate state of the SDP-based auction, exposed so tests can check
// that deviations which keep a bidder's candidate membership leave the
// matching family untouched.
struct SsAuctionState {
  Mask b1 = 0, b2 = 0;
  int q = 1;
  int t_rank = -1;  // -1 encodes infinity
  double v_t = 0.0;
  double reserve = 0.0;
  Mask candidates = 0;          // B^1_1 or B^2_1
  std::vector<Mask> family;     // candidate bidder sets (dummies implicit)
  std::vector<int> matching;    // padded+dummy bidder -> slot, -1 if none
  double matched_value = 0.0;   // selection objective, dummies included
};

// Universally truthful SDP-based auction ("small number of slots"): random
// halving fixes a reserve statistic, branch q=1 enumerates all candidate
// subsets below the threshold rank, branch q=2 runs the WIS approximation
// over the reserve-passing sample, and m reserve dummies price the result.
MechanismOutcome ss_mechanism(const SsInstance& inst, const CoinTranscript& coins,
                              SsAuctionState* state = nullptr);

// Optimal slot assignment for exactly uniform values; requires
// m <= n/(Delta+1). Picks the active bidder of minimum induced out-degree
// and retires its whole neighborhood, so the chosen set is independent in
// both edge directions. Throws GreedyStalled if the actives run out
// (possible on asymmetric graphs; impossible when conflicts are mutual).
Allocation greedy_uniform(const SsInstance& inst);

struct PartialEnumBranch {
  int cls = 1;
  bool used_greedy = false;
  Allocation alloc;
  double proxy_welfare = 0.0;  // uniform proxy value v_max/2^k per bidder
  double true_welfare = 0.0;
};

int partial_enum_classes(int m);  // ceil(log2(2m))

// One class branch, deterministic: bidders above v_max/2^k, greedy when
// the class is large, exhaustive conflict-free matching enumeration
// otherwise (slot conflicts handled there).
PartialEnumBranch partial_enumeration_branch(const SsInstance& inst, int cls, double v_max,
                                             Mask eligible, std::uint64_t budget = 10'000'000);

// Draws the class uniformly at random; E[SW] >= OPT / (4 ceil(log2(2m))).
Allocation partial_enumeration(const SsInstance& inst, Rng& rng);

// Truthful sampling wrapper: q=0 reads the price statistic from a random
// half and runs the partial enumeration on the other half at posted
// prices; q=1 second-prices the best slot.
MechanismOutcome small_supply_mechanism(const SsInstance& inst, const CoinTranscript& coins);

// Deviation sweeps under fixed coins (bid = factor * true value).
TruthfulnessReport ss_truthfulness(const SsInstance& inst, int bidder,
                                   const std::vector<double>& grid, const CoinTranscript& coins,
                                   std::uint64_t coin_seed = 0);
TruthfulnessReport small_supply_truthfulness(const SsInstance& inst, int bidder,
                                             const std::vector<double>& grid,
                                             const CoinTranscript& coins,
                                             std::uint64_t coin_seed = 0);

}  // namespace ca

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ca {

// Error taxonomy shared across the library.
struct ModelMismatch : std::logic_error {
  using std::logic_error::logic_error;
};
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SizeLimit : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InfeasiblePoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sets of bidders/items are bitmasks; everything in this toolkit is desk
// scale (<= 64 nodes per side).
using Mask = std::uint64_t;

inline Mask bit(int i) { return Mask{1} << i; }
inline bool contains(Mask s, int i) { return (s >> i) & 1; }
inline int popcount(Mask s) { return __builtin_popcountll(s); }
inline Mask full_mask(int n) { return n >= 64 ? ~Mask{0} : (Mask{1} << n) - 1; }

// Directed conflict graph. Edge (i,j) destroys i's value whenever j is
// served. Immutable after construction; the maximum out-degree is cached.
class ConflictGraph {
 public:
  ConflictGraph() = default;
  ConflictGraph(int node_count, std::vector<std::pair<int, int>> edges);

  int node_count() const { return node_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int max_out_degree() const { return max_out_degree_; }

  Mask out_neighbors(int i) const { return out_[i]; }
  Mask in_neighbors(int i) const { return in_[i]; }
  // Undirected adjacency, used for independence checks.
  Mask neighbors(int i) const { return out_[i] | in_[i]; }
  bool has_edge(int i, int j) const { return contains(out_[i], j); }

  // True when no edge (either direction) has both endpoints in the set.
  bool independent(Mask set) const;

  ConflictGraph induced(Mask keep) const;

 private:
  int node_count_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<Mask> out_, in_;
  int max_out_degree_ = 0;
};

// Slot click-through rates, sorted descending at construction.
class SlotMarket {
 public:
  SlotMarket() = default;
  explicit SlotMarket(std::vector<double> ctrs);

  int slot_count() const { return static_cast<int>(ctrs_.size()); }
  double ctr(int k) const { return ctrs_[k]; }
  const std::vector<double>& ctrs() const { return ctrs_; }

 private:
  std::vector<double> ctrs_;
};

// XOS (max over additive clauses) or unit-demand-over-slots valuation.
// XOS is the canonical fractionally sub-additive representation here:
// its demand oracle is exactly computable clause by clause.
class Valuation {
 public:
  enum class Kind { Xos, UnitDemand };

  static Valuation xos(std::vector<std::vector<double>> clauses);
  static Valuation unit_demand(double per_click);
  static Valuation zero(int m) { return xos({std::vector<double>(m, 0.0)}); }

  Kind kind() const { return kind_; }
  double per_click() const { return per_click_; }
  const std::vector<std::vector<double>>& clauses() const { return clauses_; }

  // Unit-demand values need the slot CTRs; XOS ignores them.
  double value(Mask bundle, const SlotMarket* slots) const;

  // Clause entries outside `items` are dropped; unit-demand valuations are
  // expanded into their XOS form first (one clause per surviving slot).
  Valuation restrict_items(Mask items, int m, const SlotMarket* slots) const;

  bool is_zero() const;

 private:
  Kind kind_ = Kind::Xos;
  double per_click_ = 0.0;
  std::vector<std::vector<double>> clauses_;
};

// Disjoint bidder -> bundle assignment.
struct Allocation {
  std::vector<Mask> assigned;

  explicit Allocation(int n = 0) : assigned(n, 0) {}
  bool disjoint() const;
  Mask used_items() const;
};

// The universe every algorithm consumes: bidders, items, conflict graph(s)
// and valuations. An absent item graph means the pure bidder-conflict
// model (the paper's complete item digraph), which avoids storing m^2
// edges. conflict_values (the secondary valuations w_i) are only present
// in the conflict-value model and exclude an item graph.
struct AuctionInstance {
  int n = 0;
  int m = 0;
  ConflictGraph bidder_graph;
  std::optional<ConflictGraph> item_graph;
  std::vector<Valuation> valuations;
  std::optional<SlotMarket> slots;
  std::optional<std::vector<Valuation>> conflict_values;

  void validate() const;

  double value(int bidder, Mask bundle) const {
    return valuations[bidder].value(bundle, slots ? &*slots : nullptr);
  }
  double conflict_value(int bidder, Mask bundle) const {
    return (*conflict_values)[bidder].value(bundle, slots ? &*slots : nullptr);
  }
  int max_out_degree() const { return bidder_graph.max_out_degree(); }
};

struct WelfareBreakdown {
  std::vector<double> per_bidder;
  double total = 0.0;
};

// D_i = {k in S_i | exists l in S_j with (i,j) in E and (k,l) in E_I}.
Mask useless_items(const AuctionInstance& inst, const Allocation& alloc, int bidder);

// Externality-adjusted welfare under the instance's active model.
WelfareBreakdown externality_welfare(const AuctionInstance& inst, const Allocation& alloc);

// Plain welfare sum v_i(S_i), ignoring conflicts.
double unconflicted_welfare(const AuctionInstance& inst, const Allocation& alloc);

// Conflict-value -> pure bidder-conflict reduction: one auxiliary bidder
// i_c per bidder with v_{i_c} = w_i and the edge pair (i,i_c),(i_c,i).
// Raises the max out-degree by exactly one and preserves the optimum.
AuctionInstance reduce_conflict_value(const AuctionInstance& inst);

// Zero the valuations outside `bidders` (instance shape is unchanged).
AuctionInstance restrict_bidders(const AuctionInstance& inst, Mask bidders);

// Replace every valuation by S -> v(S & items).
AuctionInstance restrict_items(const AuctionInstance& inst, Mask items);

}  // namespace ca

#include "ca/model.hpp"

#include <algorithm>
#include <cmath>

namespace ca {

// ---------------------------------------------------------------- graph

ConflictGraph::ConflictGraph(int node_count, std::vector<std::pair<int, int>> edges)
    : node_count_(node_count) {
  if (node_count < 0 || node_count > 64)
    throw SizeLimit("ConflictGraph supports at most 64 nodes");
  out_.assign(node_count, 0);
  in_.assign(node_count, 0);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (auto [i, j] : edges) {
    if (i == j) throw std::invalid_argument("self-loop in conflict graph");
    if (i < 0 || j < 0 || i >= node_count || j >= node_count)
      throw std::out_of_range("conflict edge endpoint out of range");
    out_[i] |= bit(j);
    in_[j] |= bit(i);
  }
  edges_ = std::move(edges);
  for (int i = 0; i < node_count; ++i)
    max_out_degree_ = std::max(max_out_degree_, popcount(out_[i]));
}

bool ConflictGraph::independent(Mask set) const {
  for (int i = 0; i < node_count_; ++i)
    if (contains(set, i) && (out_[i] & set)) return false;
  return true;
}

ConflictGraph ConflictGraph::induced(Mask keep) const {
  std::vector<std::pair<int, int>> kept;
  for (auto [i, j] : edges_)
    if (contains(keep, i) && contains(keep, j)) kept.emplace_back(i, j);
  return ConflictGraph(node_count_, std::move(kept));
}

// ---------------------------------------------------------------- slots

SlotMarket::SlotMarket(std::vector<double> ctrs) : ctrs_(std::move(ctrs)) {
  for (double a : ctrs_)
    if (a < 0.0) throw std::invalid_argument("negative click-through rate");
  std::sort(ctrs_.begin(), ctrs_.end(), std::greater<double>());
}

// ------------------------------------------------------------ valuation

Valuation Valuation::xos(std::vector<std::vector<double>> clauses) {
  if (clauses.empty()) throw std::invalid_argument("XOS needs at least one clause");
  const std::size_t m = clauses.front().size();
  for (const auto& c : clauses) {
    if (c.size() != m) throw std::invalid_argument("ragged XOS clause");
    for (double w : c)
      if (w < 0.0) throw std::invalid_argument("negative XOS clause entry");
  }
  Valuation v;
  v.kind_ = Kind::Xos;
  v.clauses_ = std::move(clauses);
  return v;
}

Valuation Valuation::unit_demand(double per_click) {
  if (per_click < 0.0) throw std::invalid_argument("negative per-click value");
  Valuation v;
  v.kind_ = Kind::UnitDemand;
  v.per_click_ = per_click;
  return v;
}

double Valuation::value(Mask bundle, const SlotMarket* slots) const {
  if (kind_ == Kind::UnitDemand) {
    if (!slots) throw ModelMismatch("unit-demand valuation without a slot market");
    double best = 0.0;
    for (int k = 0; k < slots->slot_count(); ++k)
      if (contains(bundle, k)) best = std::max(best, per_click_ * slots->ctr(k));
    return best;
  }
  double best = 0.0;
  for (const auto& clause : clauses_) {
    double s = 0.0;
    for (std::size_t k = 0; k < clause.size(); ++k)
      if (contains(bundle, static_cast<int>(k))) s += clause[k];
    best = std::max(best, s);
  }
  return best;
}

Valuation Valuation::restrict_items(Mask items, int m, const SlotMarket* slots) const {
  if (kind_ == Kind::UnitDemand) {
    // Expand to the equivalent XOS form (one singleton clause per slot).
    if (!slots) throw ModelMismatch("unit-demand valuation without a slot market");
    std::vector<std::vector<double>> clauses;
    for (int k = 0; k < m && k < slots->slot_count(); ++k) {
      if (!contains(items, k)) continue;
      std::vector<double> c(m, 0.0);
      c[k] = per_click_ * slots->ctr(k);
      clauses.push_back(std::move(c));
    }
    if (clauses.empty()) clauses.emplace_back(m, 0.0);
    return xos(std::move(clauses));
  }
  std::vector<std::vector<double>> clauses = clauses_;
  for (auto& c : clauses)
    for (std::size_t k = 0; k < c.size(); ++k)
      if (!contains(items, static_cast<int>(k))) c[k] = 0.0;
  return xos(std::move(clauses));
}

bool Valuation::is_zero() const {
  if (kind_ == Kind::UnitDemand) return per_click_ == 0.0;
  for (const auto& c : clauses_)
    for (double w : c)
      if (w != 0.0) return false;
  return true;
}

// ------------------------------------------------------------ allocation

bool Allocation::disjoint() const {
  Mask seen = 0;
  for (Mask s : assigned) {
    if (seen & s) return false;
    seen |= s;
  }
  return true;
}

Mask Allocation::used_items() const {
  Mask u = 0;
  for (Mask s : assigned) u |= s;
  return u;
}

// -------------------------------------------------------------- instance

void AuctionInstance::validate() const {
  if (n < 0 || n > 64 || m < 0 || m > 64) throw SizeLimit("instance exceeds 64 bidders/items");
  if (static_cast<int>(valuations.size()) != n)
    throw std::invalid_argument("valuations must have length n");
  if (bidder_graph.node_count() != n)
    throw std::invalid_argument("bidder graph size mismatch");
  if (item_graph && item_graph->node_count() != m)
    throw std::invalid_argument("item graph size mismatch");
  if (conflict_values) {
    if (item_graph) throw ModelMismatch("conflict values exclude an item graph");
    if (static_cast<int>(conflict_values->size()) != n)
      throw std::invalid_argument("conflict_values must have length n");
  }
  bool needs_slots = false;
  for (const auto& v : valuations)
    needs_slots |= (v.kind() == Valuation::Kind::UnitDemand);
  if (needs_slots && !slots)
    throw ModelMismatch("unit-demand valuations require ctrs");
}

Mask useless_items(const AuctionInstance& inst, const Allocation& alloc, int bidder) {
  if (!inst.item_graph) throw ModelMismatch("useless_items requires an item graph");
  const ConflictGraph& gi = *inst.item_graph;
  Mask di = 0;
  const Mask own = alloc.assigned[bidder];
  const Mask rivals = inst.bidder_graph.out_neighbors(bidder);
  Mask rival_items = 0;
  for (int j = 0; j < inst.n; ++j)
    if (contains(rivals, j)) rival_items |= alloc.assigned[j];
  for (int k = 0; k < inst.m; ++k)
    if (contains(own, k) && (gi.out_neighbors(k) & rival_items)) di |= bit(k);
  return di;
}

WelfareBreakdown externality_welfare(const AuctionInstance& inst, const Allocation& alloc) {
  WelfareBreakdown out;
  out.per_bidder.assign(inst.n, 0.0);
  for (int i = 0; i < inst.n; ++i) {
    const Mask own = alloc.assigned[i];
    Mask rival_items = 0;
    const Mask rivals = inst.bidder_graph.out_neighbors(i);
    for (int j = 0; j < inst.n; ++j)
      if (contains(rivals, j)) rival_items |= alloc.assigned[j];

    double v;
    if (inst.item_graph) {
      v = inst.value(i, own & ~useless_items(inst, alloc, i));
    } else if (rival_items == 0) {
      v = inst.value(i, own);
    } else {
      v = inst.conflict_values ? inst.conflict_value(i, own) : 0.0;
    }
    out.per_bidder[i] = v;
    out.total += v;
  }
  return out;
}

double unconflicted_welfare(const AuctionInstance& inst, const Allocation& alloc) {
  double t = 0.0;
  for (int i = 0; i < inst.n; ++i) t += inst.value(i, alloc.assigned[i]);
  return t;
}

AuctionInstance reduce_conflict_value(const AuctionInstance& inst) {
  if (!inst.conflict_values) throw ModelMismatch("instance has no conflict values");
  inst.validate();
  if (2 * inst.n > 64) throw SizeLimit("reduction would exceed 64 bidders");

  std::vector<std::pair<int, int>> edges = inst.bidder_graph.edges();
  for (int i = 0; i < inst.n; ++i) {
    edges.emplace_back(i, inst.n + i);
    edges.emplace_back(inst.n + i, i);
  }
  std::vector<Valuation> vals = inst.valuations;
  vals.insert(vals.end(), inst.conflict_values->begin(), inst.conflict_values->end());

  AuctionInstance out;
  out.n = 2 * inst.n;
  out.m = inst.m;
  out.bidder_graph = ConflictGraph(out.n, std::move(edges));
  out.valuations = std::move(vals);
  out.slots = inst.slots;
  return out;
}

AuctionInstance restrict_bidders(const AuctionInstance& inst, Mask bidders) {
  if (bidders & ~full_mask(inst.n)) throw std::out_of_range("bidder restriction out of range");
  AuctionInstance out = inst;
  for (int i = 0; i < inst.n; ++i)
    if (!contains(bidders, i)) out.valuations[i] = Valuation::zero(inst.m);
  return out;
}

AuctionInstance restrict_items(const AuctionInstance& inst, Mask items) {
  if (items & ~full_mask(inst.m)) throw std::out_of_range("item restriction out of range");
  AuctionInstance out = inst;
  const SlotMarket* slots = inst.slots ? &*inst.slots : nullptr;
  for (int i = 0; i < inst.n; ++i)
    out.valuations[i] = inst.valuations[i].restrict_items(items, inst.m, slots);
  if (inst.conflict_values) {
    for (int i = 0; i < inst.n; ++i)
      (*out.conflict_values)[i] = (*inst.conflict_values)[i].restrict_items(items, inst.m, slots);
  }
  return out;
}

}  // namespace ca

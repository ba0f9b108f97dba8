#include "ca/sponsored.hpp"

#include <algorithm>
#include <cmath>

#include "ca/coneprog.hpp"

namespace ca {

AuctionInstance SsInstance::to_auction() const {
  AuctionInstance a;
  a.n = bidders();
  a.m = slot_count();
  a.bidder_graph = bidder_graph;
  a.item_graph = slot_graph;
  a.slots = slots;
  for (double v : values) a.valuations.push_back(Valuation::unit_demand(v));
  a.validate();
  return a;
}

CoinTranscript CoinTranscript::draw(int bidders, int q_lo, int q_hi, Rng& rng) {
  CoinTranscript t;
  t.halving.resize(bidders);
  for (auto& b : t.halving) b = rng.bernoulli(0.5) ? 1 : 0;
  t.q = q_lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(q_hi - q_lo + 1)));
  t.gaussian_seed = rng.next_u64();
  t.perm_seed = rng.next_u64();
  return t;
}

double ss_ratio(int delta) {
  const double d = std::max(1, delta);
  const double ee = std::exp(std::exp(1.0));
  if (d < ee) return 1.0;
  const double ln = std::log(d);
  return std::sqrt(std::log(ln) / ln);
}

double threshold_tail(int m) {
  const int cut = (m + 3) / 4;  // ceil(m/4)
  double sum = 0.0, binom = 1.0;
  for (int l = 0; l <= cut; ++l) {
    sum += binom;
    binom = binom * (m + 1 - l) / (l + 1);
  }
  return 1.0 - std::ldexp(sum, -(m + 1));
}

bool threshold_tail_at_least_three_quarters(int m) {
  if (m > 56) return threshold_tail(m) >= 0.75;
  const int cut = (m + 3) / 4;
  unsigned long long sum = 0, binom = 1;
  for (int l = 0; l <= cut; ++l) {
    sum += binom;
    binom = binom * (m + 1 - l) / (l + 1);
  }
  return (1ULL << (m + 1)) >= 4 * sum;  // tail >= 3/4, integer-exact
}

namespace {

struct PaddedSs {
  int n0 = 0, n = 0, m = 0;
  std::vector<double> values;
  ConflictGraph graph;
  const SsInstance* inst = nullptr;
  std::vector<int> rank_of;     // bidder -> rank, 1-based
  std::vector<int> id_at_rank;  // [1..n]
};

PaddedSs pad(const SsInstance& inst) {
  PaddedSs p;
  p.inst = &inst;
  p.n0 = inst.bidders();
  p.m = inst.slot_count();
  p.n = std::max(p.n0, p.m);
  p.values = inst.values;
  p.values.resize(p.n, 0.0);
  p.graph = ConflictGraph(p.n, inst.bidder_graph.edges());

  std::vector<int> order(p.n);
  for (int i = 0; i < p.n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (p.values[a] != p.values[b]) return p.values[a] > p.values[b];
    return a < b;
  });
  p.rank_of.resize(p.n);
  p.id_at_rank.resize(p.n + 1);
  for (int r = 0; r < p.n; ++r) {
    p.rank_of[order[r]] = r + 1;
    p.id_at_rank[r + 1] = order[r];
  }
  return p;
}

// Candidate-set matching machinery. Ids < n are padded bidders, ids >= n
// are the m reserve dummies (value = reserve, conflict-free).
struct MatchContext {
  const PaddedSs* p;
  double reserve = 0.0;

  double value_of(int id) const { return id < p->n ? p->values[id] : reserve; }

  bool bidders_conflict(int i, int j) const {
    if (i >= p->n || j >= p->n) return false;
    return p->graph.has_edge(i, j) || p->graph.has_edge(j, i);
  }

  // Max counted value over all conflict-free matchings of `members` to
  // slots; ids in `skip` count as zero. Without a slot graph the sorted
  // assignment is optimal; with one, enumerate injective maps.
  double best_value(const std::vector<int>& members, int skip) const {
    if (!p->inst->slot_graph) return sorted_value(members, skip, nullptr);
    return enumerate(members, skip, nullptr);
  }
  double best_matching(const std::vector<int>& members, std::vector<int>* matching) const {
    if (!p->inst->slot_graph) return sorted_value(members, -1, matching);
    return enumerate(members, -1, matching);
  }

 private:
  double sorted_value(const std::vector<int>& members, int skip, std::vector<int>* match) const {
    std::vector<int> ids = members;
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      const double va = a == skip ? 0.0 : value_of(a);
      const double vb = b == skip ? 0.0 : value_of(b);
      if (va != vb) return va > vb;
      return a < b;
    });
    double total = 0.0;
    const auto& slots = p->inst->slots;
    for (int k = 0; k < p->m && k < static_cast<int>(ids.size()); ++k) {
      const double v = ids[k] == skip ? 0.0 : value_of(ids[k]);
      if (v <= 0.0) break;
      total += v * slots.ctr(k);
      if (match) (*match)[ids[k]] = k;
    }
    return total;
  }

  double enumerate(const std::vector<int>& members, int skip, std::vector<int>* match) const {
    double combos = std::pow(static_cast<double>(members.size()) + 1.0, p->m);
    if (combos > 2e6) throw BudgetExceeded("slot-conflict matching enumeration too large");
    std::vector<int> cur(p->m, -1), best_assign(p->m, -1);
    double best = 0.0;
    enumerate_rec(members, skip, 0, 0, 0.0, cur, best, best_assign);
    if (match)
      for (int k = 0; k < p->m; ++k)
        if (best_assign[k] >= 0) (*match)[best_assign[k]] = k;
    return best;
  }

  bool slot_conflict(int i, int k, int j, int l) const {
    const ConflictGraph& gi = *p->inst->slot_graph;
    if (i < p->n && j < p->n && p->graph.has_edge(i, j) && gi.has_edge(k, l)) return true;
    if (i < p->n && j < p->n && p->graph.has_edge(j, i) && gi.has_edge(l, k)) return true;
    return false;
  }

  void enumerate_rec(const std::vector<int>& members, int skip, int slot, Mask used,
                     double value, std::vector<int>& cur, double& best,
                     std::vector<int>& best_assign) const {
    if (slot == p->m) {
      if (value > best + 1e-12) {
        best = value;
        best_assign = cur;
      }
      return;
    }
    cur[slot] = -1;
    enumerate_rec(members, skip, slot + 1, used, value, cur, best, best_assign);
    for (std::size_t idx = 0; idx < members.size(); ++idx) {
      if (contains(used, static_cast<int>(idx))) continue;
      const int i = members[idx];
      bool ok = true;
      for (int l = 0; l < slot && ok; ++l)
        if (cur[l] >= 0) ok = !slot_conflict(i, slot, cur[l], l);
      if (!ok) continue;
      cur[slot] = i;
      enumerate_rec(members, skip, slot + 1, used | bit(static_cast<int>(idx)),
                    value + (i == skip ? 0.0 : value_of(i)) * p->inst->slots.ctr(slot), cur,
                    best, best_assign);
      cur[slot] = -1;
    }
  }
};

Mask wis_candidate_set(const PaddedSs& p, Mask members_mask, const CoinTranscript& coins) {
  std::vector<int> members;
  for (int i = 0; i < p.n; ++i)
    if (contains(members_mask, i)) members.push_back(i);
  if (members.empty()) return 0;

  Rng prng(coins.perm_seed);
  std::vector<int> perm = members;
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[prng.next_below(i + 1)]);

  std::vector<std::pair<int, int>> edges;
  for (std::size_t a = 0; a < perm.size(); ++a)
    for (std::size_t b = 0; b < perm.size(); ++b)
      if (a != b && p.graph.has_edge(perm[a], perm[b]))
        edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  ConflictGraph sub(static_cast<int>(perm.size()), std::move(edges));

  Rng wrng(coins.gaussian_seed);
  const WisResult res = wis_approx(sub, std::vector<double>(perm.size(), 1.0), wrng);
  Mask out = 0;
  for (std::size_t a = 0; a < perm.size(); ++a)
    if (contains(res.vertices, static_cast<int>(a))) out |= bit(perm[a]);
  return out;
}

}  // namespace

MechanismOutcome ss_mechanism(const SsInstance& inst, const CoinTranscript& coins,
                              SsAuctionState* state) {
  if (inst.slot_count() < 1) throw std::invalid_argument("sponsored search needs slots");
  const PaddedSs p = pad(inst);
  if (static_cast<int>(coins.halving.size()) != p.n)
    throw std::invalid_argument("halving transcript must cover padded bidders");
  if (coins.q != 1 && coins.q != 2) throw std::invalid_argument("q must be 1 or 2");

  SsAuctionState st;
  st.q = coins.q;
  for (int i = 0; i < p.n; ++i)
    if (coins.halving[i]) st.b1 |= bit(i);
  st.b2 = full_mask(p.n) & ~st.b1;

  // Threshold statistic from the sample: the (ceil(m/4)+1)-th best rank
  // within B2, infinity when the sample is too small.
  const int need = (p.m + 3) / 4 + 1;
  if (popcount(st.b2) >= need) {
    int seen = 0;
    for (int r = 1; r <= p.n; ++r) {
      if (contains(st.b2, p.id_at_rank[r]) && ++seen == need) {
        st.t_rank = r;
        st.v_t = p.values[p.id_at_rank[r]];
        break;
      }
    }
  }

  const int delta = p.graph.max_out_degree();
  if (coins.q == 1) {
    st.reserve = st.v_t;
    for (int i = 0; i < p.n; ++i)
      if (contains(st.b1, i) && (st.t_rank < 0 || p.rank_of[i] < st.t_rank))
        st.candidates |= bit(i);
    if (st.t_rank >= 0 && st.t_rank <= p.m + 1) {
      // All subsets of B^1_1; without slot conflicts only the independent
      // ones can carry a conflict-free matching, so the rest are skipped.
      Mask c = st.candidates;
      std::vector<int> members;
      for (int i = 0; i < p.n; ++i)
        if (contains(c, i)) members.push_back(i);
      const int cnt = static_cast<int>(members.size());
      for (Mask sub = 0; sub < (Mask{1} << cnt); ++sub) {
        Mask ids = 0;
        for (int a = 0; a < cnt; ++a)
          if (contains(sub, a)) ids |= bit(members[a]);
        if (!inst.slot_graph && !p.graph.independent(ids)) continue;
        st.family.push_back(ids);
      }
    }
  } else {
    st.reserve = st.v_t * ss_ratio(delta) / 8.0;
    for (int i = 0; i < p.n; ++i)
      if (contains(st.b1, i) && p.values[i] >= st.reserve) st.candidates |= bit(i);
    st.family.push_back(wis_candidate_set(p, st.candidates, coins));
  }

  MatchContext ctx{&p, st.reserve};
  st.matching.assign(p.n + p.m, -1);

  // Select M' and price every real bidder against the whole family.
  std::vector<int> best_members;
  double best_value = -1.0;
  for (Mask ids : st.family) {
    std::vector<int> members;
    for (int i = 0; i < p.n; ++i)
      if (contains(ids, i)) members.push_back(i);
    for (int d = 0; d < p.m; ++d) members.push_back(p.n + d);  // reserve dummies
    const double val = ctx.best_value(members, -1);
    if (val > best_value + 1e-12) {
      best_value = val;
      best_members = members;
    }
  }

  MechanismOutcome out;
  out.coins = coins;
  out.alloc = Allocation(p.n0);
  out.payments.assign(p.n0, 0.0);

  if (!st.family.empty()) {
    st.matched_value = ctx.best_matching(best_members, &st.matching);
    for (int a = 0; a < p.n0; ++a) {
      double excl_best = 0.0;
      for (Mask ids : st.family) {
        std::vector<int> members;
        for (int i = 0; i < p.n; ++i)
          if (contains(ids, i)) members.push_back(i);
        for (int d = 0; d < p.m; ++d) members.push_back(p.n + d);
        excl_best = std::max(excl_best, ctx.best_value(members, a));
      }
      double chosen_others = st.matched_value;
      if (st.matching[a] >= 0) chosen_others -= p.values[a] * inst.slots.ctr(st.matching[a]);
      out.payments[a] = std::max(0.0, excl_best - chosen_others);
    }
    for (int a = 0; a < p.n0; ++a) {
      if (st.matching[a] >= 0) {
        out.alloc.assigned[a] = bit(st.matching[a]);
        out.welfare += p.values[a] * inst.slots.ctr(st.matching[a]);
      }
    }
  }

  if (state) *state = std::move(st);
  return out;
}

namespace {

// Min-induced-out-degree greedy; retiring the full neighborhood keeps the
// chosen set independent in both directions.
std::vector<int> greedy_core(const ConflictGraph& g, Mask active, int want) {
  std::vector<int> chosen;
  for (int step = 0; step < want; ++step) {
    int pick = -1, best_deg = -1;
    for (int i = 0; i < g.node_count(); ++i) {
      if (!contains(active, i)) continue;
      const int deg = popcount(g.out_neighbors(i) & active);
      if (pick < 0 || deg < best_deg) {
        pick = i;
        best_deg = deg;
      }
    }
    if (pick < 0) throw GreedyStalled("active bidders exhausted before all slots assigned");
    chosen.push_back(pick);
    active &= ~(bit(pick) | g.neighbors(pick));
  }
  return chosen;
}

}  // namespace

Allocation greedy_uniform(const SsInstance& inst) {
  const int n = inst.bidders(), m = inst.slot_count();
  for (double v : inst.values)
    if (v != inst.values[0])
      throw std::invalid_argument("greedy_uniform requires exactly uniform values");
  const int delta = inst.bidder_graph.max_out_degree();
  if (static_cast<long long>(m) * (delta + 1) > n)
    throw std::invalid_argument("greedy_uniform requires m <= n/(Delta+1)");

  const std::vector<int> chosen = greedy_core(inst.bidder_graph, full_mask(n), m);
  Allocation alloc(n);
  for (int k = 0; k < m; ++k) alloc.assigned[chosen[k]] = bit(k);
  return alloc;
}

int partial_enum_classes(int m) {
  int k = 0;
  while ((1 << k) < 2 * m) ++k;
  return k;
}

namespace {

struct EnumState {
  const SsInstance* inst;
  const std::vector<int>* members;
  int m;
  std::vector<int> cur, best_assign;
  double best = -1.0;

  bool conflict(int i, int k, int j, int l) const {
    const ConflictGraph& g = inst->bidder_graph;
    if (!inst->slot_graph) return g.has_edge(i, j) || g.has_edge(j, i);
    return (g.has_edge(i, j) && inst->slot_graph->has_edge(k, l)) ||
           (g.has_edge(j, i) && inst->slot_graph->has_edge(l, k));
  }

  // Maximize the number of alpha-weighted filled slots; values play no
  // role so the branch stays bid-independent.
  void rec(int slot, Mask used, double proxy) {
    if (slot == m) {
      if (proxy > best + 1e-12) {
        best = proxy;
        best_assign = cur;
      }
      return;
    }
    cur[slot] = -1;
    rec(slot + 1, used, proxy);
    for (std::size_t idx = 0; idx < members->size(); ++idx) {
      if (contains(used, static_cast<int>(idx))) continue;
      const int i = (*members)[idx];
      bool ok = true;
      for (int l = 0; l < slot && ok; ++l)
        if (cur[l] >= 0) ok = !conflict(i, slot, cur[l], l);
      if (!ok) continue;
      cur[slot] = i;
      rec(slot + 1, used | bit(static_cast<int>(idx)), proxy + inst->slots.ctr(slot));
      cur[slot] = -1;
    }
  }
};

}  // namespace

PartialEnumBranch partial_enumeration_branch(const SsInstance& inst, int cls, double v_max,
                                             Mask eligible, std::uint64_t budget) {
  const int n = inst.bidders(), m = inst.slot_count();
  PartialEnumBranch out;
  out.cls = cls;
  out.alloc = Allocation(n);

  const double threshold = v_max / std::ldexp(1.0, cls);
  std::vector<int> members;
  for (int i = 0; i < n; ++i)
    if (contains(eligible, i) && inst.values[i] > threshold) members.push_back(i);
  const int nk = static_cast<int>(members.size());
  const int delta = inst.bidder_graph.max_out_degree();

  std::vector<int> assign(m, -1);
  bool greedy_ok = false;
  if (static_cast<long long>(nk) >= static_cast<long long>(m) * (delta + 1)) {
    Mask active = 0;
    for (int i : members) active |= bit(i);
    try {
      const std::vector<int> chosen = greedy_core(inst.bidder_graph, active, m);
      for (int k = 0; k < m; ++k) assign[k] = chosen[k];
      greedy_ok = true;
    } catch (const GreedyStalled&) {
      greedy_ok = false;  // fall through to enumeration
    }
  }
  if (!greedy_ok) {
    if (std::pow(static_cast<double>(nk) + 1.0, m) > static_cast<double>(budget))
      throw BudgetExceeded("partial enumeration branch exceeds budget");
    EnumState es;
    es.inst = &inst;
    es.members = &members;
    es.m = m;
    es.cur.assign(m, -1);
    es.best_assign.assign(m, -1);
    es.rec(0, 0, 0.0);
    assign = es.best_assign;
  }

  out.used_greedy = greedy_ok;
  const double proxy = v_max / std::ldexp(1.0, cls);
  for (int k = 0; k < m; ++k) {
    if (assign[k] < 0) continue;
    out.alloc.assigned[assign[k]] = bit(k);
    out.proxy_welfare += proxy * inst.slots.ctr(k);
    out.true_welfare += inst.values[assign[k]] * inst.slots.ctr(k);
  }
  return out;
}

Allocation partial_enumeration(const SsInstance& inst, Rng& rng) {
  const int n = inst.bidders();
  double v_max = 0.0;
  for (double v : inst.values) v_max = std::max(v_max, v);
  if (v_max <= 0.0) return Allocation(n);
  const int classes = partial_enum_classes(inst.slot_count());
  const int cls = 1 + static_cast<int>(rng.next_below(classes));
  return partial_enumeration_branch(inst, cls, v_max, full_mask(n)).alloc;
}

MechanismOutcome small_supply_mechanism(const SsInstance& inst, const CoinTranscript& coins) {
  const int n = inst.bidders(), m = inst.slot_count();
  if (m < 1) throw std::invalid_argument("small supply mechanism needs a slot");
  if (static_cast<int>(coins.halving.size()) != n)
    throw std::invalid_argument("halving transcript must cover all bidders");
  if (coins.q != 0 && coins.q != 1) throw std::invalid_argument("q must be 0 or 1");

  MechanismOutcome out;
  out.coins = coins;
  out.alloc = Allocation(n);
  out.payments.assign(n, 0.0);

  if (coins.q == 1) {
    // Keep the best slot, second-price it among everyone.
    int winner = 0;
    for (int i = 1; i < n; ++i)
      if (inst.values[i] > inst.values[winner]) winner = i;
    double second = 0.0;
    for (int i = 0; i < n; ++i)
      if (i != winner) second = std::max(second, inst.values[i]);
    out.alloc.assigned[winner] = bit(0);
    out.payments[winner] = second * inst.slots.ctr(0);
    out.welfare = inst.values[winner] * inst.slots.ctr(0);
    return out;
  }

  Mask b1 = 0;
  for (int i = 0; i < n; ++i)
    if (coins.halving[i]) b1 |= bit(i);
  const Mask b2 = full_mask(n) & ~b1;

  double v_max = 0.0;
  for (int i = 0; i < n; ++i)
    if (contains(b1, i)) v_max = std::max(v_max, inst.values[i]);

  const int classes = partial_enum_classes(m);
  Rng krng(coins.gaussian_seed);
  const int cls = 1 + static_cast<int>(krng.next_below(classes));

  const PartialEnumBranch branch = partial_enumeration_branch(inst, cls, v_max, b2);
  const double posted = v_max / std::ldexp(1.0, cls);
  out.alloc = branch.alloc;
  out.welfare = branch.true_welfare;
  for (int i = 0; i < n; ++i) {
    if (out.alloc.assigned[i]) {
      for (int k = 0; k < m; ++k)
        if (contains(out.alloc.assigned[i], k)) out.payments[i] = posted * inst.slots.ctr(k);
    }
  }
  return out;
}

namespace {

double ss_slot_value(const SsInstance& inst, int bidder, Mask slot_mask) {
  double best = 0.0;
  for (int k = 0; k < inst.slot_count(); ++k)
    if (contains(slot_mask, k)) best = std::max(best, inst.values[bidder] * inst.slots.ctr(k));
  return best;
}

}  // namespace

TruthfulnessReport ss_truthfulness(const SsInstance& inst, int bidder,
                                   const std::vector<double>& grid, const CoinTranscript& coins,
                                   std::uint64_t coin_seed) {
  auto utility = [&](double factor) {
    SsInstance dev = inst;
    dev.values[bidder] = factor * inst.values[bidder];
    const MechanismOutcome res = ss_mechanism(dev, coins);
    return ss_slot_value(inst, bidder, res.alloc.assigned[bidder]) - res.payments[bidder];
  };
  return deviation_sweep(bidder, coin_seed, grid, utility);
}

TruthfulnessReport small_supply_truthfulness(const SsInstance& inst, int bidder,
                                             const std::vector<double>& grid,
                                             const CoinTranscript& coins,
                                             std::uint64_t coin_seed) {
  auto utility = [&](double factor) {
    SsInstance dev = inst;
    dev.values[bidder] = factor * inst.values[bidder];
    const MechanismOutcome res = small_supply_mechanism(dev, coins);
    return ss_slot_value(inst, bidder, res.alloc.assigned[bidder]) - res.payments[bidder];
  };
  return deviation_sweep(bidder, coin_seed, grid, utility);
}

}  // namespace ca

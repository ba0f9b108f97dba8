#include "ca/lottery.hpp"

#include <algorithm>
#include <map>

namespace ca {

namespace {

// GF(2)[x] trial division; polynomials as bit patterns, bit d = x^d.
int poly_degree(std::uint64_t p) { return 63 - __builtin_clzll(p); }

std::uint64_t poly_mod(std::uint64_t a, std::uint64_t mod) {
  const int dm = poly_degree(mod);
  while (a && poly_degree(a) >= dm) a ^= mod << (poly_degree(a) - dm);
  return a;
}

bool irreducible(std::uint64_t p, int deg) {
  for (int d = 1; 2 * d <= deg; ++d)
    for (std::uint64_t q = std::uint64_t{1} << d; q < (std::uint64_t{2} << d); ++q)
      if (poly_mod(p, q) == 0) return false;
  return true;
}

std::uint32_t smallest_irreducible(int deg) {
  for (std::uint64_t p = (std::uint64_t{1} << deg) | 1;; p += 2)
    if (irreducible(p, deg)) return static_cast<std::uint32_t>(p);
}

int ceil_log2(int x) {
  int k = 0;
  while ((1 << k) < x) ++k;
  return k;
}

}  // namespace

PairwiseFamily::PairwiseFamily(int n, int delta) : n_(n), delta_(delta) {
  if (delta < 1 || delta > n) throw std::invalid_argument("pairwise family needs 1 <= delta <= n");
  k_ = ceil_log2(delta) + 1;
  field_bits_ = std::max(k_, ceil_log2(n));
  if (field_bits_ < 1) field_bits_ = 1;
  poly_ = smallest_irreducible(field_bits_);
  prob_ = std::ldexp(1.0, -k_);
}

std::uint32_t PairwiseFamily::gf_mul(std::uint32_t a, std::uint32_t b) const {
  std::uint32_t r = 0;
  const std::uint32_t top = std::uint32_t{1} << field_bits_;
  while (b) {
    if (b & 1) r ^= a;
    b >>= 1;
    a <<= 1;
    if (a & top) a ^= poly_;
  }
  return r;
}

Mask PairwiseFamily::subset(std::uint64_t index) const {
  if (index >= domain_size()) throw std::out_of_range("family index out of domain");
  const std::uint32_t field = (std::uint32_t{1} << field_bits_) - 1;
  const std::uint32_t a = static_cast<std::uint32_t>(index >> field_bits_) & field;
  const std::uint32_t b = static_cast<std::uint32_t>(index) & field;
  const std::uint32_t low = (std::uint32_t{1} << k_) - 1;
  Mask s = 0;
  for (int i = 0; i < n_; ++i)
    if (((gf_mul(a, static_cast<std::uint32_t>(i)) ^ b) & low) == 0) s |= bit(i);
  return s;
}

Mask filter_conflicts(const ConflictGraph& g, Mask sampled) {
  Mask kept = sampled;
  for (int i = 0; i < g.node_count(); ++i)
    if (contains(sampled, i) && (g.out_neighbors(i) & sampled)) kept &= ~bit(i);
  return kept;
}

double lemma3_probability(const ConflictGraph& g) {
  return 1.0 / (2.0 * std::max(1, g.max_out_degree()));
}

ConflictFreeDraw sample_conflict_free(const ConflictGraph& g, Rng& rng) {
  const double q = lemma3_probability(g);
  ConflictFreeDraw draw;
  for (int i = 0; i < g.node_count(); ++i)
    if (rng.bernoulli(q)) draw.sampled |= bit(i);
  draw.kept = filter_conflicts(g, draw.sampled);
  return draw;
}

ConflictFreeDraw family_draw(const ConflictGraph& g, const PairwiseFamily& fam,
                             std::uint64_t index) {
  ConflictFreeDraw draw;
  draw.sampled = fam.subset(index);
  draw.kept = filter_conflicts(g, draw.sampled);
  return draw;
}

namespace {

void require_xos(const AuctionInstance& inst) {
  for (const auto& v : inst.valuations)
    if (v.kind() != Valuation::Kind::Xos)
      throw ModelMismatch("item-side lottery requires XOS valuations");
}

const ConflictGraph& item_graph_of(const AuctionInstance& inst) {
  if (!inst.item_graph)
    throw ModelMismatch("item-side lottery requires an explicit item graph");
  return *inst.item_graph;
}

}  // namespace

Allocation lottery_reduce(const AuctionInstance& inst, const Subsolver& f, LotteryMode mode,
                          Rng& rng) {
  if (mode == LotteryMode::Bidders) {
    const ConflictFreeDraw draw = sample_conflict_free(inst.bidder_graph, rng);
    OptimumResult res = f(restrict_bidders(inst, draw.kept));
    for (int i = 0; i < inst.n; ++i)
      if (!contains(draw.kept, i)) res.alloc.assigned[i] = 0;
    return res.alloc;
  }
  require_xos(inst);
  const ConflictFreeDraw draw = sample_conflict_free(item_graph_of(inst), rng);
  OptimumResult res = f(restrict_items(inst, draw.kept));
  for (auto& s : res.alloc.assigned) s &= draw.kept;
  return res.alloc;
}

RangeOutcome mir_derandomized(const AuctionInstance& inst, const Subsolver& f, LotteryMode mode) {
  const bool items = (mode == LotteryMode::Items);
  if (items) require_xos(inst);
  const ConflictGraph& g = items ? item_graph_of(inst) : inst.bidder_graph;
  const int delta = std::max(1, g.max_out_degree());
  const PairwiseFamily fam(g.node_count(), std::min(delta, g.node_count()));

  // Memoized subsolver over (bidder restriction, item restriction); the
  // VCG pricing below revisits each domain member once per bidder.
  std::map<std::pair<Mask, Mask>, OptimumResult> memo;
  const Mask all_bidders = full_mask(inst.n);
  auto solve = [&](Mask bidders, Mask item_set) -> const OptimumResult& {
    auto key = std::make_pair(bidders, item_set);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    AuctionInstance restricted =
        items ? restrict_bidders(restrict_items(inst, item_set), bidders)
              : restrict_bidders(inst, bidders);
    OptimumResult res = f(restricted);
    if (items)
      for (auto& s : res.alloc.assigned) s &= item_set;
    for (int i = 0; i < inst.n; ++i)
      if (!contains(bidders, i)) res.alloc.assigned[i] = 0;
    return memo.emplace(key, std::move(res)).first->second;
  };

  auto restriction_of = [&](std::uint64_t idx) {
    return family_draw(g, fam, idx).kept;
  };

  RangeOutcome out;
  out.mode = mode;
  out.welfare = -1.0;
  for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
    const Mask r = restriction_of(idx);
    const OptimumResult& res =
        items ? solve(all_bidders, r) : solve(r, full_mask(inst.m));
    if (res.welfare > out.welfare + 1e-12) {
      out.welfare = res.welfare;
      out.alloc = res.alloc;
      out.winning_restriction = r;
      out.winning_index = idx;
    }
  }

  // VCG over the range A'_D: the range maximum with bidder a removed is a
  // fresh domain sweep with a's valuation zeroed, which for restrictions
  // commutes with dropping a from the bidder set.
  std::vector<double> excluded(inst.n, 0.0), chosen_others(inst.n, 0.0);
  const WelfareBreakdown chosen = externality_welfare(inst, out.alloc);
  for (int a = 0; a < inst.n; ++a) {
    double best = 0.0;
    for (std::uint64_t idx = 0; idx < fam.domain_size(); ++idx) {
      const Mask r = restriction_of(idx);
      const OptimumResult& res =
          items ? solve(all_bidders & ~bit(a), r) : solve(r & ~bit(a), full_mask(inst.m));
      best = std::max(best, res.welfare);
    }
    excluded[a] = best;
    chosen_others[a] = chosen.total - chosen.per_bidder[a];
  }
  out.payments = vcg_over_range(excluded, chosen_others);
  return out;
}

std::vector<double> vcg_over_range(const std::vector<double>& excluded_optima,
                                   const std::vector<double>& chosen_others) {
  std::vector<double> p(excluded_optima.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::max(0.0, excluded_optima[i] - chosen_others[i]);
  return p;
}

namespace {

Valuation scale_valuation(const Valuation& v, double factor) {
  if (v.kind() == Valuation::Kind::UnitDemand)
    return Valuation::unit_demand(v.per_click() * factor);
  std::vector<std::vector<double>> clauses = v.clauses();
  for (auto& clause : clauses)
    for (double& w : clause) w *= factor;
  return Valuation::xos(std::move(clauses));
}

}  // namespace

TruthfulnessReport mir_truthfulness(const AuctionInstance& inst, int bidder,
                                    const std::vector<double>& grid, LotteryMode mode) {
  const Subsolver exact = [](const AuctionInstance& sub) { return exact_optimum(sub); };
  auto utility = [&](double factor) {
    AuctionInstance dev = inst;
    dev.valuations[bidder] = scale_valuation(inst.valuations[bidder], factor);
    const RangeOutcome out = mir_derandomized(dev, exact, mode);
    return inst.value(bidder, out.alloc.assigned[bidder]) - out.payments[bidder];
  };
  return deviation_sweep(bidder, 0, grid, utility);
}

}  // namespace ca

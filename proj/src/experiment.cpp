#include "ca/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "ca/coneprog.hpp"
#include "ca/lottery.hpp"
#include "ca/oracles.hpp"
#include "ca/sponsored.hpp"

namespace ca {

using nlohmann::json;

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (!j.contains("seed")) throw std::invalid_argument("config requires a seed");
  c.seed = j["seed"].get<std::uint64_t>();
  c.instances = j.value("instances", 1);
  c.trials = j.value("trials", 1);
  if (c.trials < 1) throw std::invalid_argument("trial count must be >= 1");
  c.record_runtime = j.value("record_runtime", false);
  c.optimum_budget = j.value("optimum_budget", std::uint64_t{10'000'000});
  c.out = j.value("out", std::string("results"));
  c.mechanisms = j.value("mechanisms", std::vector<std::string>{"exact"});
  if (j.contains("generator")) {
    const json& g = j["generator"];
    c.gen.n = g.value("n", 6);
    c.gen.m = g.value("m", 2);
    c.gen.delta = g.value("delta", 1);
    if (g.contains("delta_items") && !g["delta_items"].is_null())
      c.gen.delta_items = g["delta_items"].get<int>();
    c.gen.symmetric = g.value("symmetric", false);
    c.gen.family = g.value("family", std::string("xos"));
    c.gen.clauses = g.value("clauses", 2);
    c.gen.value_low = g.value("value_low", 0.0);
    c.gen.value_high = g.value("value_high", 1.0);
    c.gen.with_conflict_values = g.value("conflict_values", false);
  }
  return c;
}

namespace {

ConflictGraph random_digraph(int n, int delta, bool symmetric, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  if (n <= 1 || delta <= 0) return ConflictGraph(n, edges);
  if (symmetric) {
    std::vector<int> degree(n, 0);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    for (std::size_t i = pairs.size() - 1; i > 0; --i)
      std::swap(pairs[i], pairs[rng.next_below(i + 1)]);
    for (auto [i, j] : pairs) {
      if (degree[i] >= delta || degree[j] >= delta) continue;
      if (!rng.bernoulli(0.5)) continue;
      edges.emplace_back(i, j);
      edges.emplace_back(j, i);
      ++degree[i];
      ++degree[j];
    }
    return ConflictGraph(n, std::move(edges));
  }
  for (int i = 0; i < n; ++i) {
    const int d = static_cast<int>(rng.next_below(std::min(delta, n - 1) + 1));
    std::vector<int> others;
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    for (int pick = 0; pick < d; ++pick) {
      const std::size_t at = rng.next_below(others.size());
      edges.emplace_back(i, others[at]);
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(at));
    }
  }
  return ConflictGraph(n, std::move(edges));
}

Valuation random_xos(int m, int max_clauses, double lo, double hi, Rng& rng) {
  const int k = 1 + static_cast<int>(rng.next_below(std::max(1, max_clauses)));
  std::vector<std::vector<double>> clauses(k, std::vector<double>(m, 0.0));
  for (auto& clause : clauses)
    for (double& w : clause)
      if (!rng.bernoulli(1.0 / 3.0)) w = rng.uniform(lo, hi);
  return Valuation::xos(std::move(clauses));
}

}  // namespace

AuctionInstance generate_instance(const GeneratorSpec& spec, Rng& rng) {
  if (spec.delta >= spec.n && spec.n > 1)
    throw std::invalid_argument("generator requires delta < n");
  AuctionInstance inst;
  inst.n = spec.n;
  inst.m = spec.m;
  inst.bidder_graph = random_digraph(spec.n, spec.delta, spec.symmetric, rng);
  if (spec.delta_items)
    inst.item_graph = random_digraph(spec.m, *spec.delta_items, spec.symmetric, rng);

  if (spec.family == "unit_demand") {
    std::vector<double> ctrs(spec.m);
    for (double& a : ctrs) a = rng.next_double();
    inst.slots = SlotMarket(std::move(ctrs));
    for (int i = 0; i < spec.n; ++i)
      inst.valuations.push_back(
          Valuation::unit_demand(rng.uniform(spec.value_low, spec.value_high)));
  } else if (spec.family == "xos") {
    for (int i = 0; i < spec.n; ++i)
      inst.valuations.push_back(
          random_xos(spec.m, spec.clauses, spec.value_low, spec.value_high, rng));
  } else {
    throw std::invalid_argument("unknown valuation family: " + spec.family);
  }

  if (spec.with_conflict_values) {
    if (inst.item_graph) throw std::invalid_argument("conflict values exclude an item graph");
    // Conflict values are a scaled-down copy of the base valuation, and
    // only bidders without in-edges carry a positive one. The auxiliary
    // bidder of the reduction collects w_i while leaving i's in-neighbors
    // unconflicted, so outside this family the reduced instance can
    // strictly beat the original optimum.
    std::vector<Valuation> w;
    for (int i = 0; i < spec.n; ++i) {
      const double lambda =
          inst.bidder_graph.in_neighbors(i) == 0 ? rng.uniform(0.0, 0.9) : 0.0;
      if (inst.valuations[i].kind() == Valuation::Kind::UnitDemand) {
        w.push_back(Valuation::unit_demand(lambda * inst.valuations[i].per_click()));
      } else {
        std::vector<std::vector<double>> clauses = inst.valuations[i].clauses();
        for (auto& clause : clauses)
          for (double& x : clause) x *= lambda;
        w.push_back(Valuation::xos(std::move(clauses)));
      }
    }
    inst.conflict_values = std::move(w);
  }
  inst.validate();
  return inst;
}

namespace {

SsInstance to_ss(const AuctionInstance& inst) {
  SsInstance ss;
  if (!inst.slots) throw ModelMismatch("sponsored mechanisms need a unit-demand instance");
  ss.slots = *inst.slots;
  ss.bidder_graph = inst.bidder_graph;
  ss.slot_graph = inst.item_graph;
  for (const auto& v : inst.valuations) {
    if (v.kind() != Valuation::Kind::UnitDemand)
      throw ModelMismatch("sponsored mechanisms need unit-demand valuations");
    ss.values.push_back(v.per_click());
  }
  return ss;
}

Allocation run_mechanism(const std::string& name, const AuctionInstance& inst,
                         std::uint64_t seed, std::uint64_t budget, int trials) {
  Rng rng(seed);
  const Subsolver exact = [budget](const AuctionInstance& sub) {
    return exact_optimum(sub, budget);
  };
  if (name == "exact") return exact_optimum(inst, budget).alloc;
  if (name == "lottery") return lottery_reduce(inst, exact, LotteryMode::Bidders, rng);
  if (name == "lottery_items") return lottery_reduce(inst, exact, LotteryMode::Items, rng);
  if (name == "mir") return mir_derandomized(inst, exact, LotteryMode::Bidders).alloc;
  if (name == "mir_items") return mir_derandomized(inst, exact, LotteryMode::Items).alloc;
  if (name == "cpr") {
    const ConeSolution sol = solve_cpr(inst);
    const RoundingParams params =
        RoundingParams::for_out_degree(inst.bidder_graph.max_out_degree(), trials);
    return round_cpr(inst, sol, params, rng);
  }
  if (name == "ss") {
    SsInstance ss = to_ss(inst);
    const int padded = std::max(ss.bidders(), ss.slot_count());
    const CoinTranscript coins = CoinTranscript::draw(padded, 1, 2, rng);
    return ss_mechanism(ss, coins).alloc;
  }
  if (name == "small_supply") {
    SsInstance ss = to_ss(inst);
    const CoinTranscript coins = CoinTranscript::draw(ss.bidders(), 0, 1, rng);
    return small_supply_mechanism(ss, coins).alloc;
  }
  if (name == "partial_enum") return partial_enumeration(to_ss(inst), rng);
  if (name == "greedy_uniform") return greedy_uniform(to_ss(inst));
  throw std::invalid_argument("unknown mechanism: " + name);
}

std::string fmt_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  std::vector<ResultRow> rows;
  for (int id = 0; id < config.instances; ++id) {
    Rng gen_rng(mix_seed(config.seed, static_cast<std::uint64_t>(id)));
    const AuctionInstance inst = generate_instance(config.gen, gen_rng);

    std::optional<double> optimum;
    const double combos = std::pow(inst.n + 1.0, inst.m);
    if (combos <= static_cast<double>(config.optimum_budget))
      optimum = exact_optimum(inst, config.optimum_budget).welfare;

    for (std::size_t mech = 0; mech < config.mechanisms.size(); ++mech) {
      ResultRow row;
      row.instance_id = id;
      row.mechanism = config.mechanisms[mech];
      row.seed = config.seed;
      row.optimum = optimum;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const std::uint64_t mech_seed =
            mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(id)), 1000 + mech);
        const Allocation alloc = run_mechanism(row.mechanism, inst, mech_seed,
                                               config.optimum_budget, config.trials);
        row.welfare = externality_welfare(inst, alloc).total;
        if (optimum && *row.welfare > 0.0) row.ratio = *optimum / *row.welfare;
      } catch (const std::exception& e) {
        row.error = e.what();
        row.optimum.reset();
      }
      if (config.record_runtime) {
        const auto t1 = std::chrono::steady_clock::now();
        row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string emit_csv(const std::vector<ResultRow>& rows) {
  std::string out = "instance_id,mechanism,welfare,optimum,ratio,runtime_ms,seed\n";
  for (const auto& r : rows) {
    out += std::to_string(r.instance_id) + ',' + r.mechanism + ',';
    out += (r.welfare ? fmt_sig9(*r.welfare) : std::string()) + ',';
    out += (r.optimum ? fmt_sig9(*r.optimum) : std::string()) + ',';
    out += (r.ratio ? fmt_sig9(*r.ratio) : std::string()) + ',';
    out += fmt_sig9(r.runtime_ms) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

json emit_json(const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json row{{"instance_id", r.instance_id},
             {"mechanism", r.mechanism},
             {"welfare", r.welfare ? json(*r.welfare) : json(nullptr)},
             {"optimum", r.optimum ? json(*r.optimum) : json(nullptr)},
             {"ratio", r.ratio ? json(*r.ratio) : json(nullptr)},
             {"runtime_ms", r.runtime_ms},
             {"seed", r.seed}};
    if (!r.error.empty()) row["error"] = r.error;
    arr.push_back(std::move(row));
  }
  return arr;
}

}  // namespace ca

#include "ca/json_io.hpp"

namespace ca {

using nlohmann::json;

namespace {

json valuation_to_json(const Valuation& v) {
  if (v.kind() == Valuation::Kind::UnitDemand)
    return json{{"unit_demand", {{"v", v.per_click()}}}};
  return json{{"xos", v.clauses()}};
}

Valuation valuation_from_json(const json& j) {
  if (j.contains("unit_demand")) return Valuation::unit_demand(j["unit_demand"]["v"].get<double>());
  return Valuation::xos(j.at("xos").get<std::vector<std::vector<double>>>());
}

json edges_to_json(const ConflictGraph& g) {
  json out = json::array();
  for (auto [i, j] : g.edges()) out.push_back(json::array({i, j}));
  return out;
}

std::vector<std::pair<int, int>> edges_from_json(const json& j) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j) edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  return edges;
}

}  // namespace

json instance_to_json(const AuctionInstance& inst) {
  json j;
  j["n"] = inst.n;
  j["m"] = inst.m;
  j["edges_bidders"] = edges_to_json(inst.bidder_graph);
  j["edges_items"] = inst.item_graph ? edges_to_json(*inst.item_graph) : json(nullptr);
  j["valuations"] = json::array();
  for (const auto& v : inst.valuations) j["valuations"].push_back(valuation_to_json(v));
  j["ctrs"] = inst.slots ? json(inst.slots->ctrs()) : json(nullptr);
  if (inst.conflict_values) {
    j["conflict_values"] = json::array();
    for (const auto& v : *inst.conflict_values) j["conflict_values"].push_back(valuation_to_json(v));
  } else {
    j["conflict_values"] = nullptr;
  }
  return j;
}

AuctionInstance instance_from_json(const json& j) {
  AuctionInstance inst;
  inst.n = j.at("n").get<int>();
  inst.m = j.at("m").get<int>();
  inst.bidder_graph = ConflictGraph(inst.n, edges_from_json(j.at("edges_bidders")));
  if (j.contains("edges_items") && !j["edges_items"].is_null())
    inst.item_graph = ConflictGraph(inst.m, edges_from_json(j["edges_items"]));
  for (const auto& v : j.at("valuations")) inst.valuations.push_back(valuation_from_json(v));
  if (j.contains("ctrs") && !j["ctrs"].is_null())
    inst.slots = SlotMarket(j["ctrs"].get<std::vector<double>>());
  if (j.contains("conflict_values") && !j["conflict_values"].is_null()) {
    std::vector<Valuation> w;
    for (const auto& v : j["conflict_values"]) w.push_back(valuation_from_json(v));
    inst.conflict_values = std::move(w);
  }
  inst.validate();
  return inst;
}

json transcript_to_json(const CoinTranscript& t) {
  return json{{"halving", t.halving},
              {"q", t.q},
              {"gaussian_seed", t.gaussian_seed},
              {"perm_seed", t.perm_seed}};
}

CoinTranscript transcript_from_json(const json& j) {
  CoinTranscript t;
  t.halving = j.at("halving").get<std::vector<std::uint8_t>>();
  t.q = j.at("q").get<int>();
  t.gaussian_seed = j.at("gaussian_seed").get<std::uint64_t>();
  t.perm_seed = j.at("perm_seed").get<std::uint64_t>();
  return t;
}

json report_to_json(const TruthfulnessReport& r) {
  json grid = json::array();
  for (const auto& pt : r.grid)
    grid.push_back(json{{"bid_factor", pt.bid_factor}, {"utility_delta", pt.utility_delta}});
  return json{{"bidder", r.bidder},
              {"coin_seed", r.coin_seed},
              {"grid", grid},
              {"max_violation", r.max_violation}};
}

}  // namespace ca

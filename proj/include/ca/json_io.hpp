#pragma once

#include <json.hpp>

#include "ca/model.hpp"
#include "ca/oracles.hpp"
#include "ca/sponsored.hpp"

namespace ca {

// Instance wire schema:
// {n, m, edges_bidders:[[i,j]], edges_items:[[k,l]]|null,
//  valuations:[{xos:[[..clause..]]} | {unit_demand:{v}}],
//  ctrs:[..]|null, conflict_values:[..]|null}
nlohmann::json instance_to_json(const AuctionInstance& inst);
AuctionInstance instance_from_json(const nlohmann::json& j);

nlohmann::json transcript_to_json(const CoinTranscript& t);
CoinTranscript transcript_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const TruthfulnessReport& r);

}  // namespace ca

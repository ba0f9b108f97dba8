#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ca/model.hpp"
#include "ca/rng.hpp"

namespace ca {

struct GeneratorSpec {
  int n = 6;
  int m = 2;
  int delta = 1;
  std::optional<int> delta_items;
  bool symmetric = false;  // mutual conflict edges
  std::string family = "xos";  // "xos" | "unit_demand"
  int clauses = 2;
  double value_low = 0.0;
  double value_high = 1.0;
  bool with_conflict_values = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int instances = 1;
  int trials = 1;
  GeneratorSpec gen;
  std::vector<std::string> mechanisms;
  bool record_runtime = false;  // wall-clock timing is not reproducible
  std::uint64_t optimum_budget = 10'000'000;
  std::string out = "results";
};

ExperimentConfig config_from_json(const nlohmann::json& j);

// Delta-bounded digraph + valuations drawn from the spec; same (spec,
// seed) always yields the identical instance.
AuctionInstance generate_instance(const GeneratorSpec& spec, Rng& rng);

struct ResultRow {
  int instance_id = 0;
  std::string mechanism;
  std::optional<double> welfare;
  std::optional<double> optimum;
  std::optional<double> ratio;  // optimum / welfare
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  std::string error;
};

std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

// Stable column order: instance_id, mechanism, welfare, optimum, ratio,
// runtime_ms, seed. Numbers carry 9 significant digits.
std::string emit_csv(const std::vector<ResultRow>& rows);
nlohmann::json emit_json(const std::vector<ResultRow>& rows);

}  // namespace ca

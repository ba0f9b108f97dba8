// Command-line front end: instance generation, experiment batches,
// truthfulness sweeps and cone-program certification.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ca/coneprog.hpp"
#include "ca/experiment.hpp"
#include "ca/json_io.hpp"
#include "ca/lottery.hpp"
#include "ca/oracles.hpp"
#include "ca/sponsored.hpp"

using nlohmann::json;

namespace {

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << contents;
}

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::int64_t seed = -1;

  ca::ExperimentConfig load() const {
    json j = config_path.empty() ? json{{"seed", 0}} : load_config(config_path);
    if (seed >= 0) j["seed"] = static_cast<std::uint64_t>(seed);
    ca::ExperimentConfig c = ca::config_from_json(j);
    if (!out.empty()) c.out = out;
    return c;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config path");
  cmd->add_option("--seed", args.seed, "override config seed");
  cmd->add_option("--out", args.out, "output path prefix");
}

int cmd_gen(const CommonArgs& args) {
  const ca::ExperimentConfig c = args.load();
  json arr = json::array();
  for (int id = 0; id < c.instances; ++id) {
    ca::Rng rng(ca::mix_seed(c.seed, static_cast<std::uint64_t>(id)));
    arr.push_back(ca::instance_to_json(ca::generate_instance(c.gen, rng)));
  }
  write_file(c.out + ".json", arr.dump(2) + "\n");
  std::cout << "wrote " << c.instances << " instances to " << c.out << ".json\n";
  return 0;
}

int cmd_run(const CommonArgs& args) {
  const ca::ExperimentConfig c = args.load();
  const std::vector<ca::ResultRow> rows = ca::run_experiment(c);
  write_file(c.out + ".csv", ca::emit_csv(rows));
  write_file(c.out + ".json", ca::emit_json(rows).dump(2) + "\n");
  int failed = 0;
  for (const auto& r : rows)
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "row error (instance " << r.instance_id << ", " << r.mechanism
                << "): " << r.error << "\n";
    }
  std::cout << "wrote " << rows.size() << " rows to " << c.out << ".{csv,json}";
  if (failed) std::cout << " (" << failed << " rows failed)";
  std::cout << "\n";
  return 0;
}

int cmd_truthfulness(const CommonArgs& args) {
  json cfg = args.config_path.empty() ? json{{"seed", 0}} : load_config(args.config_path);
  if (args.seed >= 0) cfg["seed"] = static_cast<std::uint64_t>(args.seed);
  ca::ExperimentConfig c = ca::config_from_json(cfg);
  if (!args.out.empty()) c.out = args.out;
  const std::string mechanism = cfg.value("mechanism", std::string("ss"));
  const int transcripts = cfg.value("transcripts", 5);

  json out = json::array();
  double worst = 0.0;
  for (int id = 0; id < c.instances; ++id) {
    ca::Rng rng(ca::mix_seed(c.seed, static_cast<std::uint64_t>(id)));
    const ca::AuctionInstance inst = ca::generate_instance(c.gen, rng);
    for (int t = 0; t < transcripts; ++t) {
      ca::Rng coin_rng(ca::mix_seed(c.seed, 7777 + static_cast<std::uint64_t>(id) * 101 + t));
      for (int bidder = 0; bidder < inst.n; ++bidder) {
        ca::TruthfulnessReport rep;
        if (mechanism == "mir") {
          rep = ca::mir_truthfulness(inst, bidder, ca::default_bid_grid(),
                                     ca::LotteryMode::Bidders);
        } else {
          ca::SsInstance ss;
          ss.slots = *inst.slots;
          ss.bidder_graph = inst.bidder_graph;
          ss.slot_graph = inst.item_graph;
          for (const auto& v : inst.valuations) ss.values.push_back(v.per_click());
          if (mechanism == "ss") {
            const int padded = std::max(ss.bidders(), ss.slot_count());
            const auto coins = ca::CoinTranscript::draw(padded, 1, 2, coin_rng);
            rep = ca::ss_truthfulness(ss, bidder, ca::default_bid_grid(), coins);
          } else if (mechanism == "small_supply") {
            const auto coins = ca::CoinTranscript::draw(ss.bidders(), 0, 1, coin_rng);
            rep = ca::small_supply_truthfulness(ss, bidder, ca::default_bid_grid(), coins);
          } else {
            throw std::invalid_argument("unknown mechanism: " + mechanism);
          }
        }
        worst = std::max(worst, rep.max_violation);
        json row = ca::report_to_json(rep);
        row["instance_id"] = id;
        row["transcript"] = t;
        out.push_back(std::move(row));
      }
    }
  }
  write_file(c.out + ".json",
             json{{"mechanism", mechanism}, {"max_violation", worst}, {"reports", out}}.dump(2) +
                 "\n");
  std::cout << "max_violation " << worst << " across " << out.size() << " sweeps\n";
  return worst <= 1e-9 ? 0 : 1;
}

int cmd_certify(const CommonArgs& args) {
  const ca::ExperimentConfig c = args.load();
  json out = json::array();
  bool all_ok = true;
  for (int id = 0; id < c.instances; ++id) {
    ca::Rng rng(ca::mix_seed(c.seed, static_cast<std::uint64_t>(id)));
    const ca::AuctionInstance inst = ca::generate_instance(c.gen, rng);
    const ca::ConeSolution sol = ca::solve_cpr(inst);
    const ca::DualCheck check = ca::dual_certificate(inst, sol.dual);
    const bool ok = sol.converged && check.feasible;
    all_ok = all_ok && ok;
    out.push_back(json{{"instance_id", id},
                       {"objective", sol.objective},
                       {"dual_upper", sol.dual_upper},
                       {"gap", sol.gap},
                       {"iterations", sol.iterations},
                       {"converged", sol.converged},
                       {"dual_feasible", check.feasible},
                       {"residual", sol.residuals.max()}});
  }
  write_file(c.out + ".json", out.dump(2) + "\n");
  std::cout << (all_ok ? "all certificates ok\n" : "certification FAILED\n");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conflict-auction toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_args, run_args, truth_args, cert_args;
  add_common(app.add_subcommand("gen", "generate instances"), gen_args);
  add_common(app.add_subcommand("run", "run experiment batch"), run_args);
  add_common(app.add_subcommand("truthfulness", "deviation sweeps"), truth_args);
  add_common(app.add_subcommand("certify", "cone-program dual certification"), cert_args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("gen")) return cmd_gen(gen_args);
    if (app.got_subcommand("run")) return cmd_run(run_args);
    if (app.got_subcommand("truthfulness")) return cmd_truthfulness(truth_args);
    if (app.got_subcommand("certify")) return cmd_certify(cert_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

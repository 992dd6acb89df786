#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "flowrl/commands.hpp"
#include "flowrl/version.hpp"

namespace {

struct CliArgs {
  std::string config;
  std::string out_override;
  std::int64_t seed_override = -1;
  bool dry_run = false;
};

void add_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config, "JSON config file")->required();
  sub->add_option("--seed", args.seed_override, "replace the config's seed list with this seed");
  sub->add_option("--out", args.out_override, "output directory (overrides config)");
  sub->add_flag("--dry-run", args.dry_run, "validate the config and exit without running");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline RL lab: one-step flow Q-learning against diffusion and "
               "flow-matching baselines"};
  app.set_version_flag("--version", std::string(flowrl::kVersion));
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* train = app.add_subcommand("train", "train one family on an offline dataset");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint with a sampling strategy");
  CLI::App* bench = app.add_subcommand("bench-speed", "decision-frequency and train-step timing");
  CLI::App* toy = app.add_subcommand("toy-study", "2-d density study: v-param vs u-param");
  CLI::App* ablate = app.add_subcommand("ablate", "sweep flow_ratio, eta, or strategy");
  CLI::App* repro = app.add_subcommand("repro", "toy study + strategy sweep + speed bench");
  for (CLI::App* sub : {train, eval, bench, toy, ablate, repro}) add_common(sub, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are config errors
  }

  try {
    flowrl::RunConfig cfg = flowrl::load_run_config(args.config);
    if (args.seed_override >= 0)
      cfg.seeds = {static_cast<std::uint64_t>(args.seed_override)};
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;

    if (args.dry_run) {
      std::cout << "config ok: hash " << flowrl::config_hash(cfg.raw) << "\n";
      return 0;
    }
    if (train->parsed()) flowrl::cmd_train(cfg, false);
    if (eval->parsed()) flowrl::cmd_eval(cfg, cfg.seeds[0]);
    if (bench->parsed()) flowrl::cmd_bench_speed(cfg);
    if (toy->parsed()) flowrl::cmd_toy_study(cfg);
    if (ablate->parsed()) flowrl::cmd_ablate(cfg);
    if (repro->parsed()) flowrl::cmd_repro(cfg);
    return 0;
  } catch (const flowrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

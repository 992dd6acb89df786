#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowrl/toy.hpp"
#include "flowrl/trainer.hpp"

namespace flowrl {

// Exit-code mapping: ConfigError -> 1, RunError -> 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value run configuration; unknown keys are rejected. Every command
// reads the subset it needs.
struct RunConfig {
  std::string env = "pointmass";
  std::string density;  // toy-study: empty = all three
  std::string behavior = "mixture";
  std::string strategy = "ofql";
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1};
  long n_steps = 50000;
  long n_transitions = 20000;
  std::uint64_t data_seed = 1000;
  int eval_episodes = 50;
  long log_interval = 100;
  std::string out_dir = "runs/out";
  std::string checkpoint;  // eval: explicit checkpoint path
  // timing
  int timing_batch = 256;
  int timing_batches = 1000;
  int timing_train_steps = 30;
  // ablation
  std::string sweep_axis = "strategy";  // flow_ratio | eta | strategy
  // toy study
  int toy_epochs = 100;
  int toy_batch = 2048;
  int toy_train_n = 16384;
  int toy_eval_n = 2048;
  int toy_hidden = 64;

  nlohmann::json raw;  // canonical source for hashing/manifest
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical (sorted-key) dump.
std::string config_hash(const nlohmann::json& j);

// Runs jobs on min(FLOWRL_WORKERS or hardware threads, jobs) workers.
void run_parallel(const std::vector<std::function<void()>>& jobs);

// Writes <out>/manifest.json: config, seeds, version, config hash.
void write_manifest(const RunConfig& cfg, const std::string& out_dir);

// One trainer per seed; per-seed checkpoint + metrics CSV under
// <out>/seed-<s>/. dry_run validates and writes nothing.
void cmd_train(const RunConfig& cfg, bool dry_run);

// Evaluates a checkpoint; writes <out>/scores.json.
void cmd_eval(const RunConfig& cfg, std::uint64_t eval_seed);

// Decision frequency for OFQL / DQL(K in {5,10,20,50}) / FBRAC plus per-step
// training time; writes <out>/timing.csv.
void cmd_bench_speed(const RunConfig& cfg);

// Appendix-C style toy-density study. Per density: v-param at Euler steps
// {1,2,5,10} and u-param at 1 step, energy distances against held-out data,
// raw sample dumps. Writes <out>/toy_metrics.csv and <out>/<density>/*.txt.
void cmd_toy_study(const RunConfig& cfg);

// Sweep over flow_ratio {1,0.75,0.5,0.25,0}, eta {0.001,...,0.5}, or the
// four strategies; one CSV row per (value, seed). The DDIM-1 cell reuses the
// DQL training of the same seed (inference-only change).
void cmd_ablate(const RunConfig& cfg);

// toy-study + strategy ablation + bench-speed in one run directory.
void cmd_repro(const RunConfig& cfg);

// Library form of one toy-study cell (also used by the acceptance suite).
struct ToyStudyParams {
  int epochs = 100;
  int batch = 2048;
  int train_n = 16384;
  int eval_n = 2048;
  int hidden = 64;
  int embed_dim = 64;
  double lr = 3e-4;
};

struct ToyStudyCell {
  std::string density;
  std::uint64_t seed = 0;
  double ed_v1 = 0, ed_v2 = 0, ed_v5 = 0, ed_v10 = 0, ed_u1 = 0;
};

ToyStudyCell run_toy_study_cell(const std::string& density, std::uint64_t seed,
                                const ToyStudyParams& p, const std::string& dump_dir = "");

}  // namespace flowrl

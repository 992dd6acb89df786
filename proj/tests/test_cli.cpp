#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "flowrl/commands.hpp"
#include "flowrl/dataset.hpp"

using namespace flowrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  int n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

json tiny_train_json(const std::string& out) {
  return json{{"env", "bandit"},      {"strategy", "ofql"},   {"seeds", {1, 2}},
              {"n_steps", 20},        {"n_transitions", 300}, {"batch", 32},
              {"hidden", 16},         {"log_interval", 10},   {"eval_episodes", 8},
              {"out", out}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run config: defaults, parsing, and validation") {
  RunConfig cfg = parse_run_config(json::object());
  CHECK(cfg.env == "pointmass");
  CHECK(cfg.strategy == "ofql");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});

  json j = tiny_train_json("x");
  cfg = parse_run_config(j);
  CHECK(cfg.env == "bandit");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(cfg.train.batch == 32);
  CHECK(cfg.n_steps == 20);

  CHECK_THROWS_AS(parse_run_config(json{{"learning_rate", 1.0}}), ConfigError);  // unknown key
  CHECK_THROWS_AS(parse_run_config(json{{"env", "cartpole"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"strategy", "sac"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"density", "donut"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"seeds", json::array()}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"flow_ratio", 1.5}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"flow_ratio", -0.1}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"eta", -1.0}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"K", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"euler_steps", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"sweep_axis", "gamma"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"n_steps", "many"}}), ConfigError);  // wrong type
}

TEST_CASE("config hash: canonical, stable, sensitive") {
  json a = {{"env", "bandit"}, {"eta", 0.1}};
  json b = {{"eta", 0.1}, {"env", "bandit"}};  // same content, insertion order differs
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  json c = a;
  c["eta"] = 0.2;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("load_run_config: file round-trip and missing file") {
  TempDir tmp("flowrl_cfg_test");
  fs::path p = tmp.path / "cfg.json";
  std::ofstream(p) << tiny_train_json("out").dump();
  RunConfig cfg = load_run_config(p.string());
  CHECK(cfg.env == "bandit");
  CHECK_THROWS_AS(load_run_config((tmp.path / "absent.json").string()), ConfigError);
  std::ofstream(tmp.path / "bad.json") << "{not json";
  CHECK_THROWS_AS(load_run_config((tmp.path / "bad.json").string()), ConfigError);
}

TEST_CASE("run_parallel: executes every job once and propagates exceptions") {
  std::atomic<int> hits{0};
  std::vector<std::function<void()>> jobs;
  for (int i = 0; i < 17; ++i) jobs.push_back([&] { ++hits; });
  run_parallel(jobs);
  CHECK(hits.load() == 17);

  jobs.push_back([] { throw std::runtime_error("job boom"); });
  try {
    run_parallel(jobs);
    CHECK(false);
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("cmd_train: dry run writes nothing, real run writes the full layout") {
  TempDir tmp("flowrl_train_test");
  std::string out = (tmp.path / "run").string();
  json j = tiny_train_json(out);
  RunConfig cfg = parse_run_config(j);

  cmd_train(cfg, /*dry_run=*/true);
  CHECK_FALSE(fs::exists(out));

  cmd_train(cfg, /*dry_run=*/false);
  REQUIRE(fs::exists(fs::path(out) / "manifest.json"));
  json manifest;
  std::ifstream(fs::path(out) / "manifest.json") >> manifest;
  CHECK(manifest.at("config_hash").get<std::string>() == config_hash(cfg.raw));
  CHECK(manifest.at("seeds").get<std::vector<std::uint64_t>>() == cfg.seeds);

  for (std::uint64_t s : cfg.seeds) {
    fs::path seed_dir = fs::path(out) / ("seed-" + std::to_string(s));
    REQUIRE(fs::exists(seed_dir / "checkpoint.json"));
    REQUIRE(fs::exists(seed_dir / "metrics.csv"));
    // header + one row per log_interval (steps 10 and 20)
    CHECK(count_lines(seed_dir / "metrics.csv") == 3);
  }

  // Seeds must produce different parameters.
  std::ifstream c1(fs::path(out) / "seed-1" / "checkpoint.json");
  std::ifstream c2(fs::path(out) / "seed-2" / "checkpoint.json");
  std::stringstream s1, s2;
  s1 << c1.rdbuf();
  s2 << c2.rdbuf();
  CHECK(s1.str() != s2.str());
}

TEST_CASE("cmd_eval: writes scores.json tied to the checkpoint") {
  TempDir tmp("flowrl_eval_test");
  std::string out = (tmp.path / "run").string();
  json j = tiny_train_json(out);
  j["seeds"] = {1};
  RunConfig cfg = parse_run_config(j);
  cmd_train(cfg, false);

  json je = j;
  je["checkpoint"] = out + "/seed-1/checkpoint.json";
  je["out"] = (tmp.path / "eval").string();
  RunConfig ecfg = parse_run_config(je);
  cmd_eval(ecfg, 7);

  json scores;
  std::ifstream(fs::path(ecfg.out_dir) / "scores.json") >> scores;
  CHECK(scores.at("episodes").size() == 8);
  CHECK(scores.at("strategy").get<std::string>() == "ofql");
  CHECK(std::isfinite(scores.at("mean_return").get<double>()));
  CHECK(std::isfinite(scores.at("normalized_score").get<double>()));

  RunConfig no_ckpt = parse_run_config(j);
  CHECK_THROWS_AS(cmd_eval(no_ckpt, 7), ConfigError);
}

TEST_CASE("toy study cell: returns finite energy distances and dumps samples") {
  TempDir tmp("flowrl_toy_test");
  ToyStudyParams p;
  p.epochs = 2;
  p.batch = 256;
  p.train_n = 512;
  p.eval_n = 128;
  p.hidden = 16;
  ToyStudyCell cell = run_toy_study_cell("crescent", 3, p, tmp.path.string());
  for (double ed : {cell.ed_v1, cell.ed_v2, cell.ed_v5, cell.ed_v10, cell.ed_u1}) {
    CHECK(std::isfinite(ed));
    CHECK(ed >= 0.0);
  }
  CHECK(fs::exists(tmp.path / "data.txt"));
  CHECK(fs::exists(tmp.path / "u1.txt"));
  CHECK(count_lines(tmp.path / "u1.txt") == p.eval_n);
}

#include "flowrl/commands.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "flowrl/bench.hpp"
#include "flowrl/checkpoint.hpp"
#include "flowrl/version.hpp"

namespace flowrl {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "command",        "env",           "density",       "behavior",
    "family",         "strategy",      "K",             "euler_steps",
    "flow_ratio",     "eta",           "gamma",         "rho",
    "target_period",  "lr",            "batch",         "hidden",
    "embed_dim",      "max_q",         "n_action_samples", "alpha_decay",
    "seeds",          "n_steps",       "n_transitions", "data_seed",
    "eval_episodes",  "log_interval",  "out",           "checkpoint",
    "timing_batch",   "timing_batches", "timing_train_steps", "sweep_axis",
    "toy_epochs",     "toy_batch",     "toy_train_n",   "toy_eval_n",
    "toy_hidden"};

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kKnownKeys.count(key)) throw ConfigError("unknown config key: " + key);

  RunConfig cfg;
  cfg.raw = j;
  read_key(j, "env", cfg.env);
  read_key(j, "density", cfg.density);
  read_key(j, "behavior", cfg.behavior);
  read_key(j, "strategy", cfg.strategy);
  std::string family;  // empty: derived from the strategy below
  read_key(j, "family", family);
  read_key(j, "K", cfg.train.K);
  read_key(j, "euler_steps", cfg.train.euler_steps);
  read_key(j, "flow_ratio", cfg.train.flow_ratio);
  read_key(j, "eta", cfg.train.eta);
  read_key(j, "gamma", cfg.train.gamma);
  read_key(j, "rho", cfg.train.rho);
  read_key(j, "target_period", cfg.train.target_period);
  read_key(j, "lr", cfg.train.lr);
  read_key(j, "batch", cfg.train.batch);
  read_key(j, "hidden", cfg.train.hidden);
  read_key(j, "embed_dim", cfg.train.embed_dim);
  read_key(j, "max_q", cfg.train.max_q);
  read_key(j, "n_action_samples", cfg.train.n_action_samples);
  read_key(j, "alpha_decay", cfg.train.alpha_decay);
  read_key(j, "seeds", cfg.seeds);
  read_key(j, "n_steps", cfg.n_steps);
  read_key(j, "n_transitions", cfg.n_transitions);
  read_key(j, "data_seed", cfg.data_seed);
  read_key(j, "eval_episodes", cfg.eval_episodes);
  read_key(j, "log_interval", cfg.log_interval);
  read_key(j, "out", cfg.out_dir);
  read_key(j, "checkpoint", cfg.checkpoint);
  read_key(j, "timing_batch", cfg.timing_batch);
  read_key(j, "timing_batches", cfg.timing_batches);
  read_key(j, "timing_train_steps", cfg.timing_train_steps);
  read_key(j, "sweep_axis", cfg.sweep_axis);
  read_key(j, "toy_epochs", cfg.toy_epochs);
  read_key(j, "toy_batch", cfg.toy_batch);
  read_key(j, "toy_train_n", cfg.toy_train_n);
  read_key(j, "toy_eval_n", cfg.toy_eval_n);
  read_key(j, "toy_hidden", cfg.toy_hidden);

  try {
    Strategy strat = parse_strategy(cfg.strategy);
    cfg.train.family = family.empty() ? strategy_family(strat) : parse_family(family);
    EnvSpec::by_name(cfg.env);
    if (!cfg.density.empty()) ToyDensity::by_name(cfg.density);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (cfg.train.flow_ratio < 0.0 || cfg.train.flow_ratio > 1.0)
    throw ConfigError("flow_ratio must be in [0,1]");
  if (cfg.train.eta < 0.0) throw ConfigError("eta must be >= 0");
  if (cfg.train.K < 1 || cfg.train.euler_steps < 1) throw ConfigError("step counts must be >= 1");
  if (cfg.train.batch < 1 || cfg.train.hidden < 1) throw ConfigError("batch/hidden must be >= 1");
  if (cfg.sweep_axis != "flow_ratio" && cfg.sweep_axis != "eta" && cfg.sweep_axis != "strategy")
    throw ConfigError("sweep_axis must be flow_ratio, eta, or strategy");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

std::string config_hash(const json& j) {
  std::string dump = j.dump();  // object keys are sorted: canonical
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

void run_parallel(const std::vector<std::function<void()>>& jobs) {
  unsigned workers = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("FLOWRL_WORKERS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) workers = static_cast<unsigned>(v);
  }
  workers = std::min<unsigned>(std::max(1u, workers), static_cast<unsigned>(jobs.size()));
  if (workers <= 1) {
    for (const auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs.size());
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_manifest(const RunConfig& cfg, const std::string& out_dir) {
  json manifest = {{"config", cfg.raw},
                   {"seeds", cfg.seeds},
                   {"version", kVersion},
                   {"config_hash", config_hash(cfg.raw)}};
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw RunError("cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

void cmd_train(const RunConfig& cfg, bool dry_run) {
  EnvSpec env = EnvSpec::by_name(cfg.env);
  if (dry_run) return;
  fs::create_directories(cfg.out_dir);
  write_manifest(cfg, cfg.out_dir);
  Dataset ds = make_offline_dataset(env, cfg.behavior, cfg.n_transitions, cfg.data_seed);

  std::vector<std::function<void()>> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    jobs.push_back([&, seed] {
      fs::path dir = fs::path(cfg.out_dir) / ("seed-" + std::to_string(seed));
      fs::create_directories(dir);
      TrainState st = TrainState::make(cfg.train, env, seed);
      MetricsWriter metrics((dir / "metrics.csv").string());
      train(st, ds, cfg.n_steps, &metrics, cfg.log_interval);
      save_checkpoint(st, (dir / "checkpoint.json").string());
    });
  }
  run_parallel(jobs);
}

void cmd_eval(const RunConfig& cfg, std::uint64_t eval_seed) {
  if (cfg.checkpoint.empty()) throw ConfigError("eval requires a 'checkpoint' path");
  EnvSpec env = EnvSpec::by_name(cfg.env);
  TrainState st = TrainState::make(cfg.train, env, /*seed=*/0);
  load_checkpoint(st, cfg.checkpoint);

  Strategy strat = parse_strategy(cfg.strategy);
  Rng rng = Rng(eval_seed).split(17);
  EvalResult res = evaluate_policy(st.actor, strat, cfg.train, env, cfg.eval_episodes, rng);

  fs::create_directories(cfg.out_dir);
  json scores = {{"mean_return", res.mean_return},
                 {"normalized_score", res.normalized},
                 {"episodes", res.episode_returns},
                 {"strategy", cfg.strategy},
                 {"config_hash", config_hash(cfg.raw)}};
  std::ofstream out(fs::path(cfg.out_dir) / "scores.json");
  if (!out) throw RunError("cannot write scores.json in " + cfg.out_dir);
  out << scores.dump(2) << "\n";
}

void cmd_bench_speed(const RunConfig& cfg) {
  EnvSpec env = EnvSpec::by_name(cfg.env);
  fs::create_directories(cfg.out_dir);
  write_manifest(cfg, cfg.out_dir);

  Rng rng(cfg.seeds[0]);
  MatrixXd states(cfg.timing_batch, env.state_dim);
  for (Index i = 0; i < states.rows(); ++i)
    for (Index j = 0; j < states.cols(); ++j) states(i, j) = rng.uniform(-1.0, 1.0);

  std::ofstream out(fs::path(cfg.out_dir) / "timing.csv");
  if (!out) throw RunError("cannot write timing.csv in " + cfg.out_dir);
  out << "kind,label,nfe,batch,reps,median_s,iqr_s,batches_per_s,actions_per_s\n";
  out << std::setprecision(17);

  auto decision_row = [&](Strategy strat, TrainConfig tc) {
    // Timing only exercises the forward pass; fresh-initialized nets of the
    // right architecture stand in when no checkpoint is supplied.
    Rng net_rng = rng.split(static_cast<std::uint64_t>(strat) + 100 * tc.K);
    PolicyNet net = PolicyNet::make(net_rng, env.action_dim, env.state_dim, tc.hidden,
                                    tc.embed_dim, strategy_family(strat) == Family::Ofql);
    Rng t_rng = net_rng.split(1);
    DecisionTiming d = measure_decision_frequency(net, strat, tc, states, cfg.timing_batches, t_rng);
    std::string label = to_string(strat);
    if (strat == Strategy::Dql) label += "-k" + std::to_string(tc.K);
    out << "decision," << label << ',' << d.nfe << ',' << d.batch << ',' << d.t.timed << ','
        << d.t.median_s << ',' << d.t.iqr_s << ',' << d.batches_per_s << ',' << d.actions_per_s
        << "\n";
  };

  auto train_row = [&](Family family, TrainConfig tc, const Dataset& ds) {
    tc.family = family;
    TrainState st = TrainState::make(tc, env, cfg.seeds[0]);
    TimingSummary t = measure_train_step(st, ds, cfg.timing_train_steps);
    std::string label = to_string(family);
    if (family == Family::Dql) label += "-k" + std::to_string(tc.K);
    int nfe = family == Family::Dql ? tc.K : 1;
    out << "train_step," << label << ',' << nfe << ',' << tc.batch << ',' << t.timed << ','
        << t.median_s << ',' << t.iqr_s << ",,\n";
  };

  TrainConfig tc = cfg.train;
  decision_row(Strategy::Ofql, tc);
  for (int K : {5, 10, 20, 50}) {
    TrainConfig tk = tc;
    tk.K = K;
    decision_row(Strategy::Dql, tk);
  }
  decision_row(Strategy::Fbrac, tc);

  Dataset ds = make_offline_dataset(env, cfg.behavior, std::max<long>(env.horizon * 20, tc.batch),
                                    cfg.data_seed);
  train_row(Family::Ofql, tc, ds);
  for (int K : {5, 10, 20, 50}) {
    TrainConfig tk = tc;
    tk.K = K;
    train_row(Family::Dql, tk, ds);
  }
  train_row(Family::Fbrac, tc, ds);
}

namespace {

PolicyNet train_toy_net(const MatrixXd& data, bool u_param, const ToyStudyParams& p, Rng& rng) {
  PolicyNet net = PolicyNet::make(rng, 2, 0, p.hidden, p.embed_dim, u_param);
  AdamState opt;
  opt.init(net.mlp.params());
  // Spreading the time pairs over the whole interval (instead of the
  // small-t-heavy default) measurably tightens the bootstrap fixed point.
  TimePairDistribution tdist;
  tdist.mu = 0.5;
  tdist.sigma = 2.0;
  MatrixXd s(p.batch, 0);
  long steps = static_cast<long>(p.epochs) * (p.train_n / p.batch);
  for (long step = 0; step < steps; ++step) {
    MatrixXd batch(p.batch, 2);
    for (int i = 0; i < p.batch; ++i)
      batch.row(i) = data.row(rng.uniform_int(0, static_cast<int>(data.rows()) - 1));
    Tape tape;
    TapeCtx ctx{&tape};
    LiftedMlp<Tensor> lifted = lift_mlp(ctx, net.mlp);
    Tensor loss = u_param ? fbc_loss(ctx, lifted, net, batch, s, tdist, rng)
                          : cfm_loss(ctx, lifted, net, batch, s, rng);
    tape.backward(loss);
    std::vector<MatrixXd> grads;
    for (const Tensor* t : {&lifted.W1, &lifted.b1, &lifted.W2, &lifted.b2, &lifted.W3, &lifted.b3})
      grads.push_back(t->grad());
    std::vector<const MatrixXd*> grad_ptrs;
    for (const MatrixXd& g : grads) grad_ptrs.push_back(&g);
    double frac = static_cast<double>(step) / static_cast<double>(steps);
    double lr = p.lr * (frac < 0.6 ? 1.0 : (frac < 0.85 ? 0.3 : 0.1));
    adam_step(net.mlp.params(), grad_ptrs, opt, lr);
  }
  return net;
}

MatrixXd toy_generate(const PolicyNet& net, int n, int euler_steps, bool one_step, Rng& rng) {
  ValCtx ctx;
  LiftedMlp<Val> p = lift_mlp(ctx, net.mlp);
  Val s{MatrixXd(n, 0)};
  // Toy supports exceed the action box; clip only at the support bound.
  double bound = 1e9;
  if (one_step) return one_step_sample(ctx, p, net, s, rng, -bound, bound).v;
  return euler_sample(ctx, p, net, s, euler_steps, rng, -bound, bound).v;
}

void dump_samples(const MatrixXd& pts, const fs::path& path) {
  std::ofstream out(path);
  out << std::setprecision(17);
  for (Index i = 0; i < pts.rows(); ++i) out << pts(i, 0) << ' ' << pts(i, 1) << "\n";
}

}  // namespace

ToyStudyCell run_toy_study_cell(const std::string& density, std::uint64_t seed,
                                const ToyStudyParams& p, const std::string& dump_dir) {
  ToyDensity d = ToyDensity::by_name(density);
  Rng root(seed);
  Rng data_rng = root.split(1);
  MatrixXd train_data = sample_density(d, p.train_n, data_rng);
  Rng heldout_rng = root.split(2);
  MatrixXd heldout = sample_density(d, p.eval_n, heldout_rng);

  Rng v_rng = root.split(3);
  PolicyNet v_net = train_toy_net(train_data, /*u_param=*/false, p, v_rng);
  Rng u_rng = root.split(4);
  PolicyNet u_net = train_toy_net(train_data, /*u_param=*/true, p, u_rng);

  ToyStudyCell cell;
  cell.density = density;
  cell.seed = seed;
  Rng gen_rng = root.split(5);
  MatrixXd v1 = toy_generate(v_net, p.eval_n, 1, false, gen_rng);
  MatrixXd v2 = toy_generate(v_net, p.eval_n, 2, false, gen_rng);
  MatrixXd v5 = toy_generate(v_net, p.eval_n, 5, false, gen_rng);
  MatrixXd v10 = toy_generate(v_net, p.eval_n, 10, false, gen_rng);
  MatrixXd u1 = toy_generate(u_net, p.eval_n, 1, true, gen_rng);
  cell.ed_v1 = energy_distance(v1, heldout);
  cell.ed_v2 = energy_distance(v2, heldout);
  cell.ed_v5 = energy_distance(v5, heldout);
  cell.ed_v10 = energy_distance(v10, heldout);
  cell.ed_u1 = energy_distance(u1, heldout);

  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    dump_samples(heldout, fs::path(dump_dir) / "data.txt");
    dump_samples(v1, fs::path(dump_dir) / "v1.txt");
    dump_samples(v2, fs::path(dump_dir) / "v2.txt");
    dump_samples(v5, fs::path(dump_dir) / "v5.txt");
    dump_samples(v10, fs::path(dump_dir) / "v10.txt");
    dump_samples(u1, fs::path(dump_dir) / "u1.txt");
  }
  return cell;
}

void cmd_toy_study(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_manifest(cfg, cfg.out_dir);
  std::vector<std::string> densities =
      cfg.density.empty() ? std::vector<std::string>{"crescent", "spiral", "checkerboard"}
                          : std::vector<std::string>{cfg.density};

  ToyStudyParams p;
  p.epochs = cfg.toy_epochs;
  p.batch = cfg.toy_batch;
  p.train_n = cfg.toy_train_n;
  p.eval_n = cfg.toy_eval_n;
  p.hidden = cfg.toy_hidden;
  p.embed_dim = cfg.train.embed_dim;
  p.lr = cfg.train.lr;

  std::vector<ToyStudyCell> cells(densities.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < densities.size(); ++i) {
    jobs.push_back([&, i] {
      cells[i] = run_toy_study_cell(densities[i], cfg.seeds[0], p,
                                    (fs::path(cfg.out_dir) / densities[i]).string());
    });
  }
  run_parallel(jobs);

  std::ofstream out(fs::path(cfg.out_dir) / "toy_metrics.csv");
  if (!out) throw RunError("cannot write toy_metrics.csv in " + cfg.out_dir);
  out << "density,param,steps,energy_distance\n" << std::setprecision(17);
  for (const ToyStudyCell& c : cells) {
    out << c.density << ",v,1," << c.ed_v1 << "\n";
    out << c.density << ",v,2," << c.ed_v2 << "\n";
    out << c.density << ",v,5," << c.ed_v5 << "\n";
    out << c.density << ",v,10," << c.ed_v10 << "\n";
    out << c.density << ",u,1," << c.ed_u1 << "\n";
  }
}

void cmd_ablate(const RunConfig& cfg) {
  EnvSpec env = EnvSpec::by_name(cfg.env);
  fs::create_directories(cfg.out_dir);
  write_manifest(cfg, cfg.out_dir);
  Dataset ds = make_offline_dataset(env, cfg.behavior, cfg.n_transitions, cfg.data_seed);

  struct Cell {
    std::string value;
    std::uint64_t seed;
    TrainConfig tc;
    std::vector<Strategy> eval_as;  // DDIM-1 reuses the DQL training
  };
  std::vector<Cell> cells;
  if (cfg.sweep_axis == "flow_ratio") {
    for (double v : {1.0, 0.75, 0.5, 0.25, 0.0})
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.family = Family::Ofql;
        tc.flow_ratio = v;
        std::ostringstream label;
        label << v;
        cells.push_back({label.str(), seed, tc, {Strategy::Ofql}});
      }
  } else if (cfg.sweep_axis == "eta") {
    for (double v : {0.001, 0.01, 0.1, 0.3, 0.5})
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.family = Family::Ofql;
        tc.eta = v;
        std::ostringstream label;
        label << v;
        cells.push_back({label.str(), seed, tc, {Strategy::Ofql}});
      }
  } else {
    for (Family f : {Family::Dql, Family::Fbrac, Family::Ofql})
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.family = f;
        std::vector<Strategy> eval_as;
        if (f == Family::Dql)
          eval_as = {Strategy::Dql, Strategy::DdimOne};
        else
          eval_as = {f == Family::Fbrac ? Strategy::Fbrac : Strategy::Ofql};
        cells.push_back({to_string(f), seed, tc, eval_as});
      }
  }
  if (cells.empty()) throw ConfigError("empty sweep");

  struct Row {
    std::string axis_value;
    std::string strategy;
    std::uint64_t seed;
    double mean_return, normalized;
  };
  std::vector<std::vector<Row>> results(cells.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    jobs.push_back([&, i] {
      const Cell& cell = cells[i];
      TrainState st = TrainState::make(cell.tc, env, cell.seed);
      train(st, ds, cfg.n_steps);
      for (Strategy strat : cell.eval_as) {
        Rng eval_rng = Rng(cell.seed).split(999);
        EvalResult res = evaluate_policy(st.actor, strat, cell.tc, env, cfg.eval_episodes,
                                         eval_rng);
        std::string value =
            cfg.sweep_axis == "strategy" ? to_string(strat) : cell.value;
        results[i].push_back({value, to_string(strat), cell.seed, res.mean_return,
                              res.normalized});
      }
    });
  }
  run_parallel(jobs);

  std::ofstream out(fs::path(cfg.out_dir) / "sweep.csv");
  if (!out) throw RunError("cannot write sweep.csv in " + cfg.out_dir);
  out << "axis,value,strategy,seed,mean_return,normalized_score\n" << std::setprecision(17);
  for (const auto& rows : results)
    for (const Row& r : rows)
      out << cfg.sweep_axis << ',' << r.axis_value << ',' << r.strategy << ',' << r.seed << ','
          << r.mean_return << ',' << r.normalized << "\n";
}

void cmd_repro(const RunConfig& cfg) {
  RunConfig toy = cfg;
  toy.out_dir = (fs::path(cfg.out_dir) / "toy").string();
  cmd_toy_study(toy);

  RunConfig ablate = cfg;
  ablate.sweep_axis = "strategy";
  ablate.out_dir = (fs::path(cfg.out_dir) / "ablate").string();
  cmd_ablate(ablate);

  RunConfig bench = cfg;
  bench.out_dir = (fs::path(cfg.out_dir) / "bench").string();
  cmd_bench_speed(bench);
}

}  // namespace flowrl

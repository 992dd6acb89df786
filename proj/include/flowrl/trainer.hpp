#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "flowrl/dataset.hpp"
#include "flowrl/ddpm.hpp"
#include "flowrl/envs.hpp"
#include "flowrl/flowmatch.hpp"
#include "flowrl/meanflow.hpp"
#include "flowrl/metrics.hpp"
#include "flowrl/nets.hpp"
#include "flowrl/optim.hpp"

namespace flowrl {

// Training families; strategies add the inference-only DDIM-1 variant of a
// trained DQL model.
enum class Family { Ofql, Dql, Fbrac };
enum class Strategy { Ofql, Dql, DdimOne, Fbrac };

std::string to_string(Family f);
std::string to_string(Strategy s);
Family parse_family(const std::string& name);
Strategy parse_strategy(const std::string& name);
Family strategy_family(Strategy s);

struct TrainConfig {
  Family family = Family::Ofql;
  int K = 5;            // DDPM chain length
  int euler_steps = 5;  // FBRAC training-time Euler steps (inference uses 1)
  double flow_ratio = 0.5;
  double eta = 0.1;
  double gamma = 0.99;
  double rho = 0.995;
  int target_period = 5;
  double lr = 3e-4;
  int batch = 256;
  int hidden = 256;
  int embed_dim = 64;
  bool max_q = false;
  int n_action_samples = 10;
  double alpha_decay = 0.99;
  double action_lo = -1.0;
  double action_hi = 1.0;
};

// alpha = eta / EMA(batch mean |min(Q1,Q2)|), the denominator a plain number
// (never on the tape), updated during critic steps.
struct AlphaStat {
  double decay = 0.99;
  double ema = 0.0;
  bool warm = false;

  void update(double batch_mean_abs_q);
  double alpha(double eta) const;
};

struct StepStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double behavior_loss = 0.0;
  double q_mean = 0.0;
  double alpha = 0.0;
};

struct TrainState {
  TrainConfig cfg;
  EnvSpec env;
  PolicyNet actor, actor_target;
  MlpParams critic1, critic2, critic1_t, critic2_t;
  AdamState opt_actor, opt_critic;
  AlphaStat alpha;
  DdpmSchedule sched;
  TimePairDistribution tdist;
  long long step = 0;
  long long nonfinite = 0;
  Rng rng;
  // Policy forwards recorded on the actor tape by the latest differentiable
  // sampler call (1 for OFQL, K for DQL, euler_steps for FBRAC).
  long last_sampler_policy_forwards = 0;

  static TrainState make(const TrainConfig& cfg, const EnvSpec& env, std::uint64_t seed);
};

struct Batch {
  Eigen::MatrixXd S, A, S2;
  Eigen::VectorXd R;
  Eigen::VectorXd done;  // 1.0 where terminal
};

Batch gather(const Dataset& ds, const std::vector<Eigen::Index>& idx);

// Inference-path sampler (no gradients). Uses the strategy's step count:
// OFQL 1, DQL K, DDIM-1 one jump, FBRAC 1 Euler step.
Eigen::MatrixXd sample_actions(const PolicyNet& net, Strategy strat, const TrainConfig& cfg,
                               const Eigen::MatrixXd& s, Rng& rng);

// Training-time sampler for Bellman targets: the family's own chain (FBRAC
// integrates euler_steps here, unlike its 1-step inference).
Eigen::MatrixXd sample_actions_training(const PolicyNet& net, Family family,
                                        const TrainConfig& cfg, const Eigen::MatrixXd& s,
                                        Rng& rng);

// Double-Q Bellman target r + gamma (1-done) min_i Q_i'(s', a'), a' from the
// target actor; with max_q, the max over n_action_samples draws.
Eigen::VectorXd critic_target(TrainState& st, const Batch& b);

// One critic Adam step on sum_i mean (y - Q_i(s,a))^2; updates the alpha
// statistic. Returns nullopt if the step was skipped as non-finite.
std::optional<double> critic_update(TrainState& st, const Batch& b);

// One actor Adam step on L_behavior - alpha * mean(min Q(s, a_pi)); a_pi
// sampled differentiably on the tape (BPTT for DQL/FBRAC, one step for OFQL).
std::optional<StepStats> actor_update(TrainState& st, const Batch& b);

// Full loop: per step one critic update, one actor update, EMA of both
// target nets every target_period steps. Metrics every log_interval steps.
void train(TrainState& st, const Dataset& ds, long n_steps, MetricsWriter* metrics = nullptr,
           long log_interval = 100);

struct EvalResult {
  double mean_return = 0.0;
  double normalized = 0.0;
  std::vector<double> episode_returns;
};

EvalResult evaluate_policy(const PolicyNet& actor, Strategy strat, const TrainConfig& cfg,
                           const EnvSpec& env, int episodes, Rng& rng);

}  // namespace flowrl

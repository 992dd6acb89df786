#pragma once

#include <Eigen/Dense>
#include <string>

#include "flowrl/rng.hpp"

namespace flowrl {

struct StepResult {
  Eigen::VectorXd s2;
  double r = 0.0;
  bool done = false;
};

struct EnvRefScores {
  double random_score = 0.0;
  double expert_score = 0.0;
};

// 100 * (score - random) / (expert - random).
double normalized_score(double score, const EnvRefScores& refs);

// 2-D navigation to g = (0.8, 0.8) with a blocking disk at the origin.
// Dynamics s' = clip(s + 0.1 a), motion into the disk truncated at its
// boundary. Reward -||s' - g||, done within 0.05 of the goal or at the
// horizon (handled by the rollout loop).
struct PointMassEnv {
  static constexpr int state_dim = 2;
  static constexpr int action_dim = 2;
  static constexpr int horizon = 40;
  static constexpr double goal_x = 0.8;
  static constexpr double goal_y = 0.8;
  static constexpr double obstacle_radius = 0.3;
  static constexpr double goal_tolerance = 0.05;

  static Eigen::VectorXd reset(Rng& rng);  // (-0.8,-0.8) + U(-0.05,0.05)^2
  static StepResult step(const Eigen::VectorXd& s, Eigen::VectorXd a);
};

// Single-state bandit, reward exp(-((a-0.6)/0.1)^2) + 0.5 exp(-((a+0.6)/0.1)^2).
struct MultimodalBandit {
  static constexpr int state_dim = 1;
  static constexpr int action_dim = 1;
  static constexpr int horizon = 1;

  static Eigen::VectorXd reset(Rng& rng);
  static StepResult step(const Eigen::VectorXd& s, Eigen::VectorXd a);
};

// Uniform descriptor over the two envs.
struct EnvSpec {
  std::string name;  // pointmass | bandit
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  EnvRefScores refs;  // frozen from 1000-episode reference runs

  static EnvSpec by_name(const std::string& name);
  Eigen::VectorXd reset(Rng& rng) const;
  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
};

// Analytic potential-field controller: goal seeking, blended with a
// tangential (cw or ccw) + radial component inside radius 0.55 of the
// obstacle. Unit-speed output. The noise-free ccw variant is the expert
// reference policy.
Eigen::VectorXd pointmass_controller(const Eigen::VectorXd& s, bool ccw);

// Behavior policies for dataset generation, by name:
//   pointmass: "mixture"  - cw/ccw controller picked per episode (50/50),
//                           N(0,0.3^2) action noise per step;
//              "random"   - uniform actions in [-1,1]^2.
//   bandit:    "bimodal"  - 60/40 mixture of N(0.6,0.1) and N(-0.6,0.1), clipped;
//              "random"   - uniform in [-1,1].
struct BehaviorPolicy {
  std::string name;
  bool episode_mode_ccw = true;  // mixture: mode drawn at episode start

  void begin_episode(Rng& rng);
  Eigen::VectorXd act(const EnvSpec& env, const Eigen::VectorXd& s, Rng& rng) const;
};

// Mean undiscounted return of `episodes` rollouts under a behavior policy.
double rollout_mean_return(const EnvSpec& env, const std::string& behavior, int episodes,
                           Rng& rng);

}  // namespace flowrl

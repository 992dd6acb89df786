#include "flowrl/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::Vector2d;
using Eigen::VectorXd;

double normalized_score(double score, const EnvRefScores& refs) {
  double span = refs.expert_score - refs.random_score;
  if (std::abs(span) < 1e-12) throw std::invalid_argument("degenerate reference scores");
  return 100.0 * (score - refs.random_score) / span;
}

VectorXd PointMassEnv::reset(Rng& rng) {
  VectorXd s(2);
  s << -0.8 + rng.uniform(-0.05, 0.05), -0.8 + rng.uniform(-0.05, 0.05);
  return s;
}

namespace {

// First tau in (0,1] where s + tau*delta crosses the obstacle circle, or 1
// if the segment stays outside.
double truncate_at_disk(const Vector2d& s, const Vector2d& delta, double radius) {
  double a = delta.squaredNorm();
  if (a < 1e-16) return 1.0;
  double b = 2.0 * s.dot(delta);
  double c = std::max(0.0, s.squaredNorm() - radius * radius);
  double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return 1.0;
  double tau = (-b - std::sqrt(disc)) / (2.0 * a);
  if (tau >= 0.0 && tau < 1.0) return tau;
  return 1.0;
}

}  // namespace

StepResult PointMassEnv::step(const VectorXd& s, VectorXd a) {
  a = a.cwiseMax(-1.0).cwiseMin(1.0);
  Vector2d pos(s(0), s(1));
  Vector2d delta = 0.1 * Vector2d(a(0), a(1));
  double tau = truncate_at_disk(pos, delta, obstacle_radius);
  Vector2d next = pos + tau * delta;
  double norm = next.norm();
  if (norm < obstacle_radius && norm > 1e-12) next *= obstacle_radius / norm;
  next = next.cwiseMax(-1.0).cwiseMin(1.0);

  Vector2d goal(goal_x, goal_y);
  double dist = (next - goal).norm();
  StepResult out;
  out.s2 = next;
  out.r = -dist;
  out.done = dist <= goal_tolerance;
  return out;
}

VectorXd MultimodalBandit::reset(Rng&) { return VectorXd::Zero(1); }

StepResult MultimodalBandit::step(const VectorXd&, VectorXd a) {
  double x = std::clamp(a(0), -1.0, 1.0);
  double r = std::exp(-std::pow((x - 0.6) / 0.1, 2)) + 0.5 * std::exp(-std::pow((x + 0.6) / 0.1, 2));
  StepResult out;
  out.s2 = VectorXd::Zero(1);
  out.r = r;
  out.done = true;
  return out;
}

EnvSpec EnvSpec::by_name(const std::string& name) {
  // Reference scores frozen from 1000-episode runs of the uniform-random and
  // expert (noise-free ccw controller) policies; see test_envs for the
  // re-derivation check.
  if (name == "pointmass")
    return {name, PointMassEnv::state_dim, PointMassEnv::action_dim, PointMassEnv::horizon,
            {-87.699795653925605, -29.250878854502211}};
  if (name == "bandit")
    return {name, MultimodalBandit::state_dim, MultimodalBandit::action_dim,
            MultimodalBandit::horizon, {0.13792546507409856, 1.0}};
  throw std::invalid_argument("unknown env: " + name);
}

VectorXd EnvSpec::reset(Rng& rng) const {
  if (name == "pointmass") return PointMassEnv::reset(rng);
  return MultimodalBandit::reset(rng);
}

StepResult EnvSpec::step(const VectorXd& s, const VectorXd& a) const {
  if (name == "pointmass") return PointMassEnv::step(s, a);
  return MultimodalBandit::step(s, a);
}

VectorXd pointmass_controller(const VectorXd& s, bool ccw) {
  Vector2d pos(s(0), s(1));
  Vector2d goal(PointMassEnv::goal_x, PointMassEnv::goal_y);
  Vector2d to_goal = (goal - pos).normalized();
  double dist = pos.norm();
  Vector2d dir = to_goal;
  if (dist < 0.55 && dist > 1e-9) {
    Vector2d radial = pos / dist;
    Vector2d tangent(-radial.y(), radial.x());
    if (!ccw) tangent = -tangent;
    double w = std::clamp((0.55 - dist) / 0.25, 0.0, 1.0);
    dir = ((1.0 - w) * to_goal + w * (0.8 * tangent + 0.6 * radial)).normalized();
  }
  VectorXd a(2);
  a << dir.x(), dir.y();
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

void BehaviorPolicy::begin_episode(Rng& rng) {
  if (name == "mixture") episode_mode_ccw = rng.uniform() < 0.5;
}

VectorXd BehaviorPolicy::act(const EnvSpec& env, const VectorXd& s, Rng& rng) const {
  if (name == "random") {
    VectorXd a(env.action_dim);
    for (int i = 0; i < env.action_dim; ++i) a(i) = rng.uniform(-1.0, 1.0);
    return a;
  }
  if (name == "mixture") {
    VectorXd a = pointmass_controller(s, episode_mode_ccw);
    for (int i = 0; i < env.action_dim; ++i) a(i) += rng.normal(0.0, 0.3);
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }
  if (name == "bimodal") {
    double mu = rng.uniform() < 0.6 ? 0.6 : -0.6;
    VectorXd a(1);
    a << std::clamp(rng.normal(mu, 0.1), -1.0, 1.0);
    return a;
  }
  if (name == "expert") {
    if (env.name == "bandit") {
      VectorXd a(1);
      a << 0.6;
      return a;
    }
    return pointmass_controller(s, /*ccw=*/true);
  }
  throw std::invalid_argument("unknown behavior: " + name);
}

double rollout_mean_return(const EnvSpec& env, const std::string& behavior, int episodes,
                           Rng& rng) {
  BehaviorPolicy pol{behavior};
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    pol.begin_episode(rng);
    VectorXd s = env.reset(rng);
    for (int h = 0; h < env.horizon; ++h) {
      StepResult res = env.step(s, pol.act(env, s, rng));
      total += res.r;
      s = res.s2;
      if (res.done) break;
    }
  }
  return total / episodes;
}

}  // namespace flowrl

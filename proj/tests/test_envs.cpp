#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <vector>

#include "dip.hpp"
#include "flowrl/dataset.hpp"
#include "flowrl/envs.hpp"

using namespace flowrl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("normalized score: anchor cases exact, degenerate refs rejected") {
  EnvRefScores refs{-10.0, 40.0};
  CHECK(normalized_score(-10.0, refs) == 0.0);
  CHECK(normalized_score(40.0, refs) == 100.0);
  CHECK(normalized_score(15.0, refs) == 50.0);
  CHECK_THROWS_AS(normalized_score(1.0, EnvRefScores{3.0, 3.0}), std::invalid_argument);
}

TEST_CASE("point-mass: zero action is a fixed point away from the obstacle") {
  VectorXd s(2);
  s << -0.7, 0.5;
  StepResult res = PointMassEnv::step(s, VectorXd::Zero(2));
  CHECK(res.s2 == s);
  CHECK(res.r == -(res.s2 - (VectorXd(2) << 0.8, 0.8).finished()).norm());
  CHECK_FALSE(res.done);
}

TEST_CASE("point-mass: motion into the disk truncates at its boundary") {
  VectorXd s(2);
  s << -0.35, 0.0;
  VectorXd a(2);
  a << 1.0, 0.0;
  StepResult res = PointMassEnv::step(s, a);
  CHECK(res.s2(0) == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(res.s2(1) == 0.0);

  // Grazing arrival exactly at the boundary is allowed.
  s << -0.4, 0.0;
  res = PointMassEnv::step(s, a);
  CHECK(res.s2(0) == doctest::Approx(-0.3).epsilon(1e-12));

  // Oversized actions are clipped defensively before integrating.
  VectorXd big(2);
  big << 50.0, 0.0;
  s << 0.5, 0.5;
  StepResult clipped = PointMassEnv::step(s, big);
  VectorXd unit(2);
  unit << 1.0, 0.0;
  CHECK(clipped.s2 == PointMassEnv::step(s, unit).s2);
}

TEST_CASE("point-mass: random play never lands inside the open disk or out of bounds") {
  Rng rng(19);
  EnvSpec env = EnvSpec::by_name("pointmass");
  for (int ep = 0; ep < 60; ++ep) {
    VectorXd s = env.reset(rng);
    for (int h = 0; h < env.horizon; ++h) {
      VectorXd a(2);
      // Half the time aim straight at the obstacle to stress the truncation.
      if (h % 2 == 0) {
        a << -s(0), -s(1);
        double n = a.norm();
        if (n > 1e-9) a /= n;
      } else {
        a << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
      }
      StepResult res = env.step(s, a);
      REQUIRE(res.s2.norm() >= PointMassEnv::obstacle_radius - 1e-9);
      REQUIRE(res.s2.cwiseAbs().maxCoeff() <= 1.0);
      REQUIRE(res.r <= 0.0);
      s = res.s2;
      if (res.done) break;
    }
  }
}

TEST_CASE("expert controller reaches the goal region within the horizon") {
  Rng rng(23);
  EnvSpec env = EnvSpec::by_name("pointmass");
  for (int ep = 0; ep < 20; ++ep) {
    BehaviorPolicy pol{"expert"};
    pol.begin_episode(rng);
    VectorXd s = env.reset(rng);
    bool reached = false;
    for (int h = 0; h < env.horizon; ++h) {
      StepResult res = env.step(s, pol.act(env, s, rng));
      s = res.s2;
      if (res.done) {
        reached = true;
        break;
      }
    }
    CHECK(reached);
  }
}

TEST_CASE("bandit: reward window and optimum") {
  EnvSpec env = EnvSpec::by_name("bandit");
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    VectorXd a(1);
    a << rng.uniform(-1.0, 1.0);
    StepResult res = env.step(env.reset(rng), a);
    CHECK(res.r > 0.0);
    CHECK(res.r <= 1.0001);
    CHECK(res.done);
  }
  VectorXd best(1);
  best << 0.6;
  CHECK(env.step(VectorXd::Zero(1), best).r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("frozen reference scores: re-derived normalized bands hold on both envs") {
  for (const char* name : {"pointmass", "bandit"}) {
    EnvSpec env = EnvSpec::by_name(name);
    CHECK(env.refs.expert_score > env.refs.random_score);
    Rng r1(2024), r2(2025);
    double rnd = normalized_score(rollout_mean_return(env, "random", 1000, r1), env.refs);
    double exp = normalized_score(rollout_mean_return(env, "expert", 1000, r2), env.refs);
    CHECK(rnd > -10.0);
    CHECK(rnd < 10.0);
    CHECK(exp > 90.0);
    CHECK(exp < 110.0);
  }
}

TEST_CASE("rollouts are deterministic given the seed") {
  EnvSpec env = EnvSpec::by_name("pointmass");
  Rng a(5), b(5);
  CHECK(rollout_mean_return(env, "mixture", 20, a) == rollout_mean_return(env, "mixture", 20, b));
}

TEST_CASE("offline dataset: determinism, bounds, episode-return consistency") {
  EnvSpec env = EnvSpec::by_name("pointmass");
  Dataset d1 = make_offline_dataset(env, "mixture", 3000, 42);
  Dataset d2 = make_offline_dataset(env, "mixture", 3000, 42);
  CHECK(d1.S == d2.S);
  CHECK(d1.A == d2.A);
  CHECK(d1.R == d2.R);
  CHECK(d1.S2 == d2.S2);
  CHECK(d1.done == d2.done);
  CHECK(d1.n() == 3000);
  CHECK(d1.A.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(d1.behavior_mean_return == d1.recompute_mean_return());
  CHECK(std::count(d1.done.begin(), d1.done.end(), 1) > 10);

  Dataset d3 = make_offline_dataset(env, "mixture", 3000, 43);
  CHECK(d1.S != d3.S);
  CHECK_THROWS_AS(make_offline_dataset(env, "mixture", 39, 1), std::invalid_argument);
}

TEST_CASE("offline dataset round-trips through the JSON-lines file") {
  EnvSpec env = EnvSpec::by_name("bandit");
  Dataset ds = make_offline_dataset(env, "bimodal", 500, 7);
  std::string path = "test_dataset_roundtrip.jsonl";
  save_dataset(ds, path);
  Dataset back = load_dataset(path);
  CHECK(back.env == ds.env);
  CHECK(back.behavior == ds.behavior);
  CHECK(back.seed == ds.seed);
  CHECK(back.state_dim == ds.state_dim);
  CHECK(back.action_dim == ds.action_dim);
  CHECK(back.behavior_mean_return == ds.behavior_mean_return);
  CHECK(back.S == ds.S);
  CHECK(back.A == ds.A);
  CHECK(back.R == ds.R);
  CHECK(back.S2 == ds.S2);
  CHECK(back.done == ds.done);
  std::remove(path.c_str());
}

TEST_CASE("mixture dataset: actions near the obstacle are bimodal") {
  EnvSpec env = EnvSpec::by_name("pointmass");
  Dataset ds = make_offline_dataset(env, "mixture", 20000, 11);
  std::vector<double> ax;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    double x = ds.S(i, 0), y = ds.S(i, 1);
    double dist = std::hypot(x, y);
    if (dist < 0.55 && x < 0.0 && y < 0.0) ax.push_back(ds.A(i, 0));
  }
  REQUIRE(ax.size() > 200);
  CHECK(count_modes(ax) >= 2);
}

TEST_CASE("bandit bimodal dataset: two action modes, 60/40 weighting") {
  EnvSpec env = EnvSpec::by_name("bandit");
  Dataset ds = make_offline_dataset(env, "bimodal", 5000, 13);
  std::vector<double> a(ds.A.data(), ds.A.data() + ds.n());
  CHECK(count_modes(a) == 2);
  int hi = 0;
  for (double x : a) hi += x > 0.0;
  CHECK(hi / 5000.0 == doctest::Approx(0.6).epsilon(0.05));
}

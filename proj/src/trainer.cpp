#include "flowrl/trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace flowrl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Family f) {
  switch (f) {
    case Family::Ofql: return "ofql";
    case Family::Dql: return "dql";
    case Family::Fbrac: return "fbrac";
  }
  return "?";
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Ofql: return "ofql";
    case Strategy::Dql: return "dql";
    case Strategy::DdimOne: return "dql-ddim1";
    case Strategy::Fbrac: return "fbrac";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "ofql") return Family::Ofql;
  if (name == "dql") return Family::Dql;
  if (name == "fbrac") return Family::Fbrac;
  throw std::invalid_argument("unknown family: " + name);
}

Strategy parse_strategy(const std::string& name) {
  if (name == "ofql") return Strategy::Ofql;
  if (name == "dql") return Strategy::Dql;
  if (name == "dql-ddim1") return Strategy::DdimOne;
  if (name == "fbrac") return Strategy::Fbrac;
  throw std::invalid_argument("unknown strategy: " + name);
}

Family strategy_family(Strategy s) {
  switch (s) {
    case Strategy::Ofql: return Family::Ofql;
    case Strategy::Dql:
    case Strategy::DdimOne: return Family::Dql;
    case Strategy::Fbrac: return Family::Fbrac;
  }
  return Family::Ofql;
}

void AlphaStat::update(double batch_mean_abs_q) {
  ema = warm ? decay * ema + (1.0 - decay) * batch_mean_abs_q : batch_mean_abs_q;
  warm = true;
}

double AlphaStat::alpha(double eta) const { return eta / std::max(ema, 1e-8); }

TrainState TrainState::make(const TrainConfig& cfg, const EnvSpec& env, std::uint64_t seed) {
  TrainState st{.cfg = cfg,
                .env = env,
                .sched = DdpmSchedule::make(cfg.K),
                .tdist = {-0.4, 1.0, cfg.flow_ratio},
                .rng = Rng(seed)};
  bool has_r = cfg.family == Family::Ofql;
  st.actor = PolicyNet::make(st.rng, env.action_dim, env.state_dim, cfg.hidden, cfg.embed_dim,
                             has_r);
  st.critic1 = MlpParams::init(st.rng, env.action_dim + env.state_dim, cfg.hidden, 1,
                               /*zero_final=*/false);
  st.critic2 = MlpParams::init(st.rng, env.action_dim + env.state_dim, cfg.hidden, 1,
                               /*zero_final=*/false);
  st.actor_target = st.actor;
  st.critic1_t = st.critic1;
  st.critic2_t = st.critic2;
  st.opt_actor.init(st.actor.mlp.params());
  std::vector<MatrixXd*> critic_params = st.critic1.params();
  for (MatrixXd* p : st.critic2.params()) critic_params.push_back(p);
  st.opt_critic.init(critic_params);
  st.alpha.decay = cfg.alpha_decay;
  return st;
}

Batch gather(const Dataset& ds, const std::vector<Index>& idx) {
  Batch b;
  Index n = static_cast<Index>(idx.size());
  b.S.resize(n, ds.state_dim);
  b.A.resize(n, ds.action_dim);
  b.S2.resize(n, ds.state_dim);
  b.R.resize(n);
  b.done.resize(n);
  for (Index i = 0; i < n; ++i) {
    b.S.row(i) = ds.S.row(idx[static_cast<std::size_t>(i)]);
    b.A.row(i) = ds.A.row(idx[static_cast<std::size_t>(i)]);
    b.S2.row(i) = ds.S2.row(idx[static_cast<std::size_t>(i)]);
    b.R(i) = ds.R(idx[static_cast<std::size_t>(i)]);
    b.done(i) = ds.done[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] ? 1.0 : 0.0;
  }
  return b;
}

MatrixXd sample_actions(const PolicyNet& net, Strategy strat, const TrainConfig& cfg,
                        const MatrixXd& s, Rng& rng) {
  ValCtx ctx;
  LiftedMlp<Val> p = lift_mlp(ctx, net.mlp);
  Val sv{s};
  switch (strat) {
    case Strategy::Ofql:
      return one_step_sample(ctx, p, net, sv, rng, cfg.action_lo, cfg.action_hi).v;
    case Strategy::Dql: {
      DdpmSchedule sch = DdpmSchedule::make(cfg.K);
      return ddpm_sample(ctx, p, net, sv, sch, rng, cfg.action_lo, cfg.action_hi).v;
    }
    case Strategy::DdimOne: {
      DdpmSchedule sch = DdpmSchedule::make(cfg.K);
      return ddim1_sample(net, s, sch, rng, cfg.action_lo, cfg.action_hi);
    }
    case Strategy::Fbrac:
      return euler_sample(ctx, p, net, sv, 1, rng, cfg.action_lo, cfg.action_hi).v;
  }
  throw std::logic_error("unreachable");
}

MatrixXd sample_actions_training(const PolicyNet& net, Family family, const TrainConfig& cfg,
                                 const MatrixXd& s, Rng& rng) {
  ValCtx ctx;
  LiftedMlp<Val> p = lift_mlp(ctx, net.mlp);
  Val sv{s};
  switch (family) {
    case Family::Ofql:
      return one_step_sample(ctx, p, net, sv, rng, cfg.action_lo, cfg.action_hi).v;
    case Family::Dql: {
      DdpmSchedule sch = DdpmSchedule::make(cfg.K);
      return ddpm_sample(ctx, p, net, sv, sch, rng, cfg.action_lo, cfg.action_hi).v;
    }
    case Family::Fbrac:
      return euler_sample(ctx, p, net, sv, cfg.euler_steps, rng, cfg.action_lo, cfg.action_hi).v;
  }
  throw std::logic_error("unreachable");
}

namespace {

VectorXd min_target_q(const TrainState& st, const MatrixXd& s2, const MatrixXd& a2) {
  ValCtx ctx;
  LiftedMlp<Val> c1 = lift_mlp(ctx, st.critic1_t);
  LiftedMlp<Val> c2 = lift_mlp(ctx, st.critic2_t);
  Val q1 = critic_forward(ctx, c1, Val{a2}, Val{s2});
  Val q2 = critic_forward(ctx, c2, Val{a2}, Val{s2});
  return q1.v.cwiseMin(q2.v).col(0);
}

}  // namespace

VectorXd critic_target(TrainState& st, const Batch& b) {
  VectorXd q_next;
  if (st.cfg.max_q) {
    for (int j = 0; j < st.cfg.n_action_samples; ++j) {
      MatrixXd a2 = sample_actions_training(st.actor_target, st.cfg.family, st.cfg, b.S2, st.rng);
      VectorXd q = min_target_q(st, b.S2, a2);
      q_next = j == 0 ? q : q_next.cwiseMax(q);
    }
  } else {
    MatrixXd a2 = sample_actions_training(st.actor_target, st.cfg.family, st.cfg, b.S2, st.rng);
    q_next = min_target_q(st, b.S2, a2);
  }
  return b.R + st.cfg.gamma * (1.0 - b.done.array()).matrix().cwiseProduct(q_next);
}

std::optional<double> critic_update(TrainState& st, const Batch& b) {
  VectorXd y = critic_target(st, b);

  Tape tape;
  TapeCtx ctx{&tape};
  LiftedMlp<Tensor> c1 = lift_mlp(ctx, st.critic1);
  LiftedMlp<Tensor> c2 = lift_mlp(ctx, st.critic2);
  Tensor a = ctx.lift(b.A);
  Tensor s = ctx.lift(b.S);
  Tensor yt = ctx.lift(y);
  Tensor q1 = critic_forward(ctx, c1, a, s);
  Tensor q2 = critic_forward(ctx, c2, a, s);
  Tensor loss = add(mean(square(sub(yt, q1))), mean(square(sub(yt, q2))));

  double loss_v = loss.value()(0, 0);
  if (!std::isfinite(loss_v)) {
    ++st.nonfinite;
    return std::nullopt;
  }
  tape.backward(loss);

  std::vector<MatrixXd*> params = st.critic1.params();
  for (MatrixXd* p : st.critic2.params()) params.push_back(p);
  std::vector<MatrixXd> grads;
  for (const Tensor* t : {&c1.W1, &c1.b1, &c1.W2, &c1.b2, &c1.W3, &c1.b3, &c2.W1, &c2.b1, &c2.W2,
                          &c2.b2, &c2.W3, &c2.b3})
    grads.push_back(t->grad());
  std::vector<const MatrixXd*> grad_ptrs;
  for (const MatrixXd& g : grads) grad_ptrs.push_back(&g);
  if (!adam_step(params, grad_ptrs, st.opt_critic, st.cfg.lr)) {
    ++st.nonfinite;
    return std::nullopt;
  }

  st.alpha.update(q1.value().cwiseMin(q2.value()).cwiseAbs().mean());
  return loss_v;
}

namespace {

Tensor behavior_loss_tape(TrainState& st, const TapeCtx& ctx, const LiftedMlp<Tensor>& p,
                          const Batch& b) {
  switch (st.cfg.family) {
    case Family::Ofql: return fbc_loss(ctx, p, st.actor, b.A, b.S, st.tdist, st.rng);
    case Family::Dql: return ddpm_bc_loss(ctx, p, st.actor, b.A, b.S, st.sched, st.rng);
    case Family::Fbrac: return cfm_loss(ctx, p, st.actor, b.A, b.S, st.rng);
  }
  throw std::logic_error("unreachable");
}

Tensor sample_actions_tape(TrainState& st, const TapeCtx& ctx, const LiftedMlp<Tensor>& p,
                           const MatrixXd& s) {
  Tensor sv = ctx.lift(s);
  switch (st.cfg.family) {
    case Family::Ofql:
      return one_step_sample(ctx, p, st.actor, sv, st.rng, st.cfg.action_lo, st.cfg.action_hi);
    case Family::Dql:
      return ddpm_sample(ctx, p, st.actor, sv, st.sched, st.rng, st.cfg.action_lo,
                         st.cfg.action_hi);
    case Family::Fbrac:
      return euler_sample(ctx, p, st.actor, sv, st.cfg.euler_steps, st.rng, st.cfg.action_lo,
                          st.cfg.action_hi);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::optional<StepStats> actor_update(TrainState& st, const Batch& b) {
  Tape tape;
  TapeCtx ctx{&tape};
  LiftedMlp<Tensor> p = lift_mlp(ctx, st.actor.mlp);

  Tensor behavior = behavior_loss_tape(st, ctx, p, b);

  long before = tape.policy_forward_count();
  Tensor a_pi = sample_actions_tape(st, ctx, p, b.S);
  st.last_sampler_policy_forwards = tape.policy_forward_count() - before;

  LiftedMlp<Tensor> c1 = lift_mlp(ctx, st.critic1);
  LiftedMlp<Tensor> c2 = lift_mlp(ctx, st.critic2);
  Tensor s = ctx.lift(b.S);
  Tensor q = minimum(critic_forward(ctx, c1, a_pi, s), critic_forward(ctx, c2, a_pi, s));
  Tensor q_mean = mean(q);

  double alpha = st.alpha.alpha(st.cfg.eta);
  Tensor loss = add(behavior, mul_scalar(q_mean, -alpha));

  StepStats stats;
  stats.behavior_loss = behavior.value()(0, 0);
  stats.q_mean = q_mean.value()(0, 0);
  stats.alpha = alpha;
  stats.actor_loss = loss.value()(0, 0);
  if (!std::isfinite(stats.actor_loss)) {
    ++st.nonfinite;
    return std::nullopt;
  }
  tape.backward(loss);

  std::vector<MatrixXd> grads;
  for (const Tensor* t : {&p.W1, &p.b1, &p.W2, &p.b2, &p.W3, &p.b3}) grads.push_back(t->grad());
  std::vector<const MatrixXd*> grad_ptrs;
  for (const MatrixXd& g : grads) grad_ptrs.push_back(&g);
  if (!adam_step(st.actor.mlp.params(), grad_ptrs, st.opt_actor, st.cfg.lr)) {
    ++st.nonfinite;
    return std::nullopt;
  }
  return stats;
}

void train(TrainState& st, const Dataset& ds, long n_steps, MetricsWriter* metrics,
           long log_interval) {
  if (ds.n() == 0) throw std::invalid_argument("empty dataset");
  StepStats last_actor;
  double last_critic = 0.0;
  for (long i = 0; i < n_steps; ++i) {
    Batch b = gather(ds, ds.sample_indices(st.cfg.batch, st.rng));
    if (auto cl = critic_update(st, b)) last_critic = *cl;
    if (auto as = actor_update(st, b)) last_actor = *as;
    ++st.step;
    if (st.step % st.cfg.target_period == 0) {
      std::vector<MatrixXd*> targets = st.actor_target.mlp.params();
      for (MatrixXd* p : st.critic1_t.params()) targets.push_back(p);
      for (MatrixXd* p : st.critic2_t.params()) targets.push_back(p);
      std::vector<const MatrixXd*> online;
      for (const MatrixXd* p : std::as_const(st.actor).mlp.params()) online.push_back(p);
      for (const MatrixXd* p : std::as_const(st.critic1).params()) online.push_back(p);
      for (const MatrixXd* p : std::as_const(st.critic2).params()) online.push_back(p);
      ema_update(targets, online, st.cfg.rho);
    }
    if (metrics && st.step % log_interval == 0)
      metrics->row(st.step, last_critic, last_actor.actor_loss, last_actor.behavior_loss,
                   last_actor.q_mean, last_actor.alpha, st.nonfinite);
  }
}

EvalResult evaluate_policy(const PolicyNet& actor, Strategy strat, const TrainConfig& cfg,
                           const EnvSpec& env, int episodes, Rng& rng) {
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    VectorXd s = env.reset(rng);
    double ret = 0.0;
    for (int h = 0; h < env.horizon; ++h) {
      MatrixXd a = sample_actions(actor, strat, cfg, s.transpose(), rng);
      StepResult res = env.step(s, a.row(0).transpose());
      ret += res.r;
      s = res.s2;
      if (res.done) break;
    }
    out.episode_returns.push_back(ret);
    out.mean_return += ret;
  }
  out.mean_return /= episodes;
  out.normalized = normalized_score(out.mean_return, env.refs);
  return out;
}

}  // namespace flowrl

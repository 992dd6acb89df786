#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "flowrl/ddpm.hpp"
#include "flowrl/nets.hpp"
#include "flowrl/rng.hpp"

namespace flowrl {

// (t, r) sampling for the average-velocity loss: two logit-normal draws,
// t = max, r = min, collapsed to r = t with probability flow_ratio.
struct TimePairDistribution {
  double mu = -0.4;
  double sigma = 1.0;
  double flow_ratio = 0.5;
};

// Draw order per pair: normal, normal, then one uniform for the collapse.
std::pair<double, double> sample_time_pair(const TimePairDistribution& dist, Rng& rng);

struct MeanflowDraw {
  Eigen::MatrixXd t;    // n x 1
  Eigen::MatrixXd r;    // n x 1, r <= t
  Eigen::MatrixXd eps;  // n x d
  Eigen::MatrixXd a_t;
  Eigen::MatrixXd v;    // eps - a
};

MeanflowDraw draw_meanflow_batch(const Eigen::MatrixXd& a0, const TimePairDistribution& dist,
                                 Rng& rng);

// A dual-callable average-velocity net: (a_t, t, r, s) -> u. Tests inject
// closed-form nets here; production wraps policy_forward.
using DualUNet =
    std::function<Dual(const Dual& a_t, const Dual& t, const Dual& r, const Dual& s)>;

// u_tgt = v - (t - r)(v . d_{a_t} u + d_t u), the total derivative evaluated
// as one JVP with tangents [v, 0, 1] on (a_t, r, t). Returns plain values:
// gradient-blocked by construction (the stop-gradient of the loss).
Eigen::MatrixXd meanflow_target_core(const DualUNet& u_net, const Eigen::MatrixXd& a_t,
                                     const Eigen::MatrixXd& v, const Eigen::MatrixXd& s,
                                     const Eigen::MatrixXd& t, const Eigen::MatrixXd& r);

// Same, forming a_t = (1-t)a + t*eps and v = eps - a first.
Eigen::MatrixXd meanflow_target_with(const DualUNet& u_net, const Eigen::MatrixXd& a0,
                                     const Eigen::MatrixXd& s, const Eigen::MatrixXd& eps,
                                     const Eigen::MatrixXd& t, const Eigen::MatrixXd& r);

Eigen::MatrixXd meanflow_target(const PolicyNet& net, const Eigen::MatrixXd& a0,
                                const Eigen::MatrixXd& s, const Eigen::MatrixXd& eps,
                                const Eigen::MatrixXd& t, const Eigen::MatrixXd& r);

Tensor fbc_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                          const MeanflowDraw& draw, const Eigen::MatrixXd& s);

// E_{t,r,eps} || u_theta(a_t, r, t; s) - sg(u_tgt) ||^2. The target is built
// from the current parameter values of `net`, which must be the ones lifted
// into `p`.
Tensor fbc_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                const Eigen::MatrixXd& a0, const Eigen::MatrixXd& s,
                const TimePairDistribution& dist, Rng& rng);

// One-step generation a = eps - u_theta(eps, r=0, t=1; s), clipped. A single
// policy forward lands on the tape, so the actor's Q-term gradient never
// propagates through a sampling chain.
template <class Ctx, class T = typename Ctx::TensorT>
T one_step_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s,
                  const Eigen::MatrixXd& eps, double lo, double hi) {
  Eigen::Index n = eps.rows();
  T e = ctx.lift(eps);
  T t = ctx.lift(Eigen::MatrixXd::Ones(n, 1));
  T r = ctx.lift(Eigen::MatrixXd::Zero(n, 1));
  T u = policy_forward(ctx, p, net, e, s, t, r);
  return clip(sub(e, u), lo, hi);
}

template <class Ctx, class T = typename Ctx::TensorT>
T one_step_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s,
                  Rng& rng, double lo, double hi) {
  Eigen::MatrixXd eps(s.rows(), net.action_dim);
  for (Eigen::Index i = 0; i < eps.rows(); ++i)
    for (int j = 0; j < net.action_dim; ++j) eps(i, j) = rng.normal();
  return one_step_sample(ctx, p, net, s, eps, lo, hi);
}

}  // namespace flowrl

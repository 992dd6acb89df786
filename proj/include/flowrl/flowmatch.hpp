#pragma once

#include <Eigen/Dense>

#include "flowrl/ddpm.hpp"
#include "flowrl/nets.hpp"
#include "flowrl/rng.hpp"

namespace flowrl {

// One minibatch draw for the conditional flow-matching loss: t ~ U[0,1],
// eps ~ N(0,I), a_t = (1-t) a + t eps, target v = eps - a.
struct CfmDraw {
  Eigen::MatrixXd t;    // n x 1
  Eigen::MatrixXd eps;  // n x d
  Eigen::MatrixXd a_t;
  Eigen::MatrixXd v;
};

CfmDraw draw_cfm_batch(const Eigen::MatrixXd& a0, Rng& rng);

Tensor cfm_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                          const CfmDraw& draw, const Eigen::MatrixXd& s);

// E_t,eps || v_theta(a_t, t; s) - (eps - a) ||^2.
Tensor cfm_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                const Eigen::MatrixXd& a0, const Eigen::MatrixXd& s, Rng& rng);

// Euler integration of da/dt = v_theta from t=1 (noise) to t=0, N uniform
// steps: a <- a - (1/N) v_theta(a, t; s). Clips at the end. Recorded on the
// tape backend (BPTT through N policy forwards).
template <class Ctx, class T = typename Ctx::TensorT>
T euler_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s, int steps,
               const Eigen::MatrixXd& prior, double lo, double hi) {
  if (steps < 1) throw std::invalid_argument("euler_sample requires steps >= 1");
  Eigen::Index n = prior.rows();
  double dt = 1.0 / steps;
  T a = ctx.lift(prior);
  for (int i = 0; i < steps; ++i) {
    double t = 1.0 - i * dt;
    T tcol = ctx.lift(Eigen::MatrixXd::Constant(n, 1, t));
    T v_hat = policy_forward(ctx, p, net, a, s, tcol);
    a = sub(a, mul_scalar(v_hat, dt));
  }
  return clip(a, lo, hi);
}

template <class Ctx, class T = typename Ctx::TensorT>
T euler_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s, int steps,
               Rng& rng, double lo, double hi) {
  Eigen::MatrixXd prior(s.rows(), net.action_dim);
  for (Eigen::Index i = 0; i < prior.rows(); ++i)
    for (int j = 0; j < net.action_dim; ++j) prior(i, j) = rng.normal();
  return euler_sample(ctx, p, net, s, steps, prior, lo, hi);
}

}  // namespace flowrl

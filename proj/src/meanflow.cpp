#include "flowrl/meanflow.hpp"

#include <algorithm>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

std::pair<double, double> sample_time_pair(const TimePairDistribution& dist, Rng& rng) {
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double u1 = sigmoid(rng.normal(dist.mu, dist.sigma));
  double u2 = sigmoid(rng.normal(dist.mu, dist.sigma));
  double t = std::max(u1, u2);
  double r = std::min(u1, u2);
  if (rng.uniform() < dist.flow_ratio) r = t;
  return {t, r};
}

MeanflowDraw draw_meanflow_batch(const MatrixXd& a0, const TimePairDistribution& dist, Rng& rng) {
  if (a0.rows() == 0) throw std::invalid_argument("empty batch");
  Eigen::Index n = a0.rows(), d = a0.cols();
  MeanflowDraw draw;
  draw.t.resize(n, 1);
  draw.r.resize(n, 1);
  draw.eps.resize(n, d);
  draw.a_t.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [t, r] = sample_time_pair(dist, rng);
    draw.t(i, 0) = t;
    draw.r(i, 0) = r;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) draw.eps(i, j) = rng.normal();
    draw.a_t.row(i) = (1.0 - draw.t(i, 0)) * a0.row(i) + draw.t(i, 0) * draw.eps.row(i);
  }
  draw.v = draw.eps - a0;
  return draw;
}

MatrixXd meanflow_target_core(const DualUNet& u_net, const MatrixXd& a_t, const MatrixXd& v,
                              const MatrixXd& s, const MatrixXd& t, const MatrixXd& r) {
  Eigen::Index n = a_t.rows(), d = a_t.cols();
  if (t.rows() != n || r.rows() != n || v.rows() != n)
    throw std::invalid_argument("meanflow_target batch sizes differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, 0) > t(i, 0)) throw std::invalid_argument("meanflow_target requires r <= t");

  // Tangents [v, 0, 1] on (a_t, r, t): one JVP evaluates the total
  // derivative d/dt u = v . d_{a_t} u + d_t u.
  Dual a_dual = dual(a_t, v);
  Dual t_dual = dual(t, MatrixXd::Ones(n, 1));
  Dual r_dual = dual(r, MatrixXd::Zero(n, 1));
  Dual s_dual = dual_constant(s);
  Dual u = u_net(a_dual, t_dual, r_dual, s_dual);

  MatrixXd u_tgt(n, d);
  for (Eigen::Index i = 0; i < n; ++i) u_tgt.row(i) = v.row(i) - (t(i, 0) - r(i, 0)) * u.d.row(i);
  return u_tgt;
}

MatrixXd meanflow_target_with(const DualUNet& u_net, const MatrixXd& a0, const MatrixXd& s,
                              const MatrixXd& eps, const MatrixXd& t, const MatrixXd& r) {
  Eigen::Index n = a0.rows(), d = a0.cols();
  MatrixXd a_t(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    a_t.row(i) = (1.0 - t(i, 0)) * a0.row(i) + t(i, 0) * eps.row(i);
  return meanflow_target_core(u_net, a_t, eps - a0, s, t, r);
}

MatrixXd meanflow_target(const PolicyNet& net, const MatrixXd& a0, const MatrixXd& s,
                         const MatrixXd& eps, const MatrixXd& t, const MatrixXd& r) {
  DualCtx ctx;
  LiftedMlp<Dual> p = lift_mlp(ctx, net.mlp);
  DualUNet u_net = [&](const Dual& a_t, const Dual& td, const Dual& rd, const Dual& sd) {
    return policy_forward(ctx, p, net, a_t, sd, td, rd);
  };
  return meanflow_target_with(u_net, a0, s, eps, t, r);
}

Tensor fbc_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                          const MeanflowDraw& draw, const MatrixXd& s) {
  DualCtx dctx;
  LiftedMlp<Dual> dp = lift_mlp(dctx, net.mlp);
  DualUNet u_net = [&](const Dual& a_t, const Dual& td, const Dual& rd, const Dual& sd) {
    return policy_forward(dctx, dp, net, a_t, sd, td, rd);
  };
  MatrixXd u_tgt = meanflow_target_core(u_net, draw.a_t, draw.v, s, draw.t, draw.r);
  Tensor u = policy_forward(ctx, p, net, ctx.lift(draw.a_t), ctx.lift(s), ctx.lift(draw.t),
                            ctx.lift(draw.r));
  return mean_row_sq_norm(sub(u, ctx.lift(u_tgt)));
}

Tensor fbc_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                const MatrixXd& a0, const MatrixXd& s, const TimePairDistribution& dist,
                Rng& rng) {
  return fbc_loss_from_draw(ctx, p, net, draw_meanflow_batch(a0, dist, rng), s);
}

}  // namespace flowrl

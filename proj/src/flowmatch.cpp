#include "flowrl/flowmatch.hpp"

#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

CfmDraw draw_cfm_batch(const MatrixXd& a0, Rng& rng) {
  if (a0.rows() == 0) throw std::invalid_argument("empty batch");
  Eigen::Index n = a0.rows(), d = a0.cols();
  CfmDraw draw;
  draw.t.resize(n, 1);
  draw.eps.resize(n, d);
  draw.a_t.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    draw.t(i, 0) = rng.uniform();
    for (Eigen::Index j = 0; j < d; ++j) draw.eps(i, j) = rng.normal();
    draw.a_t.row(i) = (1.0 - draw.t(i, 0)) * a0.row(i) + draw.t(i, 0) * draw.eps.row(i);
  }
  draw.v = draw.eps - a0;
  return draw;
}

Tensor cfm_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                          const CfmDraw& draw, const MatrixXd& s) {
  Tensor v_hat = policy_forward(ctx, p, net, ctx.lift(draw.a_t), ctx.lift(s), ctx.lift(draw.t));
  return mean_row_sq_norm(sub(v_hat, ctx.lift(draw.v)));
}

Tensor cfm_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                const MatrixXd& a0, const MatrixXd& s, Rng& rng) {
  return cfm_loss_from_draw(ctx, p, net, draw_cfm_batch(a0, rng), s);
}

}  // namespace flowrl

#include "flowrl/ddpm.hpp"

#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DdpmSchedule DdpmSchedule::make(int K, double beta_min, double beta_max) {
  if (K < 1) throw std::invalid_argument("DdpmSchedule requires K >= 1");
  DdpmSchedule sch;
  sch.K = K;
  sch.beta.resize(K);
  sch.alpha.resize(K);
  sch.alpha_bar.resize(K);
  double prod = 1.0;
  for (int k = 1; k <= K; ++k) {
    double b = 1.0 - std::exp(-beta_min / K - (beta_max - beta_min) * (2.0 * k - 1.0) / (2.0 * K * K));
    if (!(b > 0.0 && b < 1.0)) throw std::runtime_error("beta schedule left (0,1)");
    sch.beta(k - 1) = b;
    sch.alpha(k - 1) = 1.0 - b;
    prod *= sch.alpha(k - 1);
    sch.alpha_bar(k - 1) = prod;
    if (k >= 2 && !(sch.alpha_bar(k - 1) < sch.alpha_bar(k - 2)))
      throw std::runtime_error("alpha_bar must decrease strictly");
  }
  if (K >= 5 && !(sch.alpha_bar(K - 1) < 0.01))
    throw std::runtime_error("alpha_bar_K must be < 0.01 for K >= 5");
  return sch;
}

DdpmDraw draw_ddpm_batch(const MatrixXd& a0, const DdpmSchedule& sch, Rng& rng) {
  if (a0.rows() == 0) throw std::invalid_argument("empty batch");
  Eigen::Index n = a0.rows(), d = a0.cols();
  DdpmDraw draw;
  draw.k.resize(n);
  draw.t.resize(n, 1);
  draw.eps.resize(n, d);
  draw.noisy.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = rng.uniform_int(1, sch.K);
    draw.k(i) = k;
    draw.t(i, 0) = static_cast<double>(k) / sch.K;
    for (Eigen::Index j = 0; j < d; ++j) draw.eps(i, j) = rng.normal();
    double ab = sch.alpha_bar(k - 1);
    draw.noisy.row(i) = std::sqrt(ab) * a0.row(i) + std::sqrt(1.0 - ab) * draw.eps.row(i);
  }
  return draw;
}

Tensor ddpm_bc_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                              const DdpmDraw& draw, const MatrixXd& s) {
  Tensor noisy = ctx.lift(draw.noisy);
  Tensor t = ctx.lift(draw.t);
  Tensor sT = ctx.lift(s);
  Tensor eps_hat = policy_forward(ctx, p, net, noisy, sT, t);
  Tensor diff = sub(ctx.lift(draw.eps), eps_hat);
  return mean_row_sq_norm(diff);
}

Tensor ddpm_bc_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                    const MatrixXd& a0, const MatrixXd& s, const DdpmSchedule& sch, Rng& rng) {
  return ddpm_bc_loss_from_draw(ctx, p, net, draw_ddpm_batch(a0, sch, rng), s);
}

DdpmNoise draw_ddpm_noise(int n, int action_dim, int K, Rng& rng) {
  DdpmNoise noise;
  noise.prior.resize(n, action_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < action_dim; ++j) noise.prior(i, j) = rng.normal();
  for (int k = K; k >= 2; --k) {
    MatrixXd xi(n, action_dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < action_dim; ++j) xi(i, j) = rng.normal();
    noise.step.push_back(std::move(xi));
  }
  return noise;
}

MatrixXd ddim1_sample(const PolicyNet& net, const MatrixXd& s, const DdpmSchedule& sch,
                      const MatrixXd& prior, double lo, double hi) {
  ValCtx ctx;
  LiftedMlp<Val> p = lift_mlp(ctx, net.mlp);
  Val t{MatrixXd::Constant(prior.rows(), 1, 1.0)};
  Val eps_hat = policy_forward(ctx, p, net, Val{prior}, Val{s}, t);
  double ab = sch.alpha_bar(sch.K - 1);
  MatrixXd a0 = (prior - std::sqrt(1.0 - ab) * eps_hat.v) / std::sqrt(ab);
  return a0.cwiseMax(lo).cwiseMin(hi);
}

MatrixXd ddim1_sample(const PolicyNet& net, const MatrixXd& s, const DdpmSchedule& sch, Rng& rng,
                      double lo, double hi) {
  MatrixXd prior(s.rows(), net.action_dim);
  for (Eigen::Index i = 0; i < prior.rows(); ++i)
    for (int j = 0; j < net.action_dim; ++j) prior(i, j) = rng.normal();
  return ddim1_sample(net, s, sch, prior, lo, hi);
}

}  // namespace flowrl

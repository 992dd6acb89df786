#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flowrl/nets.hpp"
#include "flowrl/rng.hpp"

namespace flowrl {

// Variance-preserving schedule for small K:
// beta_k = 1 - exp(-beta_min/K - (beta_max - beta_min)(2k-1)/(2K^2)), k = 1..K.
// Gives alpha_bar_K = exp(-(beta_min + beta_max)/2) for every K.
struct DdpmSchedule {
  int K = 0;
  Eigen::VectorXd beta;       // beta_k, index k-1
  Eigen::VectorXd alpha;      // 1 - beta_k
  Eigen::VectorXd alpha_bar;  // prod_{i<=k} alpha_i

  static DdpmSchedule make(int K, double beta_min = 0.1, double beta_max = 10.0);
};

// One minibatch draw for the denoising BC loss, exposed so tests can replay
// the exact noise against injected predictors.
struct DdpmDraw {
  Eigen::VectorXi k;      // per-sample step in 1..K
  Eigen::MatrixXd t;      // n x 1, k/K (embedding time)
  Eigen::MatrixXd eps;    // n x d
  Eigen::MatrixXd noisy;  // sqrt(ab_k) a0 + sqrt(1-ab_k) eps
};

DdpmDraw draw_ddpm_batch(const Eigen::MatrixXd& a0, const DdpmSchedule& sch, Rng& rng);

// Mean over rows of the squared row norm: sum(square(diff)) / rows.
template <class T>
T mean_row_sq_norm(const T& diff) {
  return mul_scalar(sum(square(diff)), 1.0 / static_cast<double>(diff.rows()));
}

Tensor ddpm_bc_loss_from_draw(const TapeCtx& ctx, const LiftedMlp<Tensor>& p,
                              const PolicyNet& net, const DdpmDraw& draw,
                              const Eigen::MatrixXd& s);

// E_k,eps || eps - eps_theta(sqrt(ab_k) a0 + sqrt(1-ab_k) eps, k; s) ||^2.
Tensor ddpm_bc_loss(const TapeCtx& ctx, const LiftedMlp<Tensor>& p, const PolicyNet& net,
                    const Eigen::MatrixXd& a0, const Eigen::MatrixXd& s, const DdpmSchedule& sch,
                    Rng& rng);

// Noise for one reverse chain: the prior a^K plus the K-1 additive step
// noises (the final step k=1 is noiseless).
struct DdpmNoise {
  Eigen::MatrixXd prior;
  std::vector<Eigen::MatrixXd> step;  // index K-k for k = K..2
};

DdpmNoise draw_ddpm_noise(int n, int action_dim, int K, Rng& rng);

// Reverse chain a^{k-1} = (a^k - beta_k/sqrt(1-ab_k) eps_hat)/sqrt(alpha_k)
// [+ sqrt(beta_k) xi for k > 1], clipped to bounds at the end. On the tape
// backend the whole chain is recorded (BPTT through K policy forwards).
template <class Ctx, class T = typename Ctx::TensorT>
T ddpm_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s,
              const DdpmSchedule& sch, const DdpmNoise& noise, double lo, double hi) {
  Eigen::Index n = noise.prior.rows();
  T a = ctx.lift(noise.prior);
  for (int k = sch.K; k >= 1; --k) {
    T t = ctx.lift(Eigen::MatrixXd::Constant(n, 1, static_cast<double>(k) / sch.K));
    T eps_hat = policy_forward(ctx, p, net, a, s, t);
    double c1 = sch.beta(k - 1) / std::sqrt(1.0 - sch.alpha_bar(k - 1));
    double c2 = 1.0 / std::sqrt(sch.alpha(k - 1));
    a = mul_scalar(sub(a, mul_scalar(eps_hat, c1)), c2);
    if (k > 1)
      a = add(a, ctx.lift(std::sqrt(sch.beta(k - 1)) * noise.step[static_cast<std::size_t>(sch.K - k)]));
  }
  return clip(a, lo, hi);
}

template <class Ctx, class T = typename Ctx::TensorT>
T ddpm_sample(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& s,
              const DdpmSchedule& sch, Rng& rng, double lo, double hi) {
  DdpmNoise noise = draw_ddpm_noise(static_cast<int>(s.rows()), net.action_dim, sch.K, rng);
  return ddpm_sample(ctx, p, net, s, sch, noise, lo, hi);
}

// DDIM one-jump sampler on a pretrained DDPM net (inference-only baseline):
// a0 = (a^K - sqrt(1-ab_K) eps_hat(a^K, K; s)) / sqrt(ab_K).
Eigen::MatrixXd ddim1_sample(const PolicyNet& net, const Eigen::MatrixXd& s,
                             const DdpmSchedule& sch, const Eigen::MatrixXd& prior, double lo,
                             double hi);
Eigen::MatrixXd ddim1_sample(const PolicyNet& net, const Eigen::MatrixXd& s,
                             const DdpmSchedule& sch, Rng& rng, double lo, double hi);

}  // namespace flowrl

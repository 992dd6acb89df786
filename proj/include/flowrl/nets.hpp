#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flowrl/dual.hpp"
#include "flowrl/rng.hpp"
#include "flowrl/tape.hpp"
#include "flowrl/value.hpp"

namespace flowrl {

// 3-layer MLP (two Mish hidden layers, linear output). Biases are row
// vectors; batches are row-per-sample.
struct MlpParams {
  Eigen::MatrixXd W1, b1, W2, b2, W3, b3;

  // Hidden layers LeCun-uniform (bound sqrt(3)/sqrt(fan_in), std exactly
  // 1/sqrt(fan_in)); biases zero; final layer zeroed when zero_final.
  static MlpParams init(Rng& rng, int in_dim, int hidden, int out_dim, bool zero_final);

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
  int in_dim() const { return static_cast<int>(W1.rows()); }
  int out_dim() const { return static_cast<int>(W3.cols()); }
};

// Sinusoidal embedding of a time column (n x 1 -> n x dim). Frequency ladder
// f_j = 3 * 10000^(-j/(dim/2-1)), interleaved [sin(f_j t), cos(f_j t)].
// The times used here live in [0, 1]; the lowest frequency keeps the map
// injective on [0, 1]. The top of the ladder is kept moderate on purpose:
// d embed / dt scales with it, and that derivative feeds straight into the
// MeanFlow bootstrap target, so large scales destabilize u-param training.
Eigen::MatrixXd time_embed_values(const Eigen::MatrixXd& t, int dim);
// d embed / dt contracted with the tangent of t (same shapes as above).
Eigen::MatrixXd time_embed_tangent(const Eigen::MatrixXd& t, const Eigen::MatrixXd& t_dot, int dim);
// Single-time convenience.
Eigen::RowVectorXd time_embed(double t, int dim);

// Backend contexts: each supplies lift (constant injection), time_embed, and
// policy-forward instrumentation for its tensor type.
struct TapeCtx {
  using TensorT = Tensor;
  Tape* tape;
  Tensor lift(const Eigen::MatrixXd& m) const { return tape->leaf(m); }
  Tensor time_embed(const Tensor& t, int dim) const {
    // Every tape-recorded use has constant times, so the embedding enters as
    // a constant leaf; sin/cos never need to be tape primitives.
    return tape->leaf(time_embed_values(t.value(), dim));
  }
  void mark_policy_forward() const { tape->mark_policy_forward(); }
};

struct DualCtx {
  using TensorT = Dual;
  Dual lift(const Eigen::MatrixXd& m) const { return dual_constant(m); }
  Dual time_embed(const Dual& t, int dim) const {
    return Dual{time_embed_values(t.v, dim), time_embed_tangent(t.v, t.d, dim)};
  }
  void mark_policy_forward() const {}
};

struct ValCtx {
  using TensorT = Val;
  Val lift(const Eigen::MatrixXd& m) const { return Val{m}; }
  Val time_embed(const Val& t, int dim) const { return Val{time_embed_values(t.v, dim)}; }
  void mark_policy_forward() const {}
};

template <class T>
struct LiftedMlp {
  T W1, b1, W2, b2, W3, b3;
};

template <class Ctx>
LiftedMlp<typename Ctx::TensorT> lift_mlp(const Ctx& ctx, const MlpParams& p) {
  return {ctx.lift(p.W1), ctx.lift(p.b1), ctx.lift(p.W2),
          ctx.lift(p.b2), ctx.lift(p.W3), ctx.lift(p.b3)};
}

template <class T>
T mish(const T& x) {
  return mul(x, tanh(softplus(x)));
}

template <class T>
T mlp_forward(const LiftedMlp<T>& p, const T& x) {
  T h1 = mish(add_row(matmul(x, p.W1), p.b1));
  T h2 = mish(add_row(matmul(h1, p.W2), p.b2));
  return add_row(matmul(h2, p.W3), p.b3);
}

// Policy network: eps-hat / v-hat / u-hat depending on the family. Input is
// the fixed concatenation [a_t, s, embed(t)] plus embed(r) for MeanFlow.
struct PolicyNet {
  int action_dim = 0;
  int state_dim = 0;
  int embed_dim = 64;
  bool has_r = false;
  MlpParams mlp;

  static PolicyNet make(Rng& rng, int action_dim, int state_dim, int hidden, int embed_dim,
                        bool has_r);
  int in_dim() const { return action_dim + state_dim + embed_dim * (has_r ? 2 : 1); }
};

template <class Ctx, class T = typename Ctx::TensorT>
T policy_forward(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& a_t,
                 const T& s, const T& t) {
  if (net.has_r) throw std::invalid_argument("this policy expects a target time r");
  ctx.mark_policy_forward();
  T x = concat_cols(concat_cols(a_t, s), ctx.time_embed(t, net.embed_dim));
  return mlp_forward(p, x);
}

template <class Ctx, class T = typename Ctx::TensorT>
T policy_forward(const Ctx& ctx, const LiftedMlp<T>& p, const PolicyNet& net, const T& a_t,
                 const T& s, const T& t, const T& r) {
  if (!net.has_r) throw std::invalid_argument("this policy takes no target time r");
  ctx.mark_policy_forward();
  T x = concat_cols(concat_cols(concat_cols(a_t, s), ctx.time_embed(t, net.embed_dim)),
                    ctx.time_embed(r, net.embed_dim));
  return mlp_forward(p, x);
}

// Critic: input [a, s], scalar output.
template <class Ctx, class T = typename Ctx::TensorT>
T critic_forward(const Ctx& ctx, const LiftedMlp<T>& p, const T& a, const T& s) {
  (void)ctx;
  return mlp_forward(p, concat_cols(a, s));
}

}  // namespace flowrl

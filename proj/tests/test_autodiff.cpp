#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "fd.hpp"
#include "flowrl/dual.hpp"
#include "flowrl/nets.hpp"
#include "flowrl/optim.hpp"
#include "flowrl/rng.hpp"
#include "flowrl/tape.hpp"

using namespace flowrl;
using Eigen::MatrixXd;

TEST_CASE("backward: sum(x*x) gives 2x") {
  Tape tape;
  MatrixXd x(1, 3);
  x << 1, 2, 3;
  Tensor xs = tape.leaf(x);
  tape.backward(sum(mul(xs, xs)));
  MatrixXd want(1, 3);
  want << 2, 4, 6;
  CHECK(xs.grad() == want);
}

TEST_CASE("backward: constant loss leaves all grads zero") {
  Tape tape;
  Tensor x = tape.leaf(MatrixXd::Constant(2, 2, 1.5));
  Tensor c = tape.leaf(MatrixXd::Constant(1, 1, 7.0));
  tape.backward(c);
  CHECK(x.grad() == MatrixXd::Zero(2, 2));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape tape;
  Tensor x = tape.leaf(MatrixXd::Ones(2, 3));
  CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
}

TEST_CASE("backward twice accumulates additively") {
  Tape tape;
  MatrixXd x(1, 2);
  x << 1, 2;
  Tensor xs = tape.leaf(x);
  Tensor loss = sum(square(xs));
  tape.backward(loss);
  MatrixXd once = xs.grad();
  tape.backward(loss);
  CHECK(xs.grad() == 2.0 * once);
  tape.zero_grad();
  CHECK(xs.grad() == MatrixXd::Zero(1, 2));
}

namespace {

// Kitchen-sink scalar graph touching every differentiable primitive.
double sink_graph_value(Tape* tape, MatrixXd& A, MatrixXd& B, MatrixXd& row, Tensor* out_a) {
  Tape local;
  Tape& tp = tape ? *tape : local;
  Tensor a = tp.leaf(A);
  Tensor b = tp.leaf(B);
  Tensor r = tp.leaf(row);
  Tensor m = matmul(a, b);                       // 2x2 * 2x3
  Tensor h = add_row(m, r);                      // bias broadcast
  Tensor t1 = tanh(h);
  Tensor t2 = softplus(h);
  Tensor t3 = exp(mul_scalar(h, 0.1));
  Tensor t4 = log(add_scalar(square(h), 1.0));
  Tensor picked = minimum(t1, t2);
  Tensor joined = concat_cols(picked, sub(t3, t4));      // 2x6
  Tensor sliced = slice_cols(joined, 1, 4);              // 2x4
  Tensor ratio = divide(sliced, add_scalar(square(sliced), 2.0));
  Tensor clipped = clip(mul(ratio, ratio), -0.5, 0.04);
  Tensor loss = add(mean(clipped), mul_scalar(sum(ratio), 0.25));
  if (out_a) *out_a = a;
  if (!tape) return loss.value()(0, 0);
  tp.backward(loss);
  return loss.value()(0, 0);
}

}  // namespace

TEST_CASE("backward matches finite differences on every primitive") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd A(2, 2), B(2, 3), row(1, 3);
    for (auto* m : {&A, &B, &row})
      for (Eigen::Index i = 0; i < m->rows(); ++i)
        for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = rng.normal();

    Tape tape;
    Tensor a;
    sink_graph_value(&tape, A, B, row, &a);
    // Leaves were emitted in order a, b, row as ids 0, 1, 2.
    MatrixXd ga = tape.node(0).grad, gb = tape.node(1).grad, gr = tape.node(2).grad;

    auto f = [&] { return sink_graph_value(nullptr, A, B, row, nullptr); };
    CHECK(rel_err(ga, finite_diff(f, A, 1e-5)) < 1e-6);
    CHECK(rel_err(gb, finite_diff(f, B, 1e-5)) < 1e-6);
    CHECK(rel_err(gr, finite_diff(f, row, 1e-5)) < 1e-6);
  }
}

TEST_CASE("backward matches finite differences through a random MLP") {
  Rng rng(5);
  MlpParams mlp = MlpParams::init(rng, 4, 8, 2, false);
  MatrixXd x(3, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();

  auto value = [&] {
    ValCtx ctx;
    LiftedMlp<Val> p = lift_mlp(ctx, mlp);
    return mean(square(mlp_forward(p, Val{x}))).v(0, 0);
  };
  Tape tape;
  TapeCtx ctx{&tape};
  LiftedMlp<Tensor> p = lift_mlp(ctx, mlp);
  Tensor xs = tape.leaf(x);
  tape.backward(mean(square(mlp_forward(p, xs))));

  std::vector<MatrixXd*> params = mlp.params();
  std::vector<Tensor*> lifted = {&p.W1, &p.b1, &p.W2, &p.b2, &p.W3, &p.b3};
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(rel_err(lifted[i]->grad(), finite_diff(value, *params[i], 1e-5)) < 1e-6);
  CHECK(rel_err(xs.grad(), finite_diff(value, x, 1e-5)) < 1e-6);
}

TEST_CASE("jvp: x^2 at 3 with tangent 1 gives (9, 6)") {
  Dual x = dual(MatrixXd::Constant(1, 1, 3.0), MatrixXd::Constant(1, 1, 1.0));
  Dual y = square(x);
  CHECK(y.v(0, 0) == 9.0);
  CHECK(y.d(0, 0) == 6.0);
}

TEST_CASE("jvp: constants carry zero tangent") {
  Dual c = dual_constant(MatrixXd::Constant(2, 2, 4.0));
  Dual y = mul(c, c);
  CHECK(y.d == MatrixXd::Zero(2, 2));
}

TEST_CASE("jvp rejects tangent shape mismatch") {
  CHECK_THROWS_AS(dual(MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 2)), std::invalid_argument);
}

TEST_CASE("jvp matches central differences through a random MLP") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    MlpParams mlp = MlpParams::init(rng, 3, 6, 2, false);
    MatrixXd x(2, 3), v(2, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    v /= v.norm();

    DualCtx ctx;
    LiftedMlp<Dual> p = lift_mlp(ctx, mlp);
    Dual out = mlp_forward(p, dual(x, v));

    auto eval = [&](const MatrixXd& at) {
      ValCtx vctx;
      LiftedMlp<Val> vp = lift_mlp(vctx, mlp);
      return mlp_forward(vp, Val{at}).v;
    };
    double h = 1e-4;
    MatrixXd fd = (eval(x + h * v) - eval(x - h * v)) / (2.0 * h);
    CHECK(rel_err(out.d, fd) < 1e-4);
  }
}

TEST_CASE("forward and reverse mode agree on scalar losses") {
  Rng rng(33);
  MlpParams mlp = MlpParams::init(rng, 3, 5, 1, false);
  MatrixXd x(4, 3), v(4, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();

  DualCtx dctx;
  LiftedMlp<Dual> dp = lift_mlp(dctx, mlp);
  double fwd = mean(square(mlp_forward(dp, dual(x, v)))).d(0, 0);

  Tape tape;
  TapeCtx tctx{&tape};
  LiftedMlp<Tensor> tp = lift_mlp(tctx, mlp);
  Tensor xs = tape.leaf(x);
  tape.backward(mean(square(mlp_forward(tp, xs))));
  double rev = (xs.grad().array() * v.array()).sum();
  CHECK(std::abs(fwd - rev) < 1e-10);
}

TEST_CASE("stop_gradient is identity on values and blocks both modes") {
  Tape tape;
  MatrixXd x(1, 2);
  x << 2, 5;
  Tensor xs = tape.leaf(x);
  Tensor loss = sum(mul(xs, stop_gradient(xs)));
  CHECK(stop_gradient(xs).value() == x);
  tape.backward(loss);
  CHECK(xs.grad() == x);  // only the live factor contributes

  Dual xd = dual(x, MatrixXd::Ones(1, 2));
  CHECK(stop_gradient(xd).d == MatrixXd::Zero(1, 2));
}

TEST_CASE("minimum ties route gradient to the left input") {
  Tape tape;
  Tensor a = tape.leaf(MatrixXd::Constant(1, 1, 3.0));
  Tensor b = tape.leaf(MatrixXd::Constant(1, 1, 3.0));
  tape.backward(sum(minimum(a, b)));
  CHECK(a.grad()(0, 0) == 1.0);
  CHECK(b.grad()(0, 0) == 0.0);
}

TEST_CASE("clip passes gradient at the boundary, blocks outside") {
  Tape tape;
  MatrixXd x(1, 3);
  x << -2.0, 1.0, 0.3;
  Tensor xs = tape.leaf(x);
  tape.backward(sum(clip(xs, -1.0, 1.0)));
  MatrixXd want(1, 3);
  want << 0, 1, 1;  // boundary value 1.0 is in range (inclusive)
  CHECK(xs.grad() == want);
}

TEST_CASE("add_row gradient is the column-wise sum") {
  Tape tape;
  Rng rng(3);
  MatrixXd a(4, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  Tensor as = tape.leaf(a);
  Tensor row = tape.leaf(MatrixXd::Zero(1, 3));
  MatrixXd w(4, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  tape.backward(sum(mul(tape.leaf(w), add_row(as, row))));
  CHECK(row.grad() == w.colwise().sum());
  CHECK(as.grad() == w);
}

TEST_CASE("tape evaluation is deterministic and bitwise repeatable") {
  auto run = [] {
    Rng rng(77);
    MlpParams mlp = MlpParams::init(rng, 3, 8, 2, false);
    MatrixXd x(2, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    ValCtx ctx;
    LiftedMlp<Val> p = lift_mlp(ctx, mlp);
    return mlp_forward(p, Val{x}).v;
  };
  CHECK(run() == run());
}

TEST_CASE("adam: zero gradient leaves params, increments step") {
  MatrixXd p = MatrixXd::Constant(2, 2, 1.0);
  MatrixXd g = MatrixXd::Zero(2, 2);
  AdamState st;
  st.init({&p});
  CHECK(adam_step({&p}, {&g}, st, 1e-3));
  CHECK(p == MatrixXd::Constant(2, 2, 1.0));
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step with g=1 moves by about -lr") {
  MatrixXd p = MatrixXd::Constant(1, 1, 0.0);
  MatrixXd g = MatrixXd::Constant(1, 1, 1.0);
  AdamState st;
  st.init({&p});
  CHECK(adam_step({&p}, {&g}, st, 1e-3));
  // m_hat = 1, v_hat = 1 after bias correction: delta = -lr / (1 + eps).
  CHECK(p(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: beta1=beta2=0 reduces to sign-SGD") {
  MatrixXd p = MatrixXd::Constant(1, 2, 1.0);
  MatrixXd g(1, 2);
  g << 4.0, -0.25;
  AdamState st;
  st.beta1 = 0.0;
  st.beta2 = 0.0;
  st.init({&p});
  double lr = 0.01;
  MatrixXd before = p;
  for (int i = 0; i < 2; ++i) {
    MatrixXd expect = p;
    for (int j = 0; j < 2; ++j)
      expect(0, j) -= lr * g(0, j) / (std::abs(g(0, j)) + st.eps);
    CHECK(adam_step({&p}, {&g}, st, lr));
    CHECK(rel_err(p, expect) < 1e-12);
  }
  CHECK(st.step == 2);
  (void)before;
}

TEST_CASE("adam: non-finite gradient aborts without touching state") {
  MatrixXd p = MatrixXd::Constant(1, 1, 2.0);
  MatrixXd g = MatrixXd::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
  AdamState st;
  st.init({&p});
  CHECK_FALSE(adam_step({&p}, {&g}, st, 1e-3));
  CHECK(p(0, 0) == 2.0);
  CHECK(st.step == 0);
  CHECK(st.m[0] == MatrixXd::Zero(1, 1));

  g(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(adam_step({&p}, {&g}, st, 1e-3));
  CHECK(st.step == 0);
}

TEST_CASE("ema: endpoint and midpoint arithmetic") {
  MatrixXd target = MatrixXd::Constant(1, 1, 2.0);
  MatrixXd online = MatrixXd::Constant(1, 1, 4.0);
  ema_update({&target}, {&online}, 1.0);
  CHECK(target(0, 0) == 2.0);
  ema_update({&target}, {&online}, 0.0);
  CHECK(target(0, 0) == 4.0);
  target(0, 0) = 2.0;
  ema_update({&target}, {&online}, 0.5);
  CHECK(target(0, 0) == 3.0);
}

TEST_CASE("ema is a contraction toward the online params") {
  Rng rng(9);
  MatrixXd target(3, 3), online(3, 3);
  for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = rng.normal();
  for (Eigen::Index i = 0; i < online.size(); ++i) online(i) = rng.normal();
  double rho = 0.995;
  MatrixXd gap = (target - online).cwiseAbs();
  ema_update({&target}, {&online}, rho);
  MatrixXd gap2 = (target - online).cwiseAbs();
  CHECK(((gap2.array() <= rho * gap.array() + 1e-15).all()));
}

TEST_CASE("ema rejects rho outside [0,1]") {
  MatrixXd t = MatrixXd::Zero(1, 1), o = MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(ema_update({&t}, {&o}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(ema_update({&t}, {&o}, 1.5), std::invalid_argument);
}

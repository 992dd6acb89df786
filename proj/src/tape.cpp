#include "flowrl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

const MatrixXd& Tensor::value() const { return tape->node(id).val; }

MatrixXd Tensor::grad() const {
  const Node& n = tape->node(id);
  if (n.has_grad) return n.grad;
  return MatrixXd::Zero(n.val.rows(), n.val.cols());
}

Tensor Tape::emit(Node n) {
  nodes_.push_back(std::move(n));
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::leaf(const MatrixXd& v) {
  Node n;
  n.op = Op::Leaf;
  n.val = v;
  return emit(std::move(n));
}

Tensor leaf(Tape& tape, const MatrixXd& v) { return tape.leaf(v); }

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
}

namespace {

void check_same_tape(const Tensor& a, const Tensor& b) {
  if (a.tape != b.tape) throw std::invalid_argument("tensors live on different tapes");
}

void check_same_shape(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("shape mismatch between operands");
}

Tensor emit_binary(Op op, const Tensor& a, const Tensor& b, MatrixXd val) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.val = std::move(val);
  return a.tape->emit(std::move(n));
}

Tensor emit_unary(Op op, const Tensor& a, MatrixXd val, double s0 = 0.0, double s1 = 0.0) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.s0 = s0;
  n.s1 = s1;
  n.val = std::move(val);
  return a.tape->emit(std::move(n));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul inner dimensions differ");
  return emit_binary(Op::MatMul, a, b, a.value() * b.value());
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  check_same_shape(a, b);
  return emit_binary(Op::Add, a, b, a.value() + b.value());
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  check_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row expects a 1 x cols(a) row vector");
  MatrixXd v = a.value();
  v.rowwise() += row.value().row(0);
  return emit_binary(Op::AddRow, a, row, std::move(v));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  check_same_shape(a, b);
  return emit_binary(Op::Sub, a, b, a.value() - b.value());
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  check_same_shape(a, b);
  return emit_binary(Op::Mul, a, b, a.value().cwiseProduct(b.value()));
}

Tensor divide(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  check_same_shape(a, b);
  return emit_binary(Op::Div, a, b, a.value().cwiseQuotient(b.value()));
}

Tensor add_scalar(const Tensor& a, double c) {
  return emit_unary(Op::AddScalar, a, a.value().array() + c, c);
}

Tensor mul_scalar(const Tensor& a, double c) {
  return emit_unary(Op::MulScalar, a, a.value() * c, c);
}

Tensor tanh(const Tensor& a) { return emit_unary(Op::Tanh, a, a.value().array().tanh()); }

MatrixXd softplus_value(const MatrixXd& x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return x.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
}

MatrixXd sigmoid_value(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
}

Tensor softplus(const Tensor& a) { return emit_unary(Op::Softplus, a, softplus_value(a.value())); }

Tensor exp(const Tensor& a) { return emit_unary(Op::Exp, a, a.value().array().exp()); }

Tensor log(const Tensor& a) { return emit_unary(Op::Log, a, a.value().array().log()); }

Tensor square(const Tensor& a) { return emit_unary(Op::Square, a, a.value().array().square()); }

Tensor sum(const Tensor& a) {
  MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  return emit_unary(Op::Sum, a, std::move(v));
}

Tensor mean(const Tensor& a) {
  MatrixXd v(1, 1);
  v(0, 0) = a.value().mean();
  return emit_unary(Op::Mean, a, std::move(v));
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  check_same_shape(a, b);
  return emit_binary(Op::Min, a, b, a.value().cwiseMin(b.value()));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols row counts differ");
  MatrixXd v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  return emit_binary(Op::ConcatCols, a, b, std::move(v));
}

Tensor slice_cols(const Tensor& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw std::invalid_argument("slice_cols range out of bounds");
  return emit_unary(Op::SliceCols, a, a.value().middleCols(begin, count), begin, count);
}

Tensor clip(const Tensor& a, double lo, double hi) {
  return emit_unary(Op::Clip, a, a.value().cwiseMax(lo).cwiseMin(hi), lo, hi);
}

Tensor stop_gradient(const Tensor& a) { return emit_unary(Op::StopGrad, a, a.value()); }

void Tape::backward(const Tensor& loss) {
  if (loss.tape != this) throw std::invalid_argument("loss lives on a different tape");
  const Node& ln = node(loss.id);
  if (ln.val.rows() != 1 || ln.val.cols() != 1)
    throw std::invalid_argument("backward requires a scalar loss");

  // Per-pass adjoints, merged into persistent grads at the end so that
  // repeated backward calls accumulate without double counting.
  std::vector<MatrixXd> delta(static_cast<std::size_t>(loss.id) + 1);
  std::vector<bool> touched(static_cast<std::size_t>(loss.id) + 1, false);

  auto bump = [&](int id, const MatrixXd& g) {
    auto i = static_cast<std::size_t>(id);
    if (!touched[i]) {
      delta[i] = g;
      touched[i] = true;
    } else {
      delta[i] += g;
    }
  };

  delta[static_cast<std::size_t>(loss.id)] = MatrixXd::Ones(1, 1);
  touched[static_cast<std::size_t>(loss.id)] = true;

  for (int id = loss.id; id >= 0; --id) {
    auto i = static_cast<std::size_t>(id);
    if (!touched[i]) continue;
    const Node& n = node(id);
    const MatrixXd& g = delta[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
        bump(n.a, g * node(n.b).val.transpose());
        bump(n.b, node(n.a).val.transpose() * g);
        break;
      case Op::Add:
        bump(n.a, g);
        bump(n.b, g);
        break;
      case Op::AddRow:
        bump(n.a, g);
        bump(n.b, g.colwise().sum());
        break;
      case Op::Sub:
        bump(n.a, g);
        bump(n.b, -g);
        break;
      case Op::Mul:
        bump(n.a, g.cwiseProduct(node(n.b).val));
        bump(n.b, g.cwiseProduct(node(n.a).val));
        break;
      case Op::Div: {
        const MatrixXd& bv = node(n.b).val;
        bump(n.a, g.cwiseQuotient(bv));
        bump(n.b, -g.cwiseProduct(n.val).cwiseQuotient(bv));
        break;
      }
      case Op::AddScalar:
        bump(n.a, g);
        break;
      case Op::MulScalar:
        bump(n.a, g * n.s0);
        break;
      case Op::Tanh:
        bump(n.a, g.cwiseProduct((1.0 - n.val.array().square()).matrix()));
        break;
      case Op::Softplus:
        bump(n.a, g.cwiseProduct(sigmoid_value(node(n.a).val)));
        break;
      case Op::Exp:
        bump(n.a, g.cwiseProduct(n.val));
        break;
      case Op::Log:
        bump(n.a, g.cwiseQuotient(node(n.a).val));
        break;
      case Op::Square:
        bump(n.a, 2.0 * g.cwiseProduct(node(n.a).val));
        break;
      case Op::Sum:
        bump(n.a, MatrixXd::Constant(node(n.a).val.rows(), node(n.a).val.cols(), g(0, 0)));
        break;
      case Op::Mean:
        bump(n.a, MatrixXd::Constant(node(n.a).val.rows(), node(n.a).val.cols(),
                                     g(0, 0) / static_cast<double>(node(n.a).val.size())));
        break;
      case Op::Min: {
        const MatrixXd& av = node(n.a).val;
        const MatrixXd& bv = node(n.b).val;
        MatrixXd take_a = (av.array() <= bv.array()).cast<double>();
        bump(n.a, g.cwiseProduct(take_a));
        bump(n.b, g.cwiseProduct((1.0 - take_a.array()).matrix()));
        break;
      }
      case Op::ConcatCols:
        bump(n.a, g.leftCols(node(n.a).val.cols()));
        bump(n.b, g.rightCols(node(n.b).val.cols()));
        break;
      case Op::SliceCols: {
        MatrixXd ga = MatrixXd::Zero(node(n.a).val.rows(), node(n.a).val.cols());
        ga.middleCols(static_cast<int>(n.s0), static_cast<int>(n.s1)) = g;
        bump(n.a, ga);
        break;
      }
      case Op::Clip: {
        const MatrixXd& av = node(n.a).val;
        MatrixXd pass = ((av.array() >= n.s0) && (av.array() <= n.s1)).cast<double>();
        bump(n.a, g.cwiseProduct(pass));
        break;
      }
      case Op::StopGrad:
        break;
    }
  }

  for (int id = loss.id; id >= 0; --id) {
    auto i = static_cast<std::size_t>(id);
    if (!touched[i]) continue;
    Node& n = node(id);
    if (!n.has_grad) {
      n.grad = delta[i];
      n.has_grad = true;
    } else {
      n.grad += delta[i];
    }
  }
}

}  // namespace flowrl

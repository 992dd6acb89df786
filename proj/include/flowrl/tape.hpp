#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flowrl {

// Reverse-mode autodiff over dense Eigen matrices. Operations append nodes to
// an owning Tape; Tensor is a cheap (tape, node-id) handle. backward() runs a
// single descending-id sweep from the loss, visiting exactly the ancestors of
// the loss node, and adds this pass's gradients into the persistent grad
// buffers (repeated calls accumulate).

enum class Op {
  Leaf,
  MatMul,
  Add,
  AddRow,   // broadcast a 1 x n row (bias) over every row of a
  Sub,
  Mul,
  Div,
  AddScalar,
  MulScalar,
  Tanh,
  Softplus,
  Exp,
  Log,
  Square,
  Sum,      // full reduction to 1 x 1
  Mean,     // full reduction to 1 x 1
  Min,      // elementwise paired minimum; ties take the left input
  ConcatCols,
  SliceCols,
  Clip,
  StopGrad,
};

class Tape;

struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Eigen::MatrixXd& value() const;
  // Accumulated gradient; zeros if this node was not an ancestor of any
  // backward() loss so far.
  Eigen::MatrixXd grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

struct Node {
  Op op = Op::Leaf;
  int a = -1;
  int b = -1;
  double s0 = 0.0;  // op-specific scalars (AddScalar/MulScalar constant,
  double s1 = 0.0;  // Clip bounds, SliceCols range)
  Eigen::MatrixXd val;
  Eigen::MatrixXd grad;
  bool has_grad = false;
};

class Tape {
 public:
  Tensor leaf(const Eigen::MatrixXd& v);

  // loss must be 1 x 1. Gradients of all ancestors of loss are accumulated
  // additively into their grad buffers.
  void backward(const Tensor& loss);

  void zero_grad();
  std::size_t size() const { return nodes_.size(); }

  // Structural instrumentation: samplers/losses mark each policy-net forward
  // they record so tests can count net evaluations on the tape.
  void mark_policy_forward() { ++policy_forward_count_; }
  long policy_forward_count() const { return policy_forward_count_; }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Tensor emit(Node n);

 private:
  std::vector<Node> nodes_;
  long policy_forward_count_ = 0;
};

Tensor leaf(Tape& tape, const Eigen::MatrixXd& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int begin, int count);
Tensor clip(const Tensor& a, double lo, double hi);
Tensor stop_gradient(const Tensor& a);

// Numerically stable softplus on plain arrays, shared with the other backends.
Eigen::MatrixXd softplus_value(const Eigen::MatrixXd& x);
// d softplus / dx = sigmoid.
Eigen::MatrixXd sigmoid_value(const Eigen::MatrixXd& x);

}  // namespace flowrl

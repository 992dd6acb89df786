#pragma once

#include <Eigen/Dense>

#include "flowrl/tape.hpp"

namespace flowrl {

// Forward-mode dual numbers over matrices: value v and tangent d of the same
// shape. Each op propagates d_out = J_op . d_in, so one pass through a
// network yields an exact Jacobian-vector product.
struct Dual {
  Eigen::MatrixXd v;
  Eigen::MatrixXd d;

  const Eigen::MatrixXd& value() const { return v; }
  Eigen::Index rows() const { return v.rows(); }
  Eigen::Index cols() const { return v.cols(); }
};

inline Dual dual_constant(const Eigen::MatrixXd& v) {
  return Dual{v, Eigen::MatrixXd::Zero(v.rows(), v.cols())};
}

inline Dual dual(const Eigen::MatrixXd& v, const Eigen::MatrixXd& tangent) {
  if (v.rows() != tangent.rows() || v.cols() != tangent.cols())
    throw std::invalid_argument("dual tangent shape must mirror the value shape");
  return Dual{v, tangent};
}

Dual matmul(const Dual& a, const Dual& b);
Dual add(const Dual& a, const Dual& b);
Dual add_row(const Dual& a, const Dual& row);
Dual sub(const Dual& a, const Dual& b);
Dual mul(const Dual& a, const Dual& b);
Dual divide(const Dual& a, const Dual& b);
Dual add_scalar(const Dual& a, double c);
Dual mul_scalar(const Dual& a, double c);
Dual tanh(const Dual& a);
Dual softplus(const Dual& a);
Dual exp(const Dual& a);
Dual log(const Dual& a);
Dual square(const Dual& a);
Dual sum(const Dual& a);
Dual mean(const Dual& a);
Dual minimum(const Dual& a, const Dual& b);
Dual concat_cols(const Dual& a, const Dual& b);
Dual slice_cols(const Dual& a, int begin, int count);
Dual clip(const Dual& a, double lo, double hi);
Dual stop_gradient(const Dual& a);

}  // namespace flowrl

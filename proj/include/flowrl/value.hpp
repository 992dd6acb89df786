#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "flowrl/tape.hpp"

namespace flowrl {

// Plain-value backend: same operation vocabulary as Tensor/Dual with no
// derivative bookkeeping. Used for inference, Bellman targets, and anywhere
// gradients must not flow by construction.
struct Val {
  Eigen::MatrixXd v;

  const Eigen::MatrixXd& value() const { return v; }
  Eigen::Index rows() const { return v.rows(); }
  Eigen::Index cols() const { return v.cols(); }
};

inline Val matmul(const Val& a, const Val& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul inner dimensions differ");
  return {a.v * b.v};
}
inline Val add(const Val& a, const Val& b) { return {a.v + b.v}; }
inline Val add_row(const Val& a, const Val& row) {
  Eigen::MatrixXd v = a.v;
  v.rowwise() += row.v.row(0);
  return {std::move(v)};
}
inline Val sub(const Val& a, const Val& b) { return {a.v - b.v}; }
inline Val mul(const Val& a, const Val& b) { return {a.v.cwiseProduct(b.v)}; }
inline Val divide(const Val& a, const Val& b) { return {a.v.cwiseQuotient(b.v)}; }
inline Val add_scalar(const Val& a, double c) { return {(a.v.array() + c).matrix()}; }
inline Val mul_scalar(const Val& a, double c) { return {a.v * c}; }
inline Val tanh(const Val& a) { return {a.v.array().tanh().matrix()}; }
inline Val softplus(const Val& a) { return {softplus_value(a.v)}; }
inline Val exp(const Val& a) { return {a.v.array().exp().matrix()}; }
inline Val log(const Val& a) { return {a.v.array().log().matrix()}; }
inline Val square(const Val& a) { return {a.v.array().square().matrix()}; }
inline Val sum(const Val& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.v.sum();
  return {std::move(v)};
}
inline Val mean(const Val& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.v.mean();
  return {std::move(v)};
}
inline Val minimum(const Val& a, const Val& b) { return {a.v.cwiseMin(b.v)}; }
inline Val concat_cols(const Val& a, const Val& b) {
  Eigen::MatrixXd v(a.rows(), a.cols() + b.cols());
  v << a.v, b.v;
  return {std::move(v)};
}
inline Val slice_cols(const Val& a, int begin, int count) { return {a.v.middleCols(begin, count)}; }
inline Val clip(const Val& a, double lo, double hi) { return {a.v.cwiseMax(lo).cwiseMin(hi)}; }
inline Val stop_gradient(const Val& a) { return a; }

}  // namespace flowrl

#include "flowrl/dual.hpp"

#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

namespace {

void check_same_shape(const Dual& a, const Dual& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("shape mismatch between operands");
}

}  // namespace

Dual matmul(const Dual& a, const Dual& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul inner dimensions differ");
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}

Dual add(const Dual& a, const Dual& b) {
  check_same_shape(a, b);
  return {a.v + b.v, a.d + b.d};
}

Dual add_row(const Dual& a, const Dual& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row expects a 1 x cols(a) row vector");
  MatrixXd v = a.v;
  v.rowwise() += row.v.row(0);
  MatrixXd d = a.d;
  d.rowwise() += row.d.row(0);
  return {std::move(v), std::move(d)};
}

Dual sub(const Dual& a, const Dual& b) {
  check_same_shape(a, b);
  return {a.v - b.v, a.d - b.d};
}

Dual mul(const Dual& a, const Dual& b) {
  check_same_shape(a, b);
  return {a.v.cwiseProduct(b.v), a.d.cwiseProduct(b.v) + a.v.cwiseProduct(b.d)};
}

Dual divide(const Dual& a, const Dual& b) {
  check_same_shape(a, b);
  MatrixXd v = a.v.cwiseQuotient(b.v);
  return {v, (a.d - v.cwiseProduct(b.d)).cwiseQuotient(b.v)};
}

Dual add_scalar(const Dual& a, double c) { return {(a.v.array() + c).matrix(), a.d}; }

Dual mul_scalar(const Dual& a, double c) { return {a.v * c, a.d * c}; }

Dual tanh(const Dual& a) {
  MatrixXd v = a.v.array().tanh();
  return {v, a.d.cwiseProduct((1.0 - v.array().square()).matrix())};
}

Dual softplus(const Dual& a) { return {softplus_value(a.v), a.d.cwiseProduct(sigmoid_value(a.v))}; }

Dual exp(const Dual& a) {
  MatrixXd v = a.v.array().exp();
  return {v, a.d.cwiseProduct(v)};
}

Dual log(const Dual& a) { return {a.v.array().log().matrix(), a.d.cwiseQuotient(a.v)}; }

Dual square(const Dual& a) { return {a.v.array().square().matrix(), 2.0 * a.d.cwiseProduct(a.v)}; }

Dual sum(const Dual& a) {
  MatrixXd v(1, 1), d(1, 1);
  v(0, 0) = a.v.sum();
  d(0, 0) = a.d.sum();
  return {std::move(v), std::move(d)};
}

Dual mean(const Dual& a) {
  MatrixXd v(1, 1), d(1, 1);
  v(0, 0) = a.v.mean();
  d(0, 0) = a.d.mean();
  return {std::move(v), std::move(d)};
}

Dual minimum(const Dual& a, const Dual& b) {
  check_same_shape(a, b);
  MatrixXd take_a = (a.v.array() <= b.v.array()).cast<double>();
  return {a.v.cwiseMin(b.v),
          take_a.cwiseProduct(a.d) + (1.0 - take_a.array()).matrix().cwiseProduct(b.d)};
}

Dual concat_cols(const Dual& a, const Dual& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols row counts differ");
  MatrixXd v(a.rows(), a.cols() + b.cols()), d(a.rows(), a.cols() + b.cols());
  v << a.v, b.v;
  d << a.d, b.d;
  return {std::move(v), std::move(d)};
}

Dual slice_cols(const Dual& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw std::invalid_argument("slice_cols range out of bounds");
  return {a.v.middleCols(begin, count), a.d.middleCols(begin, count)};
}

Dual clip(const Dual& a, double lo, double hi) {
  MatrixXd pass = ((a.v.array() >= lo) && (a.v.array() <= hi)).cast<double>();
  return {a.v.cwiseMax(lo).cwiseMin(hi), a.d.cwiseProduct(pass)};
}

Dual stop_gradient(const Dual& a) { return {a.v, MatrixXd::Zero(a.rows(), a.cols())}; }

}  // namespace flowrl

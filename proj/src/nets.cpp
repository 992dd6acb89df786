#include "flowrl/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

namespace {

MatrixXd lecun_uniform(Rng& rng, int rows, int cols) {
  double bound = std::sqrt(3.0) / std::sqrt(static_cast<double>(rows));
  MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  return w;
}

Eigen::VectorXd ladder(int half) {
  Eigen::VectorXd f(half);
  if (half == 1) {
    f(0) = 3.0;
    return f;
  }
  for (int j = 0; j < half; ++j)
    f(j) = 3.0 * std::pow(10000.0, -static_cast<double>(j) / (half - 1));
  return f;
}

}  // namespace

MlpParams MlpParams::init(Rng& rng, int in_dim, int hidden, int out_dim, bool zero_final) {
  if (in_dim <= 0 || hidden <= 0 || out_dim <= 0)
    throw std::invalid_argument("init requires positive layer dims");
  MlpParams p;
  p.W1 = lecun_uniform(rng, in_dim, hidden);
  p.b1 = MatrixXd::Zero(1, hidden);
  p.W2 = lecun_uniform(rng, hidden, hidden);
  p.b2 = MatrixXd::Zero(1, hidden);
  p.W3 = zero_final ? MatrixXd::Zero(hidden, out_dim) : lecun_uniform(rng, hidden, out_dim);
  p.b3 = MatrixXd::Zero(1, out_dim);
  return p;
}

std::vector<MatrixXd*> MlpParams::params() { return {&W1, &b1, &W2, &b2, &W3, &b3}; }

std::vector<const MatrixXd*> MlpParams::params() const { return {&W1, &b1, &W2, &b2, &W3, &b3}; }

MatrixXd time_embed_values(const MatrixXd& t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time_embed dim must be even and >= 2");
  if (t.cols() != 1) throw std::invalid_argument("time_embed expects an n x 1 column");
  int half = dim / 2;
  Eigen::VectorXd f = ladder(half);
  MatrixXd out(t.rows(), dim);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < half; ++j) {
      double ft = f(j) * t(i, 0);
      out(i, 2 * j) = std::sin(ft);
      out(i, 2 * j + 1) = std::cos(ft);
    }
  }
  return out;
}

MatrixXd time_embed_tangent(const MatrixXd& t, const MatrixXd& t_dot, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time_embed dim must be even and >= 2");
  int half = dim / 2;
  Eigen::VectorXd f = ladder(half);
  MatrixXd out(t.rows(), dim);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < half; ++j) {
      double ft = f(j) * t(i, 0);
      out(i, 2 * j) = f(j) * std::cos(ft) * t_dot(i, 0);
      out(i, 2 * j + 1) = -f(j) * std::sin(ft) * t_dot(i, 0);
    }
  }
  return out;
}

Eigen::RowVectorXd time_embed(double t, int dim) {
  MatrixXd col(1, 1);
  col(0, 0) = t;
  return time_embed_values(col, dim).row(0);
}

PolicyNet PolicyNet::make(Rng& rng, int action_dim, int state_dim, int hidden, int embed_dim,
                          bool has_r) {
  PolicyNet net;
  net.action_dim = action_dim;
  net.state_dim = state_dim;
  net.embed_dim = embed_dim;
  net.has_r = has_r;
  net.mlp = MlpParams::init(rng, net.in_dim(), hidden, action_dim, /*zero_final=*/true);
  return net;
}

}  // namespace flowrl

#include "flowrl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

void AdamState::init(const std::vector<MatrixXd*>& params) {
  m.clear();
  v.clear();
  for (const MatrixXd* p : params) {
    m.push_back(MatrixXd::Zero(p->rows(), p->cols()));
    v.push_back(MatrixXd::Zero(p->rows(), p->cols()));
  }
  step = 0;
}

bool adam_step(const std::vector<MatrixXd*>& params, const std::vector<const MatrixXd*>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step parameter/gradient/state counts differ");
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step requires lr > 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols())
      throw std::invalid_argument("adam_step gradient shape mismatch");
    if (!grads[i]->allFinite()) return false;
  }

  state.step += 1;
  double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const MatrixXd& g = *grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    MatrixXd m_hat = state.m[i] / c1;
    MatrixXd v_hat = state.v[i] / c2;
    params[i]->array() -= lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
  }
  return true;
}

void ema_update(const std::vector<MatrixXd*>& target, const std::vector<const MatrixXd*>& online,
                double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("ema_update requires rho in [0,1]");
  if (target.size() != online.size())
    throw std::invalid_argument("ema_update parameter counts differ");
  for (std::size_t i = 0; i < target.size(); ++i)
    *target[i] = rho * *target[i] + (1.0 - rho) * *online[i];
}

}  // namespace flowrl

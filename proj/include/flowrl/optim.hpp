#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flowrl {

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const std::vector<Eigen::MatrixXd*>& params);
};

// Bias-corrected Adam over a parameter list. If any gradient component is
// non-finite the whole update is aborted: parameters and moments untouched,
// step not incremented, returns false (callers count these in metrics).
bool adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state, double lr);

// Elementwise theta' <- rho * theta' + (1 - rho) * theta.
void ema_update(const std::vector<Eigen::MatrixXd*>& target,
                const std::vector<const Eigen::MatrixXd*>& online, double rho);

}  // namespace flowrl

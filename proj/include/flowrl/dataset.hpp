#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flowrl/envs.hpp"
#include "flowrl/rng.hpp"

namespace flowrl {

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s2;
  bool done = false;
};

// Columnar transition store (row per transition) with generation metadata.
struct Dataset {
  std::string env;
  std::string behavior;
  std::uint64_t seed = 0;
  int state_dim = 0;
  int action_dim = 0;
  double behavior_mean_return = 0.0;  // over done-terminated episode segments

  Eigen::MatrixXd S, A, S2;
  Eigen::VectorXd R;
  std::vector<std::uint8_t> done;

  Eigen::Index n() const { return S.rows(); }
  Transition row(Eigen::Index i) const;

  // Mean return over done-terminated segments, recomputed from the stored
  // transitions; equals behavior_mean_return exactly.
  double recompute_mean_return() const;

  // Uniform minibatch of row indices.
  std::vector<Eigen::Index> sample_indices(int batch, Rng& rng) const;
};

// Rolls `behavior` in `env` until exactly n_transitions are stored (the last
// episode may be cut mid-flight; episode boundaries are marked by done).
Dataset make_offline_dataset(const EnvSpec& env, const std::string& behavior,
                             Eigen::Index n_transitions, std::uint64_t seed);

// JSON-lines: one header object, then one object per transition. Doubles
// round-trip losslessly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace flowrl

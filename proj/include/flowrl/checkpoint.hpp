#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "flowrl/trainer.hpp"

namespace flowrl {

// Versioned JSON checkpoint of named flat arrays with shapes; doubles
// round-trip losslessly. Stores the six network parameter sets (actor and
// critics plus their EMA targets), not optimizer moments: reproducibility is
// rerun-from-manifest, not mid-run resume.
using NamedArrays = std::vector<std::pair<std::string, Eigen::MatrixXd*>>;
using ConstNamedArrays = std::vector<std::pair<std::string, const Eigen::MatrixXd*>>;

ConstNamedArrays checkpoint_arrays(const TrainState& st);
NamedArrays checkpoint_arrays(TrainState& st);

void save_checkpoint(const TrainState& st, const std::string& path);

// Loads into an architecture-matching state. A shape mismatch throws with
// both shape lists (expected and found) in the message.
void load_checkpoint(TrainState& st, const std::string& path);

}  // namespace flowrl

#pragma once

#include <string>
#include <vector>

#include "flowrl/trainer.hpp"

namespace flowrl {

// Wall-clock summary over timed repetitions; the first 10% are treated as
// warmup and excluded. Reports median and IQR.
struct TimingSummary {
  double median_s = 0.0;
  double iqr_s = 0.0;
  int timed = 0;
};

TimingSummary summarize_times(std::vector<double> seconds);

// Decision frequency: action batches generated per second by the strategy's
// inference sampler (1/median batch time).
struct DecisionTiming {
  std::string label;
  int nfe = 0;
  int batch = 0;
  TimingSummary t;
  double batches_per_s = 0.0;
  double actions_per_s = 0.0;
};

DecisionTiming measure_decision_frequency(const PolicyNet& actor, Strategy strat,
                                          const TrainConfig& cfg, const Eigen::MatrixXd& states,
                                          int n_batches, Rng& rng);

// Median wall-clock per full training step (critic + actor + EMA).
TimingSummary measure_train_step(TrainState& st, const Dataset& ds, int n_steps);

}  // namespace flowrl

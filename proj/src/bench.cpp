#include "flowrl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace flowrl {

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  double pos = p * (sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

TimingSummary summarize_times(std::vector<double> seconds) {
  if (seconds.empty()) throw std::invalid_argument("no timings");
  std::size_t warmup = seconds.size() / 10;
  seconds.erase(seconds.begin(), seconds.begin() + static_cast<long>(warmup));
  std::sort(seconds.begin(), seconds.end());
  TimingSummary s;
  s.timed = static_cast<int>(seconds.size());
  s.median_s = percentile(seconds, 0.5);
  s.iqr_s = percentile(seconds, 0.75) - percentile(seconds, 0.25);
  return s;
}

DecisionTiming measure_decision_frequency(const PolicyNet& actor, Strategy strat,
                                          const TrainConfig& cfg, const Eigen::MatrixXd& states,
                                          int n_batches, Rng& rng) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_batches));
  for (int i = 0; i < n_batches; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Eigen::MatrixXd a = sample_actions(actor, strat, cfg, states, rng);
    auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  DecisionTiming out;
  out.label = to_string(strat);
  out.nfe = strat == Strategy::Dql ? cfg.K : 1;
  out.batch = static_cast<int>(states.rows());
  out.t = summarize_times(std::move(times));
  out.batches_per_s = 1.0 / out.t.median_s;
  out.actions_per_s = out.batches_per_s * out.batch;
  return out;
}

TimingSummary measure_train_step(TrainState& st, const Dataset& ds, int n_steps) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    train(st, ds, 1);
    auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return summarize_times(std::move(times));
}

}  // namespace flowrl

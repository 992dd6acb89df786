#pragma once

#include <fstream>
#include <string>

namespace flowrl {

// Append-only training metrics CSV with a fixed schema.
class MetricsWriter {
 public:
  static constexpr const char* header =
      "step,critic_loss,actor_loss,behavior_loss,q_mean,alpha,nonfinite_count";

  explicit MetricsWriter(const std::string& path);

  void row(long long step, double critic_loss, double actor_loss, double behavior_loss,
           double q_mean, double alpha, long long nonfinite_count);

 private:
  std::ofstream out_;
};

}  // namespace flowrl

#include "flowrl/metrics.hpp"

#include <iomanip>
#include <stdexcept>

namespace flowrl {

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write metrics file: " + path);
  out_ << header << "\n";
}

void MetricsWriter::row(long long step, double critic_loss, double actor_loss,
                        double behavior_loss, double q_mean, double alpha,
                        long long nonfinite_count) {
  out_ << step << ',' << std::setprecision(17) << critic_loss << ',' << actor_loss << ','
       << behavior_loss << ',' << q_mean << ',' << alpha << ',' << nonfinite_count << "\n";
  out_.flush();
}

}  // namespace flowrl

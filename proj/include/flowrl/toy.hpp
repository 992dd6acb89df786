#pragma once

#include <Eigen/Dense>
#include <string>

#include "flowrl/rng.hpp"

namespace flowrl {

// 2-D desk-scale target densities. All samplers are deterministic given the
// rng state and keep every sample inside the declared support box.
struct ToyDensity {
  std::string name;     // crescent | spiral | checkerboard
  double support = 2.0;  // samples lie in [-support, support]^2

  static ToyDensity by_name(const std::string& name);
};

// crescent: radius U[0.5,1] plus N(0,0.1^2) clamped to +-3sigma and floored
//   at the inner exclusion 0.5, angle U[pi/4, 7pi/4].
// spiral: Archimedean arm phi = 3pi sqrt(U), radius phi * 1.8/(3pi), plus
//   isotropic N(0,0.1^2) noise clamped at +-3sigma per component.
// checkerboard: uniform over the 32 even-parity cells of the 8x8 grid on
//   [-2,2]^2 (cell side 0.5).
Eigen::MatrixXd sample_density(const ToyDensity& d, int n, Rng& rng);
Eigen::MatrixXd sample_density(const ToyDensity& d, int n, std::uint64_t seed);

// Energy-distance V-statistic 2 E||a-b|| - E||a-a'|| - E||b-b'|| with plain
// deterministic O(n^2) loops (row-major accumulation) so an independently
// written brute-force oracle can match it exactly.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace flowrl

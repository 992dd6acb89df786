#include "flowrl/toy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowrl {

using Eigen::MatrixXd;

ToyDensity ToyDensity::by_name(const std::string& name) {
  if (name == "crescent") return {name, 1.3};
  if (name == "spiral") return {name, 2.1};
  if (name == "checkerboard") return {name, 2.0};
  throw std::invalid_argument("unknown density: " + name);
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNoiseSigma = 0.1;

double clamp3(double x) { return std::clamp(x, -3.0 * kNoiseSigma, 3.0 * kNoiseSigma); }

void sample_crescent(MatrixXd& out, Rng& rng) {
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double radius = std::max(0.5, rng.uniform(0.5, 1.0) + clamp3(rng.normal(0.0, kNoiseSigma)));
    double angle = rng.uniform(kPi / 4.0, 7.0 * kPi / 4.0);
    out(i, 0) = radius * std::cos(angle);
    out(i, 1) = radius * std::sin(angle);
  }
}

void sample_spiral(MatrixXd& out, Rng& rng) {
  double scale = 1.8 / (3.0 * kPi);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double phi = 3.0 * kPi * std::sqrt(rng.uniform());
    out(i, 0) = scale * phi * std::cos(phi) + clamp3(rng.normal(0.0, kNoiseSigma));
    out(i, 1) = scale * phi * std::sin(phi) + clamp3(rng.normal(0.0, kNoiseSigma));
  }
}

void sample_checkerboard(MatrixXd& out, Rng& rng) {
  // Even-parity cells (i + j even), 4 per row of the 8x8 grid.
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    int idx = rng.uniform_int(0, 31);
    int i = idx / 4;
    int j = 2 * (idx % 4) + (i % 2);
    out(k, 0) = -2.0 + 0.5 * (i + rng.uniform());
    out(k, 1) = -2.0 + 0.5 * (j + rng.uniform());
  }
}

}  // namespace

MatrixXd sample_density(const ToyDensity& d, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_density requires n >= 1");
  MatrixXd out(n, 2);
  if (d.name == "crescent")
    sample_crescent(out, rng);
  else if (d.name == "spiral")
    sample_spiral(out, rng);
  else if (d.name == "checkerboard")
    sample_checkerboard(out, rng);
  else
    throw std::invalid_argument("unknown density: " + d.name);
  return out;
}

MatrixXd sample_density(const ToyDensity& d, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_density(d, n, rng);
}

namespace {

double mean_cross_distance(const MatrixXd& a, const MatrixXd& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) acc += (a.row(i) - b.row(j)).norm();
  return acc / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance needs samples");
  if (a.cols() != b.cols()) throw std::invalid_argument("energy_distance dims differ");
  return 2.0 * mean_cross_distance(a, b) - mean_cross_distance(a, a) - mean_cross_distance(b, b);
}

}  // namespace flowrl

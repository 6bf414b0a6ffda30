#include "dts/stats.hpp"

#include <stdexcept>

namespace dts {

Vec sample_mean(const Mat& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("no samples");
  return samples.colwise().mean().transpose();
}

Mat sample_cov(const Mat& samples) {
  const Index n = samples.rows();
  if (n < 2) throw std::invalid_argument("need at least two samples for covariance");
  const Mat centered = samples.rowwise() - samples.colwise().mean();
  return (centered.transpose() * centered) / static_cast<Real>(n - 1);
}

namespace {

// Mean pairwise distance between the rows of two sets; skip_diagonal for the
// within-set case (i != j pairs only).
Real mean_pairwise(const Mat& a, const Mat& b, bool skip_diagonal) {
  const Index n = a.rows();
  const Index m = b.rows();
  Real total = 0.0;
  for (Index i = 0; i < n; ++i) {
    total += (b.rowwise() - a.row(i)).rowwise().norm().sum();
  }
  if (skip_diagonal) {
    const Real denom = static_cast<Real>(n) * static_cast<Real>(m - 1);
    return total / denom;  // diagonal terms are zero, only the count changes
  }
  return total / (static_cast<Real>(n) * static_cast<Real>(m));
}

}  // namespace

Real energy_distance_sq(const Mat& xs, const Mat& ys) {
  if (xs.cols() != ys.cols()) throw std::invalid_argument("sample dimension mismatch");
  if (xs.rows() < 2 || ys.rows() < 2) throw std::invalid_argument("need at least two samples");
  const Real cross = mean_pairwise(xs, ys, false);
  const Real within_x = mean_pairwise(xs, xs, true);
  const Real within_y = mean_pairwise(ys, ys, true);
  return 2.0 * cross - within_x - within_y;
}

}  // namespace dts

#pragma once

#include "dts/types.hpp"

namespace dts {

// Column means of a sample matrix (rows are samples).
Vec sample_mean(const Mat& samples);

// Unbiased sample covariance (rows are samples).
Mat sample_cov(const Mat& samples);

// Squared energy distance 2 E|x-y| - E|x-x'| - E|y-y'| between two sample
// sets (rows are points). O(n^2), intended for desk-scale two-sample checks.
Real energy_distance_sq(const Mat& xs, const Mat& ys);

}  // namespace dts

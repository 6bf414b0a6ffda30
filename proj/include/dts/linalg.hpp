#pragma once

#include <Eigen/Cholesky>

#include "dts/rng.hpp"
#include "dts/types.hpp"

namespace dts {

// Symmetric positive-definite matrix with cached Cholesky factor and inverse.
// Construction symmetrizes, then retries the factorization once with a small
// jitter on the diagonal before giving up.
class Covariance {
 public:
  Covariance() = default;
  explicit Covariance(Mat m, Real jitter = 1e-10);
  static Covariance isotropic(Index d, Real sigma2);
  // Eigenvalue-clamped construction for matrices that may be indefinite
  // (misspecified-prior perturbations); floor applies to eigenvalues.
  static Covariance psd_projected(const Mat& m, Real floor = 1e-8);

  Index dim() const { return matrix_.rows(); }
  const Mat& matrix() const { return matrix_; }
  const Mat& precision() const { return precision_; }
  const Eigen::LLT<Mat>& llt() const { return llt_; }

 private:
  Mat matrix_;
  Mat precision_;
  Eigen::LLT<Mat> llt_;
};

struct Gaussian {
  Vec mean;
  Covariance cov;
};

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

// mean + L z with LL^T the covariance Cholesky factor.
Vec mvn_sample(const Vec& mean, const Covariance& cov, Rng& rng);

// Symmetrized Cholesky-based inverse with the same one-jitter retry policy
// as Covariance construction.
Mat chol_inverse(const Mat& m, Real jitter = 1e-10);

}  // namespace dts

#include "dts/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace dts {

Covariance::Covariance(Mat m, Real jitter) {
  if (m.rows() != m.cols()) throw std::invalid_argument("covariance must be square");
  matrix_ = symmetrized(m);
  llt_.compute(matrix_);
  if (llt_.info() != Eigen::Success) {
    matrix_ += jitter * Mat::Identity(matrix_.rows(), matrix_.cols());
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("covariance not positive definite after jitter");
  }
  precision_ = symmetrized(llt_.solve(Mat::Identity(matrix_.rows(), matrix_.cols())));
}

Covariance Covariance::isotropic(Index d, Real sigma2) {
  return Covariance(Mat(sigma2 * Mat::Identity(d, d)));
}

Covariance Covariance::psd_projected(const Mat& m, Real floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  Vec vals = es.eigenvalues().cwiseMax(floor);
  return Covariance(es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose());
}

Vec mvn_sample(const Vec& mean, const Covariance& cov, Rng& rng) {
  return mean + cov.llt().matrixL() * rng.normal_vec(cov.dim());
}

Mat chol_inverse(const Mat& m, Real jitter) {
  Mat sym = symmetrized(m);
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() != Eigen::Success) {
    sym += jitter * Mat::Identity(m.rows(), m.cols());
    llt.compute(sym);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("matrix not positive definite after jitter");
  }
  return symmetrized(llt.solve(Mat::Identity(m.rows(), m.cols())));
}

}  // namespace dts

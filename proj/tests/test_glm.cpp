/// Likelihood-summary unit tests: linear-Gaussian and logistic fits, the
/// damped Newton solver, and agreement with a golden-section reference.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dts/glm.hpp"
#include "oracles.hpp"

using namespace dts;

namespace {

ObservationLog log_1d(const std::vector<Real>& xs, const std::vector<Real>& ys) {
  ObservationLog log(1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Vec x(1);
    x << xs[i];
    log.append(x, ys[i]);
  }
  return log;
}

}  // namespace

TEST_CASE("linear-Gaussian fit solves the normal equations") {
  const ObservationLog log = log_1d({1.0, 2.0}, {2.0, 2.0});
  const ActionStats stats = fit(log, RewardModel::linear_gaussian(1.0), 0.0);
  CHECK(stats.b_hat[0] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(stats.g_hat(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(stats.count == 2);
}

TEST_CASE("empty log yields zero statistics") {
  const ObservationLog log(2);
  for (const RewardModel& model :
       {RewardModel::linear_gaussian(1.0), RewardModel::logistic()}) {
    const ActionStats stats = fit(log, model, 0.0);
    CHECK(stats.b_hat.isZero(0.0));
    CHECK(stats.g_hat.isZero(0.0));
    CHECK(stats.count == 0);
  }
}

TEST_CASE("symmetric logistic labels force a zero MLE") {
  const ObservationLog log = log_1d({1.0, 1.0}, {1.0, 0.0});
  const ActionStats stats = fit(log, RewardModel::logistic(), 0.0);
  CHECK(std::abs(stats.b_hat[0]) < 1e-10);
  CHECK(stats.g_hat(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("newton solves a quadratic in one step") {
  Vec c(2);
  c << 3.0, -1.0;
  const LossOracle oracle = [&](const Vec& theta, Real& loss, Vec& grad, Mat& hess) {
    loss = 0.5 * (theta - c).squaredNorm();
    grad = theta - c;
    hess = Mat::Identity(2, 2);
  };
  const NewtonResult res = newton_solve(oracle, Vec::Zero(2));
  CHECK(res.converged);
  CHECK(res.iterations <= 2);
  CHECK((res.point - c).norm() < 1e-12);
}

TEST_CASE("newton returns an optimal init unchanged") {
  Vec c(1);
  c << 2.0;
  const LossOracle oracle = [&](const Vec& theta, Real& loss, Vec& grad, Mat& hess) {
    loss = 0.5 * (theta - c).squaredNorm();
    grad = theta - c;
    hess = Mat::Identity(1, 1);
  };
  const NewtonResult res = newton_solve(oracle, c);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.point == c);
}

TEST_CASE("separable logistic data with ridge has a finite stationary point") {
  const ObservationLog log = log_1d({1.0}, {1.0});
  const Real ridge = 1e-4;
  const ActionStats stats = fit(log, RewardModel::logistic(), ridge);
  CHECK(stats.converged);
  CHECK(std::isfinite(stats.b_hat[0]));
  // Penalized gradient: ridge b - (y - sigmoid(b)) x.
  const Real b = stats.b_hat[0];
  const Real grad = ridge * b - (1.0 - sigmoid(b));
  CHECK(std::abs(grad) <= 1e-8);
  const Real oracle_b = testing::logistic_mle_1d({1.0}, {1.0}, ridge);
  CHECK(b == doctest::Approx(oracle_b).epsilon(1e-4));
}

TEST_CASE("logistic fits match the golden-section reference") {
  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(20));
    std::vector<Real> xs, ys;
    const Real true_b = rng.uniform(-2.0, 2.0);
    for (int i = 0; i < n; ++i) {
      const Real x = rng.uniform(-1.0, 1.0);
      xs.push_back(x);
      ys.push_back(rng.uniform01() < sigmoid(x * true_b) ? 1.0 : 0.0);
    }
    const Real ridge = 1e-6;
    const ActionStats stats = fit(log_1d(xs, ys), RewardModel::logistic(), ridge);
    const Real oracle_b = testing::logistic_mle_1d(xs, ys, ridge);
    CHECK(std::abs(stats.b_hat[0] - oracle_b) < 1e-3);
  }
}

TEST_CASE("linear fits match direct normal equations on random data") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(3));
    const Index n = d + static_cast<Index>(rng.below(12));
    const Real sigma = 0.5 + rng.uniform01();
    ObservationLog log(d);
    Mat x(n, d);
    Vec y(n);
    for (Index i = 0; i < n; ++i) {
      const Vec xi = rng.uniform_vec(d, -1.0, 1.0);
      x.row(i) = xi.transpose();
      y[i] = rng.normal();
      log.append(xi, y[i]);
    }
    const ActionStats stats = fit(log, RewardModel::linear_gaussian(sigma), 0.0);
    const Mat gram = x.transpose() * x / (sigma * sigma);
    const Vec moment = x.transpose() * y / (sigma * sigma);
    const Vec direct = gram.ldlt().solve(moment);
    CHECK((stats.b_hat - direct).norm() <= 1e-10 * (1.0 + direct.norm()));
    CHECK((stats.g_hat - gram).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hessians are symmetric positive semidefinite") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(3));
    ObservationLog log(d);
    const int n = static_cast<int>(rng.below(10));
    for (int i = 0; i < n; ++i)
      log.append(rng.uniform_vec(d, -1.0, 1.0), rng.uniform01() < 0.5 ? 0.0 : 1.0);
    const ActionStats stats = fit(log, RewardModel::logistic(), 1e-6);
    CHECK((stats.g_hat - stats.g_hat.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(stats.g_hat);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("appending an observation adds exactly one rank-one term") {
  Rng rng(41);
  const Real sigma = 0.8;
  const RewardModel model = RewardModel::linear_gaussian(sigma);
  ObservationLog log(2);
  log.append(rng.uniform_vec(2, -1.0, 1.0), rng.normal());
  const Mat xtx_before = log.xtx();
  const Mat before = fit(log, model, 0.0).g_hat;
  const Vec x = rng.uniform_vec(2, -1.0, 1.0);
  log.append(x, rng.normal());
  // The sufficient statistic accumulates the rank-one term bitwise.
  CHECK(log.xtx() == Mat(xtx_before + x * x.transpose()));
  const Mat after = fit(log, model, 0.0).g_hat;
  const Mat expect = before + x * x.transpose() / (sigma * sigma);
  CHECK((after - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

#pragma once

#include <functional>
#include <vector>

#include "dts/model.hpp"
#include "dts/types.hpp"

namespace dts {

struct Observation {
  Vec x;
  Real y;
};

// Per-action (or shared feature-map) reward history with running sufficient
// statistics for the linear-Gaussian closed form.
class ObservationLog {
 public:
  explicit ObservationLog(Index d);

  void append(const Vec& x, Real y);
  const std::vector<Observation>& items() const { return items_; }
  Index count() const { return static_cast<Index>(items_.size()); }
  Index dim() const { return d_; }
  const Mat& xtx() const { return xtx_; }
  const Vec& xty() const { return xty_; }

 private:
  Index d_;
  std::vector<Observation> items_;
  Mat xtx_;  // sum x x^T, unscaled
  Vec xty_;  // sum x y, unscaled
};

struct ActionStats {
  Vec b_hat;   // MLE of the reward parameter
  Mat g_hat;   // Hessian of the negative log-likelihood at b_hat
  Index count = 0;
  bool converged = true;

  static ActionStats empty(Index d);
};

// Loss oracle fills (loss, grad, hess) at theta.
using LossOracle = std::function<void(const Vec& theta, Real& loss, Vec& grad, Mat& hess)>;

struct NewtonResult {
  Vec point;
  bool converged = false;
  int iterations = 0;
};

// Damped Newton: step-halving until the loss decreases; singular Hessians get
// a 1e-8 diagonal bump and another try.
NewtonResult newton_solve(const LossOracle& oracle, Vec init, Real tol = 1e-8,
                          int max_iter = 100);

// Linear-Gaussian: B solves (X^T X / s^2 + ridge I) B = X^T y / s^2 and
// G = X^T X / s^2 (ridge never enters G). Logistic: penalized MLE via Newton,
// G is the unpenalized Hessian at the MLE. Empty log returns zeros.
ActionStats fit(const ObservationLog& log, const RewardModel& model, Real ridge);

// Defaults used by the agents: exact normal equations for linear-Gaussian
// (LDLT handles the underdetermined early rounds), small ridge for logistic
// where separable data has no finite MLE.
inline Real default_ridge(const RewardModel& model) {
  return model.kind == RewardModel::Kind::kLogistic ? 1e-6 : 0.0;
}

}  // namespace dts

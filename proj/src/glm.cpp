#include "dts/glm.hpp"

#include <cmath>
#include <stdexcept>

namespace dts {

ObservationLog::ObservationLog(Index d)
    : d_(d), xtx_(Mat::Zero(d, d)), xty_(Vec::Zero(d)) {
  if (d < 1) throw std::invalid_argument("observation log needs positive dimension");
}

void ObservationLog::append(const Vec& x, Real y) {
  if (x.size() != d_) throw std::invalid_argument("observation dimension mismatch");
  if (!x.allFinite() || !std::isfinite(y))
    throw std::invalid_argument("non-finite observation");
  items_.push_back({x, y});
  xtx_ += x * x.transpose();
  xty_ += x * y;
}

ActionStats ActionStats::empty(Index d) {
  ActionStats s;
  s.b_hat = Vec::Zero(d);
  s.g_hat = Mat::Zero(d, d);
  return s;
}

NewtonResult newton_solve(const LossOracle& oracle, Vec init, Real tol, int max_iter) {
  if (tol <= 0) throw std::invalid_argument("newton tolerance must be positive");
  const Index d = init.size();
  NewtonResult result;
  result.point = std::move(init);

  Real loss;
  Vec grad(d);
  Mat hess(d, d);
  oracle(result.point, loss, grad, hess);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (grad.norm() <= tol) {
      result.converged = true;
      return result;
    }
    Eigen::LLT<Mat> llt(hess);
    for (int bump = 0; llt.info() != Eigen::Success && bump < 8; ++bump) {
      hess += 1e-8 * Mat::Identity(d, d);
      llt.compute(hess);
    }
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("newton_solve: Hessian not factorizable");
    const Vec direction = llt.solve(grad);

    Real step = 1.0;
    Vec candidate;
    Real cand_loss;
    Vec cand_grad(d);
    Mat cand_hess(d, d);
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      candidate = result.point - step * direction;
      oracle(candidate, cand_loss, cand_grad, cand_hess);
      if (cand_loss <= loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent even at the smallest step: report the best iterate so far.
      result.iterations = iter + 1;
      return result;
    }
    result.point = candidate;
    loss = cand_loss;
    grad = cand_grad;
    hess = cand_hess;
    result.iterations = iter + 1;
  }
  result.converged = grad.norm() <= tol;
  return result;
}

namespace {

ActionStats fit_linear(const ObservationLog& log, Real sigma, Real ridge) {
  const Index d = log.dim();
  const Real inv_s2 = 1.0 / (sigma * sigma);
  ActionStats stats;
  stats.count = log.count();
  stats.g_hat = log.xtx() * inv_s2;
  Mat lhs = stats.g_hat + ridge * Mat::Identity(d, d);
  // LDLT: pivoted, solves the (consistent) normal equations even while the
  // design is rank-deficient in the first rounds.
  stats.b_hat = lhs.ldlt().solve(log.xty() * inv_s2);
  stats.converged = true;
  return stats;
}

ActionStats fit_logistic(const ObservationLog& log, Real ridge) {
  const Index d = log.dim();
  const auto& items = log.items();
  LossOracle oracle = [&items, ridge, d](const Vec& theta, Real& loss, Vec& grad, Mat& hess) {
    loss = 0.5 * ridge * theta.squaredNorm();
    grad = ridge * theta;
    hess = ridge * Mat::Identity(d, d);
    for (const auto& obs : items) {
      const Real u = obs.x.dot(theta);
      // -log p(y|u) = log(1 + e^u) - y u, evaluated stably.
      loss += (u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u))) - obs.y * u;
      const Real p = sigmoid(u);
      grad += (p - obs.y) * obs.x;
      hess += p * (1.0 - p) * obs.x * obs.x.transpose();
    }
  };

  NewtonResult newton = newton_solve(oracle, Vec::Zero(d));
  ActionStats stats;
  stats.count = log.count();
  stats.b_hat = newton.point;
  stats.converged = newton.converged;
  stats.g_hat = Mat::Zero(d, d);
  for (const auto& obs : items) {
    const Real p = sigmoid(obs.x.dot(stats.b_hat));
    stats.g_hat += p * (1.0 - p) * obs.x * obs.x.transpose();
  }
  return stats;
}

}  // namespace

ActionStats fit(const ObservationLog& log, const RewardModel& model, Real ridge) {
  if (ridge < 0) throw std::invalid_argument("ridge must be non-negative");
  if (log.count() == 0) return ActionStats::empty(log.dim());
  if (model.kind == RewardModel::Kind::kLinearGaussian)
    return fit_linear(log, model.sigma, ridge);
  for (const auto& obs : log.items())
    if (obs.y != 0.0 && obs.y != 1.0)
      throw std::invalid_argument("logistic rewards must be 0 or 1");
  return fit_logistic(log, ridge);
}

}  // namespace dts

#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dts/model.hpp"

namespace dts {

struct TrainConfig {
  int L = 40;
  Index hidden = 64;
  Real lr = 1e-3;
  int epochs = 20000;
  Index batch = 2048;  // effective batch is min(batch, sample count)
  Real beta_min = 1e-4;
  Real beta_max = 0.2;
  std::uint64_t seed = 0;
};

// Linear beta interpolation; L=1 uses beta_min alone.
NoiseSchedule make_schedule(int L, Real beta_min, Real beta_max);

// Closed-form jump x_l = sqrt(abar_l) x0 + sqrt(1-abar_l) eps; returns (x_l, eps).
std::pair<Vec, Vec> forward_noise(const Vec& x0, int level, const NoiseSchedule& schedule,
                                  Rng& rng);

// Standard Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias
// correction; t is the 1-based step count. m and v start at zero.
template <typename T>
void adam_step(T& params, const T& grads, T& m, T& v, Real lr, int t) {
  constexpr Real kBeta1 = 0.9;
  constexpr Real kBeta2 = 0.999;
  constexpr Real kEps = 1e-8;
  m = kBeta1 * m + (1.0 - kBeta1) * grads;
  v = (kBeta2 * v.array() + (1.0 - kBeta2) * grads.array().square()).matrix();
  const Real m_corr = 1.0 - std::pow(kBeta1, t);
  const Real v_corr = 1.0 - std::pow(kBeta2, t);
  params -= (lr * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + kEps)).matrix();
}

struct NetGrads {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
};

// Mean squared residual of the noise prediction over a batch, averaged over
// batch count and output width. Rows of `inputs` are [x_l; l/L], rows of
// `targets` the noise draws to predict. When `grads` is non-null it receives
// the loss gradients with respect to the net parameters.
Real denoiser_loss(const MlpNet& net, const Mat& inputs, const Mat& targets, NetGrads* grads);

struct TrainResult {
  DiffusionPrior prior;
  std::vector<Real> loss;  // per-epoch mean squared noise residual
};

// Denoising training: each batch element gets a random level and noise draw,
// the shared net predicts the noise from [x_l; l/L]. Deterministic given
// (samples, cfg.seed). Rows of `samples` are parameter vectors.
TrainResult train(const Mat& samples, const TrainConfig& cfg);

}  // namespace dts

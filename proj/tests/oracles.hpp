/// Test-only reference implementations: direct conditioning of the full
/// joint Gaussian over (theta_1..theta_K, psi_1..psi_L), plus a
/// derivative-free golden-section solver for 1-d logistic likelihoods.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dts/linalg.hpp"
#include "dts/model.hpp"
#include "dts/rng.hpp"

namespace dts::testing {

// Joint zero-mean Gaussian over z = (theta_1..theta_K, psi_1..psi_L) for a
// fully linear chain, built from first principles (no recursions).
inline Mat joint_prior_cov(const DiffusionPrior& prior, Index K) {
  const Index d = prior.d;
  const int L = prior.L;
  std::vector<Mat> w(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) w[static_cast<std::size_t>(i)] = prior.links[static_cast<std::size_t>(i)].w;

  // cov_psi[i] = Cov(psi_{i+1}), built top down.
  std::vector<Mat> cov_psi(static_cast<std::size_t>(L));
  cov_psi[static_cast<std::size_t>(L - 1)] = prior.top_cov.matrix();
  for (int l = L - 1; l >= 1; --l)
    cov_psi[static_cast<std::size_t>(l - 1)] =
        w[static_cast<std::size_t>(l)] * cov_psi[static_cast<std::size_t>(l)] *
            w[static_cast<std::size_t>(l)].transpose() +
        prior.covs[static_cast<std::size_t>(l)].matrix();

  // chain(l, m) = W_{l+1} ... W_m for 0 <= l <= m (identity when l == m);
  // l = 0 additionally applies W_1, mapping psi_m covariances to theta space.
  const auto chain = [&](int l, int m) {
    Mat acc = Mat::Identity(d, d);
    for (int i = m; i >= l + 1; --i) acc = w[static_cast<std::size_t>(i - 1)] * acc;
    return acc;
  };

  const Index total = (K + L) * d;
  Mat joint = Mat::Zero(total, total);
  const Mat theta_shared = w[0] * cov_psi[0] * w[0].transpose();
  for (Index a = 0; a < K; ++a)
    for (Index b = 0; b < K; ++b) {
      joint.block(a * d, b * d, d, d) = theta_shared;
      if (a == b) joint.block(a * d, b * d, d, d) += prior.covs[0].matrix();
    }
  for (int l = 1; l <= L; ++l)
    for (int m = l; m <= L; ++m) {
      const Mat cross = chain(l, m) * cov_psi[static_cast<std::size_t>(m - 1)];
      joint.block((K + l - 1) * d, (K + m - 1) * d, d, d) = cross;
      joint.block((K + m - 1) * d, (K + l - 1) * d, d, d) = cross.transpose();
    }
  for (int m = 1; m <= L; ++m) {
    const Mat cross = chain(0, m) * cov_psi[static_cast<std::size_t>(m - 1)];
    for (Index a = 0; a < K; ++a) {
      joint.block(a * d, (K + m - 1) * d, d, d) = cross;
      joint.block((K + m - 1) * d, a * d, d, d) = cross.transpose();
    }
  }
  return joint;
}

struct JointPosterior {
  Vec mean;
  Mat cov;
  Index d = 0;
  Index K = 0;
  int L = 0;

  Gaussian action(Index a) const {
    return {Vec(mean.segment(a * d, d)), Covariance(cov.block(a * d, a * d, d, d))};
  }
  // level in 1..L addresses psi_level.
  Gaussian latent(int level) const {
    const Index off = (K + level - 1) * d;
    return {Vec(mean.segment(off, d)), Covariance(cov.block(off, off, d, d))};
  }
};

// Condition z on linear-Gaussian rewards y_t = x_t^T theta_{a_t} + eps.
inline JointPosterior condition_joint(const DiffusionPrior& prior, Index K,
                                      const std::vector<Index>& actions,
                                      const std::vector<Vec>& contexts, const Vec& ys,
                                      Real sigma) {
  const Index d = prior.d;
  const Index T = static_cast<Index>(actions.size());
  const Mat joint = joint_prior_cov(prior, K);
  Mat h = Mat::Zero(T, joint.rows());
  for (Index t = 0; t < T; ++t)
    h.block(t, actions[static_cast<std::size_t>(t)] * d, 1, d) =
        contexts[static_cast<std::size_t>(t)].transpose();
  const Mat jht = joint * h.transpose();
  Mat gram = h * jht;
  gram.diagonal().array() += sigma * sigma;
  const Eigen::LDLT<Mat> ldlt(gram);
  JointPosterior post;
  post.mean = jht * ldlt.solve(ys);
  post.cov = joint - jht * ldlt.solve(jht.transpose());
  post.d = d;
  post.K = K;
  post.L = prior.L;
  return post;
}

// Random fully linear prior with well-conditioned covariances.
inline DiffusionPrior random_linear_prior(Index d, int L, Rng& rng, bool isotropic = false) {
  const auto random_cov = [&](Real scale) {
    if (isotropic) return Covariance::isotropic(d, scale);
    const Mat a = rng.uniform_mat(d, d, -1.0, 1.0);
    return Covariance(Mat(a * a.transpose() / static_cast<Real>(d) +
                          scale * Mat::Identity(d, d)));
  };
  DiffusionPrior prior;
  prior.d = d;
  prior.L = L;
  for (int l = 1; l <= L; ++l) {
    prior.links.push_back(LinkFn::linear(rng.uniform_mat(d, d, -1.0, 1.0), l, L));
    prior.covs.push_back(random_cov(0.5 + rng.uniform01()));
  }
  prior.top_cov = random_cov(0.5 + rng.uniform01());
  prior.validate();
  return prior;
}

// Random prior satisfying the information-gain theory's normalizations:
// isotropic covariances and mixing matrices with unit spectral norm. Pair
// with unit-norm contexts.
inline DiffusionPrior random_normalized_prior(Index d, int L, Rng& rng) {
  DiffusionPrior prior;
  prior.d = d;
  prior.L = L;
  for (int l = 1; l <= L; ++l) {
    Mat w = rng.uniform_mat(d, d, -1.0, 1.0);
    Eigen::JacobiSVD<Mat> svd(w);
    w /= svd.singularValues().maxCoeff();
    prior.links.push_back(LinkFn::linear(w, l, L));
    prior.covs.push_back(Covariance::isotropic(d, 0.3 + rng.uniform01()));
  }
  prior.top_cov = Covariance::isotropic(d, 0.3 + rng.uniform01());
  prior.validate();
  return prior;
}

// Golden-section minimizer for unimodal scalar functions.
inline Real golden_min(const std::function<Real(Real)>& f, Real lo, Real hi,
                       int iters = 200) {
  const Real phi = 0.5 * (std::sqrt(5.0) - 1.0);
  Real a = lo, b = hi;
  Real c = b - phi * (b - a);
  Real d = a + phi * (b - a);
  Real fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Penalized negative log-likelihood of a 1-d logistic model.
inline Real logistic_nll_1d(const std::vector<Real>& xs, const std::vector<Real>& ys, Real b,
                            Real ridge) {
  Real loss = 0.5 * ridge * b * b;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Real u = xs[i] * b;
    // log(1 + exp(u)) - y u, computed stably.
    loss += (u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u))) - ys[i] * u;
  }
  return loss;
}

inline Real logistic_mle_1d(const std::vector<Real>& xs, const std::vector<Real>& ys,
                            Real ridge) {
  return golden_min([&](Real b) { return logistic_nll_1d(xs, ys, b, ridge); }, -60.0, 60.0);
}

}  // namespace dts::testing

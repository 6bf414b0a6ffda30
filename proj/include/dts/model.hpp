#pragma once

#include <vector>

#include "dts/linalg.hpp"
#include "dts/rng.hpp"
#include "dts/types.hpp"

namespace dts {

// Fully connected 2-layer net, rectifier hidden activation. Inputs carry the
// diffusion step as a trailing scalar feature (level/L).
struct MlpNet {
  Mat w1;  // h x in
  Vec b1;  // h
  Mat w2;  // out x h
  Vec b2;  // out

  Index in_dim() const { return w1.cols(); }
  Index hidden() const { return w1.rows(); }
  Index out_dim() const { return w2.rows(); }

  Vec apply(const Vec& input) const;
  // Rows are samples; returns rows of outputs.
  Mat apply_batch(const Mat& inputs) const;
};

// Weight init: uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)].
MlpNet make_mlp(Index in, Index hidden, Index out, Rng& rng);

// Variance schedule beta_l with derived alpha_l = 1 - beta_l and
// alpha_bar_l = prod_{i<=l} alpha_i.
struct NoiseSchedule {
  std::vector<Real> beta;
  std::vector<Real> alpha;
  std::vector<Real> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }
  // Reverse-process variance beta-tilde_l = beta_l (1-abar_{l-1})/(1-abar_l),
  // with beta-tilde_1 = beta_1. Levels are 1-based.
  Real beta_tilde(int level) const;
};

struct LinkFn {
  enum class Kind { kLinear, kMlpDirect, kDdpmEps };

  Kind kind = Kind::kLinear;
  int level = 1;         // l in 1..L, the level this link serves
  int levels_total = 1;  // L, for the step feature
  Mat w;                 // kLinear
  MlpNet net;            // kMlpDirect, kDdpmEps
  Real alpha = 1.0;      // kDdpmEps: alpha_l
  Real alpha_bar = 1.0;  // kDdpmEps: alpha-bar_l
  Real beta = 0.0;       // kDdpmEps: beta_l

  static LinkFn linear(Mat w, int level, int levels_total);
  static LinkFn mlp_direct(MlpNet net, int level, int levels_total);
  static LinkFn ddpm_eps(MlpNet net, const NoiseSchedule& schedule, int level);
};

// f_l(psi). Linear: W psi. MlpDirect: net([psi; l/L]). DdpmEps: the reverse
// mean (psi - beta_l/sqrt(1-abar_l) * eps(psi, l)) / sqrt(alpha_l).
Vec link_apply(const LinkFn& link, const Vec& psi);

// The chain psi_L -> ... -> psi_1 -> theta_a. links[i] is f_{i+1} and
// covs[i] is Sigma_{i+1}; top_cov is Sigma_{L+1}.
struct DiffusionPrior {
  Index d = 0;
  int L = 0;
  std::vector<LinkFn> links;
  std::vector<Covariance> covs;
  Covariance top_cov;

  bool linear() const;
  void validate() const;
};

struct PriorDraw {
  std::vector<Vec> latents;  // latents[i] = psi_{i+1}
  Mat thetas;                // K x d
};

// psi_L ~ N(0, Sigma_{L+1}); psi_{l-1} ~ N(f_l(psi_l), Sigma_l);
// theta_a ~ N(f_1(psi_1), Sigma_1) independently for each action.
PriorDraw prior_sample(const DiffusionPrior& prior, Index K, Rng& rng);

struct RewardModel {
  enum class Kind { kLinearGaussian, kLogistic };

  Kind kind = Kind::kLinearGaussian;
  Real sigma = 1.0;  // kLinearGaussian noise std

  static RewardModel linear_gaussian(Real sigma);
  static RewardModel logistic();
  // Mean function g: identity for linear-Gaussian, sigmoid for logistic.
  Real mean(Real u) const;
};

Real sigmoid(Real u);

Real expected_reward(const RewardModel& model, const Vec& x, const Vec& theta);
Real reward_sample(const RewardModel& model, const Vec& x, const Vec& theta, Rng& rng);

struct ContextSampler {
  enum class Kind { kUniformCube, kUnitSphere, kFixed, kPool };

  Kind kind = Kind::kUniformCube;
  Index d = 0;
  Vec fixed;  // kFixed
  Mat pool;   // kPool: rows are candidate contexts

  static ContextSampler uniform_cube(Index d);
  static ContextSampler unit_sphere(Index d);
  static ContextSampler fixed_at(Vec x);
  static ContextSampler from_pool(Mat rows);

  Vec sample(Rng& rng) const;
};

struct BanditInstance {
  Mat thetas;  // K x d (1 x d in shared-parameter mode)
  RewardModel reward;
  ContextSampler contexts;
  Index K = 0;
  Index d = 0;
  int n = 0;  // horizon hint, set by the harness
  bool shared = false;
  std::vector<Vec> true_latents;  // diagnostics: the psi draw behind thetas
};

}  // namespace dts

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dts/posterior.hpp"

namespace dts {

struct Decision {
  Index action = 0;
  Vec scores;   // per-action scores the argmax ran over
  Mat sampled;  // sampled/optimistic parameters behind the scores (may be empty)
};

// Ties break toward the lowest index.
Index argmax_lowest(const Vec& scores);

class Agent {
 public:
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  virtual Decision act(const Vec& x, Rng& rng) = 0;
  virtual void update(const Vec& x, Index a, Real y) = 0;
  const std::string& name() const { return name_; }

 protected:
  explicit Agent(std::string name) : name_(std::move(name)) {}

 private:
  std::string name_;
};

// phi(x, a) for the shared-parameter variant.
using FeatureMap = std::function<Vec(const Vec& x, Index a)>;

// Thompson sampling over the hierarchical posterior chain. Per-action stats
// are refit only for the action that received an observation; the latent
// levels are reassembled from all factors every round.
class DtsAgent : public Agent {
 public:
  DtsAgent(std::string name, DiffusionPrior prior, RewardModel reward, Index K, ChainMode mode);
  // Shared-parameter variant: one log over phi(x, a) observations.
  DtsAgent(std::string name, DiffusionPrior prior, RewardModel reward, Index K, FeatureMap phi);

  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec& x, Index a, Real y) override;

  const PosteriorChain& chain() const { return chain_; }
  const ActionStats& stats(Index a) const { return stats_[a]; }

 private:
  DiffusionPrior prior_;
  RewardModel reward_;
  Index K_;
  FeatureMap phi_;  // empty unless shared
  std::vector<ObservationLog> logs_;
  std::vector<ActionStats> stats_;
  PosteriorChain chain_;
};

// Per-action Bayesian linear regression with prior N(0, prior_cov); logistic
// rewards are handled with a unit-variance Gaussian pseudo-likelihood.
class LinTsAgent : public Agent {
 public:
  LinTsAgent(std::string name, Covariance prior_cov, RewardModel reward, Index K);

  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec& x, Index a, Real y) override;

  const Gaussian& belief(Index a) const { return beliefs_[a]; }

 private:
  Covariance prior_cov_;
  RewardModel reward_;
  Index K_;
  Real obs_precision_;  // 1/sigma^2 of the (pseudo-)likelihood
  std::vector<Mat> gram_;
  std::vector<Vec> moment_;
  std::vector<Gaussian> beliefs_;
};

// Ridge regression plus width alpha * ||x|| in the inverse design norm.
class LinUcbAgent : public Agent {
 public:
  LinUcbAgent(std::string name, Index d, Index K, Real alpha, Real lambda);

  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec& x, Index a, Real y) override;

 private:
  Index K_;
  Real alpha_;
  std::vector<Mat> design_;      // lambda I + X^T X
  std::vector<Vec> moment_;      // X^T y
  std::vector<Mat> design_inv_;
  std::vector<Vec> estimate_;
};

// GLM UCB: g(x^T B-hat) + alpha ||x|| in (G-hat + lambda I)^-1.
class UcbGlmAgent : public Agent {
 public:
  UcbGlmAgent(std::string name, RewardModel reward, Index d, Index K, Real alpha, Real lambda);

  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec& x, Index a, Real y) override;

 private:
  RewardModel reward_;
  Index K_;
  Real alpha_;
  Real lambda_;
  std::vector<ObservationLog> logs_;
  std::vector<ActionStats> stats_;
  std::vector<Mat> width_inv_;  // (G-hat + lambda I)^-1
};

// Laplace-style TS: theta_a ~ N(B-hat, c (G-hat + lambda I)^-1).
class GlmTsAgent : public Agent {
 public:
  GlmTsAgent(std::string name, RewardModel reward, Index d, Index K, Real c, Real lambda);

  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec& x, Index a, Real y) override;

 private:
  RewardModel reward_;
  Index K_;
  Real c_;
  Real lambda_;
  std::vector<ObservationLog> logs_;
  std::vector<ActionStats> stats_;
  std::vector<Covariance> sample_cov_;
};

// Plays argmax of the true expected reward; regret is exactly zero.
class OracleAgent : public Agent {
 public:
  OracleAgent(std::string name, Mat thetas, RewardModel reward);
  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec&, Index, Real) override {}

 private:
  Mat thetas_;
  RewardModel reward_;
};

class RandomAgent : public Agent {
 public:
  RandomAgent(std::string name, Index K) : Agent(std::move(name)), K_(K) {}
  Decision act(const Vec& x, Rng& rng) override;
  void update(const Vec&, Index, Real) override {}

 private:
  Index K_;
};

// Two-level priors obtained by marginalizing the linear chain: variant 1 piles
// levels 1..L-1 onto the action covariance, variant 2 piles levels 2..L+1 onto
// the top. Both return a one-level linear prior with W_1 = I.
DiffusionPrior derive_hierts_prior(const DiffusionPrior& prior, int variant);

struct AgentOptions {
  Real alpha = 1.0;    // LinUCB / UCB-GLM width
  Real lambda = 1.0;   // LinUCB / UCB-GLM / GlmTS ridge
  Real glmts_c = 1.0;  // GlmTS covariance inflation
  bool lints_marginal_prior = true;
  Real lints_sigma0_sq = 1.0;  // LinTS prior scale when not using the marginal
};

// Names: dts | lints | linucb | hierts1 | hierts2 | glmts | ucbglm | oracle | random.
// `thetas` is required only for oracle.
std::unique_ptr<Agent> make_agent(const std::string& name, const DiffusionPrior& prior,
                                  const RewardModel& reward, Index K, const AgentOptions& opts,
                                  const Mat* thetas = nullptr);

}  // namespace dts

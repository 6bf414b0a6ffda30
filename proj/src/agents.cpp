#include "dts/agents.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "dts/errors.hpp"

namespace dts {

Index argmax_lowest(const Vec& scores) {
  if (scores.size() == 0) throw std::invalid_argument("empty score vector");
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

DtsAgent::DtsAgent(std::string name, DiffusionPrior prior, RewardModel reward, Index K,
                   ChainMode mode)
    : Agent(std::move(name)), prior_(std::move(prior)), reward_(reward), K_(K) {
  if (mode == ChainMode::kSharedParam)
    throw std::invalid_argument("shared mode takes a feature map");
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  prior_.validate();
  logs_.assign(static_cast<std::size_t>(K_), ObservationLog(prior_.d));
  stats_.assign(static_cast<std::size_t>(K_), ActionStats::empty(prior_.d));
  std::vector<ActionFactor> factors;
  factors.reserve(static_cast<std::size_t>(K_));
  for (Index a = 0; a < K_; ++a) factors.push_back(make_action_factor(prior_, stats_[a]));
  chain_ = assemble_chain(prior_, std::move(factors), mode);
}

DtsAgent::DtsAgent(std::string name, DiffusionPrior prior, RewardModel reward, Index K,
                   FeatureMap phi)
    : Agent(std::move(name)), prior_(std::move(prior)), reward_(reward), K_(K),
      phi_(std::move(phi)) {
  if (!phi_) throw std::invalid_argument("shared mode needs a feature map");
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  prior_.validate();
  logs_.assign(1, ObservationLog(prior_.d));
  stats_.assign(1, ActionStats::empty(prior_.d));
  std::vector<ActionFactor> factors;
  factors.push_back(make_action_factor(prior_, stats_[0]));
  chain_ = assemble_chain(prior_, std::move(factors), ChainMode::kSharedParam);
}

Decision DtsAgent::act(const Vec& x, Rng& rng) {
  const PriorDraw draw = hierarchical_sample(chain_, rng);
  Decision decision;
  decision.sampled = draw.thetas;
  decision.scores.resize(K_);
  if (phi_) {
    const Vec theta = draw.thetas.row(0).transpose();
    for (Index a = 0; a < K_; ++a) decision.scores[a] = expected_reward(reward_, phi_(x, a), theta);
  } else {
    for (Index a = 0; a < K_; ++a)
      decision.scores[a] = expected_reward(reward_, x, draw.thetas.row(a).transpose());
  }
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

void DtsAgent::update(const Vec& x, Index a, Real y) {
  if (a < 0 || a >= K_) throw std::out_of_range("action index out of range");
  const std::size_t slot = phi_ ? 0 : static_cast<std::size_t>(a);
  const Vec feat = phi_ ? phi_(x, a) : x;
  logs_[slot].append(feat, y);
  stats_[slot] = fit(logs_[slot], reward_, default_ridge(reward_));
  chain_.actions[slot] = make_action_factor(prior_, stats_[slot]);
  reassemble_levels(chain_);
}

LinTsAgent::LinTsAgent(std::string name, Covariance prior_cov, RewardModel reward, Index K)
    : Agent(std::move(name)), prior_cov_(std::move(prior_cov)), reward_(reward), K_(K) {
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  const Index d = prior_cov_.dim();
  // Logistic rewards get a unit-variance Gaussian pseudo-likelihood.
  obs_precision_ = reward_.kind == RewardModel::Kind::kLinearGaussian
                       ? 1.0 / (reward_.sigma * reward_.sigma)
                       : 1.0;
  gram_.assign(static_cast<std::size_t>(K_), Mat::Zero(d, d));
  moment_.assign(static_cast<std::size_t>(K_), Vec::Zero(d));
  beliefs_.assign(static_cast<std::size_t>(K_), Gaussian{Vec::Zero(d), prior_cov_});
}

Decision LinTsAgent::act(const Vec& x, Rng& rng) {
  Decision decision;
  decision.scores.resize(K_);
  decision.sampled.resize(K_, x.size());
  for (Index a = 0; a < K_; ++a) {
    const Gaussian& belief = beliefs_[static_cast<std::size_t>(a)];
    const Vec theta = mvn_sample(belief.mean, belief.cov, rng);
    decision.sampled.row(a) = theta.transpose();
    decision.scores[a] = expected_reward(reward_, x, theta);
  }
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

void LinTsAgent::update(const Vec& x, Index a, Real y) {
  const auto slot = static_cast<std::size_t>(a);
  gram_[slot] += x * x.transpose();
  moment_[slot] += x * y;
  const Mat precision = prior_cov_.precision() + obs_precision_ * gram_[slot];
  const Mat cov = chol_inverse(precision);
  beliefs_[slot] = {Vec(cov * (obs_precision_ * moment_[slot])), Covariance(cov)};
}

LinUcbAgent::LinUcbAgent(std::string name, Index d, Index K, Real alpha, Real lambda)
    : Agent(std::move(name)), K_(K), alpha_(alpha) {
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  if (lambda <= 0.0) throw std::invalid_argument("ridge must be positive");
  design_.assign(static_cast<std::size_t>(K_), Mat(lambda * Mat::Identity(d, d)));
  moment_.assign(static_cast<std::size_t>(K_), Vec::Zero(d));
  design_inv_.assign(static_cast<std::size_t>(K_), Mat((1.0 / lambda) * Mat::Identity(d, d)));
  estimate_.assign(static_cast<std::size_t>(K_), Vec::Zero(d));
}

Decision LinUcbAgent::act(const Vec& x, Rng&) {
  Decision decision;
  decision.scores.resize(K_);
  for (Index a = 0; a < K_; ++a) {
    const auto slot = static_cast<std::size_t>(a);
    const Real width = std::sqrt(x.dot(design_inv_[slot] * x));
    decision.scores[a] = x.dot(estimate_[slot]) + alpha_ * width;
  }
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

void LinUcbAgent::update(const Vec& x, Index a, Real y) {
  const auto slot = static_cast<std::size_t>(a);
  design_[slot] += x * x.transpose();
  moment_[slot] += x * y;
  design_inv_[slot] = chol_inverse(design_[slot]);
  estimate_[slot] = design_inv_[slot] * moment_[slot];
}

UcbGlmAgent::UcbGlmAgent(std::string name, RewardModel reward, Index d, Index K, Real alpha,
                         Real lambda)
    : Agent(std::move(name)), reward_(reward), K_(K), alpha_(alpha), lambda_(lambda) {
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  if (lambda_ <= 0.0) throw std::invalid_argument("ridge must be positive");
  logs_.assign(static_cast<std::size_t>(K_), ObservationLog(d));
  stats_.assign(static_cast<std::size_t>(K_), ActionStats::empty(d));
  width_inv_.assign(static_cast<std::size_t>(K_), Mat((1.0 / lambda_) * Mat::Identity(d, d)));
}

Decision UcbGlmAgent::act(const Vec& x, Rng&) {
  Decision decision;
  decision.scores.resize(K_);
  for (Index a = 0; a < K_; ++a) {
    const auto slot = static_cast<std::size_t>(a);
    const Real width = std::sqrt(x.dot(width_inv_[slot] * x));
    decision.scores[a] = reward_.mean(x.dot(stats_[slot].b_hat)) + alpha_ * width;
  }
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

void UcbGlmAgent::update(const Vec& x, Index a, Real y) {
  const auto slot = static_cast<std::size_t>(a);
  logs_[slot].append(x, y);
  stats_[slot] = fit(logs_[slot], reward_, default_ridge(reward_));
  const Index d = x.size();
  width_inv_[slot] = chol_inverse(stats_[slot].g_hat + lambda_ * Mat::Identity(d, d));
}

GlmTsAgent::GlmTsAgent(std::string name, RewardModel reward, Index d, Index K, Real c, Real lambda)
    : Agent(std::move(name)), reward_(reward), K_(K), c_(c), lambda_(lambda) {
  if (K_ < 1) throw std::invalid_argument("need at least one action");
  if (lambda_ <= 0.0 || c_ <= 0.0) throw std::invalid_argument("scales must be positive");
  logs_.assign(static_cast<std::size_t>(K_), ObservationLog(d));
  stats_.assign(static_cast<std::size_t>(K_), ActionStats::empty(d));
  sample_cov_.assign(static_cast<std::size_t>(K_), Covariance::isotropic(d, c_ / lambda_));
}

Decision GlmTsAgent::act(const Vec& x, Rng& rng) {
  Decision decision;
  decision.scores.resize(K_);
  decision.sampled.resize(K_, x.size());
  for (Index a = 0; a < K_; ++a) {
    const auto slot = static_cast<std::size_t>(a);
    const Vec theta = mvn_sample(stats_[slot].b_hat, sample_cov_[slot], rng);
    decision.sampled.row(a) = theta.transpose();
    decision.scores[a] = expected_reward(reward_, x, theta);
  }
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

void GlmTsAgent::update(const Vec& x, Index a, Real y) {
  const auto slot = static_cast<std::size_t>(a);
  logs_[slot].append(x, y);
  stats_[slot] = fit(logs_[slot], reward_, default_ridge(reward_));
  const Index d = x.size();
  sample_cov_[slot] =
      Covariance(Mat(c_ * chol_inverse(stats_[slot].g_hat + lambda_ * Mat::Identity(d, d))));
}

OracleAgent::OracleAgent(std::string name, Mat thetas, RewardModel reward)
    : Agent(std::move(name)), thetas_(std::move(thetas)), reward_(reward) {
  if (thetas_.rows() < 1) throw std::invalid_argument("need at least one action");
}

Decision OracleAgent::act(const Vec& x, Rng&) {
  const Index K = thetas_.rows();
  Decision decision;
  decision.scores.resize(K);
  for (Index a = 0; a < K; ++a)
    decision.scores[a] = expected_reward(reward_, x, thetas_.row(a).transpose());
  decision.action = argmax_lowest(decision.scores);
  return decision;
}

Decision RandomAgent::act(const Vec&, Rng& rng) {
  Decision decision;
  decision.action = static_cast<Index>(rng.below(static_cast<std::uint64_t>(K_)));
  return decision;
}

DiffusionPrior derive_hierts_prior(const DiffusionPrior& prior, int variant) {
  if (variant != 1 && variant != 2) throw std::invalid_argument("variant is 1 or 2");
  if (!prior.linear()) throw std::invalid_argument("two-level reduction needs linear links");
  prior.validate();
  const Index d = prior.d;

  Mat action_cov = prior.covs[0].matrix();
  Mat top = Mat::Zero(d, d);
  Mat basis = Mat::Identity(d, d);
  for (int l = 1; l <= prior.L; ++l) {
    basis = basis * prior.links[l - 1].w;  // B_l = W_1 ... W_l
    const Mat& next = l < prior.L ? prior.covs[l].matrix() : prior.top_cov.matrix();
    const Mat term = basis * next * basis.transpose();
    if (variant == 2 || l == prior.L)
      top += term;
    else
      action_cov += term;
  }

  DiffusionPrior flat;
  flat.d = d;
  flat.L = 1;
  flat.links.push_back(LinkFn::linear(Mat::Identity(d, d), 1, 1));
  flat.covs.push_back(Covariance(symmetrized(action_cov)));
  // B_L Sigma_{L+1} B_L^T can be rank-deficient; the jitter only applies when
  // the plain factorization fails, so full-rank cases stay untouched.
  flat.top_cov = Covariance(symmetrized(top), 1e-8);
  return flat;
}

std::unique_ptr<Agent> make_agent(const std::string& name, const DiffusionPrior& prior,
                                  const RewardModel& reward, Index K, const AgentOptions& opts,
                                  const Mat* thetas) {
  const Index d = prior.d;
  if (name == "dts") {
    const ChainMode mode = prior.linear() ? ChainMode::kLinearExact : ChainMode::kNonLinearApprox;
    return std::make_unique<DtsAgent>(name, prior, reward, K, mode);
  }
  if (name == "hierts1" || name == "hierts2") {
    const int variant = name == "hierts1" ? 1 : 2;
    return std::make_unique<DtsAgent>(name, derive_hierts_prior(prior, variant), reward, K,
                                      ChainMode::kLinearExact);
  }
  if (name == "lints") {
    const bool marginal = opts.lints_marginal_prior && prior.linear() &&
                          reward.kind == RewardModel::Kind::kLinearGaussian;
    Covariance prior_cov = marginal ? Covariance(prior_marginal_cov(prior))
                                    : Covariance::isotropic(d, opts.lints_sigma0_sq);
    return std::make_unique<LinTsAgent>(name, std::move(prior_cov), reward, K);
  }
  if (name == "linucb") return std::make_unique<LinUcbAgent>(name, d, K, opts.alpha, opts.lambda);
  if (name == "ucbglm")
    return std::make_unique<UcbGlmAgent>(name, reward, d, K, opts.alpha, opts.lambda);
  if (name == "glmts")
    return std::make_unique<GlmTsAgent>(name, reward, d, K, opts.glmts_c, opts.lambda);
  if (name == "oracle") {
    if (thetas == nullptr) throw ValidationError("oracle agent needs the true parameters");
    return std::make_unique<OracleAgent>(name, *thetas, reward);
  }
  if (name == "random") return std::make_unique<RandomAgent>(name, K);
  throw ValidationError("unknown agent: " + name);
}

}  // namespace dts

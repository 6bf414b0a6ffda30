#pragma once

#include <vector>

#include "dts/glm.hpp"
#include "dts/model.hpp"

namespace dts {

enum class ChainMode { kLinearExact, kNonLinearApprox, kSharedParam };

// Per-action derived quantities. Everything the level recursion and the
// sampler need from action a, so the chain can be reassembled cheaply when
// only one action's stats changed.
struct ActionFactor {
  Covariance sigma_hat;  // conditional posterior covariance of theta_a
  Mat mean_map;          // Sigma-hat Sigma_1^-1; conditional mean is mean_map f1(psi1) + data_term
  Vec data_term;         // Sigma-hat G-hat B-hat
  Mat gain_term;         // Sigma_1^-1 Sigma-hat G-hat, the level-1 precision summand
  bool has_data = false;
};

ActionFactor make_action_factor(const DiffusionPrior& prior, const ActionStats& stats);

// State for latent level l (stored at index l-1): data-side recursion values
// plus the conditional posterior of psi_l given its parent. prior_only marks
// levels no observation has reached; those reuse the prior objects bitwise.
struct LatentLevelState {
  Mat g_bar;
  Vec b_bar;
  Covariance sigma_bar;
  Mat precision;  // parent prior precision + g_bar
  Mat mean_map;   // sigma_bar * parent prior precision
  Vec offset;     // sigma_bar * b_bar
  bool prior_only = true;
};

// Immutable once assembled; borrows the prior it was built from.
struct PosteriorChain {
  ChainMode mode = ChainMode::kLinearExact;
  const DiffusionPrior* prior = nullptr;
  std::vector<LatentLevelState> levels;  // levels[i] describes psi_{i+1}
  std::vector<ActionFactor> actions;     // one entry per action (one total in shared mode)
};

// Rebuilds every per-action factor, then runs the level recursion. LinearExact
// and (with linear links) SharedParam apply the W^T (.) W wrappers; the
// approximate non-linear recursion drops them.
PosteriorChain chain_update(const DiffusionPrior& prior, const std::vector<ActionStats>& stats,
                            ChainMode mode);

// Level recursion only, from prebuilt factors (the agents' hot path; identical
// arithmetic to chain_update).
PosteriorChain assemble_chain(const DiffusionPrior& prior, std::vector<ActionFactor> factors,
                              ChainMode mode);

// Recomputes chain.levels from chain.actions in place (after swapping one
// action's factor); exactly the arithmetic assemble_chain runs.
void reassemble_levels(PosteriorChain& chain);

// K=1 aggregation over feature-map observations.
PosteriorChain shared_chain_update(const DiffusionPrior& prior, const ActionStats& stats);

// N(mu-hat(psi1), Sigma-hat) for action a.
Gaussian action_posterior(const PosteriorChain& chain, Index a, const Vec& psi1);

// N(mu-bar(psi_parent), Sigma-bar) for psi_{level-1}; level = L+1 addresses the
// top posterior of psi_L and ignores psi_parent.
Gaussian latent_posterior(const PosteriorChain& chain, int level, const Vec& psi_parent);

// Top level down to the actions, exactly the sampling side of the policy.
PriorDraw hierarchical_sample(const PosteriorChain& chain, Rng& rng);

// Analytic marginal N(mean, cov) of theta_a with all latents integrated out.
// Linear links only.
Gaussian action_marginal(const PosteriorChain& chain, Index a);

struct DiagnosticCov {
  Covariance sigma_check;       // marginal covariance of theta_a
  std::vector<Mat> projections; // P_{a,l} per level
  Real sigma_max_sq = 0.0;
};

// Sigma-check = Sigma-hat + sum_l P_l Sigma-bar_l P_l^T. Linear links only.
DiagnosticCov marginal_covariance(const PosteriorChain& chain, Index a, Real reward_sigma = 1.0);

// Per-level lambda_min of (next precision - current precision - the
// information-gain lower bound) for the observation (x, a) between two
// consecutive chains. Non-negative (up to roundoff) when the theory applies.
std::vector<Real> info_gain_certificate(const PosteriorChain& chain_t,
                                        const PosteriorChain& chain_next, const Vec& x, Index a,
                                        Real reward_sigma);

// max over levels of 1 + lambda_max(Sigma_l)/sigma^2.
Real sigma_max_sq(const DiffusionPrior& prior, Real reward_sigma);

// Sigma_1 + sum_l B_l Sigma_{l+1} B_l^T with B_l = W_1...W_l. Linear links only.
Mat prior_marginal_cov(const DiffusionPrior& prior);

}  // namespace dts
